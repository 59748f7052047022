#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "irda/common.hpp"
#include "irda/report.hpp"
#include "irda/rng.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path = fs::temp_directory_path() / ("irda_report_" + tag + "_" + std::to_string(counter++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str() const { return path.string(); }
};

void write_text(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    REQUIRE(out.good());
    out << text;
}

void write_summary(const fs::path& p, const std::string& label, const std::string& scenario,
                   std::uint64_t seed, double acc, bool label_key = true) {
    nlohmann::json j;
    if (label_key) {
        j["label"] = label;
    } else {
        j["mode"] = label;
    }
    j["scenario"] = scenario;
    j["seed"] = seed;
    j["final_accuracy"] = acc;
    write_text(p, j.dump());
}

// a dataset shell with chosen negative flags; reporting only touches ids,
// negative flags and the spec's negative_fraction
irda::Dataset flag_dataset(const std::vector<std::size_t>& source_neg,
                           const std::vector<std::size_t>& target_neg, std::size_t n_source,
                           std::size_t n_target, double fraction) {
    irda::Dataset data;
    data.spec.negative_fraction = fraction;
    for (std::size_t i = 0; i < n_source; ++i) {
        irda::Segment s;
        s.id = i;
        s.domain = irda::Domain::Source;
        s.label = 0;
        s.is_negative =
            std::find(source_neg.begin(), source_neg.end(), i) != source_neg.end();
        data.source.push_back(std::move(s));
    }
    std::vector<int> hidden;
    for (std::size_t i = 0; i < n_target; ++i) {
        irda::Segment s;
        s.id = n_source + i;
        s.domain = irda::Domain::Target;
        s.is_negative = std::find(target_neg.begin(), target_neg.end(), n_source + i) !=
                        target_neg.end();
        hidden.push_back(0);
        data.target.push_back(std::move(s));
    }
    data.set_eval_labels(std::move(hidden));
    return data;
}

std::string mask_row(int step, int modality, const char* domain, std::size_t id, int removed) {
    return std::to_string(step) + "," + std::to_string(modality) + "," + domain + "," +
           std::to_string(id) + "," + std::to_string(removed) + ",0.5,1\n";
}

}  // namespace

TEST_CASE("summary collection scans recursively and sorts canonically") {
    TempDir root("collect");
    write_summary(root.path / "adversarial_ir" / "seed_2" / "summary.json", "adversarial_ir",
                  "default", 2, 0.92);
    write_summary(root.path / "adversarial_ir" / "seed_1" / "summary.json", "adversarial_ir",
                  "default", 1, 0.91);
    write_summary(root.path / "deep" / "nest" / "x" / "summary.json", "source_only", "default", 1,
                  0.85, /*label_key=*/false);  // falls back to the mode field
    write_summary(root.path / "custom" / "summary.json", "my_variant", "default", 1, 0.5);
    write_text(root.path / "decoy" / "metrics.csv", "step\n1\n");
    write_text(root.path / "decoy" / "other.json", "{}");

    const std::vector<irda::RunSummary> runs = irda::collect_summaries(root.str());
    REQUIRE(runs.size() == 4);
    CHECK(runs[0].label == "source_only");
    CHECK(runs[1].label == "adversarial_ir");
    CHECK(runs[1].seed == 1);
    CHECK(runs[2].label == "adversarial_ir");
    CHECK(runs[2].seed == 2);
    CHECK(runs[3].label == "my_variant");  // unknown labels sort after the known set
    CHECK(runs[0].final_accuracy == 0.85);
    CHECK(runs[0].scenario == "default");

    CHECK_THROWS_WITH_AS(irda::collect_summaries((root.path / "missing").string()),
                         ("io error: runs directory not found: " + (root.path / "missing").string())
                             .c_str(),
                         irda::IoError);
    write_text(root.path / "broken" / "summary.json", "{nope");
    CHECK_THROWS_AS(irda::collect_summaries(root.str()), irda::IoError);
    fs::remove_all(root.path / "broken");
    write_text(root.path / "gap" / "summary.json", "{\"label\": \"x\"}");
    CHECK_THROWS_AS(irda::collect_summaries(root.str()), irda::IoError);
}

TEST_CASE("summaries aggregate with population deviation") {
    std::vector<irda::RunSummary> runs;
    for (double acc : {0.9, 0.8, 0.7}) runs.push_back({"adversarial_ir", "default", 1, acc});
    runs.push_back({"source_only", "default", 1, 0.5});
    runs.push_back({"source_only", "shifted", 1, 0.4});

    const std::vector<irda::SummaryRow> rows = irda::summarize(runs);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].label == "source_only");
    CHECK(rows[0].scenario == "default");
    CHECK(rows[1].label == "source_only");
    CHECK(rows[1].scenario == "shifted");
    CHECK(rows[2].label == "adversarial_ir");
    CHECK(rows[2].n_seeds == 3);
    CHECK(rows[2].mean_acc == doctest::Approx(0.8).epsilon(1e-12));
    // population deviation of {0.9, 0.8, 0.7}
    CHECK(rows[2].std_acc == doctest::Approx(std::sqrt(2.0 / 300.0)).epsilon(1e-9));

    CHECK_THROWS_WITH_AS(irda::summarize({}), "undefined metric: summarize over zero runs",
                         irda::MetricError);
}

TEST_CASE("summary csv lists one aggregated row per group") {
    std::vector<irda::SummaryRow> rows;
    rows.push_back({"source_only", "default", 0.5, 0.125, 5});
    const std::string csv = irda::summary_csv(rows);
    CHECK(csv == "mode,scenario,mean_acc,std_acc,n_seeds\nsource_only,default,0.5,0.125,5\n");
}

TEST_CASE("summary text grid marks gaps and appends a mean column") {
    std::vector<irda::SummaryRow> rows;
    rows.push_back({"source_only", "a", 0.5, 0.1, 3});
    rows.push_back({"source_only", "b", 0.7, 0.0, 3});
    rows.push_back({"adversarial_ir", "a", 0.9, 0.05, 3});

    const std::string text = irda::summary_text(rows);
    const std::string pad17(17, ' ');
    std::string want;
    want += std::string(14, ' ') + "  a" + pad17 + "  b" + pad17 + "  mean\n";
    want += "source_only     0.5000+-0.1000 (3)  0.7000+-0.0000 (3)  0.6000\n";
    want += "adversarial_ir  0.9000+-0.0500 (3)  -" + pad17 + "  0.9000\n";
    CHECK(text == want);
}

TEST_CASE("selection report joins mask rows against ground truth") {
    const irda::Dataset data = flag_dataset({0, 1}, {8, 9}, 8, 8, 0.25);
    TempDir dir("join");
    std::string csv = "step,modality,domain,segment_id,removed_flag,relevance,reward\n";
    // s0 sees members {0,1,2,3} at six steps; negatives are 0 and 1
    const int s0_removed[6] = {0, 1, 2, 3, 0, 1};
    for (int step = 1; step <= 6; ++step) {
        for (int m = 0; m < 4; ++m) {
            csv += mask_row(step, 0, "source", static_cast<std::size_t>(m),
                            m == s0_removed[step - 1] ? 1 : 0);
        }
        // t1 sees {8, 9, 10, 11}; only step 1 removes anything (a positive)
        for (int m = 8; m < 12; ++m) {
            csv += mask_row(step, 1, "target", static_cast<std::size_t>(m),
                            step == 1 && m == 10 ? 1 : 0);
        }
    }
    write_text(dir.path / "masks.csv", csv);

    const irda::SelectionDiagnostics diag =
        irda::selection_report((dir.path / "masks.csv").string(), data);
    REQUIRE(diag.agents.size() == 2);

    const irda::AgentDiagnostics& s0 = diag.agents[0];
    CHECK(s0.domain == irda::Domain::Source);
    CHECK(s0.modality == 0);
    CHECK(s0.removed == 6);
    CHECK(s0.removed_negative == 4);
    CHECK(s0.negatives_seen == 12);
    CHECK(s0.precision == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
    CHECK(s0.recall == doctest::Approx(4.0 / 12.0).epsilon(1e-12));
    CHECK(s0.baseline == 0.25);
    // six distinct steps split as {1,2} {3,4} {5,6}
    CHECK(s0.third_precision[0] == 1.0);
    CHECK(s0.third_precision[1] == 0.0);
    CHECK(s0.third_precision[2] == 1.0);

    const irda::AgentDiagnostics& t1 = diag.agents[1];
    CHECK(t1.domain == irda::Domain::Target);
    CHECK(t1.modality == 1);
    CHECK(t1.removed == 1);
    CHECK(t1.removed_negative == 0);
    CHECK(t1.precision == 0.0);
    CHECK(t1.recall == 0.0);
    CHECK(t1.third_precision[0] == 0.0);
    CHECK(t1.third_precision[2] == 0.0);
}

TEST_CASE("selection report rejects missing or malformed dumps") {
    const irda::Dataset data = flag_dataset({}, {}, 2, 2, 0.2);
    const std::string missing = (fs::temp_directory_path() / "irda_no_such_masks.csv").string();
    CHECK_THROWS_WITH_AS(
        irda::selection_report(missing, data),
        ("io error: mask dump not found: " + missing + " (run training with dump_masks enabled)")
            .c_str(),
        irda::IoError);

    TempDir dir("bad");
    write_text(dir.path / "empty.csv", "");
    CHECK_THROWS_AS(irda::selection_report((dir.path / "empty.csv").string(), data),
                    irda::IoError);
    write_text(dir.path / "header_only.csv", "step,modality,domain,segment_id,removed_flag\n");
    CHECK_THROWS_AS(irda::selection_report((dir.path / "header_only.csv").string(), data),
                    irda::IoError);
    write_text(dir.path / "bad_header.csv", "time,agent,chosen\n1,s0,0\n");
    CHECK_THROWS_AS(irda::selection_report((dir.path / "bad_header.csv").string(), data),
                    irda::IoError);
    write_text(dir.path / "bad_domain.csv",
               "step,modality,domain,segment_id,removed_flag,relevance,reward\n"
               "1,0,sideways,0,1,0.5,1\n");
    CHECK_THROWS_AS(irda::selection_report((dir.path / "bad_domain.csv").string(), data),
                    irda::IoError);
    write_text(dir.path / "alien.csv",
               "step,modality,domain,segment_id,removed_flag,relevance,reward\n"
               "1,0,source,999,1,0.5,1\n");
    CHECK_THROWS_AS(irda::selection_report((dir.path / "alien.csv").string(), data),
                    irda::IoError);
}

TEST_CASE("random removals land at the negative-fraction baseline") {
    // ids with exactly 30% negatives; coin-flip removals must score close to 0.3
    std::vector<std::size_t> src_neg, tgt_neg;
    for (std::size_t i = 0; i < 500; ++i) {
        if (i % 10 < 3) src_neg.push_back(i);
    }
    const irda::Dataset data = flag_dataset(src_neg, tgt_neg, 500, 1, 0.3);

    TempDir dir("baseline");
    irda::Rng rng(2024);
    std::string csv = "step,modality,domain,segment_id,removed_flag,relevance,reward\n";
    std::size_t removed = 0;
    for (int step = 1; step <= 12; ++step) {
        for (std::size_t i = 0; i < 500; ++i) {
            const bool rm = rng.uniform() < 0.5;
            removed += rm ? 1 : 0;
            csv += mask_row(step, 0, "source", i, rm ? 1 : 0);
        }
    }
    REQUIRE(removed > 2000);
    write_text(dir.path / "masks.csv", csv);

    const irda::SelectionDiagnostics diag =
        irda::selection_report((dir.path / "masks.csv").string(), data);
    REQUIRE(diag.agents.size() == 1);
    CHECK(diag.agents[0].precision == doctest::Approx(0.3).epsilon(0.17));
    CHECK(std::abs(diag.agents[0].precision - 0.3) < 0.05);
}

TEST_CASE("selection csv and text render the diagnostics") {
    irda::SelectionDiagnostics diag;
    irda::AgentDiagnostics a;
    a.domain = irda::Domain::Source;
    a.modality = 0;
    a.removed = 6;
    a.removed_negative = 4;
    a.negatives_seen = 12;
    a.precision = 0.5;
    a.recall = 0.25;
    a.baseline = 0.25;
    a.third_precision[0] = 1.0;
    a.third_precision[1] = 0.0;
    a.third_precision[2] = 0.5;
    diag.agents.push_back(a);

    CHECK(irda::selection_csv(diag) ==
          "domain,modality,removed,removed_negative,negatives_seen,precision,recall,baseline,"
          "precision_third1,precision_third2,precision_third3\n"
          "source,0,6,4,12,0.5,0.25,0.25,1,0,0.5\n");

    CHECK(irda::selection_text(diag) ==
          "agent      precision  recall  baseline  final-third\n"
          "s0-agent   0.5000     0.2500  0.2500    0.5000\n");
}
