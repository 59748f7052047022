#include "irda/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "irda/common.hpp"

namespace irda {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// fixed report order for the known labels; anything else goes after, sorted
int label_rank(const std::string& label) {
    static const char* order[] = {"source_only", "adversarial_only", "adversarial_ir",
                                  "no_mod0_agents", "no_mod1_agents", "no_s_agents",
                                  "no_t_agents", "supervised_target"};
    for (int i = 0; i < static_cast<int>(std::size(order)); ++i) {
        if (label == order[i]) return i;
    }
    return static_cast<int>(std::size(order));
}

bool label_less(const std::string& a, const std::string& b) {
    const int ra = label_rank(a), rb = label_rank(b);
    if (ra != rb) return ra < rb;
    return a < b;
}

}  // namespace

std::vector<RunSummary> collect_summaries(const std::string& runs_dir) {
    namespace fs = std::filesystem;
    if (!fs::exists(runs_dir)) throw IoError("runs directory not found: " + runs_dir);
    std::vector<RunSummary> out;
    for (const auto& entry : fs::recursive_directory_iterator(runs_dir)) {
        if (!entry.is_regular_file() || entry.path().filename() != "summary.json") continue;
        std::ifstream in(entry.path());
        if (!in) throw IoError("cannot open " + entry.path().string());
        json j;
        try {
            in >> j;
        } catch (const json::exception& e) {
            throw IoError(entry.path().string() + " is not valid JSON: " + e.what());
        }
        RunSummary s;
        s.label = j.value("label", j.value("mode", std::string{}));
        s.scenario = j.value("scenario", "default");
        s.seed = j.value("seed", std::uint64_t{0});
        if (!j.contains("final_accuracy")) {
            throw IoError(entry.path().string() + " has no final_accuracy");
        }
        s.final_accuracy = j.at("final_accuracy").get<double>();
        out.push_back(std::move(s));
    }
    std::sort(out.begin(), out.end(), [](const RunSummary& a, const RunSummary& b) {
        if (a.label != b.label) return label_less(a.label, b.label);
        if (a.scenario != b.scenario) return a.scenario < b.scenario;
        return a.seed < b.seed;
    });
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<RunSummary>& runs) {
    if (runs.empty()) throw MetricError("summarize over zero runs");
    std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
    for (const RunSummary& r : runs) {
        groups[{r.label, r.scenario}].push_back(r.final_accuracy);
    }
    std::vector<SummaryRow> rows;
    for (const auto& [key, accs] : groups) {
        SummaryRow row;
        row.label = key.first;
        row.scenario = key.second;
        row.n_seeds = static_cast<int>(accs.size());
        double sum = 0.0;
        for (double a : accs) sum += a;
        row.mean_acc = sum / static_cast<double>(accs.size());
        double ss = 0.0;
        for (double a : accs) ss += (a - row.mean_acc) * (a - row.mean_acc);
        row.std_acc = std::sqrt(ss / static_cast<double>(accs.size()));
        rows.push_back(std::move(row));
    }
    std::sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        if (a.label != b.label) return label_less(a.label, b.label);
        return a.scenario < b.scenario;
    });
    return rows;
}

std::string summary_csv(const std::vector<SummaryRow>& rows) {
    std::ostringstream os;
    os << "mode,scenario,mean_acc,std_acc,n_seeds\n";
    for (const SummaryRow& r : rows) {
        os << r.label << ',' << r.scenario << ',' << fmt(r.mean_acc) << ',' << fmt(r.std_acc)
           << ',' << r.n_seeds << '\n';
    }
    return os.str();
}

std::string summary_text(const std::vector<SummaryRow>& rows) {
    std::vector<std::string> labels, scenarios;
    std::map<std::pair<std::string, std::string>, const SummaryRow*> cells;
    for (const SummaryRow& r : rows) {
        if (std::find(labels.begin(), labels.end(), r.label) == labels.end()) {
            labels.push_back(r.label);
        }
        if (std::find(scenarios.begin(), scenarios.end(), r.scenario) == scenarios.end()) {
            scenarios.push_back(r.scenario);
        }
        cells[{r.label, r.scenario}] = &r;
    }
    std::sort(scenarios.begin(), scenarios.end());

    const std::size_t cell_w = 18;
    std::size_t label_w = 4;
    for (const std::string& l : labels) label_w = std::max(label_w, l.size());

    std::ostringstream os;
    os << std::string(label_w, ' ');
    for (const std::string& s : scenarios) {
        os << "  " << s << std::string(s.size() < cell_w ? cell_w - s.size() : 0, ' ');
    }
    os << "  mean\n";
    for (const std::string& l : labels) {
        os << l << std::string(label_w - l.size(), ' ');
        double sum = 0.0;
        int n = 0;
        for (const std::string& s : scenarios) {
            const auto it = cells.find({l, s});
            std::string cell = "-";
            if (it != cells.end()) {
                cell = fmt4(it->second->mean_acc) + "+-" + fmt4(it->second->std_acc) + " (" +
                       std::to_string(it->second->n_seeds) + ")";
                sum += it->second->mean_acc;
                ++n;
            }
            os << "  " << cell << std::string(cell.size() < cell_w ? cell_w - cell.size() : 0, ' ');
        }
        os << "  " << (n > 0 ? fmt4(sum / n) : std::string("-")) << '\n';
    }
    return os.str();
}

SelectionDiagnostics selection_report(const std::string& masks_csv_path, const Dataset& data) {
    std::ifstream in(masks_csv_path);
    if (!in) {
        throw IoError("mask dump not found: " + masks_csv_path +
                      " (run training with dump_masks enabled)");
    }
    std::unordered_map<std::size_t, bool> negative_by_id;
    for (const Segment& s : data.source) negative_by_id[s.id] = s.is_negative;
    for (const Segment& s : data.target) negative_by_id[s.id] = s.is_negative;

    struct RawRow {
        int step;
        int modality;
        Domain domain;
        std::size_t segment_id;
        bool removed;
    };
    std::vector<RawRow> raw;
    std::set<int> steps;

    std::string line;
    if (!std::getline(in, line)) throw IoError("mask dump is empty: " + masks_csv_path);
    if (line.rfind("step,modality,domain,segment_id", 0) != 0) {
        throw IoError("mask dump has an unexpected header: " + line);
    }
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        RawRow row{};
        std::getline(ss, field, ',');
        row.step = std::stoi(field);
        std::getline(ss, field, ',');
        row.modality = std::stoi(field);
        std::getline(ss, field, ',');
        if (field == "source") {
            row.domain = Domain::Source;
        } else if (field == "target") {
            row.domain = Domain::Target;
        } else {
            throw IoError("mask dump row has unknown domain: " + field);
        }
        std::getline(ss, field, ',');
        row.segment_id = static_cast<std::size_t>(std::stoull(field));
        if (!std::getline(ss, field, ',')) throw IoError("mask dump row is truncated");
        row.removed = field == "1";
        raw.push_back(row);
        steps.insert(row.step);
    }
    if (raw.empty()) throw IoError("mask dump has no data rows: " + masks_csv_path);

    // thirds over the distinct refining steps, in order
    std::vector<int> step_list(steps.begin(), steps.end());
    std::unordered_map<int, int> third_of;
    for (std::size_t i = 0; i < step_list.size(); ++i) {
        third_of[step_list[i]] = static_cast<int>(i * 3 / step_list.size());
    }

    struct Tally {
        std::size_t removed = 0, removed_neg = 0, neg_seen = 0;
        std::size_t t_removed[3] = {}, t_removed_neg[3] = {};
    };
    std::map<std::pair<int, int>, Tally> tallies;  // (domain as int, modality)
    for (const RawRow& row : raw) {
        const auto it = negative_by_id.find(row.segment_id);
        if (it == negative_by_id.end()) {
            throw IoError("mask dump references a segment missing from the dataset: id " +
                          std::to_string(row.segment_id));
        }
        Tally& t = tallies[{row.domain == Domain::Source ? 0 : 1, row.modality}];
        const int third = third_of[row.step];
        if (row.removed) {
            ++t.removed;
            ++t.t_removed[third];
            if (it->second) {
                ++t.removed_neg;
                ++t.t_removed_neg[third];
            }
        }
        if (it->second) ++t.neg_seen;
    }

    SelectionDiagnostics diag;
    for (const auto& [key, t] : tallies) {
        AgentDiagnostics a;
        a.domain = key.first == 0 ? Domain::Source : Domain::Target;
        a.modality = key.second;
        a.removed = t.removed;
        a.removed_negative = t.removed_neg;
        a.negatives_seen = t.neg_seen;
        a.precision = t.removed > 0
                          ? static_cast<double>(t.removed_neg) / static_cast<double>(t.removed)
                          : 0.0;
        a.recall = t.neg_seen > 0
                       ? static_cast<double>(t.removed_neg) / static_cast<double>(t.neg_seen)
                       : 0.0;
        a.baseline = data.spec.negative_fraction;
        for (int i = 0; i < 3; ++i) {
            a.third_precision[i] =
                t.t_removed[i] > 0
                    ? static_cast<double>(t.t_removed_neg[i]) / static_cast<double>(t.t_removed[i])
                    : 0.0;
        }
        diag.agents.push_back(a);
    }
    return diag;
}

std::string selection_csv(const SelectionDiagnostics& diag) {
    std::ostringstream os;
    os << "domain,modality,removed,removed_negative,negatives_seen,precision,recall,baseline,"
          "precision_third1,precision_third2,precision_third3\n";
    for (const AgentDiagnostics& a : diag.agents) {
        os << domain_name(a.domain) << ',' << a.modality << ',' << a.removed << ','
           << a.removed_negative << ',' << a.negatives_seen << ',' << fmt(a.precision) << ','
           << fmt(a.recall) << ',' << fmt(a.baseline) << ',' << fmt(a.third_precision[0]) << ','
           << fmt(a.third_precision[1]) << ',' << fmt(a.third_precision[2]) << '\n';
    }
    return os.str();
}

std::string selection_text(const SelectionDiagnostics& diag) {
    std::ostringstream os;
    os << "agent      precision  recall  baseline  final-third\n";
    for (const AgentDiagnostics& a : diag.agents) {
        std::string tag = std::string(a.domain == Domain::Source ? "s" : "t") +
                          std::to_string(a.modality) + "-agent";
        os << tag << std::string(tag.size() < 11 ? 11 - tag.size() : 1, ' ')
           << fmt4(a.precision) << "     " << fmt4(a.recall) << "  " << fmt4(a.baseline)
           << "    " << fmt4(a.third_precision[2]) << '\n';
    }
    return os.str();
}

}  // namespace irda
