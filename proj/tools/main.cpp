#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "irda/common.hpp"
#include "irda/report.hpp"
#include "irda/synth.hpp"
#include "irda/train.hpp"

namespace {

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw irda::IoError("cannot open output file: " + path);
    out << content;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"instance-refined domain-adversarial training on synthetic multi-modal domains"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic source/target dataset");
    std::string gen_spec, gen_out, gen_encoding = "binary";
    std::uint64_t gen_seed = 0;
    gen->add_option("--spec", gen_spec, "domain spec JSON file")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "override the spec seed");
    gen->add_option("--encoding", gen_encoding, "dataset encoding: text or binary")
        ->check(CLI::IsMember({"text", "binary"}));

    // train
    auto* train = app.add_subcommand("train", "run one training configuration");
    std::string train_config, train_data, train_mode, train_out;
    std::uint64_t train_seed = 0;
    train->add_option("--config", train_config, "train config JSON file")->required();
    train->add_option("--data", train_data, "dataset file from gen-data")->required();
    auto* train_mode_opt = train->add_option(
        "--mode", train_mode,
        "override mode: source_only, adversarial_only, adversarial_ir, supervised_target");
    auto* train_seed_opt = train->add_option("--seed", train_seed, "override the config seed");
    train->add_option("--out", train_out, "run output directory (default runs/<scenario>/<label>/seed_<n>)");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the ablation suite over several seeds");
    std::string ab_config, ab_data, ab_out = "runs";
    std::vector<std::uint64_t> ab_seeds;
    ablate->add_option("--config", ab_config, "train config JSON file")->required();
    ablate->add_option("--data", ab_data, "dataset file from gen-data")->required();
    ablate->add_option("--seeds", ab_seeds, "comma-separated run seeds")
        ->required()
        ->delimiter(',');
    ablate->add_option("--out", ab_out, "output root directory");

    // report
    auto* report = app.add_subcommand("report", "aggregate run summaries into tables");
    std::string rep_runs, rep_masks, rep_data;
    report->add_option("--runs", rep_runs, "directory containing run outputs")->required();
    auto* rep_masks_opt =
        report->add_option("--masks", rep_masks, "mask dump CSV for selection diagnostics");
    report->add_option("--data", rep_data, "dataset file, required with --masks");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            irda::DomainSpec spec = irda::DomainSpec::load(gen_spec);
            if (gen_seed_opt->count() > 0) spec.seed = gen_seed;
            const irda::Dataset data = irda::generate(spec);
            std::filesystem::create_directories(gen_out);
            const std::string path = gen_out + "/dataset.dat";
            irda::save_dataset(data, path, gen_encoding);
            std::printf("wrote %s (%zu source, %zu target segments)\n", path.c_str(),
                        data.source.size(), data.target.size());
        } else if (train->parsed()) {
            irda::TrainConfig cfg = irda::TrainConfig::load(train_config);
            if (train_mode_opt->count() > 0) cfg.mode = train_mode;
            if (train_seed_opt->count() > 0) cfg.seed = train_seed;
            cfg.validate();
            const irda::Dataset data = irda::load_dataset(train_data);
            std::string out = train_out;
            if (out.empty()) {
                out = "runs/" + cfg.scenario + "/" + (cfg.label.empty() ? cfg.mode : cfg.label) +
                      "/seed_" + std::to_string(cfg.seed);
            }
            const irda::TrainResult res = irda::train_run(cfg, data, out);
            std::printf("final accuracy %.4f over last evals; outputs in %s\n",
                        res.final_accuracy, out.c_str());
        } else if (ablate->parsed()) {
            const irda::TrainConfig cfg = irda::TrainConfig::load(ab_config);
            const irda::Dataset data = irda::load_dataset(ab_data);
            const auto rows = irda::run_ablation_suite(cfg, data, ab_seeds, ab_out);
            for (const irda::AblationRow& r : rows) {
                std::printf("%-20s seed %llu  accuracy %.4f\n", r.label.c_str(),
                            static_cast<unsigned long long>(r.seed), r.accuracy);
            }
            std::printf("per-run outputs in %s\n", ab_out.c_str());
        } else if (report->parsed()) {
            const auto runs = irda::collect_summaries(rep_runs);
            const auto rows = irda::summarize(runs);
            const std::string csv = irda::summary_csv(rows);
            write_text(rep_runs + "/report.csv", csv);
            std::printf("%s\n", irda::summary_text(rows).c_str());
            if (rep_masks_opt->count() > 0) {
                if (rep_data.empty()) {
                    throw irda::ConfigError("--masks needs --data for ground-truth joins");
                }
                const irda::Dataset data = irda::load_dataset(rep_data);
                const auto diag = irda::selection_report(rep_masks, data);
                write_text(rep_runs + "/selection.csv", irda::selection_csv(diag));
                std::printf("%s", irda::selection_text(diag).c_str());
            }
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
