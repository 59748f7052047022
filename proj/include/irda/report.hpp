#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "irda/synth.hpp"

namespace irda {

struct RunSummary {
    std::string label;  // mode name or ablation label
    std::string scenario;
    std::uint64_t seed = 0;
    double final_accuracy = 0.0;
};

// recursive scan for summary.json files under a runs directory
std::vector<RunSummary> collect_summaries(const std::string& runs_dir);

struct SummaryRow {
    std::string label;
    std::string scenario;
    double mean_acc = 0.0;
    double std_acc = 0.0;  // population deviation over seeds
    int n_seeds = 0;
};

// groups by (label, scenario); rows come out in canonical label order
std::vector<SummaryRow> summarize(const std::vector<RunSummary>& runs);

std::string summary_csv(const std::vector<SummaryRow>& rows);
// labels x scenarios grid with a trailing cross-scenario mean column;
// combinations without runs show an explicit gap
std::string summary_text(const std::vector<SummaryRow>& rows);

struct AgentDiagnostics {
    Domain domain = Domain::Source;
    int modality = 0;
    std::size_t removed = 0;
    std::size_t removed_negative = 0;
    std::size_t negatives_seen = 0;
    double precision = 0.0;
    double recall = 0.0;
    double baseline = 0.0;           // negative_fraction of the dataset
    double third_precision[3] = {};  // early / middle / final third of refining steps
};

struct SelectionDiagnostics {
    std::vector<AgentDiagnostics> agents;
};

// Joins a mask dump against the generator's ground-truth negative flags.
// The dump must have been produced with dump_masks on.
SelectionDiagnostics selection_report(const std::string& masks_csv_path, const Dataset& data);

std::string selection_csv(const SelectionDiagnostics& diag);
std::string selection_text(const SelectionDiagnostics& diag);

}  // namespace irda
