#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "heatcast/pipeline.hpp"

namespace heatcast {

/// One row of a per-trial CSV; per-epoch rows share the trial's identity
/// columns. epoch 0 marks a final-only row (no per-epoch curve).
struct TrialRow {
    int trial_id = 0;
    double level = 0;
    std::string product;
    int tau = 0;
    int epoch = 0;
    uint64_t split_seed = 0;
    ConfusionCounts counts;
    double tpr = 0, fpr = 0, mcc = 0;
    double seconds = 0;
    bool transfer = false;
    double rate = 1;
    double train_mcc = 0;
};

/// FNV-1a of a file's bytes; used by report outputs to pin their inputs.
uint64_t file_hash64(const std::string& path);

/// Column layout: trial_id, level, protocol, tau, epoch, split, TP, FP, TN,
/// FN, TPR, FPR, MCC, seconds, transfer, rate, train_mcc.
/// When zero_seconds is set the wall-time column is written as 0 so reruns
/// are byte-identical (timings then live only in the run log).
void write_trial_csv(const std::string& path, std::span<const TrialReport> reports,
                     const std::string& comment_line, bool zero_seconds);

std::vector<TrialRow> read_trial_csv(const std::string& path);

struct SummaryRow {
    std::string product;
    double level = 0;
    int tau = 0;
    bool transfer = false;
    double rate = 1;
    CellStats stats;
};

void write_summary_csv(const std::string& path, std::span<const SummaryRow> rows,
                       const std::string& comment_line);

/// Pure reshaping of per-trial CSVs into table/figure-shaped files:
///   report_protocols.csv   per-(product, level, tau, transfer, rate) scores
///   report_imbalance.csv   MCC statistics per (level, rate)
///   report_epochs.csv      mean train/test MCC per (product, level, epoch)
///   report_tau_mcc.csv     MCC statistics per (level, tau)
///   report_tau_rates.csv   TPR/FPR statistics per (level, tau)
/// Each output's comment line lists every input file with its hash.
void emit_report(const std::vector<std::string>& trial_csvs, const std::string& out_dir,
                 const std::string& comment_line);

}  // namespace heatcast
