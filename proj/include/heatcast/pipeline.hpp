#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "heatcast/archive.hpp"
#include "heatcast/features.hpp"
#include "heatcast/labeling.hpp"
#include "heatcast/metrics.hpp"
#include "heatcast/nn.hpp"
#include "heatcast/optimizer.hpp"

namespace heatcast {

// ---------------------------------------------------------------------------
// Year splits

struct SplitConfig {
    int n_train_years = 90;
    int n_test_years = 10;
    double proportion_tolerance = 0.10;  // relative, on the positive rate
    uint64_t split_seed = 0;
    int max_rejections = 1000;
};

struct YearSplit {
    std::vector<int> train_years;
    std::vector<int> test_years;
    int rejections = 0;
    bool tolerance_met = true;
};

/// Uniform year partition, rejection-resampled until the test positive
/// fraction at the least extreme level matches the train fraction within the
/// relative tolerance. After max_rejections the best draw found is accepted
/// with tolerance_met = false.
YearSplit split_years(const LabelSet& labels, const SplitConfig& cfg);

// ---------------------------------------------------------------------------
// Undersampling

/// The published simplified rate table: 1 / round((1/p - 1) / s), e.g.
/// s = 2 gives 1/10, 1/20, 1/40 for the 5%, 2.5%, 1.25% levels.
/// s <= 0 means no undersampling (rate 1).
double simplified_rate(double p_a, double s_multiplier);

struct UndersampleConfig {
    int level_index = 0;
    double rate = 1.0;
    bool strict = true;  // exact count via seeded shuffle; else Bernoulli
    uint64_t seed = 0;
};

/// Keeps every positive; reduces negatives per the config. Sample ids are
/// flat indices year * season_samples + s. Output is sorted ascending.
std::vector<uint32_t> undersample(const std::vector<uint32_t>& train_ids,
                                  const LabelSet& labels, const UndersampleConfig& cfg);

/// All in-season sample ids of the given years.
std::vector<uint32_t> year_sample_ids(const LabelSet& labels, std::span<const int> years);

// ---------------------------------------------------------------------------
// Training

struct ExperimentData {
    const FeatureSet* features = nullptr;
    const LabelSet* labels = nullptr;
    int n_years = 0;
};

struct TrainSettings {
    Protocol protocol = Protocol::P4_Stacked;
    int level_index = 0;
    int epochs = 10;
    int batch_size = 64;
    int eval_batch_size = 512;
    nn::NetArch arch;
    AmsGradConfig opt;
    uint64_t seed = 0;
    bool eval_per_epoch = true;
};

struct EpochPoint {
    int epoch = 0;
    double train_mcc = 0.0;
    double test_mcc = 0.0;
    ConfusionCounts counts;  // test confusion at this epoch
};

struct TrainOutcome {
    std::unique_ptr<nn::Classifier<float>> model;
    std::vector<EpochPoint> curve;
    ConfusionCounts counts;  // final-epoch test confusion
    Scores scores;           // final-epoch test scores
    double best_test_mcc = 0.0;
    int best_epoch = 0;
};

/// Mini-batch AMSGrad training of one protocol at one level on the given
/// (already undersampled) train ids; per-epoch train/test MCC curve when
/// eval_per_epoch is set. warm_start copies parameters and running stats,
/// optimizer state starts fresh. Every batch is audited against the train
/// years; a test-year sample in a batch is a hard error.
TrainOutcome train_protocol(const ExperimentData& data, const YearSplit& split,
                            const std::vector<uint32_t>& train_ids,
                            const TrainSettings& settings,
                            nn::Classifier<float>* warm_start);

/// Nested-threshold chain: level 0 from scratch, each following level
/// warm-started from the previous level's final network. One split and one
/// undersample seed base serve all levels.
struct ChainSettings {
    std::vector<int> level_indices = {0, 1, 2};
    std::vector<int> epochs = {10, 5, 5};
    double ratio = 2.0;  // undersampling multiplier s; <= 0 disables
    TrainSettings base;
    uint64_t undersample_seed = 0;
};

std::vector<TrainOutcome> transfer_chain(const ExperimentData& data, const YearSplit& split,
                                         const ChainSettings& chain);

/// Eval-mode binary decisions (q > 0.5) over the given sample ids.
std::vector<uint8_t> predict_labels(nn::Classifier<float>& model, const ExperimentData& data,
                                    std::span<const uint32_t> ids, Protocol protocol,
                                    int eval_batch_size = 512);

ConfusionCounts tally(std::span<const uint8_t> decisions, const ExperimentData& data,
                      std::span<const uint32_t> ids, int level_index);

// ---------------------------------------------------------------------------
// Trials

enum class CellMode { Single, LogicalAnd, TransferChain };

struct CellConfig {
    CellMode mode = CellMode::Single;
    Protocol protocol = Protocol::P4_Stacked;
    int level_index = 0;
    double ratio = 2.0;  // undersampling multiplier; <= 0 => no undersampling
    int epochs = 10;
    std::vector<int> chain_levels = {0, 1, 2};
    std::vector<int> chain_epochs = {10, 5, 5};
    int batch_size = 64;
    int eval_batch_size = 512;
    nn::NetArch arch;
    AmsGradConfig opt;
    SplitConfig split;  // split_seed is derived per trial
    // When set, trial 0 writes checkpoint_<product>.hcnn files here.
    std::string checkpoint_dir;
};

struct TrialReport {
    int trial_id = 0;
    std::string product;  // "P1", "P2", "P4", "AND", "chain-L0", ...
    double level = 0.0;
    Protocol protocol = Protocol::P4_Stacked;
    int tau_days = 0;
    bool transfer = false;
    double rate = 1.0;
    ConfusionCounts counts;  // final-epoch test confusion
    double tpr = 0.0, fpr = 0.0, mcc = 0.0;
    double best_mcc = 0.0;
    int best_epoch = 0;
    // Reporting convention: best epoch for from-scratch runs, final epoch for
    // warm-started ones.
    double reported_mcc = 0.0;
    std::vector<EpochPoint> curve;
    double seconds = 0.0;
    uint64_t split_seed = 0;
    int split_rejections = 0;
    std::vector<int> test_years;
};

/// Independent trials of one experiment cell. Each trial derives its split
/// and sampling seeds from (master_seed, trial index) so any trial can be
/// reproduced in isolation. AND mode trains P1 and P2 on the same split and
/// emits P1, P2 and the conjunction as three products per trial; chain mode
/// emits one product per level.
std::vector<TrialReport> run_trials(const ExperimentData& data, const CellConfig& cell,
                                    int n_trials, uint64_t master_seed, int workers = 1);

struct CellStats {
    int n = 0;
    double mean_mcc = 0, std_mcc = 0, median_mcc = 0, maxabsdev_mcc = 0;
    double mean_tpr = 0, std_tpr = 0;
    double mean_fpr = 0, std_fpr = 0;
};

/// Across-trial statistics of one product's reports (population std so a
/// single trial reports zero dispersion). MCC statistics use reported_mcc;
/// rates use the final-epoch values.
CellStats aggregate(std::span<const TrialReport> reports);

/// Reports filtered by product tag.
std::vector<TrialReport> filter_product(std::span<const TrialReport> reports,
                                        const std::string& product);

/// The split seed run_trials derives for one trial of a master seed.
uint64_t trial_split_seed(uint64_t master_seed, int trial);

// ---------------------------------------------------------------------------
// Lead-time sweep

struct TauSweepInput {
    const FieldArchive* archive = nullptr;
    const Climatology* clim_ts = nullptr;
    const Climatology* clim_zg = nullptr;
    const LabelSet* labels = nullptr;
    FeatureConfig feature_base;  // tau_days overridden per sweep point
    int feature_workers = 0;
};

struct TauCellResult {
    int tau_days = 0;
    CellStats stats;
    std::vector<TrialReport> trials;
};

/// Repeats run_trials per lead time with identical non-tau settings.
std::vector<TauCellResult> tau_sweep(const TauSweepInput& input, const CellConfig& cell,
                                     std::span<const int> taus, int n_trials,
                                     uint64_t master_seed, int workers = 1);

}  // namespace heatcast
