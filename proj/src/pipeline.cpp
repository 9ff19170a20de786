#include "heatcast/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <thread>

#include <filesystem>

#include "heatcast/checkpoint.hpp"
#include "heatcast/errors.hpp"
#include "heatcast/rng.hpp"

namespace heatcast {

namespace {

double positive_fraction(const LabelSet& labels, int level, std::span<const int> years) {
    int64_t pos = 0, total = 0;
    for (int y : years) {
        for (int s = 0; s < labels.season_samples; ++s) pos += labels.label(level, y, s);
        total += labels.season_samples;
    }
    return total > 0 ? double(pos) / double(total) : 0.0;
}

}  // namespace

YearSplit split_years(const LabelSet& labels, const SplitConfig& cfg) {
    const int total = labels.n_years;
    if (cfg.n_train_years < 1 || cfg.n_test_years < 1)
        throw ConfigError("split: need at least one train and one test year");
    if (cfg.n_train_years + cfg.n_test_years > total)
        throw ConfigError("split: more split years than dataset years");
    if (labels.thresholds.empty())
        throw ConfigError("split: label set has no levels");
    int64_t dataset_pos = labels.thresholds[0].n_positive;
    if (dataset_pos == 0)
        throw UnsplittableError("split: dataset has no positive samples");

    Rng rng(cfg.split_seed, rng_stream::split);
    std::vector<int> years(static_cast<size_t>(total));
    std::iota(years.begin(), years.end(), 0);

    YearSplit best;
    double best_diff = -1.0;
    for (int attempt = 0; attempt <= cfg.max_rejections; ++attempt) {
        rng.shuffle(years);
        YearSplit cand;
        cand.test_years.assign(years.begin(), years.begin() + cfg.n_test_years);
        cand.train_years.assign(years.begin() + cfg.n_test_years,
                                years.begin() + cfg.n_test_years + cfg.n_train_years);
        std::sort(cand.test_years.begin(), cand.test_years.end());
        std::sort(cand.train_years.begin(), cand.train_years.end());
        cand.rejections = attempt;
        const double f_train = positive_fraction(labels, 0, cand.train_years);
        const double f_test = positive_fraction(labels, 0, cand.test_years);
        const double diff = f_train > 0 ? std::abs(f_test - f_train) / f_train : 1e30;
        if (diff <= cfg.proportion_tolerance) {
            cand.tolerance_met = true;
            return cand;
        }
        if (best_diff < 0 || diff < best_diff) {
            best_diff = diff;
            best = cand;
        }
    }
    best.tolerance_met = false;
    return best;
}

double simplified_rate(double p_a, double s_multiplier) {
    if (s_multiplier <= 0.0) return 1.0;
    const double denom = double(std::llround((1.0 / p_a - 1.0) / s_multiplier));
    return denom <= 1.0 ? 1.0 : 1.0 / denom;
}

std::vector<uint32_t> year_sample_ids(const LabelSet& labels, std::span<const int> years) {
    std::vector<uint32_t> ids;
    ids.reserve(years.size() * size_t(labels.season_samples));
    for (int y : years)
        for (int s = 0; s < labels.season_samples; ++s)
            ids.push_back(uint32_t(labels.index(y, s)));
    return ids;
}

std::vector<uint32_t> undersample(const std::vector<uint32_t>& train_ids,
                                  const LabelSet& labels, const UndersampleConfig& cfg) {
    if (!(cfg.rate > 0.0 && cfg.rate <= 1.0))
        throw ConfigError("undersample: rate must lie in (0, 1]");
    if (cfg.rate == 1.0) return train_ids;

    const std::vector<uint8_t>& z = labels.z[size_t(cfg.level_index)];
    std::vector<uint32_t> positives, negatives;
    for (uint32_t id : train_ids)
        (z[id] ? positives : negatives).push_back(id);

    std::vector<uint32_t> kept = std::move(positives);
    Rng rng(cfg.seed, rng_stream::undersample);
    if (cfg.strict) {
        const size_t keep = size_t(std::llround(cfg.rate * double(negatives.size())));
        rng.shuffle(negatives);
        kept.insert(kept.end(), negatives.begin(), negatives.begin() + keep);
    } else {
        for (uint32_t id : negatives)
            if (rng.uniform() < cfg.rate) kept.push_back(id);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

// ---------------------------------------------------------------------------

namespace {

/// Copies the protocol's channel planes for the given ids into batch form.
void fill_batch(const ExperimentData& data, std::span<const uint32_t> ids,
                Protocol protocol, int level_index, nn::BatchInput<float>& batch,
                std::vector<float>* targets) {
    const FeatureSet& fs = *data.features;
    const size_t plane = size_t(fs.rows) * fs.cols;
    const int n = int(ids.size());

    auto gather = [&](nn::Tensor<float>& dst, int first_channel, int n_channels) {
        dst.resize(n, n_channels, fs.rows, fs.cols);
        for (int i = 0; i < n; ++i) {
            const float* src = fs.sample(int(ids[size_t(i)])) + size_t(first_channel) * plane;
            std::memcpy(dst.sample(i), src, size_t(n_channels) * plane * sizeof(float));
        }
    };

    switch (protocol) {
        case Protocol::P1_Ts: gather(batch.primary, 0, 2); break;
        case Protocol::P2_Zg: gather(batch.primary, 2, 2); break;
        case Protocol::P4_Stacked: gather(batch.primary, 0, 4); break;
        case Protocol::P3_Combined:
            gather(batch.primary, 0, 2);
            gather(batch.secondary, 2, 2);
            break;
    }
    if (targets) {
        const std::vector<uint8_t>& z = data.labels->z[size_t(level_index)];
        targets->resize(size_t(n));
        for (int i = 0; i < n; ++i) (*targets)[size_t(i)] = float(z[ids[size_t(i)]]);
    }
}

std::unique_ptr<nn::Classifier<float>> build_model(Protocol protocol,
                                                   const nn::NetArch& arch,
                                                   uint64_t init_seed) {
    if (protocol == Protocol::P3_Combined) return nn::build_two_tower<float>(arch, init_seed);
    const int channels = protocol_channel_count(protocol);
    return nn::build_default_network<float>(channels, arch, init_seed);
}

std::pair<ConfusionCounts, double> eval_counts_mcc(nn::Classifier<float>& model,
                                                   const ExperimentData& data,
                                                   std::span<const uint32_t> ids,
                                                   Protocol protocol, int level,
                                                   int eval_batch) {
    const std::vector<uint8_t> decisions =
        predict_labels(model, data, ids, protocol, eval_batch);
    const ConfusionCounts counts = tally(decisions, data, ids, level);
    if (counts.positives() == 0 || counts.negatives() == 0) return {counts, 0.0};
    return {counts, score(counts).mcc};
}

}  // namespace

std::vector<uint8_t> predict_labels(nn::Classifier<float>& model, const ExperimentData& data,
                                    std::span<const uint32_t> ids, Protocol protocol,
                                    int eval_batch_size) {
    std::vector<uint8_t> decisions(ids.size());
    nn::BatchInput<float> batch;
    for (size_t at = 0; at < ids.size(); at += size_t(eval_batch_size)) {
        const size_t n = std::min(size_t(eval_batch_size), ids.size() - at);
        fill_batch(data, ids.subspan(at, n), protocol, 0, batch, nullptr);
        const std::vector<float> q = model.forward(batch, false, 0);
        for (size_t i = 0; i < n; ++i) decisions[at + i] = q[i] > 0.5f ? 1 : 0;
    }
    return decisions;
}

ConfusionCounts tally(std::span<const uint8_t> decisions, const ExperimentData& data,
                      std::span<const uint32_t> ids, int level_index) {
    const std::vector<uint8_t>& z = data.labels->z[size_t(level_index)];
    ConfusionCounts c;
    for (size_t i = 0; i < ids.size(); ++i) {
        const bool truth = z[ids[i]] != 0;
        const bool pred = decisions[i] != 0;
        if (truth && pred) ++c.tp;
        else if (!truth && pred) ++c.fp;
        else if (truth && !pred) ++c.fn;
        else ++c.tn;
    }
    return c;
}

TrainOutcome train_protocol(const ExperimentData& data, const YearSplit& split,
                            const std::vector<uint32_t>& train_ids,
                            const TrainSettings& settings,
                            nn::Classifier<float>* warm_start) {
    if (train_ids.empty()) throw InsufficientDataError("train: empty train set");
    nn::NetArch arch = settings.arch;
    arch.input_rows = data.features->rows;
    arch.input_cols = data.features->cols;

    TrainOutcome out;
    out.model = build_model(settings.protocol, arch, seed_fold(settings.seed, rng_stream::init));
    if (warm_start) out.model->copy_parameters_from(*warm_start);

    AmsGrad<float> opt(out.model->params(), settings.opt);

    std::vector<uint8_t> is_train_year(size_t(data.n_years), 0);
    for (int y : split.train_years) is_train_year[size_t(y)] = 1;
    const std::vector<uint32_t> test_ids = year_sample_ids(*data.labels, split.test_years);

    std::vector<uint32_t> order = train_ids;
    nn::BatchInput<float> batch;
    std::vector<float> targets;
    for (int epoch = 1; epoch <= settings.epochs; ++epoch) {
        Rng shuffle_rng(seed_fold(settings.seed, rng_stream::shuffle, uint64_t(epoch)));
        shuffle_rng.shuffle(order);
        int batch_index = 0;
        for (size_t at = 0; at < order.size(); at += size_t(settings.batch_size)) {
            const size_t n = std::min(size_t(settings.batch_size), order.size() - at);
            if (n < 2) break;  // batch statistics need two samples
            const std::span<const uint32_t> ids(order.data() + at, n);
            for (uint32_t id : ids) {
                const int y = int(id) / data.labels->season_samples;
                if (!is_train_year[size_t(y)])
                    throw std::logic_error("train: test-year sample leaked into a batch");
            }
            fill_batch(data, ids, settings.protocol, settings.level_index, batch, &targets);
            out.model->forward(batch, true,
                               seed_fold(settings.seed, rng_stream::dropout,
                                         uint64_t(epoch), uint64_t(batch_index)));
            out.model->backward_bce(targets);
            opt.step(out.model->params(), out.model->grads());
            ++batch_index;
        }
        if (settings.eval_per_epoch) {
            EpochPoint pt;
            pt.epoch = epoch;
            pt.train_mcc = eval_counts_mcc(*out.model, data, train_ids, settings.protocol,
                                           settings.level_index, settings.eval_batch_size)
                               .second;
            const auto [test_counts, test_mcc] =
                eval_counts_mcc(*out.model, data, test_ids, settings.protocol,
                                settings.level_index, settings.eval_batch_size);
            pt.counts = test_counts;
            pt.test_mcc = test_mcc;
            out.curve.push_back(pt);
            if (out.curve.size() == 1 || pt.test_mcc > out.best_test_mcc) {
                out.best_test_mcc = pt.test_mcc;
                out.best_epoch = epoch;
            }
        }
    }

    const std::vector<uint8_t> decisions = predict_labels(
        *out.model, data, test_ids, settings.protocol, settings.eval_batch_size);
    out.counts = tally(decisions, data, test_ids, settings.level_index);
    out.scores = score(out.counts);
    if (settings.epochs == 0 || !settings.eval_per_epoch) {
        out.best_test_mcc = out.scores.mcc;
        out.best_epoch = settings.epochs;
    }
    return out;
}

std::vector<TrainOutcome> transfer_chain(const ExperimentData& data, const YearSplit& split,
                                         const ChainSettings& chain) {
    if (chain.level_indices.empty() || chain.level_indices.size() != chain.epochs.size())
        throw ConfigError("chain: level and epoch lists must align");
    const std::vector<uint32_t> all_train = year_sample_ids(*data.labels, split.train_years);

    std::vector<TrainOutcome> outcomes;
    for (size_t step = 0; step < chain.level_indices.size(); ++step) {
        const int level = chain.level_indices[step];
        const double p_a = data.labels->thresholds[size_t(level)].level;
        UndersampleConfig ucfg;
        ucfg.level_index = level;
        ucfg.rate = simplified_rate(p_a, chain.ratio);
        ucfg.seed = seed_fold(chain.undersample_seed, uint64_t(level));
        const std::vector<uint32_t> train_ids = undersample(all_train, *data.labels, ucfg);

        TrainSettings settings = chain.base;
        settings.level_index = level;
        settings.epochs = chain.epochs[step];
        settings.seed = seed_fold(chain.base.seed, uint64_t(protocol_channel_count(chain.base.protocol)),
                                  uint64_t(level));
        nn::Classifier<float>* warm = step == 0 ? nullptr : outcomes.back().model.get();
        outcomes.push_back(train_protocol(data, split, train_ids, settings, warm));
    }
    return outcomes;
}

// ---------------------------------------------------------------------------

namespace {

TrialReport base_report(const ExperimentData& data, const CellConfig& cell, int trial,
                        const YearSplit& split, uint64_t split_seed) {
    TrialReport r;
    r.trial_id = trial;
    r.tau_days = data.features->tau_days;
    r.split_seed = split_seed;
    r.split_rejections = split.rejections;
    r.test_years = split.test_years;
    return r;
}

void finish_report(TrialReport& r, const TrainOutcome& o, double rate, double level,
                   Protocol protocol, bool transfer) {
    r.level = level;
    r.protocol = protocol;
    r.transfer = transfer;
    r.rate = rate;
    r.counts = o.counts;
    r.tpr = o.scores.tpr;
    r.fpr = o.scores.fpr;
    r.mcc = o.scores.mcc;
    r.best_mcc = o.best_test_mcc;
    r.best_epoch = o.best_epoch;
    r.reported_mcc = transfer ? o.scores.mcc : o.best_test_mcc;
    r.curve = o.curve;
}

std::vector<TrialReport> run_one_trial(const ExperimentData& data, const CellConfig& cell,
                                       int trial, uint64_t master_seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const bool save_models = trial == 0 && !cell.checkpoint_dir.empty();
    auto save_model = [&](nn::Classifier<float>& model, const std::string& product,
                          int epochs) {
        if (!save_models) return;
        std::filesystem::create_directories(cell.checkpoint_dir);
        save_checkpoint(model, uint32_t(epochs), nullptr,
                        (std::filesystem::path(cell.checkpoint_dir) /
                         ("checkpoint_" + product + ".hcnn"))
                            .string());
    };
    SplitConfig scfg = cell.split;
    scfg.split_seed = trial_split_seed(master_seed, trial);
    const YearSplit split = split_years(*data.labels, scfg);
    const std::vector<uint32_t> all_train = year_sample_ids(*data.labels, split.train_years);
    const uint64_t trial_seed = seed_fold(master_seed, uint64_t(trial));

    auto undersampled = [&](int level) {
        const double p_a = data.labels->thresholds[size_t(level)].level;
        UndersampleConfig ucfg;
        ucfg.level_index = level;
        ucfg.rate = simplified_rate(p_a, cell.ratio);
        ucfg.seed = seed_fold(master_seed, rng_stream::undersample, uint64_t(trial),
                              uint64_t(level));
        return std::pair{undersample(all_train, *data.labels, ucfg), ucfg.rate};
    };

    auto settings_for = [&](Protocol protocol, int level, int epochs) {
        TrainSettings s;
        s.protocol = protocol;
        s.level_index = level;
        s.epochs = epochs;
        s.batch_size = cell.batch_size;
        s.eval_batch_size = cell.eval_batch_size;
        s.arch = cell.arch;
        s.opt = cell.opt;
        s.seed = seed_fold(trial_seed, uint64_t(protocol), uint64_t(level));
        return s;
    };

    std::vector<TrialReport> reports;
    const double level_p = data.labels->thresholds[size_t(cell.level_index)].level;

    if (cell.mode == CellMode::Single) {
        auto [ids, rate] = undersampled(cell.level_index);
        const TrainOutcome o = train_protocol(
            data, split, ids, settings_for(cell.protocol, cell.level_index, cell.epochs),
            nullptr);
        TrialReport r = base_report(data, cell, trial, split, scfg.split_seed);
        r.product = protocol_name(cell.protocol);
        finish_report(r, o, rate, level_p, cell.protocol, false);
        save_model(*o.model, r.product, cell.epochs);
        reports.push_back(std::move(r));
    } else if (cell.mode == CellMode::LogicalAnd) {
        auto [ids, rate] = undersampled(cell.level_index);
        const TrainOutcome o1 = train_protocol(
            data, split, ids, settings_for(Protocol::P1_Ts, cell.level_index, cell.epochs),
            nullptr);
        const TrainOutcome o2 = train_protocol(
            data, split, ids, settings_for(Protocol::P2_Zg, cell.level_index, cell.epochs),
            nullptr);

        TrialReport r1 = base_report(data, cell, trial, split, scfg.split_seed);
        r1.product = "P1";
        finish_report(r1, o1, rate, level_p, Protocol::P1_Ts, false);
        save_model(*o1.model, "P1", cell.epochs);
        TrialReport r2 = base_report(data, cell, trial, split, scfg.split_seed);
        r2.product = "P2";
        finish_report(r2, o2, rate, level_p, Protocol::P2_Zg, false);
        save_model(*o2.model, "P2", cell.epochs);

        const std::vector<uint32_t> test_ids =
            year_sample_ids(*data.labels, split.test_years);
        const std::vector<uint8_t> d1 =
            predict_labels(*o1.model, data, test_ids, Protocol::P1_Ts, cell.eval_batch_size);
        const std::vector<uint8_t> d2 =
            predict_labels(*o2.model, data, test_ids, Protocol::P2_Zg, cell.eval_batch_size);
        std::vector<uint8_t> both(d1.size());
        for (size_t i = 0; i < d1.size(); ++i) both[i] = d1[i] && d2[i];

        TrialReport rb = base_report(data, cell, trial, split, scfg.split_seed);
        rb.product = "AND";
        rb.level = level_p;
        rb.protocol = Protocol::P1_Ts;
        rb.rate = rate;
        rb.counts = tally(both, data, test_ids, cell.level_index);
        const Scores sb = score(rb.counts);
        rb.tpr = sb.tpr;
        rb.fpr = sb.fpr;
        rb.mcc = sb.mcc;
        rb.best_mcc = sb.mcc;
        rb.reported_mcc = sb.mcc;
        reports.push_back(std::move(r1));
        reports.push_back(std::move(r2));
        reports.push_back(std::move(rb));
    } else {  // TransferChain
        ChainSettings chain;
        chain.level_indices = cell.chain_levels;
        chain.epochs = cell.chain_epochs;
        chain.ratio = cell.ratio;
        chain.base = settings_for(cell.protocol, cell.chain_levels[0], 0);
        chain.base.seed = trial_seed;
        chain.undersample_seed =
            seed_fold(master_seed, rng_stream::undersample, uint64_t(trial));
        const std::vector<TrainOutcome> outs = transfer_chain(data, split, chain);
        for (size_t step = 0; step < outs.size(); ++step) {
            const int level = cell.chain_levels[step];
            TrialReport r = base_report(data, cell, trial, split, scfg.split_seed);
            r.product = "chain-L" + std::to_string(step);
            const bool transfer = step > 0;
            finish_report(r, outs[step], simplified_rate(
                              data.labels->thresholds[size_t(level)].level, cell.ratio),
                          data.labels->thresholds[size_t(level)].level, cell.protocol,
                          transfer);
            save_model(*outs[step].model, r.product, cell.chain_epochs[step]);
            reports.push_back(std::move(r));
        }
    }

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (TrialReport& r : reports) r.seconds = seconds;
    return reports;
}

}  // namespace

std::vector<TrialReport> run_trials(const ExperimentData& data, const CellConfig& cell,
                                    int n_trials, uint64_t master_seed, int workers) {
    if (n_trials < 1) throw ConfigError("run_trials: n_trials must be >= 1");
    std::vector<std::vector<TrialReport>> per_trial(static_cast<size_t>(n_trials));
    workers = std::clamp(workers, 1, n_trials);
    if (workers == 1) {
        for (int i = 0; i < n_trials; ++i)
            per_trial[size_t(i)] = run_one_trial(data, cell, i, master_seed);
    } else {
        std::atomic<int> next{0};
        auto worker = [&] {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_trials) return;
                per_trial[size_t(i)] = run_one_trial(data, cell, i, master_seed);
            }
        };
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    std::vector<TrialReport> all;
    for (auto& reports : per_trial)
        for (TrialReport& r : reports) all.push_back(std::move(r));
    return all;
}

CellStats aggregate(std::span<const TrialReport> reports) {
    CellStats s;
    s.n = int(reports.size());
    if (reports.empty()) return s;
    std::vector<double> mccs;
    double sum_m = 0, sum_t = 0, sum_f = 0;
    for (const TrialReport& r : reports) {
        mccs.push_back(r.reported_mcc);
        sum_m += r.reported_mcc;
        sum_t += r.tpr;
        sum_f += r.fpr;
    }
    const double n = double(s.n);
    s.mean_mcc = sum_m / n;
    s.mean_tpr = sum_t / n;
    s.mean_fpr = sum_f / n;
    double var_m = 0, var_t = 0, var_f = 0;
    for (const TrialReport& r : reports) {
        var_m += (r.reported_mcc - s.mean_mcc) * (r.reported_mcc - s.mean_mcc);
        var_t += (r.tpr - s.mean_tpr) * (r.tpr - s.mean_tpr);
        var_f += (r.fpr - s.mean_fpr) * (r.fpr - s.mean_fpr);
    }
    s.std_mcc = std::sqrt(var_m / n);
    s.std_tpr = std::sqrt(var_t / n);
    s.std_fpr = std::sqrt(var_f / n);
    std::sort(mccs.begin(), mccs.end());
    s.median_mcc = s.n % 2 ? mccs[size_t(s.n / 2)]
                           : 0.5 * (mccs[size_t(s.n / 2 - 1)] + mccs[size_t(s.n / 2)]);
    for (double m : mccs)
        s.maxabsdev_mcc = std::max(s.maxabsdev_mcc, std::abs(m - s.median_mcc));
    return s;
}

std::vector<TrialReport> filter_product(std::span<const TrialReport> reports,
                                        const std::string& product) {
    std::vector<TrialReport> out;
    for (const TrialReport& r : reports)
        if (r.product == product) out.push_back(r);
    return out;
}

uint64_t trial_split_seed(uint64_t master_seed, int trial) {
    return seed_fold(master_seed, rng_stream::split, uint64_t(trial));
}

std::vector<TauCellResult> tau_sweep(const TauSweepInput& input, const CellConfig& cell,
                                     std::span<const int> taus, int n_trials,
                                     uint64_t master_seed, int workers) {
    std::vector<TauCellResult> results;
    for (int tau : taus) {
        FeatureConfig fcfg = input.feature_base;
        fcfg.tau_days = tau;
        const FeatureSet features =
            build_feature_set(*input.archive, *input.clim_ts, *input.clim_zg, fcfg,
                              *input.labels, input.feature_workers);
        ExperimentData data{&features, input.labels, input.archive->n_years};
        TauCellResult res;
        res.tau_days = tau;
        res.trials = run_trials(data, cell, n_trials, master_seed, workers);
        res.stats = aggregate(res.trials);
        results.push_back(std::move(res));
    }
    return results;
}

}  // namespace heatcast
