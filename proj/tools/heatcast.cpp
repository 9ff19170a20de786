#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "heatcast/archive.hpp"
#include "heatcast/checkpoint.hpp"
#include "heatcast/config.hpp"
#include "heatcast/errors.hpp"
#include "heatcast/features.hpp"
#include "heatcast/labeling.hpp"
#include "heatcast/pipeline.hpp"
#include "heatcast/report.hpp"
#include "heatcast/synth.hpp"

namespace fs = std::filesystem;
using namespace heatcast;

namespace {

struct CliOptions {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out_dir = "out";
    int workers = 0;
    bool strict_deterministic = false;
    std::vector<std::string> report_inputs;
    std::string checkpoint_path;
};

Config load_config(const CliOptions& opt) {
    Config cfg = opt.config_path.empty() ? Config::defaults() : Config::from_file(opt.config_path);
    for (const std::string& o : opt.overrides) cfg.apply_override(o);
    return cfg;
}

int effective_workers(const CliOptions& opt) {
    if (opt.strict_deterministic) return 1;
    if (opt.workers > 0) return opt.workers;
    return int(std::max(1u, std::thread::hardware_concurrency()));
}

std::string comment_line(const Config& cfg, const ExperimentSetup& setup) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "config_hash=%016llx master_seed=%llu synth_seed=%llu",
                  static_cast<unsigned long long>(cfg.hash64()),
                  static_cast<unsigned long long>(setup.master_seed),
                  static_cast<unsigned long long>(setup.synth.seed));
    return buf;
}

void append_run_log(const CliOptions& opt, const std::string& verb, double seconds) {
    fs::create_directories(opt.out_dir);
    std::ofstream log(fs::path(opt.out_dir) / "run.log", std::ios::app);
    log << verb << " seconds=" << seconds << "\n";
}

FieldArchive require_archive(const CliOptions& opt, const ExperimentSetup& setup) {
    const fs::path path = fs::path(opt.out_dir) / setup.archive_name;
    if (!fs::exists(path))
        throw DependencyError("archive '" + path.string() +
                              "' not found; run the generate verb first");
    return FieldArchive::load(path.string());
}

LabelSet build_labels(const FieldArchive& archive, const ExperimentSetup& setup,
                      Climatology* clim_ts_out) {
    Climatology clim_ts = compute_climatology(archive, archive.variable_index(kVarTs));
    LabelSet labels = make_labels(archive, clim_ts, setup.heatwave);
    if (clim_ts_out) *clim_ts_out = std::move(clim_ts);
    return labels;
}

CellConfig cell_from_setup(const ExperimentSetup& setup) {
    CellConfig cell;
    if (setup.train_mode == "AND") {
        cell.mode = CellMode::LogicalAnd;
        cell.protocol = Protocol::P1_Ts;
    } else if (setup.train_mode == "CHAIN") {
        cell.mode = CellMode::TransferChain;
        cell.protocol = Protocol::P4_Stacked;
        cell.chain_levels.resize(setup.chain_epochs.size());
        for (size_t i = 0; i < setup.chain_epochs.size(); ++i)
            cell.chain_levels[i] = int(i);
        cell.chain_epochs = setup.chain_epochs;
    } else {
        cell.mode = CellMode::Single;
        cell.protocol = protocol_from_name(setup.train_mode);
    }
    cell.level_index = setup.level_index;
    cell.ratio = setup.ratio;
    cell.epochs = setup.epochs;
    cell.arch = setup.arch;
    cell.opt = setup.opt;
    cell.split = setup.split;
    return cell;
}

int verb_validate(const CliOptions& opt) {
    const Config cfg = load_config(opt);
    const std::vector<std::string> errors = cfg.validate();
    if (!errors.empty()) {
        std::cerr << "configuration invalid:\n";
        for (const std::string& e : errors) std::cerr << "  " << e << "\n";
        return 1;
    }
    std::cout << cfg.normalized();
    return 0;
}

int verb_generate(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    const SynthOutput out = generate(setup.synth, setup.n_years, effective_workers(opt));
    fs::create_directories(opt.out_dir);
    const fs::path apath = fs::path(opt.out_dir) / setup.archive_name;
    const fs::path opath = fs::path(opt.out_dir) / setup.oracle_name;
    out.archive.save(apath.string());
    out.oracle.save(opath.string());
    append_run_log(opt, "generate",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "wrote " << apath.string() << " (" << setup.n_years << " years, "
              << out.archive.spec.samples_per_year() << " samples/year) and "
              << opath.string() << "\n";
    return 0;
}

int verb_label(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    const FieldArchive archive = require_archive(opt, setup);
    const LabelSet labels = build_labels(archive, setup, nullptr);
    const fs::path dir = fs::path(opt.out_dir) / "labels";
    write_labels(labels, dir.string(), comment_line(cfg, setup));
    append_run_log(opt, "label",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (const LevelThreshold& th : labels.thresholds)
        std::cout << "level " << th.level * 100 << "%: a = " << th.a_kelvin << " K, "
                  << th.n_positive << "/" << th.n_total << " positive"
                  << (th.degenerate ? " (degenerate ties)" : "") << "\n";
    std::cout << "wrote " << dir.string() << "\n";
    return 0;
}

int verb_features(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    const FieldArchive archive = require_archive(opt, setup);
    Climatology clim_ts;
    const LabelSet labels = build_labels(archive, setup, &clim_ts);
    const Climatology clim_zg = compute_climatology(archive, archive.variable_index(kVarZg));
    const FeatureSet features = build_feature_set(archive, clim_ts, clim_zg, setup.features,
                                                  labels, effective_workers(opt));
    const fs::path bin = fs::path(opt.out_dir) / "features.bin";
    const fs::path csv = fs::path(opt.out_dir) / "features.csv";
    dump_features(features, labels, setup.dump_level_index, bin.string(), csv.string(),
                  comment_line(cfg, setup));
    append_run_log(opt, "features",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "wrote " << bin.string() << " (" << features.n << " samples, "
              << features.rows << "x" << features.cols << "x4)\n";
    return 0;
}

int verb_train(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    const FieldArchive archive = require_archive(opt, setup);
    Climatology clim_ts;
    const LabelSet labels = build_labels(archive, setup, &clim_ts);
    const Climatology clim_zg = compute_climatology(archive, archive.variable_index(kVarZg));
    const FeatureSet features = build_feature_set(archive, clim_ts, clim_zg, setup.features,
                                                  labels, effective_workers(opt));
    const ExperimentData data{&features, &labels, archive.n_years};

    CellConfig cell = cell_from_setup(setup);
    cell.checkpoint_dir = opt.out_dir;
    const std::vector<TrialReport> reports =
        run_trials(data, cell, setup.n_trials, setup.master_seed, effective_workers(opt));

    char tag[96];
    std::snprintf(tag, sizeof(tag), "trials_%s_L%d_tau%d.csv", setup.train_mode.c_str(),
                  setup.level_index, setup.features.tau_days);
    const fs::path trial_path = fs::path(opt.out_dir) / tag;
    write_trial_csv(trial_path.string(), reports, comment_line(cfg, setup),
                    opt.strict_deterministic);

    std::map<std::string, std::vector<TrialReport>> by_product;
    for (const TrialReport& r : reports) by_product[r.product].push_back(r);
    std::vector<SummaryRow> rows;
    for (auto& [product, group] : by_product) {
        SummaryRow row;
        row.product = product;
        row.level = group.front().level;
        row.tau = group.front().tau_days;
        row.transfer = group.front().transfer;
        row.rate = group.front().rate;
        row.stats = aggregate(group);
        rows.push_back(std::move(row));
    }
    const fs::path summary_path = fs::path(opt.out_dir) / "summary.csv";
    write_summary_csv(summary_path.string(), rows, comment_line(cfg, setup));

    append_run_log(opt, "train",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (const SummaryRow& row : rows)
        std::cout << row.product << " level " << row.level * 100 << "%: mean MCC "
                  << row.stats.mean_mcc << " (std " << row.stats.std_mcc << "), TPR "
                  << row.stats.mean_tpr << ", FPR " << row.stats.mean_fpr << "\n";
    std::cout << "wrote " << trial_path.string() << " and " << summary_path.string() << "\n";
    return 0;
}

int verb_evaluate(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    if (setup.train_mode == "AND" || setup.train_mode == "CHAIN")
        throw ConfigError("evaluate: set train.protocol to one of P1|P2|P3|P4");
    if (opt.checkpoint_path.empty())
        throw DependencyError("evaluate: pass --checkpoint (produced by the train verb)");
    if (!fs::exists(opt.checkpoint_path))
        throw DependencyError("checkpoint '" + opt.checkpoint_path +
                              "' not found; run the train verb first");

    const FieldArchive archive = require_archive(opt, setup);
    Climatology clim_ts;
    const LabelSet labels = build_labels(archive, setup, &clim_ts);
    const Climatology clim_zg = compute_climatology(archive, archive.variable_index(kVarZg));
    const FeatureSet features = build_feature_set(archive, clim_ts, clim_zg, setup.features,
                                                  labels, effective_workers(opt));
    const ExperimentData data{&features, &labels, archive.n_years};

    const Protocol protocol = protocol_from_name(setup.train_mode);
    nn::NetArch arch = setup.arch;
    arch.input_rows = features.rows;
    arch.input_cols = features.cols;
    std::unique_ptr<nn::Classifier<float>> model =
        protocol == Protocol::P3_Combined
            ? nn::build_two_tower<float>(arch, 0)
            : nn::build_default_network<float>(protocol_channel_count(protocol), arch, 0);
    const CheckpointInfo info = load_checkpoint(*model, nullptr, opt.checkpoint_path);

    SplitConfig scfg = setup.split;
    scfg.split_seed = trial_split_seed(setup.master_seed, 0);
    const YearSplit split = split_years(labels, scfg);
    const std::vector<uint32_t> test_ids = year_sample_ids(labels, split.test_years);
    const std::vector<uint8_t> decisions =
        predict_labels(*model, data, test_ids, protocol, 512);
    const ConfusionCounts counts = tally(decisions, data, test_ids, setup.level_index);
    const Scores s = score(counts);

    append_run_log(opt, "evaluate",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "checkpoint epoch " << info.epoch << " on trial-0 test split: TP=" << counts.tp
              << " FP=" << counts.fp << " TN=" << counts.tn << " FN=" << counts.fn
              << " TPR=" << s.tpr << " FPR=" << s.fpr << " MCC=" << s.mcc << "\n";
    return 0;
}

int verb_sweep(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    const ExperimentSetup setup = materialize(cfg);
    if (setup.train_mode == "AND" || setup.train_mode == "CHAIN")
        throw ConfigError("sweep: set train.protocol to one of P1|P2|P3|P4");
    const FieldArchive archive = require_archive(opt, setup);
    Climatology clim_ts;
    const LabelSet labels = build_labels(archive, setup, &clim_ts);
    const Climatology clim_zg = compute_climatology(archive, archive.variable_index(kVarZg));

    TauSweepInput input;
    input.archive = &archive;
    input.clim_ts = &clim_ts;
    input.clim_zg = &clim_zg;
    input.labels = &labels;
    input.feature_base = setup.features;
    input.feature_workers = effective_workers(opt);

    const CellConfig cell = cell_from_setup(setup);
    const std::vector<TauCellResult> results =
        tau_sweep(input, cell, setup.taus, setup.n_trials, setup.master_seed,
                  effective_workers(opt));

    std::vector<SummaryRow> rows;
    for (const TauCellResult& res : results) {
        char tag[64];
        std::snprintf(tag, sizeof(tag), "trials_tau%d.csv", res.tau_days);
        write_trial_csv((fs::path(opt.out_dir) / tag).string(), res.trials,
                        comment_line(cfg, setup), opt.strict_deterministic);
        SummaryRow row;
        row.product = protocol_name(cell.protocol);
        row.level = res.trials.front().level;
        row.tau = res.tau_days;
        row.transfer = false;
        row.rate = res.trials.front().rate;
        row.stats = res.stats;
        rows.push_back(std::move(row));
    }
    write_summary_csv((fs::path(opt.out_dir) / "sweep_summary.csv").string(), rows,
                      comment_line(cfg, setup));
    append_run_log(opt, "sweep",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (const SummaryRow& row : rows)
        std::cout << "tau " << row.tau << "d: mean MCC " << row.stats.mean_mcc << " (std "
                  << row.stats.std_mcc << "), TPR " << row.stats.mean_tpr << ", FPR "
                  << row.stats.mean_fpr << "\n";
    std::cout << "wrote " << (fs::path(opt.out_dir) / "sweep_summary.csv").string() << "\n";
    return 0;
}

int verb_report(const CliOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    const Config cfg = load_config(opt);
    std::vector<std::string> inputs = opt.report_inputs;
    if (inputs.empty()) {
        for (const auto& entry : fs::directory_iterator(opt.out_dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("trials_", 0) == 0 && entry.path().extension() == ".csv")
                inputs.push_back(entry.path().string());
        }
        std::sort(inputs.begin(), inputs.end());
    }
    if (inputs.empty())
        throw DependencyError("report: no trials_*.csv found in '" + opt.out_dir +
                              "'; run the train or sweep verb first");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "config_hash=%016llx",
                  static_cast<unsigned long long>(cfg.hash64()));
    const fs::path dir = fs::path(opt.out_dir) / "report";
    emit_report(inputs, dir.string(), buf);
    append_run_log(opt, "report",
                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    std::cout << "wrote " << dir.string() << " from " << inputs.size() << " trial file(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Long-lasting heatwave forecasting testbed"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the verb

    CliOptions opt;
    app.add_option("--config", opt.config_path, "Key=value configuration file");
    app.add_option("--set", opt.overrides, "Override KEY=VALUE (repeatable)");
    app.add_option("--out", opt.out_dir, "Output directory (default: out)");
    app.add_option("--workers", opt.workers, "Worker threads (default: hardware)");
    app.add_flag("--strict-deterministic", opt.strict_deterministic,
                 "Single worker, zeroed wall-time columns");

    CLI::App* c_generate = app.add_subcommand("generate", "Synthesize the field archive");
    CLI::App* c_label = app.add_subcommand("label", "Compute Y, thresholds and labels");
    CLI::App* c_features = app.add_subcommand("features", "Dump spectral input tensors");
    CLI::App* c_train = app.add_subcommand("train", "Run training trials");
    CLI::App* c_evaluate = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
    c_evaluate->add_option("--checkpoint", opt.checkpoint_path, "Checkpoint file");
    CLI::App* c_sweep = app.add_subcommand("sweep", "Lead-time sweep");
    CLI::App* c_report = app.add_subcommand("report", "Reshape trial CSVs into tables");
    c_report->add_option("--inputs", opt.report_inputs, "Trial CSV files (default: scan out dir)");
    CLI::App* c_validate = app.add_subcommand("validate", "Check config and echo normalized form");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_generate->parsed()) return verb_generate(opt);
        if (c_label->parsed()) return verb_label(opt);
        if (c_features->parsed()) return verb_features(opt);
        if (c_train->parsed()) return verb_train(opt);
        if (c_evaluate->parsed()) return verb_evaluate(opt);
        if (c_sweep->parsed()) return verb_sweep(opt);
        if (c_report->parsed()) return verb_report(opt);
        if (c_validate->parsed()) return verb_validate(opt);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
