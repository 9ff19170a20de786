#include "heatcast/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "heatcast/errors.hpp"

namespace heatcast {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

struct Moments {
    int n = 0;
    double mean = 0, stddev = 0, median = 0, maxabsdev = 0;
};

Moments moments(std::vector<double> xs) {
    Moments m;
    m.n = int(xs.size());
    if (xs.empty()) return m;
    double sum = 0;
    for (double x : xs) sum += x;
    m.mean = sum / double(m.n);
    double var = 0;
    for (double x : xs) var += (x - m.mean) * (x - m.mean);
    m.stddev = std::sqrt(var / double(m.n));
    std::sort(xs.begin(), xs.end());
    m.median = m.n % 2 ? xs[size_t(m.n / 2)]
                       : 0.5 * (xs[size_t(m.n / 2 - 1)] + xs[size_t(m.n / 2)]);
    for (double x : xs) m.maxabsdev = std::max(m.maxabsdev, std::abs(x - m.median));
    return m;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    parts.push_back(cur);
    return parts;
}

}  // namespace

uint64_t file_hash64(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("report: cannot open '" + path + "'");
    uint64_t h = 14695981039346656037ull;
    char buf[65536];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) {
        const std::streamsize n = f.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!f) break;
    }
    return h;
}

void write_trial_csv(const std::string& path, std::span<const TrialReport> reports,
                     const std::string& comment_line, bool zero_seconds) {
    std::ofstream f(path);
    if (!f) throw IoError("report: cannot write '" + path + "'");
    f << "trial_id,level,protocol,tau,epoch,split,TP,FP,TN,FN,TPR,FPR,MCC,seconds,"
         "transfer,rate,train_mcc\n";
    f << "# " << comment_line << "\n";
    char split_hex[32];
    for (const TrialReport& r : reports) {
        std::snprintf(split_hex, sizeof(split_hex), "%016llx",
                      static_cast<unsigned long long>(r.split_seed));
        const double secs = zero_seconds ? 0.0 : r.seconds;
        auto write_row = [&](int epoch, const ConfusionCounts& c, double tpr, double fpr,
                             double mcc, double train_mcc) {
            f << r.trial_id << ',' << fmt(r.level) << ',' << r.product << ',' << r.tau_days
              << ',' << epoch << ',' << split_hex << ',' << c.tp << ',' << c.fp << ','
              << c.tn << ',' << c.fn << ',' << fmt(tpr) << ',' << fmt(fpr) << ','
              << fmt(mcc) << ',' << fmt(secs) << ',' << (r.transfer ? 1 : 0) << ','
              << fmt(r.rate) << ',' << fmt(train_mcc) << '\n';
        };
        if (r.curve.empty()) {
            write_row(0, r.counts, r.tpr, r.fpr, r.mcc, 0.0);
        } else {
            for (const EpochPoint& pt : r.curve) {
                const double tpr =
                    pt.counts.positives() ? double(pt.counts.tp) / pt.counts.positives() : 0.0;
                const double fpr =
                    pt.counts.negatives() ? double(pt.counts.fp) / pt.counts.negatives() : 0.0;
                write_row(pt.epoch, pt.counts, tpr, fpr, pt.test_mcc, pt.train_mcc);
            }
        }
    }
}

std::vector<TrialRow> read_trial_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("report: cannot open '" + path + "'");
    std::vector<TrialRow> rows;
    std::string line;
    bool saw_header = false;
    while (std::getline(f, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            saw_header = true;
            continue;
        }
        const std::vector<std::string> p = split_csv_line(line);
        if (p.size() < 17) throw IoError("report: malformed row in '" + path + "'");
        TrialRow r;
        r.trial_id = std::stoi(p[0]);
        r.level = std::stod(p[1]);
        r.product = p[2];
        r.tau = std::stoi(p[3]);
        r.epoch = std::stoi(p[4]);
        r.split_seed = std::stoull(p[5], nullptr, 16);
        r.counts.tp = std::stoull(p[6]);
        r.counts.fp = std::stoull(p[7]);
        r.counts.tn = std::stoull(p[8]);
        r.counts.fn = std::stoull(p[9]);
        r.tpr = std::stod(p[10]);
        r.fpr = std::stod(p[11]);
        r.mcc = std::stod(p[12]);
        r.seconds = std::stod(p[13]);
        r.transfer = p[14] == "1";
        r.rate = std::stod(p[15]);
        r.train_mcc = std::stod(p[16]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_summary_csv(const std::string& path, std::span<const SummaryRow> rows,
                       const std::string& comment_line) {
    std::ofstream f(path);
    if (!f) throw IoError("report: cannot write '" + path + "'");
    f << "level,protocol,tau,transfer,rate,n_trials,mean_mcc,std_mcc,median_mcc,"
         "maxabsdev_mcc,mean_tpr,std_tpr,mean_fpr,std_fpr\n";
    f << "# " << comment_line << "\n";
    for (const SummaryRow& r : rows) {
        f << fmt(r.level) << ',' << r.product << ',' << r.tau << ',' << (r.transfer ? 1 : 0)
          << ',' << fmt(r.rate) << ',' << r.stats.n << ',' << fmt(r.stats.mean_mcc) << ','
          << fmt(r.stats.std_mcc) << ',' << fmt(r.stats.median_mcc) << ','
          << fmt(r.stats.maxabsdev_mcc) << ',' << fmt(r.stats.mean_tpr) << ','
          << fmt(r.stats.std_tpr) << ',' << fmt(r.stats.mean_fpr) << ','
          << fmt(r.stats.std_fpr) << '\n';
    }
}

namespace {

/// Final-row + best-MCC view of one (trial, product, ...) group.
struct TrialView {
    TrialRow final_row;
    double best_mcc = 0;
    double reported_mcc = 0;
};

using GroupKey = std::tuple<std::string, double, int, bool, double>;  // product, level, tau, transfer, rate

std::map<GroupKey, std::vector<TrialView>> group_trials(const std::vector<TrialRow>& rows) {
    std::map<std::tuple<std::string, double, int, bool, double, int>, std::vector<TrialRow>>
        by_trial;
    for (const TrialRow& r : rows)
        by_trial[{r.product, r.level, r.tau, r.transfer, r.rate, r.trial_id}].push_back(r);

    std::map<GroupKey, std::vector<TrialView>> groups;
    for (auto& [key, trial_rows] : by_trial) {
        TrialView v;
        v.final_row = trial_rows.front();
        v.best_mcc = trial_rows.front().mcc;
        for (const TrialRow& r : trial_rows) {
            if (r.epoch >= v.final_row.epoch) v.final_row = r;
            if (r.mcc > v.best_mcc) v.best_mcc = r.mcc;
        }
        v.reported_mcc = v.final_row.transfer ? v.final_row.mcc : v.best_mcc;
        const auto& [product, level, tau, transfer, rate, trial] = key;
        groups[{product, level, tau, transfer, rate}].push_back(v);
    }
    return groups;
}

}  // namespace

void emit_report(const std::vector<std::string>& trial_csvs, const std::string& out_dir,
                 const std::string& comment_line) {
    std::filesystem::create_directories(out_dir);
    std::vector<TrialRow> rows;
    std::ostringstream inputs;
    inputs << comment_line << " inputs=";
    for (size_t i = 0; i < trial_csvs.size(); ++i) {
        const std::vector<TrialRow> part = read_trial_csv(trial_csvs[i]);
        rows.insert(rows.end(), part.begin(), part.end());
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(file_hash64(trial_csvs[i])));
        inputs << (i ? "," : "") << std::filesystem::path(trial_csvs[i]).filename().string()
               << ':' << hex;
    }
    const std::string comment = inputs.str();
    const auto groups = group_trials(rows);

    {
        std::ofstream f(std::filesystem::path(out_dir) / "report_protocols.csv");
        f << "protocol,level,tau,transfer,rate,n_trials,tpr_mean,tpr_std,fpr_mean,fpr_std,"
             "mcc_mean,mcc_std\n";
        f << "# " << comment << "\n";
        for (const auto& [key, views] : groups) {
            const auto& [product, level, tau, transfer, rate] = key;
            std::vector<double> tprs, fprs, mccs;
            for (const TrialView& v : views) {
                tprs.push_back(v.final_row.tpr);
                fprs.push_back(v.final_row.fpr);
                mccs.push_back(v.reported_mcc);
            }
            const Moments mt = moments(tprs), mf = moments(fprs), mm = moments(mccs);
            f << product << ',' << fmt(level) << ',' << tau << ',' << (transfer ? 1 : 0)
              << ',' << fmt(rate) << ',' << mt.n << ',' << fmt(mt.mean) << ','
              << fmt(mt.stddev) << ',' << fmt(mf.mean) << ',' << fmt(mf.stddev) << ','
              << fmt(mm.mean) << ',' << fmt(mm.stddev) << '\n';
        }
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "report_imbalance.csv");
        f << "level,rate,transfer,n_trials,mean_mcc,median_mcc,std_mcc\n";
        f << "# " << comment << "\n";
        std::map<std::tuple<double, double, bool>, std::vector<double>> cells;
        for (const auto& [key, views] : groups) {
            const auto& [product, level, tau, transfer, rate] = key;
            for (const TrialView& v : views)
                cells[{level, rate, transfer}].push_back(v.reported_mcc);
        }
        for (const auto& [key, mccs] : cells) {
            const Moments m = moments(mccs);
            f << fmt(std::get<0>(key)) << ',' << fmt(std::get<1>(key)) << ','
              << (std::get<2>(key) ? 1 : 0) << ',' << m.n << ',' << fmt(m.mean) << ','
              << fmt(m.median) << ',' << fmt(m.stddev) << '\n';
        }
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "report_epochs.csv");
        f << "protocol,level,transfer,epoch,n_trials,test_mcc_mean,test_mcc_std,"
             "train_mcc_mean\n";
        f << "# " << comment << "\n";
        std::map<std::tuple<std::string, double, bool, int>,
                 std::pair<std::vector<double>, std::vector<double>>>
            cells;
        for (const TrialRow& r : rows) {
            if (r.epoch < 1) continue;
            auto& cell = cells[{r.product, r.level, r.transfer, r.epoch}];
            cell.first.push_back(r.mcc);
            cell.second.push_back(r.train_mcc);
        }
        for (const auto& [key, cell] : cells) {
            const Moments mt = moments(cell.first);
            const Moments mtr = moments(cell.second);
            f << std::get<0>(key) << ',' << fmt(std::get<1>(key)) << ','
              << (std::get<2>(key) ? 1 : 0) << ',' << std::get<3>(key) << ',' << mt.n << ','
              << fmt(mt.mean) << ',' << fmt(mt.stddev) << ',' << fmt(mtr.mean) << '\n';
        }
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "report_tau_mcc.csv");
        f << "level,tau,n_trials,mean_mcc,std_mcc,median_mcc,maxabsdev_mcc\n";
        f << "# " << comment << "\n";
        std::map<std::pair<double, int>, std::vector<double>> cells;
        for (const auto& [key, views] : groups) {
            const auto& [product, level, tau, transfer, rate] = key;
            for (const TrialView& v : views) cells[{level, tau}].push_back(v.reported_mcc);
        }
        for (const auto& [key, mccs] : cells) {
            const Moments m = moments(mccs);
            f << fmt(key.first) << ',' << key.second << ',' << m.n << ',' << fmt(m.mean)
              << ',' << fmt(m.stddev) << ',' << fmt(m.median) << ',' << fmt(m.maxabsdev)
              << '\n';
        }
    }
    {
        std::ofstream f(std::filesystem::path(out_dir) / "report_tau_rates.csv");
        f << "level,tau,n_trials,tpr_mean,tpr_std,fpr_mean,fpr_std\n";
        f << "# " << comment << "\n";
        std::map<std::pair<double, int>, std::pair<std::vector<double>, std::vector<double>>>
            cells;
        for (const auto& [key, views] : groups) {
            const auto& [product, level, tau, transfer, rate] = key;
            for (const TrialView& v : views) {
                cells[{level, tau}].first.push_back(v.final_row.tpr);
                cells[{level, tau}].second.push_back(v.final_row.fpr);
            }
        }
        for (const auto& [key, cell] : cells) {
            const Moments mt = moments(cell.first);
            const Moments mf = moments(cell.second);
            f << fmt(key.first) << ',' << key.second << ',' << mt.n << ',' << fmt(mt.mean)
              << ',' << fmt(mt.stddev) << ',' << fmt(mf.mean) << ',' << fmt(mf.stddev)
              << '\n';
        }
    }
}

}  // namespace heatcast
