#include "meca/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "meca/errors.hpp"

namespace meca::eval {

Metrics make_metrics(double acc, double asr) {
    if (!(acc >= 0.0 && acc <= 1.0) || !(asr >= 0.0 && asr <= 1.0)) {
        throw ConfigError("metrics must lie in [0, 1] (acc " + std::to_string(acc) + ", asr " + std::to_string(asr) + ")");
    }
    return {acc, asr, asr < kSuccessAsr};
}

double compute_acc(const nn::ModelSpec& spec, const nn::ParamSet& params, const SampleSet& test) {
    if (test.empty()) throw ConfigError("compute_acc on an empty test set");
    const auto pred = nn::predict_all(spec, params, test);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == test[i].label;
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

double compute_asr(const nn::ModelSpec& spec, const nn::ParamSet& params, const SampleSet& asr_set,
                   std::size_t target) {
    if (asr_set.empty()) throw ConfigError("compute_asr on an empty ASR set");
    const auto pred = nn::predict_all(spec, params, asr_set);
    const auto hits = std::count(pred.begin(), pred.end(), target);
    return static_cast<double>(hits) / static_cast<double>(asr_set.size());
}

namespace {

double ratio_or_one(std::size_t num, std::size_t den) {
    return den == 0 ? 1.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

DetectionQuality detection_quality(std::span<const std::size_t> extracted_clean, const data::LabeledDataset& ds) {
    std::vector<bool> kept(ds.size(), false);
    for (std::size_t i : extracted_clean) {
        if (i >= ds.size()) throw ConfigError("extracted index " + std::to_string(i) + " out of range");
        kept[i] = true;
    }
    DetectionQuality q;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const bool flagged = !kept[i];
        const bool poison = ds.samples[i].provenance == data::Provenance::poison_payload;
        if (flagged && poison) ++q.true_positives;
        if (flagged && !poison) ++q.false_positives;
        if (!flagged && poison) ++q.false_negatives;
    }
    q.precision = ratio_or_one(q.true_positives, q.true_positives + q.false_positives);
    q.recall = ratio_or_one(q.true_positives, q.true_positives + q.false_negatives);
    q.f1 = q.precision + q.recall > 0.0 ? 2.0 * q.precision * q.recall / (q.precision + q.recall) : 0.0;
    return q;
}

namespace {

// 1-based ranks, ties share their average rank.
std::vector<double> average_ranks(std::span<const double> v) {
    std::vector<std::size_t> order(v.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

}  // namespace

double roc_auc(std::span<const double> scores, const std::vector<bool>& positive) {
    if (scores.size() != positive.size()) throw ConfigError("roc_auc: scores and labels differ in length");
    const auto ranks = average_ranks(scores);
    double pos_rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (positive[i]) {
            pos_rank_sum += ranks[i];
            ++n_pos;
        }
    }
    const std::size_t n_neg = scores.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) throw ConfigError("roc_auc needs both positives and negatives");
    const double np = static_cast<double>(n_pos);
    return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(n_neg));
}

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ConfigError("spearman: series differ in length");
    if (x.size() < 2) throw ConfigError("spearman needs at least two points");
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<double> smooth(std::span<const double> v, std::size_t window) {
    if (window == 0) throw ConfigError("smoothing window must be positive");
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const std::size_t lo = i + 1 >= window ? i + 1 - window : 0;
        double s = 0.0;
        for (std::size_t k = lo; k <= i; ++k) s += v[k];
        out[i] = s / static_cast<double>(i - lo + 1);
    }
    return out;
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw LoadError("csv has no column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::string join(const std::vector<std::string>& fields) {
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) line += ',';
        line += fields[i];
    }
    return line;
}

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

}  // namespace

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << join(table.header) << '\n';
    for (const auto& row : table.rows) out << join(row) << '\n';
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw LoadError(path.string() + ": empty csv");
    t.header = split(line);
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto row = split(line);
        if (row.size() != t.header.size()) {
            throw LoadError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(t.header.size()) + " fields, found " + std::to_string(row.size()));
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::vector<HistogramBin> histogram(std::span<const double> scores, const data::LabeledDataset& ds, std::size_t bins) {
    if (scores.size() != ds.size()) throw ConfigError("histogram: one score per sample required");
    if (bins == 0) throw ConfigError("histogram needs at least one bin");
    if (scores.empty()) return {};
    std::vector<double> t(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) t[i] = std::log10(std::max(scores[i], 1e-30));
    const auto [mn, mx] = std::minmax_element(t.begin(), t.end());
    const double lo = *mn, hi = *mx;
    const std::size_t nb = hi > lo ? bins : 1;
    const double width = hi > lo ? (hi - lo) / static_cast<double>(nb) : 0.0;
    std::vector<HistogramBin> out(nb);
    for (std::size_t b = 0; b < nb; ++b) {
        out[b].lo = std::pow(10.0, lo + width * static_cast<double>(b));
        out[b].hi = std::pow(10.0, b + 1 == nb ? hi : lo + width * static_cast<double>(b + 1));
    }
    for (std::size_t i = 0; i < t.size(); ++i) {
        std::size_t b = width > 0.0 ? static_cast<std::size_t>((t[i] - lo) / width) : 0;
        b = std::min(b, nb - 1);
        if (ds.samples[i].provenance == data::Provenance::clean) {
            ++out[b].n_clean;
        } else {
            ++out[b].n_poison;
        }
    }
    return out;
}

void export_histogram(const partition::PartitionOutcome& outcome, const data::LabeledDataset& ds,
                      const std::filesystem::path& scores_csv, const std::filesystem::path& hist_csv,
                      std::size_t bins) {
    std::vector<bool> in_clean(ds.size(), false);
    for (std::size_t i : outcome.clean_indices) in_clean.at(i) = true;
    CsvTable scores{{"index", "kl_score", "provenance", "assigned_partition"}, {}};
    for (std::size_t i = 0; i < outcome.scores.size(); ++i) {
        scores.rows.push_back({std::to_string(i), format_double(outcome.scores[i]),
                               data::to_string(ds.samples.at(i).provenance), in_clean[i] ? "clean" : "retained"});
    }
    write_csv(scores_csv, scores);
    CsvTable hist{{"bin_lo", "bin_hi", "n_clean", "n_poison"}, {}};
    for (const auto& b : histogram(outcome.scores, ds, bins)) {
        hist.rows.push_back({format_double(b.lo), format_double(b.hi), std::to_string(b.n_clean), std::to_string(b.n_poison)});
    }
    write_csv(hist_csv, hist);
}

}  // namespace meca::eval
