#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "meca/dataset.hpp"
#include "meca/nn.hpp"
#include "meca/partition.hpp"

namespace meca::eval {

// A defense succeeds when the post-defense ASR is below this threshold.
inline constexpr double kSuccessAsr = 0.20;

struct Metrics {
    double acc = 0.0;
    double asr = 0.0;
    bool defense_success = false;
};

// Throws ConfigError unless both rates lie in [0, 1].
Metrics make_metrics(double acc, double asr);

// Fraction of `test` classified correctly. Throws ConfigError on an empty set.
double compute_acc(const nn::ModelSpec& spec, const nn::ParamSet& params, const SampleSet& test);

// Fraction of `asr_set` predicted as `target`. Throws ConfigError on an empty set.
double compute_asr(const nn::ModelSpec& spec, const nn::ParamSet& params, const SampleSet& asr_set,
                   std::size_t target);

// Poison identification quality. A sample is flagged as poisoned when it is
// NOT in the extracted clean set; the positives are the payload samples.
// Ratios with an empty denominator are reported as 1 (nothing to find, or no
// false alarm raised).
struct DetectionQuality {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::size_t true_positives = 0;
    std::size_t false_positives = 0;
    std::size_t false_negatives = 0;
};

DetectionQuality detection_quality(std::span<const std::size_t> extracted_clean, const data::LabeledDataset& ds);

// Area under the ROC curve of `scores` for separating positives from
// negatives (Mann-Whitney statistic, ties count one half). Throws ConfigError
// when either class is empty.
double roc_auc(std::span<const double> scores, const std::vector<bool>& positive);

// Spearman rank correlation with average ranks for ties. Returns 0 when either
// series is constant. Throws ConfigError on a length mismatch or fewer than 2 points.
double spearman(std::span<const double> x, std::span<const double> y);

// Trailing moving average: out[i] = mean(v[max(0, i - window + 1) .. i]).
std::vector<double> smooth(std::span<const double> v, std::size_t window);

// Plain comma-separated table without quoting.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column position by name; throws LoadError when absent.
    [[nodiscard]] std::size_t column(const std::string& name) const;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);
// Throws LoadError on a missing file, an empty file or a ragged row.
CsvTable read_csv(const std::filesystem::path& path);

// Shortest text that parses back to the same double.
std::string format_double(double v);

struct HistogramBin {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t n_clean = 0;
    std::size_t n_poison = 0;
};

// Equal-width bins over log10(score), scores below 1e-30 clamped there. Bin
// edges are reported in score units. Identical scores give a single bin.
// Covers count as poison.
std::vector<HistogramBin> histogram(std::span<const double> scores, const data::LabeledDataset& ds,
                                    std::size_t bins);

// Writes the per-sample CSV (index, kl_score, provenance, assigned_partition)
// and the binned CSV (bin_lo, bin_hi, n_clean, n_poison).
void export_histogram(const partition::PartitionOutcome& outcome, const data::LabeledDataset& ds,
                      const std::filesystem::path& scores_csv, const std::filesystem::path& hist_csv,
                      std::size_t bins = 30);

}  // namespace meca::eval
