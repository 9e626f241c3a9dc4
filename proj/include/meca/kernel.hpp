#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "meca/attacks.hpp"
#include "meca/dataset.hpp"
#include "meca/partition.hpp"

namespace meca::kernel {

// Q(x, z) = exp(-2 gamma_k ||x - z||^2). Throws ConfigError on a size mismatch.
double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma_k);
double rbf_kernel(const Tensor& x, const Tensor& z, double gamma_k);

// Kernel-regression stand-in for a trained network: clean points with their
// labels plus poisoned points that all carry the target label.
struct KernelModel {
    std::vector<Tensor> clean;
    std::vector<std::size_t> clean_labels;
    std::vector<Tensor> poisoned;
    std::size_t target = 0;
    std::size_t num_classes = 0;
    double gamma_k = 0.0;
};

// Throws ConfigError unless there is at least one clean point, every class
// has the same number of clean points, all points share one size and
// gamma_k > 0.
void validate(const KernelModel& km);

// 1 / (2 d) for d values per image.
double default_gamma(const Shape& shape);

// Share of kernel mass that votes for the target class at `query`.
double phi_target(const Tensor& query, const KernelModel& km);

struct OracleOptions {
    double eps = 0.001;
    std::size_t patch = 2;
    double gamma_k = 0.0;  // 0 selects default_gamma
    std::uint64_t seed = 0;
};

struct OracleRow {
    double ratio = 0.0;
    std::size_t n_poisoned = 0;
    double fraction = 0.0;  // queries with phi_target >= 1/2
    double mean_phi = 0.0;
};

// For each ratio N_p / N_b, poisons the first round(ratio * N_b) entries of a
// seeded query pool and scores every pool entry after a random-direction patch
// perturbation. The pool holds every base sample with the trigger applied, so
// the poisoned sets are nested and the queries are shared across ratios.
// Throws ConfigError on a ratio outside [0, 1].
std::vector<OracleRow> poison_share_check(const data::LabeledDataset& base, const attacks::TriggerSpec& trigger,
                                      std::span<const double> ratios, const OracleOptions& options);

// CSV with header ratio,fraction,mean_phi.
void write_oracle_csv(const std::filesystem::path& path, std::span<const OracleRow> rows);

}  // namespace meca::kernel
