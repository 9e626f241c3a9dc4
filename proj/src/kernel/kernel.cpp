#include "meca/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "meca/errors.hpp"
#include "meca/rng.hpp"

namespace meca::kernel {

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma_k) {
    if (x.size() != z.size()) {
        throw ConfigError("rbf_kernel on points of size " + std::to_string(x.size()) + " and " +
                          std::to_string(z.size()));
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - z[i];
        sq += d * d;
    }
    return std::exp(-2.0 * gamma_k * sq);
}

double rbf_kernel(const Tensor& x, const Tensor& z, double gamma_k) { return rbf_kernel(x.values(), z.values(), gamma_k); }

void validate(const KernelModel& km) {
    if (km.clean.empty()) throw ConfigError("kernel model needs at least one clean point");
    if (km.clean.size() != km.clean_labels.size()) throw ConfigError("kernel model: labels do not match clean points");
    if (!(km.gamma_k > 0.0)) throw ConfigError("gamma_k must be positive");
    if (km.num_classes == 0 || km.target >= km.num_classes) throw ConfigError("kernel model: target class out of range");
    std::vector<std::size_t> counts(km.num_classes, 0);
    for (std::size_t y : km.clean_labels) {
        if (y >= km.num_classes) throw ConfigError("kernel model: label out of range");
        ++counts[y];
    }
    if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
        throw ConfigError("kernel model: clean labels must be uniform across classes");
    }
    const std::size_t d = km.clean.front().size();
    auto same = [d](const Tensor& t) { return t.size() == d; };
    if (!std::all_of(km.clean.begin(), km.clean.end(), same) ||
        !std::all_of(km.poisoned.begin(), km.poisoned.end(), same)) {
        throw ConfigError("kernel model: points differ in size");
    }
}

double default_gamma(const Shape& shape) { return 1.0 / (2.0 * static_cast<double>(shape.size())); }

double phi_target(const Tensor& query, const KernelModel& km) {
    double target_mass = 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < km.clean.size(); ++i) {
        const double q = rbf_kernel(query, km.clean[i], km.gamma_k);
        total += q;
        if (km.clean_labels[i] == km.target) target_mass += q;
    }
    for (const Tensor& p : km.poisoned) {
        const double q = rbf_kernel(query, p, km.gamma_k);
        total += q;
        target_mass += q;
    }
    // Every kernel value underflows only for points absurdly far apart.
    if (total == 0.0) return 0.0;
    return std::clamp(target_mass / total, 0.0, 1.0);
}

namespace {

// Unit-norm Gaussian direction clamped to [-eps, eps], mirroring the shape of
// the gradient-based perturbation.
Tensor random_direction(const Shape& shape, double eps, Rng& rng) {
    Tensor delta(shape);
    double sq = 0.0;
    for (double& v : delta.values()) {
        v = rng.normal(0.0, 1.0);
        sq += v * v;
    }
    const double norm = std::sqrt(sq);
    for (double& v : delta.values()) v = norm > 0.0 ? std::clamp(v / norm, -eps, eps) : 0.0;
    return delta;
}

}  // namespace

std::vector<OracleRow> poison_share_check(const data::LabeledDataset& base, const attacks::TriggerSpec& trigger,
                                      std::span<const double> ratios, const OracleOptions& options) {
    for (double r : ratios) {
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("oracle ratios must lie in [0, 1]");
    }
    if (!(options.eps > 0.0)) throw ConfigError("eps must be positive");
    attacks::validate(trigger, base.shape);

    KernelModel km;
    km.target = trigger.target;
    km.num_classes = base.num_classes;
    km.gamma_k = options.gamma_k > 0.0 ? options.gamma_k : default_gamma(base.shape);
    for (const auto& s : base.samples) {
        km.clean.push_back(s.image);
        km.clean_labels.push_back(s.label);
    }
    validate(km);

    Rng rng(options.seed);
    Rng order_rng = rng.fork("oracle-order");
    Rng perturb_rng = rng.fork("oracle-perturb");
    const std::vector<std::size_t> order = order_rng.permutation(base.size());
    std::vector<Tensor> pool;
    std::vector<Tensor> queries;
    pool.reserve(order.size());
    queries.reserve(order.size());
    for (std::size_t i : order) {
        pool.push_back(attacks::apply_trigger(base.samples[i].image, trigger));
        const auto mask = partition::random_patch_mask(base.shape, options.patch, perturb_rng);
        const Tensor delta = random_direction(base.shape, options.eps, perturb_rng);
        queries.push_back(partition::perturb_input(pool.back(), mask, delta, partition::PatchMode::replace));
    }

    std::vector<OracleRow> rows;
    for (double ratio : ratios) {
        OracleRow row;
        row.ratio = ratio;
        row.n_poisoned = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(base.size())));
        km.poisoned.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(row.n_poisoned));
        std::size_t hits = 0;
        double sum = 0.0;
        for (const Tensor& q : queries) {
            const double phi = phi_target(q, km);
            sum += phi;
            if (phi >= 0.5) ++hits;
        }
        row.fraction = static_cast<double>(hits) / static_cast<double>(queries.size());
        row.mean_phi = sum / static_cast<double>(queries.size());
        rows.push_back(row);
    }
    return rows;
}

void write_oracle_csv(const std::filesystem::path& path, std::span<const OracleRow> rows) {
    std::ofstream out(path);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out.precision(17);
    out << "ratio,fraction,mean_phi\n";
    for (const auto& r : rows) out << r.ratio << ',' << r.fraction << ',' << r.mean_phi << '\n';
    if (!out) throw RuntimeFailure("write failed: " + path.string());
}

}  // namespace meca::kernel
