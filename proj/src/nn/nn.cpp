#include "meca/nn.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "meca/errors.hpp"

namespace meca::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

constexpr std::size_t kNoParam = std::numeric_limits<std::size_t>::max();

struct LayerGeom {
    std::vector<std::size_t> in;
    std::vector<std::size_t> out;
    std::size_t param = kNoParam;  // index of the weight tensor in ParamSet::values
};

std::vector<LayerGeom> build_geometry(const ModelSpec& spec) {
    auto outs = layer_output_dims(spec);
    std::vector<LayerGeom> geoms(spec.layers.size());
    std::size_t next_param = 0;
    std::vector<std::size_t> in = spec.input.dims();
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        geoms[i].in = in;
        geoms[i].out = outs[i];
        if (spec.layers[i].has_params()) {
            geoms[i].param = next_param;
            next_param += 2;
        }
        in = outs[i];
    }
    return geoms;
}

struct TapRange {
    std::size_t q0, q1;    // output columns [q0, q1) reading real (non-padding) input
    std::size_t src_row;   // input row, valid only when q0 < q1
};

// Output row r, kernel tap (ki, kj): which output columns read inside the image.
TapRange tap_range(std::size_t r, std::size_t ki, std::size_t kj, std::size_t pad, std::size_t h, std::size_t w,
                   std::size_t wo) {
    const std::ptrdiff_t row = static_cast<std::ptrdiff_t>(r + ki) - static_cast<std::ptrdiff_t>(pad);
    if (row < 0 || row >= static_cast<std::ptrdiff_t>(h)) return {0, 0, 0};
    // input column = q + kj - pad must lie in [0, w)
    const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(pad);
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(wo),
                                                       static_cast<std::ptrdiff_t>(w) - shift);
    if (hi <= lo) return {0, 0, 0};
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi), static_cast<std::size_t>(row)};
}

// Forward/backward over a single sample, reusing buffers between calls.
class Engine {
public:
    Engine(const ModelSpec& spec, const ParamSet& params)
        : spec_(spec), params_(params), geoms_(build_geometry(spec)) {
        if (params.values.size() != 2 * std::count_if(spec.layers.begin(), spec.layers.end(),
                                                       [](const LayerSpec& l) { return l.has_params(); })) {
            throw ConfigError("parameter set does not match model: " + std::to_string(params.values.size()) +
                              " tensors");
        }
        for (std::size_t i = 0; i < geoms_.size(); ++i) {
            if (geoms_[i].param == kNoParam) continue;
            const auto want_w = weight_dims(spec.layers[i]);
            if (params.values[geoms_[i].param].dims() != want_w ||
                params.values[geoms_[i].param + 1].size() != spec.layers[i].out) {
                throw ConfigError("parameter dims mismatch at layer " + std::to_string(i));
            }
        }
        acts_.resize(geoms_.size() + 1);
        acts_[0].resize(spec.input.size());
        for (std::size_t i = 0; i < geoms_.size(); ++i) acts_[i + 1].resize(product(geoms_[i].out));
        cols_.resize(geoms_.size());
        argmax_.resize(geoms_.size());
    }

    static std::vector<std::size_t> weight_dims(const LayerSpec& l) {
        if (l.kind == LayerKind::dense) return {l.out, l.in};
        return {l.out, l.in, l.kernel, l.kernel};
    }

    std::span<const double> forward(std::span<const double> x) {
        if (x.size() != acts_[0].size()) {
            throw ConfigError("input has " + std::to_string(x.size()) + " values, model expects " +
                              spec_.input.str());
        }
        std::copy(x.begin(), x.end(), acts_[0].begin());
        for (std::size_t i = 0; i < geoms_.size(); ++i) forward_layer(i);
        return acts_.back();
    }

    // Backpropagate dLoss/dlogits. Adds scale * dParams into grads when given and
    // writes dLoss/dx into dx when given.
    void backward(std::span<const double> dlogits, std::vector<Tensor>* grads, double scale,
                  std::vector<double>* dx) {
        upstream_.assign(dlogits.begin(), dlogits.end());
        for (std::size_t i = geoms_.size(); i-- > 0;) {
            const bool need_dx = i > 0 || dx != nullptr;
            backward_layer(i, grads, scale, need_dx);
            std::swap(upstream_, downstream_);
            if (!need_dx) return;
        }
        if (dx) *dx = upstream_;
    }

private:
    void forward_layer(std::size_t i) {
        const LayerSpec& l = spec_.layers[i];
        const LayerGeom& g = geoms_[i];
        const std::vector<double>& in = acts_[i];
        std::vector<double>& out = acts_[i + 1];
        switch (l.kind) {
            case LayerKind::dense: {
                ConstMatMap w(params_.values[g.param].data(), l.out, l.in);
                ConstVecMap b(params_.values[g.param + 1].data(), l.out);
                VecMap(out.data(), l.out).noalias() = w * ConstVecMap(in.data(), l.in) + b;
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t k = l.kernel, c_in = g.in[0], h = g.in[1], w_in = g.in[2];
                const std::size_t ho = g.out[1], wo = g.out[2], spatial = ho * wo;
                std::vector<double>& cols = cols_[i];
                cols.assign(c_in * k * k * spatial, 0.0);
                for (std::size_t c = 0; c < c_in; ++c) {
                    for (std::size_t ki = 0; ki < k; ++ki) {
                        for (std::size_t kj = 0; kj < k; ++kj) {
                            double* dst = cols.data() + ((c * k + ki) * k + kj) * spatial;
                            for (std::size_t r = 0; r < ho; ++r) {
                                const auto [q0, q1, src_row] = tap_range(r, ki, kj, l.pad, h, w_in, wo);
                                if (q0 >= q1) continue;
                                const double* src = in.data() + (c * h + src_row) * w_in + (q0 + kj - l.pad);
                                std::copy(src, src + (q1 - q0), dst + r * wo + q0);
                            }
                        }
                    }
                }
                ConstMatMap wmat(params_.values[g.param].data(), l.out, c_in * k * k);
                ConstMatMap cmat(cols.data(), c_in * k * k, spatial);
                MatMap omat(out.data(), l.out, spatial);
                omat.noalias() = wmat * cmat;
                omat.colwise() += ConstVecMap(params_.values[g.param + 1].data(), l.out);
                break;
            }
            case LayerKind::relu:
                for (std::size_t j = 0; j < in.size(); ++j) out[j] = in[j] > 0.0 ? in[j] : 0.0;
                break;
            case LayerKind::maxpool2: {
                const std::size_t c_n = g.in[0], h = g.in[1], w = g.in[2];
                const std::size_t ho = g.out[1], wo = g.out[2];
                auto& arg = argmax_[i];
                arg.resize(out.size());
                for (std::size_t c = 0; c < c_n; ++c) {
                    for (std::size_t r = 0; r < ho; ++r) {
                        for (std::size_t q = 0; q < wo; ++q) {
                            std::size_t best = (c * h + 2 * r) * w + 2 * q;
                            for (std::size_t dr = 0; dr < 2; ++dr) {
                                for (std::size_t dq = 0; dq < 2; ++dq) {
                                    const std::size_t idx = (c * h + 2 * r + dr) * w + 2 * q + dq;
                                    if (in[idx] > in[best]) best = idx;
                                }
                            }
                            const std::size_t o = (c * ho + r) * wo + q;
                            out[o] = in[best];
                            arg[o] = best;
                        }
                    }
                }
                break;
            }
            case LayerKind::flatten:
                out = in;
                break;
        }
    }

    void backward_layer(std::size_t i, std::vector<Tensor>* grads, double scale, bool need_dx) {
        const LayerSpec& l = spec_.layers[i];
        const LayerGeom& g = geoms_[i];
        const std::vector<double>& in = acts_[i];
        const std::vector<double>& dy = upstream_;
        std::vector<double>& dx = downstream_;
        if (need_dx) dx.assign(in.size(), 0.0);
        switch (l.kind) {
            case LayerKind::dense: {
                ConstVecMap dyv(dy.data(), l.out);
                ConstVecMap x(in.data(), l.in);
                if (grads) {
                    MatMap(grads->at(g.param).data(), l.out, l.in).noalias() += scale * dyv * x.transpose();
                    VecMap(grads->at(g.param + 1).data(), l.out) += scale * dyv;
                }
                if (need_dx) {
                    ConstMatMap w(params_.values[g.param].data(), l.out, l.in);
                    VecMap(dx.data(), l.in).noalias() = w.transpose() * dyv;
                }
                break;
            }
            case LayerKind::conv2d: {
                const std::size_t k = l.kernel, c_in = g.in[0], h = g.in[1], w_in = g.in[2];
                const std::size_t ho = g.out[1], wo = g.out[2], spatial = ho * wo;
                const std::size_t patch = c_in * k * k;
                ConstMatMap dmat(dy.data(), l.out, spatial);
                ConstMatMap cmat(cols_[i].data(), patch, spatial);
                if (grads) {
                    MatMap(grads->at(g.param).data(), l.out, patch).noalias() += scale * dmat * cmat.transpose();
                    VecMap(grads->at(g.param + 1).data(), l.out) += scale * dmat.rowwise().sum();
                }
                if (need_dx) {
                    ConstMatMap wmat(params_.values[g.param].data(), l.out, patch);
                    dcols_.resize(patch * spatial);
                    MatMap(dcols_.data(), patch, spatial).noalias() = wmat.transpose() * dmat;
                    for (std::size_t c = 0; c < c_in; ++c) {
                        for (std::size_t ki = 0; ki < k; ++ki) {
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const double* src = dcols_.data() + ((c * k + ki) * k + kj) * spatial;
                                for (std::size_t r = 0; r < ho; ++r) {
                                    const auto [q0, q1, src_row] = tap_range(r, ki, kj, l.pad, h, w_in, wo);
                                    if (q0 >= q1) continue;
                                    double* dst = dx.data() + (c * h + src_row) * w_in + (q0 + kj - l.pad);
                                    const double* row = src + r * wo + q0;
                                    for (std::size_t q = 0; q < q1 - q0; ++q) dst[q] += row[q];
                                }
                            }
                        }
                    }
                }
                break;
            }
            case LayerKind::relu:
                if (need_dx) {
                    for (std::size_t j = 0; j < in.size(); ++j) dx[j] = in[j] > 0.0 ? dy[j] : 0.0;
                }
                break;
            case LayerKind::maxpool2:
                if (need_dx) {
                    const auto& arg = argmax_[i];
                    for (std::size_t o = 0; o < dy.size(); ++o) dx[arg[o]] += dy[o];
                }
                break;
            case LayerKind::flatten:
                if (need_dx) dx = dy;
                break;
        }
    }

    const ModelSpec& spec_;
    const ParamSet& params_;
    std::vector<LayerGeom> geoms_;
    std::vector<std::vector<double>> acts_;
    std::vector<std::vector<double>> cols_;
    std::vector<std::vector<std::size_t>> argmax_;
    std::vector<double> upstream_, downstream_, dcols_;
};

std::vector<Tensor> zero_grads(const ParamSet& params) {
    std::vector<Tensor> g;
    g.reserve(params.values.size());
    for (const auto& t : params.values) g.push_back(Tensor::zeros_like(t));
    return g;
}

// Cross-entropy of one sample; fills dlogits = p - onehot(label).
double sample_loss(std::span<const double> z, std::size_t label, std::vector<double>& dlogits) {
    const ProbVector p = ProbVector::from_logits(z);
    if (label >= p.size()) throw ConfigError("label " + std::to_string(label) + " out of range");
    dlogits.assign(p.values().begin(), p.values().end());
    dlogits[label] -= 1.0;
    return -std::log(p[label]);
}

template <class Get>
LossAndGrads accumulate(const ModelSpec& spec, const ParamSet& params, std::size_t n, Get get,
                        bool want_input_grads) {
    if (n == 0) throw ConfigError("loss_and_grads on an empty batch");
    Engine engine(spec, params);
    LossAndGrads out;
    out.grads.params = zero_grads(params);
    if (want_input_grads) out.grads.inputs.reserve(n);
    const double scale = 1.0 / static_cast<double>(n);
    std::vector<double> dlogits, dx;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const Sample& s = get(j);
        total += sample_loss(engine.forward(s.image.values()), s.label, dlogits);
        engine.backward(dlogits, &out.grads.params, scale, want_input_grads ? &dx : nullptr);
        if (want_input_grads) {
            // Input gradient of the mean loss.
            for (double& v : dx) v *= scale;
            out.grads.inputs.emplace_back(s.image.dims(), dx);
        }
    }
    out.loss = total * scale;
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Model specs

ModelSpec default_cnn(const Shape& input, std::size_t num_classes) {
    ModelSpec spec{input, {}, num_classes};
    spec.layers = {LayerSpec::conv2d(input.channels, 16, 3, 1), LayerSpec::relu(), LayerSpec::maxpool2(),
                   LayerSpec::conv2d(16, 32, 3, 1), LayerSpec::relu(), LayerSpec::maxpool2(),
                   LayerSpec::flatten()};
    const auto dims = layer_output_dims(spec);
    spec.layers.push_back(LayerSpec::dense(dims.back()[0], num_classes));
    validate(spec);
    return spec;
}

ModelSpec default_mlp(const Shape& input, std::size_t num_classes, std::size_t hidden) {
    ModelSpec spec{input,
                   {LayerSpec::flatten(), LayerSpec::dense(input.size(), hidden), LayerSpec::relu(),
                    LayerSpec::dense(hidden, num_classes)},
                   num_classes};
    validate(spec);
    return spec;
}

std::vector<std::vector<std::size_t>> layer_output_dims(const ModelSpec& spec) {
    std::vector<std::vector<std::size_t>> outs;
    std::vector<std::size_t> cur = spec.input.dims();
    if (spec.input.size() == 0) throw ConfigError("model input shape is empty");
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        auto fail = [&](const std::string& why) {
            throw ConfigError("layer " + std::to_string(i) + " (" + to_string(l.kind) + "): " + why +
                              ", input " + dims_str(cur));
        };
        switch (l.kind) {
            case LayerKind::dense:
                if (cur.size() != 1 || cur[0] != l.in) fail("expects a flat input of width " + std::to_string(l.in));
                if (l.out == 0) fail("zero output width");
                cur = {l.out};
                break;
            case LayerKind::conv2d:
                if (cur.size() != 3 || cur[0] != l.in) fail("expects " + std::to_string(l.in) + " input channels");
                if (l.kernel == 0 || cur[1] + 2 * l.pad < l.kernel || cur[2] + 2 * l.pad < l.kernel) {
                    fail("kernel larger than padded input");
                }
                if (l.pad >= l.kernel) fail("padding must be smaller than the kernel");
                if (l.out == 0) fail("zero output channels");
                cur = {l.out, cur[1] + 2 * l.pad - l.kernel + 1, cur[2] + 2 * l.pad - l.kernel + 1};
                break;
            case LayerKind::relu:
                break;
            case LayerKind::maxpool2:
                if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) fail("needs a C x H x W input with H, W >= 2");
                cur = {cur[0], cur[1] / 2, cur[2] / 2};
                break;
            case LayerKind::flatten:
                cur = {product(cur)};
                break;
        }
        outs.push_back(cur);
    }
    return outs;
}

void validate(const ModelSpec& spec) {
    if (spec.num_classes < 2) throw ConfigError("model needs at least 2 classes");
    const auto outs = layer_output_dims(spec);
    if (outs.empty() || outs.back().size() != 1 || outs.back()[0] != spec.num_classes) {
        throw ConfigError("final layer output " + (outs.empty() ? std::string("(none)") : dims_str(outs.back())) +
                          " does not match class count " + std::to_string(spec.num_classes));
    }
}

std::string to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::dense: return "dense";
        case LayerKind::conv2d: return "conv2d";
        case LayerKind::relu: return "relu";
        case LayerKind::maxpool2: return "maxpool2";
        case LayerKind::flatten: return "flatten";
    }
    return "?";
}

std::string describe(const ModelSpec& spec) {
    std::ostringstream os;
    os << "input" << spec.input.str();
    for (const auto& l : spec.layers) {
        os << " " << to_string(l.kind);
        if (l.kind == LayerKind::dense) os << "(" << l.in << "," << l.out << ")";
        if (l.kind == LayerKind::conv2d) os << "(" << l.in << "," << l.out << "," << l.kernel << ",pad=" << l.pad << ")";
    }
    os << " K=" << spec.num_classes;
    return os.str();
}

// ---------------------------------------------------------------------------
// Parameters

std::size_t ParamSet::count() const {
    std::size_t n = 0;
    for (const auto& t : values) n += t.size();
    return n;
}

bool ParamSet::all_finite() const {
    return std::all_of(values.begin(), values.end(), [](const Tensor& t) { return t.all_finite(); });
}

ParamSet zero_params(const ModelSpec& spec) {
    validate(spec);
    ParamSet ps;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        if (!l.has_params()) continue;
        ps.names.push_back("layer" + std::to_string(i) + ".weight");
        ps.values.emplace_back(Engine::weight_dims(l));
        ps.names.push_back("layer" + std::to_string(i) + ".bias");
        ps.values.emplace_back(std::vector<std::size_t>{l.out});
    }
    return ps;
}

ParamSet init_params(const ModelSpec& spec, Rng& rng) {
    ParamSet ps = zero_params(spec);
    std::size_t t = 0;
    for (const LayerSpec& l : spec.layers) {
        if (!l.has_params()) continue;
        const std::size_t area = l.kind == LayerKind::conv2d ? l.kernel * l.kernel : 1;
        const double s = std::sqrt(6.0 / static_cast<double>((l.in + l.out) * area));
        for (double& v : ps.values[t].values()) v = rng.uniform(-s, s);
        t += 2;
    }
    return ps;
}

// ---------------------------------------------------------------------------
// Forward / loss

ProbVector ProbVector::from_logits(std::span<const double> logits) {
    ProbVector pv;
    if (logits.empty()) return pv;
    const double mx = *std::max_element(logits.begin(), logits.end());
    pv.p_.resize(logits.size());
    double z = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        pv.p_[i] = std::exp(logits[i] - mx);
        z += pv.p_[i];
    }
    double total = 0.0;
    for (double& v : pv.p_) {
        v = std::max(v / z, kProbFloor);
        total += v;
    }
    for (double& v : pv.p_) v /= total;
    return pv;
}

std::size_t ProbVector::argmax() const {
    return static_cast<std::size_t>(std::max_element(p_.begin(), p_.end()) - p_.begin());
}

std::vector<double> logits(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
    Engine engine(spec, params);
    auto z = engine.forward(x.values());
    return {z.begin(), z.end()};
}

ProbVector forward(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
    Engine engine(spec, params);
    return ProbVector::from_logits(engine.forward(x.values()));
}

std::size_t predict(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
    Engine engine(spec, params);
    auto z = engine.forward(x.values());
    return static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<std::size_t> predict_all(const ModelSpec& spec, const ParamSet& params, const SampleSet& set) {
    Engine engine(spec, params);
    std::vector<std::size_t> out;
    out.reserve(set.size());
    for (const Sample& s : set.samples) {
        auto z = engine.forward(s.image.values());
        out.push_back(static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin()));
    }
    return out;
}

Tensor input_gradient(const ModelSpec& spec, const ParamSet& params, const Tensor& x, std::size_t label) {
    Engine engine(spec, params);
    std::vector<double> dlogits, dx;
    sample_loss(engine.forward(x.values()), label, dlogits);
    engine.backward(dlogits, nullptr, 1.0, &dx);
    return Tensor(x.dims(), std::move(dx));
}

LossAndGrads loss_and_grads(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch,
                            bool want_input_grads) {
    return accumulate(
        spec, params, batch.size(), [&](std::size_t j) -> const Sample& { return batch[j]; }, want_input_grads);
}

LossAndGrads loss_and_grads(const ModelSpec& spec, const ParamSet& params, const SampleSet& set,
                            std::span<const std::size_t> indices, bool want_input_grads) {
    return accumulate(
        spec, params, indices.size(), [&](std::size_t j) -> const Sample& { return set.samples.at(indices[j]); },
        want_input_grads);
}

double mean_loss(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch) {
    if (batch.empty()) throw ConfigError("mean_loss on an empty batch");
    Engine engine(spec, params);
    std::vector<double> scratch;
    double total = 0.0;
    for (const Sample& s : batch) total += sample_loss(engine.forward(s.image.values()), s.label, scratch);
    return total / static_cast<double>(batch.size());
}

// ---------------------------------------------------------------------------
// Updates

void sgd_step(ParamSet& params, std::span<const Tensor> grads, double lr, Direction direction) {
    if (!(lr > 0.0)) throw ConfigError("sgd_step needs lr > 0");
    if (grads.size() != params.values.size()) throw ConfigError("gradient count does not match parameters");
    const double signed_lr = direction == Direction::descend ? -lr : lr;
    for (std::size_t t = 0; t < grads.size(); ++t) {
        if (grads[t].dims() != params.values[t].dims()) {
            throw ConfigError("gradient dims mismatch for " + params.names[t]);
        }
        auto p = params.values[t].values();
        auto g = grads[t].values();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += signed_lr * g[i];
    }
}

double global_norm(std::span<const Tensor> grads) {
    double sq = 0.0;
    for (const auto& t : grads)
        for (double v : t.values()) sq += v * v;
    return std::sqrt(sq);
}

void clip_global_norm(std::span<Tensor> grads, double max_norm) {
    const double norm = global_norm(grads);
    if (norm <= max_norm || norm == 0.0) return;
    const double s = max_norm / norm;
    for (auto& t : grads)
        for (double& v : t.values()) v *= s;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ConfigError("kl_divergence on vectors of different length");
    // For distributions summing to one, sum p ln(p/q) equals sum [p ln(p/q) - p + q].
    // Every term of the second form is non-negative, so the near-cancelling
    // first-order parts never swamp a tiny divergence.
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] > 0.0) {
            const double u = (q[i] - p[i]) / p[i];
            kl += p[i] * (u - std::log1p(u));
        } else {
            kl += q[i];
        }
    }
    return std::max(kl, 0.0);
}

double kl_divergence(const ProbVector& p, const ProbVector& q) { return kl_divergence(p.values(), q.values()); }

double grad_check(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch, double h) {
    if (!(h > 0.0 && h <= 1e-3)) throw ConfigError("grad_check step must lie in (0, 1e-3]");
    const LossAndGrads analytic = loss_and_grads(spec, params, batch);
    ParamSet probe = params;
    double worst = 0.0;
    for (std::size_t t = 0; t < probe.values.size(); ++t) {
        for (std::size_t i = 0; i < probe.values[t].size(); ++i) {
            const double orig = probe.values[t][i];
            probe.values[t][i] = orig + h;
            const double up = mean_loss(spec, probe, batch);
            probe.values[t][i] = orig - h;
            const double down = mean_loss(spec, probe, batch);
            probe.values[t][i] = orig;
            const double cd = (up - down) / (2.0 * h);
            const double a = analytic.grads.params[t][i];
            const double denom = std::max({std::abs(a), std::abs(cd), 1e-12});
            worst = std::max(worst, std::abs(a - cd) / denom);
        }
    }
    return worst;
}

}  // namespace meca::nn
