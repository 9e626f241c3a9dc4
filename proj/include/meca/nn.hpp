#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "meca/rng.hpp"
#include "meca/sample_set.hpp"
#include "meca/tensor.hpp"

namespace meca::nn {

// Softmax outputs are clamped to at least this value and renormalised, so
// every probability is strictly positive and KL divergences stay finite.
inline constexpr double kProbFloor = 1e-12;

enum class LayerKind { dense, conv2d, relu, maxpool2, flatten };

struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::size_t in = 0;      // dense: input width, conv2d: input channels
    std::size_t out = 0;     // dense: output width, conv2d: output channels
    std::size_t kernel = 0;  // conv2d only (square, stride 1)
    std::size_t pad = 0;     // conv2d zero padding on every side

    static LayerSpec dense(std::size_t in, std::size_t out) { return {LayerKind::dense, in, out, 0, 0}; }
    static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t pad = 0) {
        return {LayerKind::conv2d, in_ch, out_ch, k, pad};
    }
    static LayerSpec relu() { return {LayerKind::relu, 0, 0, 0, 0}; }
    static LayerSpec maxpool2() { return {LayerKind::maxpool2, 0, 0, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::flatten, 0, 0, 0, 0}; }

    [[nodiscard]] bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct ModelSpec {
    Shape input;
    std::vector<LayerSpec> layers;
    std::size_t num_classes = 0;

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

// conv(3x3,16)-relu-pool-conv(3x3,32)-relu-pool-flatten-dense(K), convolutions
// zero-padded to preserve spatial size so image borders reach the classifier.
ModelSpec default_cnn(const Shape& input, std::size_t num_classes);
// flatten-dense(hidden)-relu-dense(K), for tiny synthetic images.
ModelSpec default_mlp(const Shape& input, std::size_t num_classes, std::size_t hidden = 32);

// Output dims of every layer (index i = output of layer i). Throws ConfigError
// if adjacent shapes do not compose or the final width differs from K.
std::vector<std::vector<std::size_t>> layer_output_dims(const ModelSpec& spec);
void validate(const ModelSpec& spec);

std::string to_string(LayerKind kind);
std::string describe(const ModelSpec& spec);

// One weight/bias pair per parameterised layer, in layer order.
struct ParamSet {
    std::vector<std::string> names;
    std::vector<Tensor> values;

    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool all_finite() const;
    friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

ParamSet zero_params(const ModelSpec& spec);
// Glorot-uniform weights, zero biases.
ParamSet init_params(const ModelSpec& spec, Rng& rng);

// Gradients of the mean batch loss. `params[i]` has the dims of ParamSet::values[i];
// `inputs[j]` is dLoss/dx for batch item j (only when requested).
struct Gradients {
    std::vector<Tensor> params;
    std::vector<Tensor> inputs;
};

struct LossAndGrads {
    double loss = 0.0;
    Gradients grads;
};

class ProbVector {
public:
    ProbVector() = default;
    // Softmax of logits with the probability floor applied.
    static ProbVector from_logits(std::span<const double> logits);

    [[nodiscard]] std::span<const double> values() const { return p_; }
    [[nodiscard]] std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    [[nodiscard]] std::size_t argmax() const;

private:
    std::vector<double> p_;
};

// Raw logits of the final layer.
std::vector<double> logits(const ModelSpec& spec, const ParamSet& params, const Tensor& x);
ProbVector forward(const ModelSpec& spec, const ParamSet& params, const Tensor& x);
std::size_t predict(const ModelSpec& spec, const ParamSet& params, const Tensor& x);
// Argmax prediction for every sample, in order.
std::vector<std::size_t> predict_all(const ModelSpec& spec, const ParamSet& params, const SampleSet& set);

// dLoss/dx of the single-sample cross-entropy at x (no parameter gradients).
Tensor input_gradient(const ModelSpec& spec, const ParamSet& params, const Tensor& x, std::size_t label);

// Mean cross-entropy over the batch and its gradients.
LossAndGrads loss_and_grads(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch,
                            bool want_input_grads = false);
LossAndGrads loss_and_grads(const ModelSpec& spec, const ParamSet& params, const SampleSet& set,
                            std::span<const std::size_t> indices, bool want_input_grads = false);

// Mean loss only (no backward pass).
double mean_loss(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch);

enum class Direction { descend, ascend };

// params <- params -/+ lr * grads.
void sgd_step(ParamSet& params, std::span<const Tensor> grads, double lr, Direction direction);

double global_norm(std::span<const Tensor> grads);
// Rescale grads in place so their global L2 norm is at most max_norm.
void clip_global_norm(std::span<Tensor> grads, double max_norm);

// sum_i p_i ln(p_i / q_i), with 0 * ln(0 / q) = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);
double kl_divergence(const ProbVector& p, const ProbVector& q);

// Max over every parameter entry of |analytic - central difference| /
// max(|analytic|, |cd|, 1e-12). h must lie in (0, 1e-3].
double grad_check(const ModelSpec& spec, const ParamSet& params, std::span<const Sample> batch, double h);

}  // namespace meca::nn
