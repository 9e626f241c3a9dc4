#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "meca/errors.hpp"
#include "meca/nn.hpp"
#include "meca/train.hpp"

using namespace meca;
using namespace meca::nn;

namespace {

Tensor random_image(const Shape& shape, Rng& rng) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(0.0, 1.0);
    return t;
}

// Plain-loop forward pass used as an oracle for the Eigen/im2col engine.
std::vector<double> naive_logits(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
    std::vector<double> a(x.values().begin(), x.values().end());
    std::vector<std::size_t> dims = {spec.input.channels, spec.input.height, spec.input.width};
    std::size_t p = 0;
    for (const LayerSpec& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::dense: {
                const auto w = params.values[p].values();
                const auto b = params.values[p + 1].values();
                std::vector<double> out(l.out);
                for (std::size_t o = 0; o < l.out; ++o) {
                    long double s = b[o];
                    for (std::size_t i = 0; i < l.in; ++i) s += static_cast<long double>(w[o * l.in + i]) * a[i];
                    out[o] = static_cast<double>(s);
                }
                a = out;
                dims = {l.out};
                p += 2;
                break;
            }
            case LayerKind::conv2d: {
                const auto w = params.values[p].values();
                const auto b = params.values[p + 1].values();
                const long h = static_cast<long>(dims[1]), wd = static_cast<long>(dims[2]);
                const long k = static_cast<long>(l.kernel), pad = static_cast<long>(l.pad);
                const long ho = h + 2 * pad - k + 1, wo = wd + 2 * pad - k + 1;
                std::vector<double> out(l.out * ho * wo);
                for (std::size_t o = 0; o < l.out; ++o) {
                    for (long r = 0; r < ho; ++r) {
                        for (long q = 0; q < wo; ++q) {
                            long double s = b[o];
                            for (std::size_t c = 0; c < l.in; ++c) {
                                for (long i = 0; i < k; ++i) {
                                    for (long j = 0; j < k; ++j) {
                                        const long rr = r + i - pad, qq = q + j - pad;
                                        if (rr < 0 || rr >= h || qq < 0 || qq >= wd) continue;
                                        s += static_cast<long double>(w[((o * l.in + c) * k + i) * k + j]) *
                                             a[(c * h + rr) * wd + qq];
                                    }
                                }
                            }
                            out[(o * ho + r) * wo + q] = static_cast<double>(s);
                        }
                    }
                }
                a = out;
                dims = {l.out, static_cast<std::size_t>(ho), static_cast<std::size_t>(wo)};
                p += 2;
                break;
            }
            case LayerKind::relu:
                for (double& v : a) v = std::max(v, 0.0);
                break;
            case LayerKind::maxpool2: {
                const std::size_t c_n = dims[0], h = dims[1], wd = dims[2], ho = h / 2, wo = wd / 2;
                std::vector<double> out(c_n * ho * wo);
                for (std::size_t c = 0; c < c_n; ++c)
                    for (std::size_t r = 0; r < ho; ++r)
                        for (std::size_t q = 0; q < wo; ++q) {
                            double m = -INFINITY;
                            for (std::size_t i = 0; i < 2; ++i)
                                for (std::size_t j = 0; j < 2; ++j) m = std::max(m, a[(c * h + 2 * r + i) * wd + 2 * q + j]);
                            out[(c * ho + r) * wo + q] = m;
                        }
                a = out;
                dims = {c_n, ho, wo};
                break;
            }
            case LayerKind::flatten:
                dims = {a.size()};
                break;
        }
    }
    return a;
}

Sample make_sample(const Shape& shape, std::size_t label, Rng& rng) { return {random_image(shape, rng), label}; }

}  // namespace

TEST(Forward, ZeroParamsGiveUniformOutput) {
    const ModelSpec spec = default_cnn({1, 8, 8}, 10);
    Rng rng(1);
    const ProbVector p = forward(spec, zero_params(spec), random_image(spec.input, rng));
    ASSERT_EQ(p.size(), 10u);
    for (std::size_t k = 0; k < 10; ++k) EXPECT_DOUBLE_EQ(p[k], 0.1);
}

TEST(Forward, IdentityDenseLayerPicksHotIndex) {
    ModelSpec spec{{1, 1, 5}, {LayerSpec::flatten(), LayerSpec::dense(5, 5)}, 5};
    ParamSet params = zero_params(spec);
    for (std::size_t i = 0; i < 5; ++i) params.values[0].values()[i * 5 + i] = 1.0;
    for (std::size_t hot = 0; hot < 5; ++hot) {
        Tensor x(spec.input);
        x.values()[hot] = 1.0;
        EXPECT_EQ(predict(spec, params, x), hot);
    }
}

TEST(Forward, Seed42MlpMatchesPlainLoopOracle) {
    const ModelSpec spec = default_mlp({1, 4, 4}, 3, 6);
    Rng rng(42);
    const ParamSet params = init_params(spec, rng);
    Rng xr(43);
    const Tensor x = random_image(spec.input, xr);
    const auto got = logits(spec, params, x);
    const auto want = naive_logits(spec, params, x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
}

TEST(Forward, DefaultCnnMatchesPlainLoopOracle) {
    for (const Shape shape : {Shape{1, 8, 8}, Shape{3, 12, 12}}) {
        const ModelSpec spec = default_cnn(shape, 4);
        Rng rng(7);
        const ParamSet params = init_params(spec, rng);
        for (int t = 0; t < 3; ++t) {
            const Tensor x = random_image(shape, rng);
            const auto got = logits(spec, params, x);
            const auto want = naive_logits(spec, params, x);
            for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-12);
        }
    }
}

TEST(Forward, WrongInputSizeThrows) {
    const ModelSpec spec = default_mlp({1, 4, 4}, 3);
    EXPECT_THROW(forward(spec, zero_params(spec), Tensor(Shape{1, 5, 5})), ConfigError);
}

TEST(ModelSpec, MismatchedLayersRejected) {
    ModelSpec bad{{1, 4, 4}, {LayerSpec::flatten(), LayerSpec::dense(15, 3)}, 3};
    EXPECT_THROW(validate(bad), ConfigError);
    ModelSpec wrong_k{{1, 4, 4}, {LayerSpec::flatten(), LayerSpec::dense(16, 3)}, 4};
    EXPECT_THROW(validate(wrong_k), ConfigError);
}

TEST(Loss, UniformOutputGivesLnK) {
    const ModelSpec spec = default_mlp({1, 3, 3}, 10);
    Rng rng(2);
    std::vector<Sample> batch = {make_sample(spec.input, 4, rng)};
    EXPECT_NEAR(mean_loss(spec, zero_params(spec), batch), std::log(10.0), 1e-12);
}

TEST(Loss, SaturatedPredictionHitsFloorBound) {
    ModelSpec spec{{1, 1, 3}, {LayerSpec::flatten(), LayerSpec::dense(3, 4)}, 4};
    ParamSet params = zero_params(spec);
    params.values[1].values()[2] = 1000.0;
    std::vector<Sample> batch = {{Tensor(spec.input), 2}};
    const double expected = -std::log(1.0 / (1.0 + 3.0 * kProbFloor));
    EXPECT_NEAR(mean_loss(spec, params, batch), expected, 1e-15);
    EXPECT_NEAR(expected, -std::log(1.0 - 3.0 * kProbFloor), 1e-20);
}

TEST(Sgd, ZeroGradsLeaveParamsUnchanged) {
    const ModelSpec spec = default_mlp({1, 3, 3}, 3);
    Rng rng(3);
    ParamSet params = init_params(spec, rng);
    const ParamSet before = params;
    std::vector<Tensor> grads;
    for (const auto& v : params.values) grads.push_back(Tensor::zeros_like(v));
    sgd_step(params, grads, 0.5, Direction::descend);
    EXPECT_EQ(params, before);
}

TEST(Sgd, SingleWeightArithmetic) {
    ParamSet params{{"w"}, {Tensor(std::vector<std::size_t>{1}, 1.0)}};
    const std::vector<Tensor> g = {Tensor(std::vector<std::size_t>{1}, 2.0)};
    ParamSet down = params, up = params;
    sgd_step(down, g, 0.1, Direction::descend);
    sgd_step(up, g, 0.1, Direction::ascend);
    EXPECT_DOUBLE_EQ(down.values[0].values()[0], 0.8);
    EXPECT_DOUBLE_EQ(up.values[0].values()[0], 1.2);
}

TEST(Sgd, ClipGlobalNorm) {
    std::vector<Tensor> g = {Tensor(std::vector<std::size_t>{2}, std::vector<double>{3.0, 0.0}), Tensor(std::vector<std::size_t>{1}, 4.0)};
    EXPECT_DOUBLE_EQ(global_norm(g), 5.0);
    clip_global_norm(g, 1.0);
    EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
    EXPECT_NEAR(g[0].values()[0], 0.6, 1e-15);
    clip_global_norm(g, 10.0);
    EXPECT_NEAR(global_norm(g), 1.0, 1e-15);
}

TEST(Kl, IdenticalDistributionsGiveZero) {
    const std::vector<double> p = {0.2, 0.3, 0.5};
    EXPECT_EQ(kl_divergence(p, p), 0.0);
}

TEST(Kl, PointMassAgainstUniformIsLn2) {
    const std::vector<double> p = {1.0, 0.0}, q = {0.5, 0.5};
    EXPECT_NEAR(kl_divergence(p, q), std::log(2.0), 1e-15);
}

TEST(Kl, MatchesPerTermSummation) {
    Rng rng(11);
    for (int t = 0; t < 200; ++t) {
        const std::size_t k = 2 + rng.index(12);
        std::vector<double> p(k), q(k);
        for (auto* v : {&p, &q}) {
            double s = 0.0;
            for (double& x : *v) s += (x = rng.uniform(1e-3, 1.0));
            for (double& x : *v) x /= s;
        }
        long double ref = 0.0L;
        for (std::size_t i = 0; i < k; ++i) ref += static_cast<long double>(p[i]) * std::log(static_cast<long double>(p[i]) / q[i]);
        EXPECT_NEAR(kl_divergence(p, q), static_cast<double>(ref), 1e-13);
    }
}

TEST(Kl, NonNegativeForNearlyEqualDistributions) {
    std::vector<double> p = {0.25, 0.25, 0.25, 0.25}, q = {0.25 + 1e-13, 0.25 - 1e-13, 0.25, 0.25};
    EXPECT_GE(kl_divergence(p, q), 0.0);
}

TEST(GradCheck, LinearModelIsExact) {
    ModelSpec spec{{1, 2, 3}, {LayerSpec::flatten(), LayerSpec::dense(6, 4)}, 4};
    Rng rng(5);
    const ParamSet params = init_params(spec, rng);
    std::vector<Sample> batch;
    for (std::size_t i = 0; i < 4; ++i) batch.push_back(make_sample(spec.input, i, rng));
    EXPECT_LT(grad_check(spec, params, batch, 1e-6), 1e-8);
}

TEST(GradCheck, ConvPathBelowTolerance) {
    ModelSpec spec{{2, 6, 6},
                   {LayerSpec::conv2d(2, 3, 3, 1), LayerSpec::relu(), LayerSpec::maxpool2(), LayerSpec::flatten(),
                    LayerSpec::dense(27, 3)},
                   3};
    Rng rng(6);
    const ParamSet params = init_params(spec, rng);
    std::vector<Sample> batch;
    for (std::size_t i = 0; i < 3; ++i) batch.push_back(make_sample(spec.input, i, rng));
    EXPECT_LT(grad_check(spec, params, batch, 1e-6), 1e-5);
}

TEST(GradCheck, ParameterFreeModelGivesZero) {
    ModelSpec spec{{1, 1, 3}, {LayerSpec::flatten(), LayerSpec::relu()}, 3};
    Rng rng(8);
    std::vector<Sample> batch = {make_sample(spec.input, 0, rng)};
    EXPECT_EQ(grad_check(spec, zero_params(spec), batch, 1e-6), 0.0);
}

TEST(GradCheck, RejectsBadStep) {
    const ModelSpec spec = default_mlp({1, 2, 2}, 2);
    Rng rng(9);
    std::vector<Sample> batch = {make_sample(spec.input, 0, rng)};
    EXPECT_THROW(grad_check(spec, zero_params(spec), batch, 0.0), ConfigError);
    EXPECT_THROW(grad_check(spec, zero_params(spec), batch, 0.1), ConfigError);
}

TEST(InputGradient, MatchesFiniteDifferences) {
    const ModelSpec spec = default_cnn({1, 8, 8}, 3);
    Rng rng(10);
    const ParamSet params = init_params(spec, rng);
    Tensor x = random_image(spec.input, rng);
    const Tensor g = input_gradient(spec, params, x, 2);
    const double h = 1e-6;
    for (std::size_t i = 0; i < x.size(); i += 7) {
        Tensor xp = x, xm = x;
        xp.values()[i] += h;
        xm.values()[i] -= h;
        std::vector<Sample> bp = {{xp, 2}}, bm = {{xm, 2}};
        const double fd = (mean_loss(spec, params, bp) - mean_loss(spec, params, bm)) / (2 * h);
        EXPECT_NEAR(g.values()[i], fd, 1e-6 + 1e-5 * std::abs(fd));
    }
}

TEST(Init, SeededAndFinite) {
    const ModelSpec spec = default_cnn({1, 8, 8}, 10);
    Rng a(3), b(3), c(4);
    const ParamSet pa = init_params(spec, a);
    EXPECT_EQ(pa, init_params(spec, b));
    EXPECT_NE(pa, init_params(spec, c));
    EXPECT_TRUE(pa.all_finite());
}

TEST(Train, EpochLowersLossOnSeparableData) {
    const ModelSpec spec = default_mlp({1, 2, 2}, 2, 8);
    SampleSet set{spec.input, 2, {}};
    Rng rng(12);
    for (int i = 0; i < 64; ++i) {
        Tensor x(spec.input);
        const std::size_t y = i % 2;
        for (double& v : x.values()) v = rng.uniform(0.0, 0.3) + (y ? 0.6 : 0.0);
        set.samples.push_back({x, y});
    }
    ParamSet params = init_params(spec, rng);
    const double before = mean_loss(spec, params, set.samples);
    for (int e = 0; e < 20; ++e) run_epoch(spec, params, set, {0.5, 8, Direction::descend, 0.0}, rng);
    EXPECT_LT(mean_loss(spec, params, set.samples), before);
}
