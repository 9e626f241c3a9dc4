#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "meca/dataset.hpp"

namespace meca::attacks {

// How the pattern combines with an image.
//   blend:    x' = (1 - m) * x + m * t
//   additive: x' = x + m * t   (t may be signed; used by SIG)
// Both clip the result to [0, 1].
enum class TriggerMode { blend, additive };

struct TriggerSpec {
    Tensor mask;
    Tensor pattern;
    std::size_t target = 0;
    TriggerMode mode = TriggerMode::blend;
};

enum class AttackKind { badnet, blend, sig, tact, adaptive_blend };

std::string to_string(AttackKind kind);
AttackKind attack_from_string(const std::string& s);

struct PoisonPlan {
    AttackKind kind = AttackKind::badnet;
    double poison_ratio = 0.05;
    double cover_rate = 0.0;
    std::size_t source_class = 0;  // tact only
    TriggerSpec trigger;
    std::uint64_t seed = 0;
};

// Throws ConfigError if the trigger does not match `shape` or its values are out of range.
void validate(const TriggerSpec& trig, const Shape& shape);
void validate(const PoisonPlan& plan, const data::LabeledDataset& ds);

Tensor apply_trigger(const Tensor& x, const TriggerSpec& trig);

// 3x3 white square in the bottom-right corner of every channel.
TriggerSpec make_badnet(const Shape& shape, std::size_t target);

// Uniform blend with a pattern image. The pattern is resized (nearest
// neighbour) to the target geometry; a single-channel pattern is broadcast.
TriggerSpec make_blend(const Tensor& pattern_image, const Shape& shape, double alpha, std::size_t target);

// Horizontal sinusoid v(i, j) = delta * sin(2 pi j freq / W), added then clipped.
TriggerSpec make_sig(const Shape& shape, double delta, double freq, std::size_t target);

// Deterministic stand-in blend pattern: seeded uniform noise in [0, 1].
Tensor procedural_pattern(const Shape& shape, std::uint64_t seed);

inline constexpr double kSigDelta = 20.0 / 255.0;
inline constexpr double kSigFreq = 6.0;
inline constexpr double kBlendAlpha = 0.2;

// Builds the poisoned training set (D u D_p). Payload samples carry the
// trigger and, except for SIG, the target label. Cover samples carry the
// trigger and keep their true label. Output order is reshuffled.
data::LabeledDataset poison_dataset(const data::LabeledDataset& ds, const PoisonPlan& plan);

// Triggers every test sample whose label is not the target and relabels it to
// the target. With `source_class`, only that class is used (TaCT scoring).
data::LabeledDataset make_asr_testset(const data::LabeledDataset& test, const TriggerSpec& trig,
                                      std::optional<std::size_t> source_class = std::nullopt);

}  // namespace meca::attacks
