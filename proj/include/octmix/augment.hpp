#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "octmix/random.hpp"
#include "octmix/signal.hpp"
#include "octmix/window.hpp"

namespace octmix::augment {

/// Symmetric Beta(alpha, alpha) shape.
struct BetaParams {
    double alpha = 1.0;
};

/// lambda ~ Beta(alpha, alpha), drawn as G1 / (G1 + G2) with G ~ Gamma(alpha, 1).
double sample_lambda(const BetaParams& params, Rng& rng);

/// Partner index for every batch slot plus the single per-batch mixing weight.
struct MixPlan {
    std::vector<std::size_t> pairing;
    double lambda = 1.0;

    void validate(std::size_t n) const;
};

/// Shuffles 0..n-1, then draws lambda; the same stream consumption for every
/// synthetic primitive, so two primitives fed equal seeds see equal plans.
MixPlan draw_mix_plan(std::size_t n, const BetaParams& params, Rng& rng);

struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;
};

/// Row-major 3x3 matrix.
using Rotation3 = std::array<double, 9>;

/// Uniform over unit quaternions (and therefore over SO(3)).
Quaternion sample_unit_quaternion(Rng& rng);
Rotation3 rotation_matrix(const Quaternion& q);

/// Applies rotations[i] to every (x, y, z) channel triple of window i.
LabeledBatch rotate(const LabeledBatch& batch, std::span<const Rotation3> rotations);
LabeledBatch rotation(const LabeledBatch& batch, Rng& rng);

LabeledBatch mixup(const LabeledBatch& batch, const MixPlan& plan);
LabeledBatch mixup(const LabeledBatch& batch, const BetaParams& params, Rng& rng);

/// Cut point round(lambda * T) clamped to [0, T].
std::size_t ricap_cut(std::size_t timesteps, double lambda);

/// Front of x_i up to the cut, tail of x_j (in place) after it; labels weighted
/// by the segment-length fractions.
LabeledBatch ricap_1d(const LabeledBatch& batch, const MixPlan& plan);
LabeledBatch ricap_1d(const LabeledBatch& batch, const BetaParams& params, Rng& rng);

/// The two frequency-swapped composites for one (i, j) pair.
struct OctavePair {
    Window g1;  // low(x_i) + high(x_j)
    Window g2;  // low(x_j) + high(x_i)
};

OctavePair octave_pair(const signal::Decomposition& xi, const signal::Decomposition& xj);

LabeledBatch octave_mix(const LabeledBatch& batch, const MixPlan& plan, const signal::FilterSpec& spec);
LabeledBatch octave_mix(const LabeledBatch& batch, const BetaParams& params,
                        const signal::FilterSpec& spec, Rng& rng);

// ---------------------------------------------------------------------------
// Policies

struct RotationStep {
    friend bool operator==(const RotationStep&, const RotationStep&) = default;
};
struct MixupStep {
    double alpha = 5.0;
    friend bool operator==(const MixupStep&, const MixupStep&) = default;
};
struct RicapStep {
    double alpha = 5.0;
    friend bool operator==(const RicapStep&, const RicapStep&) = default;
};
struct OctaveMixStep {
    double alpha = 0.5;
    double cutoff_hz = 2.1;
    int num_taps = 0;  // 0 = default for the batch's sample rate
    friend bool operator==(const OctaveMixStep&, const OctaveMixStep&) = default;
};

using Step = std::variant<RotationStep, MixupStep, RicapStep, OctaveMixStep>;

bool is_synthetic(const Step& step);
std::string describe(const Step& step);

struct AugPolicy {
    std::vector<Step> steps;
    double apply_prob = 0.5;

    /// Structural checks only (probability range, one synthetic step at most).
    void validate() const;
    /// Structural checks plus compatibility with windows of the given shape.
    void validate_for(std::size_t timesteps, std::size_t channels, double sample_rate_hz) const;
    std::string describe() const;

    friend bool operator==(const AugPolicy&, const AugPolicy&) = default;
};

/// Filter spec an OctaveMixStep resolves to at the given sample rate.
signal::FilterSpec resolve_filter(const OctaveMixStep& step, double sample_rate_hz);

/// Runs the steps in order on `batch`.
LabeledBatch apply_steps(const LabeledBatch& batch, std::span<const Step> steps, Rng& rng);

/// One Bernoulli(apply_prob) draw for the whole batch. On success returns the
/// originals followed by an augmented copy (2n rows); otherwise the batch as is.
LabeledBatch apply_policy(const LabeledBatch& batch, const AugPolicy& policy, Rng& rng);

/// Number of primitive invocations (rotation, mixup, RICAP, Octave Mix) made
/// by this process so far.
std::uint64_t invocation_count() noexcept;

}  // namespace octmix::augment
