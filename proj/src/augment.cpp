#include "octmix/augment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "octmix/error.hpp"

namespace octmix::augment {

namespace {

std::atomic<std::uint64_t> g_invocations{0};

void count_invocation() { g_invocations.fetch_add(1, std::memory_order_relaxed); }

void check_alpha(double alpha) {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) {
        throw InvalidParameterError("Beta alpha must be positive, got " + std::to_string(alpha));
    }
}

Window combine(const Window& a, const Window& b, double lambda) {
    Window out(a.timesteps(), a.channels(), a.sample_rate_hz());
    auto dst = out.data();
    auto xa = a.data();
    auto xb = b.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = lambda * xa[k] + (1.0 - lambda) * xb[k];
    return out;
}

Window add(const Window& a, const Window& b) {
    Window out(a.timesteps(), a.channels(), a.sample_rate_hz());
    auto dst = out.data();
    auto xa = a.data();
    auto xb = b.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = xa[k] + xb[k];
    return out;
}

std::string format_number(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
}

}  // namespace

double sample_lambda(const BetaParams& params, Rng& rng) {
    check_alpha(params.alpha);
    std::gamma_distribution<double> gamma(params.alpha, 1.0);
    for (;;) {
        const double g1 = gamma(rng);
        const double g2 = gamma(rng);
        const double sum = g1 + g2;
        // Both draws can underflow to zero for very small alpha.
        if (sum > 0.0) return std::clamp(g1 / sum, 0.0, 1.0);
    }
}

void MixPlan::validate(std::size_t n) const {
    if (pairing.size() != n) throw ShapeError("mix plan pairing does not match batch size");
    std::vector<bool> seen(n, false);
    for (std::size_t j : pairing) {
        if (j >= n || seen[j]) throw InvalidParameterError("mix plan pairing is not a permutation");
        seen[j] = true;
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidParameterError("mix plan lambda outside [0, 1]");
}

MixPlan draw_mix_plan(std::size_t n, const BetaParams& params, Rng& rng) {
    check_alpha(params.alpha);
    MixPlan plan;
    plan.pairing.resize(n);
    std::iota(plan.pairing.begin(), plan.pairing.end(), std::size_t{0});
    std::shuffle(plan.pairing.begin(), plan.pairing.end(), rng);
    plan.lambda = sample_lambda(params, rng);
    return plan;
}

Quaternion sample_unit_quaternion(Rng& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double u1 = unit(rng);
    const double u2 = unit(rng);
    const double u3 = unit(rng);
    const double a = std::sqrt(1.0 - u1);
    const double b = std::sqrt(u1);
    const double t2 = 2.0 * std::numbers::pi * u2;
    const double t3 = 2.0 * std::numbers::pi * u3;
    return Quaternion{b * std::cos(t3), a * std::sin(t2), a * std::cos(t2), b * std::sin(t3)};
}

Rotation3 rotation_matrix(const Quaternion& q) {
    const double n = std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
    const double w = q.w / n, x = q.x / n, y = q.y / n, z = q.z / n;
    return Rotation3{1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z),       2.0 * (x * z + w * y),
                     2.0 * (x * y + w * z),       1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
                     2.0 * (x * z - w * y),       2.0 * (y * z + w * x),       1.0 - 2.0 * (x * x + y * y)};
}

LabeledBatch rotate(const LabeledBatch& batch, std::span<const Rotation3> rotations) {
    batch.validate();
    const std::size_t channels = batch.channels();
    if (channels % 3 != 0) {
        throw ChannelGroupingError("rotation needs channels in (x, y, z) triples, got " +
                                   std::to_string(channels) + " channels");
    }
    if (rotations.size() != batch.size()) throw ShapeError("one rotation per window required");
    count_invocation();
    LabeledBatch out = batch;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const Rotation3& r = rotations[i];
        const Window& src = batch.windows[i];
        Window& dst = out.windows[i];
        for (std::size_t t = 0; t < src.timesteps(); ++t) {
            for (std::size_t g = 0; g < channels; g += 3) {
                const double v0 = src(t, g), v1 = src(t, g + 1), v2 = src(t, g + 2);
                dst(t, g) = r[0] * v0 + r[1] * v1 + r[2] * v2;
                dst(t, g + 1) = r[3] * v0 + r[4] * v1 + r[5] * v2;
                dst(t, g + 2) = r[6] * v0 + r[7] * v1 + r[8] * v2;
            }
        }
    }
    return out;
}

LabeledBatch rotation(const LabeledBatch& batch, Rng& rng) {
    batch.validate();
    if (batch.channels() % 3 != 0) {
        throw ChannelGroupingError("rotation needs channels in (x, y, z) triples, got " +
                                   std::to_string(batch.channels()) + " channels");
    }
    std::vector<Rotation3> rotations;
    rotations.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        rotations.push_back(rotation_matrix(sample_unit_quaternion(rng)));
    }
    return rotate(batch, rotations);
}

LabeledBatch mixup(const LabeledBatch& batch, const MixPlan& plan) {
    batch.validate();
    plan.validate(batch.size());
    count_invocation();
    LabeledBatch out;
    out.windows.reserve(batch.size());
    out.labels.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t j = plan.pairing[i];
        out.windows.push_back(combine(batch.windows[i], batch.windows[j], plan.lambda));
        out.labels.push_back(blend(batch.labels[i], batch.labels[j], plan.lambda));
    }
    return out;
}

LabeledBatch mixup(const LabeledBatch& batch, const BetaParams& params, Rng& rng) {
    batch.validate();
    return mixup(batch, draw_mix_plan(batch.size(), params, rng));
}

std::size_t ricap_cut(std::size_t timesteps, double lambda) {
    const double s = std::round(lambda * static_cast<double>(timesteps));
    return static_cast<std::size_t>(std::clamp(s, 0.0, static_cast<double>(timesteps)));
}

LabeledBatch ricap_1d(const LabeledBatch& batch, const MixPlan& plan) {
    batch.validate();
    plan.validate(batch.size());
    const std::size_t t_len = batch.timesteps();
    if (t_len < 2) throw ShapeError("1-D RICAP needs at least 2 timesteps");
    count_invocation();
    const std::size_t cut = ricap_cut(t_len, plan.lambda);
    const double weight = static_cast<double>(cut) / static_cast<double>(t_len);
    const std::size_t channels = batch.channels();
    LabeledBatch out;
    out.windows.reserve(batch.size());
    out.labels.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t j = plan.pairing[i];
        Window w = batch.windows[j];
        auto dst = w.data();
        auto front = batch.windows[i].data();
        std::copy(front.begin(), front.begin() + static_cast<std::ptrdiff_t>(cut * channels), dst.begin());
        out.windows.push_back(std::move(w));
        out.labels.push_back(blend(batch.labels[i], batch.labels[j], weight));
    }
    return out;
}

LabeledBatch ricap_1d(const LabeledBatch& batch, const BetaParams& params, Rng& rng) {
    batch.validate();
    return ricap_1d(batch, draw_mix_plan(batch.size(), params, rng));
}

OctavePair octave_pair(const signal::Decomposition& xi, const signal::Decomposition& xj) {
    return OctavePair{add(xi.low, xj.high), add(xj.low, xi.high)};
}

LabeledBatch octave_mix(const LabeledBatch& batch, const MixPlan& plan, const signal::FilterSpec& spec) {
    batch.validate();
    plan.validate(batch.size());
    if (spec.sample_rate_hz != batch.sample_rate_hz()) {
        throw InvalidSpecError("filter sample rate does not match the batch's sample rate");
    }
    const signal::FirKernel kernel = signal::design_lowpass(spec);
    count_invocation();
    std::vector<signal::Decomposition> bands;
    bands.reserve(batch.size());
    for (const Window& w : batch.windows) bands.push_back(signal::split(w, kernel));

    LabeledBatch out;
    out.windows.reserve(batch.size());
    out.labels.reserve(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const std::size_t j = plan.pairing[i];
        const OctavePair pair = octave_pair(bands[i], bands[j]);
        out.windows.push_back(combine(pair.g1, pair.g2, plan.lambda));
        out.labels.push_back(blend(batch.labels[i], batch.labels[j], plan.lambda));
    }
    return out;
}

LabeledBatch octave_mix(const LabeledBatch& batch, const BetaParams& params,
                        const signal::FilterSpec& spec, Rng& rng) {
    batch.validate();
    spec.validate();
    return octave_mix(batch, draw_mix_plan(batch.size(), params, rng), spec);
}

bool is_synthetic(const Step& step) { return !std::holds_alternative<RotationStep>(step); }

std::string describe(const Step& step) {
    struct Visitor {
        std::string operator()(const RotationStep&) const { return "Rotation"; }
        std::string operator()(const MixupStep& s) const { return "Mixup(alpha=" + format_number(s.alpha) + ")"; }
        std::string operator()(const RicapStep& s) const { return "RICAP(alpha=" + format_number(s.alpha) + ")"; }
        std::string operator()(const OctaveMixStep& s) const {
            return "OctaveMix(alpha=" + format_number(s.alpha) + ", cutoff_hz=" + format_number(s.cutoff_hz) + ")";
        }
    };
    return std::visit(Visitor{}, step);
}

void AugPolicy::validate() const {
    if (!(apply_prob >= 0.0 && apply_prob <= 1.0)) {
        throw InvalidParameterError("apply_prob must lie in [0, 1]");
    }
    std::size_t synthetic = 0;
    for (const Step& step : steps) {
        if (is_synthetic(step)) ++synthetic;
        if (const auto* m = std::get_if<MixupStep>(&step)) check_alpha(m->alpha);
        if (const auto* r = std::get_if<RicapStep>(&step)) check_alpha(r->alpha);
        if (const auto* o = std::get_if<OctaveMixStep>(&step)) {
            check_alpha(o->alpha);
            if (!(o->cutoff_hz > 0.0)) throw InvalidSpecError("OctaveMix cutoff_hz must be positive");
            if (o->num_taps < 0 || (o->num_taps > 0 && o->num_taps % 2 == 0)) {
                throw InvalidSpecError("OctaveMix num_taps must be odd (or 0 for the default)");
            }
        }
    }
    if (synthetic > 1) throw InvalidParameterError("a policy may hold at most one synthetic step");
}

void AugPolicy::validate_for(std::size_t timesteps, std::size_t channels, double sample_rate_hz) const {
    validate();
    for (const Step& step : steps) {
        if (std::holds_alternative<RotationStep>(step) && channels % 3 != 0) {
            throw ChannelGroupingError("rotation needs channels in (x, y, z) triples, got " +
                                       std::to_string(channels) + " channels");
        }
        if (std::holds_alternative<RicapStep>(step) && timesteps < 2) {
            throw ShapeError("1-D RICAP needs at least 2 timesteps");
        }
        if (const auto* o = std::get_if<OctaveMixStep>(&step)) {
            const signal::FilterSpec spec = resolve_filter(*o, sample_rate_hz);
            spec.validate();
            if (static_cast<std::size_t>(spec.num_taps) > 2 * timesteps) {
                throw WindowTooShortError("OctaveMix filter of " + std::to_string(spec.num_taps) +
                                          " taps is too long for windows of " + std::to_string(timesteps) +
                                          " timesteps");
            }
        }
    }
}

std::string AugPolicy::describe() const {
    std::string text;
    for (const Step& step : steps) {
        if (!text.empty()) text += " > ";
        text += augment::describe(step);
    }
    if (text.empty()) text = "None";
    return text + " @p=" + format_number(apply_prob);
}

signal::FilterSpec resolve_filter(const OctaveMixStep& step, double sample_rate_hz) {
    const int taps = step.num_taps > 0 ? step.num_taps : signal::default_num_taps(sample_rate_hz);
    return signal::FilterSpec{step.cutoff_hz, taps, sample_rate_hz};
}

LabeledBatch apply_steps(const LabeledBatch& batch, std::span<const Step> steps, Rng& rng) {
    LabeledBatch current = batch;
    for (const Step& step : steps) {
        if (std::holds_alternative<RotationStep>(step)) {
            current = rotation(current, rng);
        } else if (const auto* m = std::get_if<MixupStep>(&step)) {
            current = mixup(current, BetaParams{m->alpha}, rng);
        } else if (const auto* r = std::get_if<RicapStep>(&step)) {
            current = ricap_1d(current, BetaParams{r->alpha}, rng);
        } else if (const auto* o = std::get_if<OctaveMixStep>(&step)) {
            current = octave_mix(current, BetaParams{o->alpha},
                                 resolve_filter(*o, current.sample_rate_hz()), rng);
        }
    }
    return current;
}

LabeledBatch apply_policy(const LabeledBatch& batch, const AugPolicy& policy, Rng& rng) {
    batch.validate();
    policy.validate();
    std::bernoulli_distribution coin(policy.apply_prob);
    if (!coin(rng)) return batch;
    LabeledBatch out = batch;
    out.append(apply_steps(batch, policy.steps, rng));
    return out;
}

std::uint64_t invocation_count() noexcept { return g_invocations.load(std::memory_order_relaxed); }

}  // namespace octmix::augment
