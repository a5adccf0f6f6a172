#pragma once

// Reference implementations used only by the tests. Each one is written from
// the textbook definition, not from the library code it checks.

#include <cstdint>
#include <random>
#include <vector>

#include "octmix/network.hpp"
#include "octmix/window.hpp"

namespace oracle {

/// Zero-phase FIR filtering by direct convolution over an explicitly padded
/// copy of `x` (edge-repeating mirror: d c b a | a b c d | d c b a).
std::vector<double> filter_direct(const std::vector<double>& x, const std::vector<double>& taps);

/// |H(f)| from separate cosine and sine sums.
double dft_magnitude(const std::vector<double>& taps, double freq_hz, double sample_rate_hz);

struct Metrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

/// Expands the matrix into individual (truth, predicted) samples and scores
/// them with precision/recall per class.
Metrics brute_force_metrics(const std::vector<std::vector<std::uint64_t>>& counts);

/// Central-difference gradient of `loss` with respect to every element of
/// `values`, perturbing in place.
template <typename Loss>
std::vector<double> central_difference(std::vector<double>& values, double h, Loss&& loss) {
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double saved = values[i];
        values[i] = saved + h;
        const double up = loss();
        values[i] = saved - h;
        const double down = loss();
        values[i] = saved;
        out[i] = (up - down) / (2.0 * h);
    }
    return out;
}

/// |a - b| / max(|a|, |b|, floor).
double relative_error(double a, double b, double floor = 1e-6);

/// Replays the documented mixing draw: Fisher-Yates pairing via std::shuffle
/// on 0..n-1, then lambda = G1 / (G1 + G2) with G ~ Gamma(alpha, 1).
struct Replay {
    std::vector<std::size_t> pairing;
    double lambda = 0.0;
};
Replay replay_mix_draw(std::size_t n, double alpha, std::mt19937_64& rng);

/// Random batch with iid N(0, 1) samples and one-hot labels.
octmix::LabeledBatch random_batch(std::size_t n, std::size_t timesteps, std::size_t channels, double rate,
                                  std::size_t classes, std::mt19937_64& rng);

/// Same, but every sample is a float32 value (as read from sensor files).
octmix::LabeledBatch random_float_batch(std::size_t n, std::size_t timesteps, std::size_t channels, double rate,
                                        std::size_t classes, std::mt19937_64& rng);

/// Random point on the probability simplex.
octmix::SoftLabel random_soft_label(std::size_t classes, std::mt19937_64& rng);

}  // namespace oracle
