#include "octmix/signal.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "octmix/error.hpp"

namespace octmix::signal {

namespace {

// Symmetric (edge-repeating) reflection; valid while the overhang is <= n.
std::size_t reflect_index(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (i < 0) return static_cast<std::size_t>(-i - 1);
    if (i >= n) return static_cast<std::size_t>(2 * n - i - 1);
    return static_cast<std::size_t>(i);
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

}  // namespace

FilterSpec FilterSpec::with_default_taps(double cutoff_hz, double sample_rate_hz) {
    return FilterSpec{cutoff_hz, default_num_taps(sample_rate_hz), sample_rate_hz};
}

void FilterSpec::validate() const {
    if (num_taps <= 0 || num_taps % 2 == 0) {
        throw InvalidSpecError("num_taps must be odd and positive, got " + std::to_string(num_taps));
    }
    if (!(cutoff_hz > 0.0) || !std::isfinite(cutoff_hz)) {
        throw InvalidSpecError("cutoff_hz must be positive");
    }
    if (!(sample_rate_hz > 0.0) || !std::isfinite(sample_rate_hz)) {
        throw InvalidSpecError("sample_rate_hz must be positive");
    }
}

int default_num_taps(double sample_rate_hz) {
    if (!(sample_rate_hz > 0.0)) throw InvalidSpecError("sample_rate_hz must be positive");
    const int n = static_cast<int>(std::ceil(1.27 * sample_rate_hz - 1e-9));
    return n % 2 == 1 ? n : n + 1;
}

FirKernel design_lowpass(const FilterSpec& spec) {
    spec.validate();
    const auto n = static_cast<std::size_t>(spec.num_taps);
    const std::size_t center = n / 2;
    FirKernel kernel{std::vector<double>(n, 0.0)};
    if (spec.pass_through()) {
        kernel.taps[center] = 1.0;
        return kernel;
    }
    const double fc = spec.cutoff_hz / spec.sample_rate_hz;  // cycles per sample
    for (std::size_t i = 0; i < n; ++i) {
        const double m = static_cast<double>(i) - static_cast<double>(center);
        const double hamming =
            n == 1 ? 1.0
                   : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                            static_cast<double>(n - 1));
        kernel.taps[i] = 2.0 * fc * sinc(2.0 * fc * m) * hamming;
    }
    // Mirror so that rounding in cos() cannot break exact symmetry.
    for (std::size_t i = 0; i < center; ++i) kernel.taps[n - 1 - i] = kernel.taps[i];
    double sum = 0.0;
    for (double t : kernel.taps) sum += t;
    for (double& t : kernel.taps) t /= sum;
    return kernel;
}

double magnitude_response(const FirKernel& kernel, double freq_hz, double sample_rate_hz) {
    std::complex<double> acc{0.0, 0.0};
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    for (std::size_t i = 0; i < kernel.taps.size(); ++i) {
        acc += kernel.taps[i] * std::polar(1.0, -w * static_cast<double>(i));
    }
    return std::abs(acc);
}

Decomposition split(const Window& x, const FirKernel& kernel) {
    const std::size_t taps = kernel.taps.size();
    const std::size_t t_len = x.timesteps();
    if (taps == 0 || taps % 2 == 0) throw InvalidSpecError("kernel must have an odd tap count");
    if (taps > 2 * t_len) {
        throw WindowTooShortError("kernel of " + std::to_string(taps) + " taps needs a window of at least " +
                                  std::to_string(taps / 2 + 1) + " timesteps, got " +
                                  std::to_string(t_len));
    }
    const std::size_t channels = x.channels();
    const auto half = static_cast<std::ptrdiff_t>(kernel.half_width());
    const auto n = static_cast<std::ptrdiff_t>(t_len);

    Decomposition out{Window(t_len, channels, x.sample_rate_hz()),
                      Window(t_len, channels, x.sample_rate_hz())};
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::ptrdiff_t t = 0; t < n; ++t) {
            const double centre = x(static_cast<std::size_t>(t), c);
            // High band as minus the kernel-weighted deviation from the centre
            // sample: equals x - (k * x) when the taps sum to one, and is
            // exactly zero on constant input.
            double dev = 0.0;
            for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(taps); ++j) {
                const double v = x(reflect_index(t + j - half, n), c);
                dev += kernel.taps[static_cast<std::size_t>(j)] * (v - centre);
            }
            double high = 0.0 - dev;
            double low = centre - high;
            if (low + high != centre) {
                high = centre - low;
                low = centre - high;
            }
            out.low(static_cast<std::size_t>(t), c) = low;
            out.high(static_cast<std::size_t>(t), c) = high;
        }
    }
    return out;
}

Window low_pass(const Window& x, const FirKernel& kernel) { return split(x, kernel).low; }

Window high_pass(const Window& x, const FirKernel& kernel) { return split(x, kernel).high; }

Decomposition decompose(const Window& x, const FilterSpec& spec) {
    return split(x, design_lowpass(spec));
}

}  // namespace octmix::signal
