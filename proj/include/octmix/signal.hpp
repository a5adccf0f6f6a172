#pragma once

#include <vector>

#include "octmix/window.hpp"

namespace octmix::signal {

/// Cutoff (Hz), odd tap count and sampling rate of a linear-phase low-pass FIR.
/// A cutoff at or above Nyquist is legal and means "no decomposition".
struct FilterSpec {
    double cutoff_hz = 2.1;
    int num_taps = 127;
    double sample_rate_hz = 100.0;

    /// Spec with the default tap count for `sample_rate_hz`.
    static FilterSpec with_default_taps(double cutoff_hz, double sample_rate_hz);

    bool pass_through() const noexcept { return cutoff_hz >= sample_rate_hz / 2.0; }

    /// Throws InvalidSpecError.
    void validate() const;
};

/// odd(ceil(1.27 * fs)): 127 taps at 100 Hz, 65 at 50 Hz.
int default_num_taps(double sample_rate_hz);

struct FirKernel {
    std::vector<double> taps;

    std::size_t half_width() const noexcept { return taps.size() / 2; }
};

/// Hamming-windowed sinc low-pass, normalized to unit DC gain. A pass-through
/// spec yields the unit impulse.
FirKernel design_lowpass(const FilterSpec& spec);

/// Magnitude of the kernel's response at `freq_hz`.
double magnitude_response(const FirKernel& kernel, double freq_hz, double sample_rate_hz);

struct Decomposition {
    Window low;
    Window high;
};

/// Splits every channel of `x` into a zero-phase low band (the kernel applied
/// with symmetric-reflection padding) and the residual high band. The two
/// bands always satisfy low + high == x elementwise; the low band is nudged by
/// at most a rounding error so that this holds in floating point too.
Decomposition split(const Window& x, const FirKernel& kernel);

Window low_pass(const Window& x, const FirKernel& kernel);
Window high_pass(const Window& x, const FirKernel& kernel);
Decomposition decompose(const Window& x, const FilterSpec& spec);

}  // namespace octmix::signal
