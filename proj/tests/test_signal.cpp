#include <doctest.h>

#include <cmath>
#include <random>

#include "octmix/error.hpp"
#include "octmix/signal.hpp"
#include "oracles.hpp"

using namespace octmix;
using namespace octmix::signal;

namespace {

std::vector<double> channel(const Window& w, std::size_t c) {
    std::vector<double> out;
    for (std::size_t t = 0; t < w.timesteps(); ++t) out.push_back(w(t, c));
    return out;
}

}  // namespace

TEST_SUITE("signal") {

TEST_CASE("default tap count") {
    CHECK(default_num_taps(100.0) == 127);
    CHECK(default_num_taps(50.0) == 65);
    CHECK(default_num_taps(200.0) == 255);
    CHECK_THROWS_AS(default_num_taps(0.0), InvalidSpecError);
}

TEST_CASE("spec validation") {
    CHECK_THROWS_AS((FilterSpec{2.1, 126, 100.0}.validate()), InvalidSpecError);
    CHECK_THROWS_AS((FilterSpec{0.0, 127, 100.0}.validate()), InvalidSpecError);
    CHECK_THROWS_AS((FilterSpec{-1.0, 127, 100.0}.validate()), InvalidSpecError);
    CHECK_THROWS_AS((FilterSpec{2.1, 127, 0.0}.validate()), InvalidSpecError);
    CHECK((FilterSpec{50.0, 127, 100.0}.pass_through()));
    CHECK_FALSE((FilterSpec{49.9, 127, 100.0}.pass_through()));
}

TEST_CASE("kernel matches an independent windowed-sinc design") {
    // Frozen from a reference Hamming firwin(127, 2.1 Hz, fs = 100 Hz) design.
    const FirKernel k = design_lowpass({2.1, 127, 100.0});
    REQUIRE(k.taps.size() == 127);
    CHECK(k.taps[63] == doctest::Approx(0.041924513790728576).epsilon(1e-12));
    CHECK(k.taps[0] == doctest::Approx(0.0003617736408339752).epsilon(1e-10));
    CHECK(k.taps[40] == doctest::Approx(0.0010739538433506737).epsilon(1e-10));
    CHECK(k.taps[83] == doctest::Approx(0.006043037023570619).epsilon(1e-10));
    const FirKernel k50 = design_lowpass(FilterSpec::with_default_taps(5.1, 50.0));
    CHECK(k50.taps.size() == 65);
    CHECK(k50.taps[32] == doctest::Approx(0.2038168964108462).epsilon(1e-12));
    CHECK(k50.taps[10] == doctest::Approx(0.004108808709810231).epsilon(1e-10));
}

TEST_CASE("kernel is symmetric with unit DC gain") {
    for (double fc : {0.1, 2.1, 5.1, 20.0}) {
        const FirKernel k = design_lowpass(FilterSpec::with_default_taps(fc, 100.0));
        double sum = 0.0;
        for (double t : k.taps) sum += t;
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
        for (std::size_t i = 0; i < k.taps.size(); ++i) CHECK(k.taps[i] == k.taps[k.taps.size() - 1 - i]);
    }
}

TEST_CASE("pass-through kernel is the unit impulse") {
    const FirKernel k = design_lowpass({50.0, 127, 100.0});
    for (std::size_t i = 0; i < k.taps.size(); ++i) CHECK(k.taps[i] == (i == 63 ? 1.0 : 0.0));
}

TEST_CASE("magnitude response agrees with a direct DFT") {
    const FirKernel k = design_lowpass({2.1, 127, 100.0});
    for (double f : {0.0, 0.5, 2.1, 4.0, 10.0, 25.0, 49.0}) {
        CHECK(magnitude_response(k, f, 100.0) == doctest::Approx(oracle::dft_magnitude(k.taps, f, 100.0)).epsilon(1e-9));
    }
    // Frozen reference magnitudes.
    CHECK(magnitude_response(k, 0.0, 100.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(magnitude_response(k, 2.1, 100.0) == doctest::Approx(0.4996964659959387).epsilon(1e-9));
    CHECK(magnitude_response(k, 10.0, 100.0) == doctest::Approx(0.0009839436194662545).epsilon(1e-6));
    CHECK(magnitude_response(k, 25.0, 100.0) < 0.001);
}

TEST_CASE("low-pass equals direct convolution over a mirrored pad") {
    std::vector<double> x;
    for (int t = 0; t < 256; ++t) x.push_back(std::sin(0.05 * t) + 0.3 * std::cos(0.9 * t) + t / 100.0);
    const Window w(x, 256, 1, 100.0);
    const FirKernel k = design_lowpass({2.1, 127, 100.0});
    const std::vector<double> low = channel(low_pass(w, k), 0);
    const std::vector<double> ref = oracle::filter_direct(x, k.taps);
    for (std::size_t t = 0; t < x.size(); ++t) CHECK(low[t] == doctest::Approx(ref[t]).epsilon(1e-12));
    // Frozen values from a reference zero-phase filter with mirror padding.
    CHECK(low[0] == doctest::Approx(0.32635336106199814).epsilon(1e-12));
    CHECK(low[1] == doctest::Approx(0.33060836230091706).epsilon(1e-12));
    CHECK(low[100] == doctest::Approx(0.04619753049150671).epsilon(1e-10));
    CHECK(low[200] == doctest::Approx(1.457126649970493).epsilon(1e-12));
    CHECK(low[255] == doctest::Approx(2.4068835651412805).epsilon(1e-12));
}

TEST_CASE("constant windows pass the low band exactly") {
    const Window w(std::vector<double>(64 * 3, 9.81), 64, 3, 100.0);
    const Decomposition d = decompose(w, {2.1, 127, 100.0});
    for (double v : d.low.data()) CHECK(v == doctest::Approx(9.81).epsilon(1e-12));
    for (double v : d.high.data()) CHECK(std::abs(v) <= 1e-12);
}

TEST_CASE("sinusoids land in the expected band") {
    std::vector<double> slow, fast;
    for (int t = 0; t < 1024; ++t) {
        slow.push_back(std::sin(2 * M_PI * 0.3 * t / 100.0));
        fast.push_back(std::sin(2 * M_PI * 15.0 * t / 100.0));
    }
    const FilterSpec spec{2.1, 127, 100.0};
    const Decomposition ds = decompose(Window(slow, 1024, 1, 100.0), spec);
    const Decomposition df = decompose(Window(fast, 1024, 1, 100.0), spec);
    double slow_high = 0.0, fast_low = 0.0;
    for (std::size_t t = 200; t < 824; ++t) {
        slow_high = std::max(slow_high, std::abs(ds.high(t, 0)));
        fast_low = std::max(fast_low, std::abs(df.low(t, 0)));
    }
    CHECK(slow_high < 0.01);
    CHECK(fast_low < 0.01);
}

TEST_CASE("decomposition reconstructs float32-valued input bitwise") {
    std::mt19937_64 gen(11);
    for (double fc : {0.1, 2.1, 5.1, 30.0, 50.0}) {
        const LabeledBatch b = oracle::random_float_batch(4, 128, 3, 100.0, 2, gen);
        for (const Window& w : b.windows) {
            const Decomposition d = decompose(w, FilterSpec::with_default_taps(fc, 100.0));
            for (std::size_t i = 0; i < w.data().size(); ++i) {
                CHECK(d.low.data()[i] + d.high.data()[i] == w.data()[i]);
            }
        }
    }
}

TEST_CASE("pass-through gives low = x and high = +0") {
    std::mt19937_64 gen(12);
    const LabeledBatch b = oracle::random_batch(1, 64, 3, 100.0, 2, gen);
    const Decomposition d = decompose(b.windows[0], {60.0, 127, 100.0});
    CHECK(d.low == b.windows[0]);
    for (double v : d.high.data()) {
        CHECK(v == 0.0);
        CHECK_FALSE(std::signbit(v));
    }
}

TEST_CASE("kernel longer than twice the window is rejected") {
    const Window w(std::vector<double>(50, 1.0), 50, 1, 100.0);
    CHECK_THROWS_AS(decompose(w, {2.1, 127, 100.0}), WindowTooShortError);
    const Window ok(std::vector<double>(64, 1.0), 64, 1, 100.0);
    CHECK_NOTHROW(decompose(ok, {2.1, 127, 100.0}));
}

}
