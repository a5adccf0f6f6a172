#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace octmix {

/// One fixed-length multi-channel sensor frame. Samples are stored row-major
/// as (timestep, channel).
class Window {
public:
    Window() = default;

    /// Zero-filled window.
    Window(std::size_t timesteps, std::size_t channels, double sample_rate_hz);

    /// Takes ownership of `samples` (row-major T x C). Throws ShapeError on a size
    /// mismatch and InvalidParameterError on non-finite samples or a non-positive rate.
    Window(std::vector<double> samples, std::size_t timesteps, std::size_t channels,
           double sample_rate_hz);

    std::size_t timesteps() const noexcept { return timesteps_; }
    std::size_t channels() const noexcept { return channels_; }
    double sample_rate_hz() const noexcept { return sample_rate_hz_; }
    std::size_t size() const noexcept { return samples_.size(); }

    double& operator()(std::size_t t, std::size_t c) noexcept { return samples_[t * channels_ + c]; }
    double operator()(std::size_t t, std::size_t c) const noexcept {
        return samples_[t * channels_ + c];
    }

    std::span<double> data() noexcept { return samples_; }
    std::span<const double> data() const noexcept { return samples_; }

    bool same_shape(const Window& other) const noexcept;
    bool all_finite() const noexcept;

    friend bool operator==(const Window&, const Window&) = default;

private:
    std::vector<double> samples_;
    std::size_t timesteps_ = 0;
    std::size_t channels_ = 0;
    double sample_rate_hz_ = 0.0;
};

/// Probability vector over the class vocabulary.
struct SoftLabel {
    std::vector<double> probs;

    static SoftLabel one_hot(std::size_t cls, std::size_t num_classes);

    std::size_t num_classes() const noexcept { return probs.size(); }
    std::size_t argmax() const noexcept;
    bool on_simplex(double tol = 1e-9) const noexcept;

    friend bool operator==(const SoftLabel&, const SoftLabel&) = default;
};

/// Convex combination weight * a + (1 - weight) * b.
SoftLabel blend(const SoftLabel& a, const SoftLabel& b, double weight);

/// n windows paired with n soft labels; all windows share (T, C, rate) and all
/// labels share the class count.
struct LabeledBatch {
    std::vector<Window> windows;
    std::vector<SoftLabel> labels;

    std::size_t size() const noexcept { return windows.size(); }
    bool empty() const noexcept { return windows.empty(); }

    std::size_t timesteps() const { return windows.front().timesteps(); }
    std::size_t channels() const { return windows.front().channels(); }
    double sample_rate_hz() const { return windows.front().sample_rate_hz(); }
    std::size_t num_classes() const { return labels.front().num_classes(); }

    /// Throws ShapeError when the batch invariants do not hold.
    void validate() const;

    void append(const LabeledBatch& other);
    LabeledBatch subset(std::span<const std::size_t> indices) const;

    friend bool operator==(const LabeledBatch&, const LabeledBatch&) = default;
};

}  // namespace octmix
