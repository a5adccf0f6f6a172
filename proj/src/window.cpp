#include "octmix/window.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "octmix/error.hpp"

namespace octmix {

Window::Window(std::size_t timesteps, std::size_t channels, double sample_rate_hz)
    : Window(std::vector<double>(timesteps * channels, 0.0), timesteps, channels, sample_rate_hz) {}

Window::Window(std::vector<double> samples, std::size_t timesteps, std::size_t channels,
               double sample_rate_hz)
    : samples_(std::move(samples)),
      timesteps_(timesteps),
      channels_(channels),
      sample_rate_hz_(sample_rate_hz) {
    if (timesteps_ == 0 || channels_ == 0) {
        throw ShapeError("window needs T >= 1 and C >= 1");
    }
    if (samples_.size() != timesteps_ * channels_) {
        throw ShapeError("window sample count " + std::to_string(samples_.size()) +
                         " does not match " + std::to_string(timesteps_) + " x " +
                         std::to_string(channels_));
    }
    if (!(sample_rate_hz_ > 0.0) || !std::isfinite(sample_rate_hz_)) {
        throw InvalidParameterError("sample rate must be positive");
    }
    if (!all_finite()) {
        throw InvalidParameterError("window contains non-finite samples");
    }
}

bool Window::same_shape(const Window& other) const noexcept {
    return timesteps_ == other.timesteps_ && channels_ == other.channels_ &&
           sample_rate_hz_ == other.sample_rate_hz_;
}

bool Window::all_finite() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
}

SoftLabel SoftLabel::one_hot(std::size_t cls, std::size_t num_classes) {
    if (cls >= num_classes) {
        throw InvalidParameterError("class id " + std::to_string(cls) + " outside vocabulary of " +
                                    std::to_string(num_classes));
    }
    SoftLabel label{std::vector<double>(num_classes, 0.0)};
    label.probs[cls] = 1.0;
    return label;
}

std::size_t SoftLabel::argmax() const noexcept {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

bool SoftLabel::on_simplex(double tol) const noexcept {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
        if (!(p >= 0.0)) return false;
        sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
}

SoftLabel blend(const SoftLabel& a, const SoftLabel& b, double weight) {
    if (a.num_classes() != b.num_classes()) {
        throw ShapeError("cannot blend labels with different class counts");
    }
    SoftLabel out{std::vector<double>(a.num_classes())};
    for (std::size_t k = 0; k < out.probs.size(); ++k) {
        out.probs[k] = weight * a.probs[k] + (1.0 - weight) * b.probs[k];
    }
    return out;
}

void LabeledBatch::validate() const {
    if (windows.empty()) throw ShapeError("batch is empty");
    if (windows.size() != labels.size()) {
        throw ShapeError("batch has " + std::to_string(windows.size()) + " windows but " +
                         std::to_string(labels.size()) + " labels");
    }
    const Window& first = windows.front();
    for (const Window& w : windows) {
        if (!w.same_shape(first)) throw ShapeError("batch windows differ in shape or rate");
    }
    const std::size_t k = labels.front().num_classes();
    if (k == 0) throw ShapeError("labels have zero classes");
    for (const SoftLabel& y : labels) {
        if (y.num_classes() != k) throw ShapeError("batch labels differ in class count");
    }
}

void LabeledBatch::append(const LabeledBatch& other) {
    windows.insert(windows.end(), other.windows.begin(), other.windows.end());
    labels.insert(labels.end(), other.labels.begin(), other.labels.end());
}

LabeledBatch LabeledBatch::subset(std::span<const std::size_t> indices) const {
    LabeledBatch out;
    out.windows.reserve(indices.size());
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        out.windows.push_back(windows.at(i));
        out.labels.push_back(labels.at(i));
    }
    return out;
}

}  // namespace octmix
