#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace octmix::metrics {

/// counts[true][predicted].
class ConfusionMatrix {
public:
    ConfusionMatrix() = default;
    explicit ConfusionMatrix(std::size_t num_classes);
    /// Throws InvalidParameterError unless `counts` is square.
    explicit ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts);

    static ConfusionMatrix from_predictions(const std::vector<std::size_t>& truth,
                                            const std::vector<std::size_t>& predicted, std::size_t num_classes);

    void add(std::size_t truth, std::size_t predicted, std::uint64_t count = 1);

    std::size_t num_classes() const noexcept { return counts_.size(); }
    std::uint64_t total() const noexcept;
    std::uint64_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth).at(predicted); }
    const std::vector<std::vector<std::uint64_t>>& counts() const noexcept { return counts_; }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

private:
    std::vector<std::vector<std::uint64_t>> counts_;
};

/// trace / total. Throws UndefinedMetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Unweighted mean of per-class F1; a class with no true positives scores 0.
double macro_f1(const ConfusionMatrix& cm);

struct TrialReport {
    std::string trial_id;
    std::string split;
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    ConfusionMatrix confusion;
};

TrialReport make_report(std::string trial_id, std::string split, ConfusionMatrix cm);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample (n - 1) estimator; 0 for a single value
};

MeanStd mean_std(const std::vector<double>& values);

struct Summary {
    std::size_t trials = 0;
    MeanStd accuracy;
    MeanStd macro_f1;
};

/// Throws InvalidParameterError on an empty input.
Summary aggregate_trials(const std::vector<TrialReport>& reports);

/// Percent with one decimal: 0.809, 0.015 -> "80.9(±1.5)".
std::string format_mean_std(const MeanStd& value);

/// One JSON object per line.
std::string to_json_line(const TrialReport& report);
TrialReport report_from_json_line(const std::string& line);

/// Plain-text table of per-split summaries.
std::string summary_table(const std::vector<std::pair<std::string, Summary>>& rows);

}  // namespace octmix::metrics
