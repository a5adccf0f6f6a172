#include "octmix/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "octmix/error.hpp"

namespace octmix::metrics {

ConfusionMatrix::ConfusionMatrix(std::size_t num_classes)
    : counts_(num_classes, std::vector<std::uint64_t>(num_classes, 0)) {}

ConfusionMatrix::ConfusionMatrix(std::vector<std::vector<std::uint64_t>> counts) : counts_(std::move(counts)) {
    for (const auto& row : counts_) {
        if (row.size() != counts_.size()) throw InvalidParameterError("confusion matrix must be square");
    }
}

ConfusionMatrix ConfusionMatrix::from_predictions(const std::vector<std::size_t>& truth,
                                                  const std::vector<std::size_t>& predicted,
                                                  std::size_t num_classes) {
    if (truth.size() != predicted.size()) throw ShapeError("truth and prediction lengths differ");
    ConfusionMatrix cm(num_classes);
    for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
    return cm;
}

void ConfusionMatrix::add(std::size_t truth, std::size_t predicted, std::uint64_t count) {
    if (truth >= counts_.size() || predicted >= counts_.size()) {
        throw InvalidParameterError("class id outside confusion matrix");
    }
    counts_[truth][predicted] += count;
}

std::uint64_t ConfusionMatrix::total() const noexcept {
    std::uint64_t sum = 0;
    for (const auto& row : counts_) sum = std::accumulate(row.begin(), row.end(), sum);
    return sum;
}

double accuracy(const ConfusionMatrix& cm) {
    const std::uint64_t total = cm.total();
    if (total == 0) throw UndefinedMetricError("accuracy of an empty confusion matrix");
    std::uint64_t trace = 0;
    for (std::size_t k = 0; k < cm.num_classes(); ++k) trace += cm.at(k, k);
    return static_cast<double>(trace) / static_cast<double>(total);
}

double macro_f1(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw UndefinedMetricError("F-score of an empty confusion matrix");
    const std::size_t k_classes = cm.num_classes();
    double sum = 0.0;
    for (std::size_t k = 0; k < k_classes; ++k) {
        const auto tp = static_cast<double>(cm.at(k, k));
        double predicted = 0.0;
        double actual = 0.0;
        for (std::size_t j = 0; j < k_classes; ++j) {
            predicted += static_cast<double>(cm.at(j, k));
            actual += static_cast<double>(cm.at(k, j));
        }
        // 2PR / (P + R) simplifies to 2TP / (predicted + actual).
        if (tp > 0.0) sum += 2.0 * tp / (predicted + actual);
    }
    return sum / static_cast<double>(k_classes);
}

TrialReport make_report(std::string trial_id, std::string split, ConfusionMatrix cm) {
    TrialReport r;
    r.trial_id = std::move(trial_id);
    r.split = std::move(split);
    r.accuracy = accuracy(cm);
    r.macro_f1 = macro_f1(cm);
    r.confusion = std::move(cm);
    return r;
}

MeanStd mean_std(const std::vector<double>& values) {
    if (values.empty()) throw InvalidParameterError("cannot aggregate zero values");
    const auto n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

Summary aggregate_trials(const std::vector<TrialReport>& reports) {
    if (reports.empty()) throw InvalidParameterError("cannot aggregate zero trial reports");
    std::vector<double> acc;
    std::vector<double> f1;
    for (const TrialReport& r : reports) {
        acc.push_back(r.accuracy);
        f1.push_back(r.macro_f1);
    }
    return Summary{reports.size(), mean_std(acc), mean_std(f1)};
}

std::string format_mean_std(const MeanStd& value) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.1f(±%.1f)", 100.0 * value.mean, 100.0 * value.std);
    return buf;
}

std::string to_json_line(const TrialReport& report) {
    nlohmann::ordered_json j;
    j["trial_id"] = report.trial_id;
    j["split"] = report.split;
    j["accuracy"] = report.accuracy;
    j["macro_f1"] = report.macro_f1;
    j["confusion"] = report.confusion.counts();
    return j.dump();
}

TrialReport report_from_json_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        TrialReport r;
        r.trial_id = j.at("trial_id").get<std::string>();
        r.split = j.at("split").get<std::string>();
        r.accuracy = j.at("accuracy").get<double>();
        r.macro_f1 = j.at("macro_f1").get<double>();
        r.confusion = ConfusionMatrix(j.at("confusion").get<std::vector<std::vector<std::uint64_t>>>());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed trial report: ") + e.what());
    }
}

std::string summary_table(const std::vector<std::pair<std::string, Summary>>& rows) {
    std::ostringstream os;
    os << std::left << std::setw(10) << "split" << std::setw(8) << "trials" << std::setw(16) << "accuracy[%]"
       << "F-score[%]\n";
    for (const auto& [name, s] : rows) {
        os << std::left << std::setw(10) << name << std::setw(8) << s.trials << std::setw(16)
           << format_mean_std(s.accuracy) << format_mean_std(s.macro_f1) << '\n';
    }
    return os.str();
}

}  // namespace octmix::metrics
