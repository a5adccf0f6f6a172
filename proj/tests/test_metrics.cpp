#include <doctest.h>

#include <random>

#include "octmix/error.hpp"
#include "octmix/metrics.hpp"
#include "oracles.hpp"

using namespace octmix;
using namespace octmix::metrics;

TEST_SUITE("metrics") {

TEST_CASE("hand-worked confusion matrix") {
    // truth rows, predicted columns
    const ConfusionMatrix cm({{5, 1, 0}, {2, 3, 1}, {0, 0, 4}});
    CHECK(cm.total() == 16);
    CHECK(accuracy(cm) == doctest::Approx(12.0 / 16.0));
    // F1: class0 2*5/(7+6), class1 2*3/(4+6), class2 2*4/(5+4)
    CHECK(macro_f1(cm) == doctest::Approx((10.0 / 13.0 + 6.0 / 10.0 + 8.0 / 9.0) / 3.0));
}

TEST_CASE("a class never predicted correctly scores zero") {
    const ConfusionMatrix cm({{0, 3}, {0, 3}});
    CHECK(macro_f1(cm) == doctest::Approx((0.0 + 2.0 * 3 / (6 + 3)) / 2.0));
    const ConfusionMatrix absent({{4, 0}, {0, 0}});
    CHECK(macro_f1(absent) == doctest::Approx(0.5));
}

TEST_CASE("agreement with brute force on random matrices") {
    std::mt19937_64 gen(3);
    for (int m = 0; m < 200; ++m) {
        const std::size_t k = 2 + gen() % 5;
        std::vector<std::vector<std::uint64_t>> counts(k, std::vector<std::uint64_t>(k));
        for (auto& row : counts) {
            for (auto& c : row) c = gen() % 9;
        }
        counts[0][0] += 1;
        const auto ref = oracle::brute_force_metrics(counts);
        const ConfusionMatrix cm(counts);
        CHECK(accuracy(cm) == doctest::Approx(ref.accuracy).epsilon(1e-12));
        CHECK(macro_f1(cm) == doctest::Approx(ref.macro_f1).epsilon(1e-12));
    }
}

TEST_CASE("construction and errors") {
    CHECK_THROWS_AS(ConfusionMatrix({{1, 2}, {3}}), InvalidParameterError);
    CHECK_THROWS_AS(accuracy(ConfusionMatrix(3)), UndefinedMetricError);
    CHECK_THROWS_AS(macro_f1(ConfusionMatrix(3)), UndefinedMetricError);
    const auto cm = ConfusionMatrix::from_predictions({0, 1, 1, 2}, {0, 1, 2, 2}, 3);
    CHECK(cm.at(1, 2) == 1);
    CHECK(cm.at(2, 2) == 1);
    CHECK_THROWS_AS(ConfusionMatrix::from_predictions({0, 1}, {0}, 3), ShapeError);
    CHECK_THROWS_AS(ConfusionMatrix::from_predictions({0, 3}, {0, 1}, 3), InvalidParameterError);
}

TEST_CASE("mean and sample standard deviation") {
    const MeanStd one = mean_std({0.8});
    CHECK(one.mean == 0.8);
    CHECK(one.std == 0.0);
    const MeanStd ms = mean_std({0.79, 0.81, 0.83, 0.81});
    CHECK(ms.mean == doctest::Approx(0.81));
    CHECK(ms.std == doctest::Approx(std::sqrt(0.0008 / 3.0)));
    CHECK_THROWS_AS(mean_std({}), InvalidParameterError);
    CHECK(format_mean_std({0.809, 0.015}) == "80.9(±1.5)");
    CHECK(format_mean_std({1.0, 0.0}) == "100.0(±0.0)");
}

TEST_CASE("trial aggregation and JSON lines") {
    const TrialReport a = make_report("trial0", "test", ConfusionMatrix({{3, 1}, {0, 4}}));
    const TrialReport b = make_report("trial1", "test", ConfusionMatrix({{4, 0}, {0, 4}}));
    const Summary s = aggregate_trials({a, b});
    CHECK(s.trials == 2);
    CHECK(s.accuracy.mean == doctest::Approx((7.0 / 8.0 + 1.0) / 2.0));
    const std::string line = to_json_line(a);
    CHECK(line.find('\n') == std::string::npos);
    const TrialReport back = report_from_json_line(line);
    CHECK(back.trial_id == "trial0");
    CHECK(back.split == "test");
    CHECK(back.accuracy == a.accuracy);
    CHECK(back.macro_f1 == a.macro_f1);
    CHECK(back.confusion == a.confusion);
    CHECK_THROWS_AS(report_from_json_line("{\"trial_id\": 3}"), ParseError);
    CHECK(summary_table({{"test", s}}).find("93.8(±8.8)") != std::string::npos);
}

}
