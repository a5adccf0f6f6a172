#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

#include "octmix/dataset.hpp"
#include "octmix/error.hpp"

using namespace octmix;
using namespace octmix::data;
namespace fs = std::filesystem;

namespace {

Recording ramp(std::size_t length, double rate, const std::string& subject = "a", std::size_t label = 0) {
    std::vector<double> s(length);
    for (std::size_t i = 0; i < length; ++i) s[i] = static_cast<double>(i);
    return Recording{subject, label, Window(s, length, 1, rate), ""};
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("octmix_dataset_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Frequency with the largest DFT magnitude in (0.2, 20) Hz, 0.05 Hz grid.
double dominant_frequency(const Window& w, std::size_t c) {
    double best_f = 0.0, best = -1.0;
    for (double f = 0.25; f < 20.0; f += 0.05) {
        double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < w.timesteps(); ++t) {
            const double a = 2 * std::numbers::pi * f * static_cast<double>(t) / w.sample_rate_hz();
            re += w(t, c) * std::cos(a);
            im += w(t, c) * std::sin(a);
        }
        const double m = re * re + im * im;
        if (m > best) {
            best = m;
            best_f = f;
        }
    }
    return best_f;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("windowing arithmetic") {
    CHECK(window_recording(ramp(3000, 100.0), {256, 256, 5.0}).size() == 7);
    CHECK(window_recording(ramp(3000, 100.0), {256, 128, 5.0}).size() == 14);
    CHECK(window_recording(ramp(3000, 100.0), {256, 256, 0.0}).size() == 11);
    CHECK(window_recording(ramp(1255, 100.0), {256, 256, 5.0}).empty());
    CHECK(window_recording(ramp(1256, 100.0), {256, 256, 5.0}).size() == 1);
    CHECK(window_recording(ramp(900, 100.0), {256, 256, 5.0}).empty());
    const auto w = window_recording(ramp(3000, 100.0), {256, 256, 5.0});
    CHECK(w[0](0, 0) == 500);
    CHECK(w[6](255, 0) == 500 + 7 * 256 - 1);
    const auto w50 = window_recording(ramp(1500, 50.0), {128, 128, 5.0});
    CHECK(w50[0](0, 0) == 250);
    CHECK_THROWS_AS(window_recording(ramp(10, 100.0), {0, 1, 0.0}), InvalidParameterError);
}

TEST_CASE("make_windows reports excluded recordings") {
    WindowingReport rep;
    const LabeledBatch b = make_windows({ramp(3000, 100.0, "a", 1), ramp(100, 100.0, "b", 0)}, 2, {}, &rep);
    CHECK(rep.recordings == 2);
    CHECK(rep.excluded_recordings == 1);
    CHECK(rep.windows == 7);
    CHECK(b.labels[0].argmax() == 1);
}

TEST_CASE("subject split is disjoint and complete") {
    std::vector<Recording> recs;
    for (int s = 0; s < 12; ++s) {
        for (int r = 0; r < 3; ++r) recs.push_back(ramp(10, 100.0, "p" + std::to_string(s)));
    }
    Rng rng(3);
    const Split sp = split_by_subject(recs, {5, 3, 4}, rng);
    std::set<std::string> all;
    for (const auto* g : {&sp.train_subjects, &sp.valid_subjects, &sp.test_subjects}) all.insert(g->begin(), g->end());
    CHECK(all.size() == 12);
    CHECK(sp.train.size() == 15);
    CHECK(sp.valid.size() == 9);
    CHECK(sp.test.size() == 12);
    Rng again(3);
    CHECK(split_by_subject(recs, {5, 3, 4}, again).train_subjects == sp.train_subjects);
    Rng other(4);
    CHECK_THROWS_AS(split_by_subject(recs, {5, 4, 4}, other), InsufficientSubjectsError);
    CHECK_THROWS_AS(split_by_subject(recs, {0, 4, 4}, other), InvalidParameterError);
}

TEST_CASE("synthetic corpus shape and determinism") {
    SynthSpec s;
    s.subjects = 20;
    const Corpus a = generate_synthetic(s);
    CHECK(a.recordings.size() == 120);
    CHECK(a.subjects().size() == 20);
    CHECK(a.classes == std::vector<std::string>{"class0", "class1", "class2"});
    CHECK(a.recordings[0].samples.timesteps() == 3000);
    CHECK(a.recordings[0].samples.channels() == 3);
    CHECK(a.recordings[0].subject_id == "s000");
    const Corpus b = generate_synthetic(s);
    CHECK(a.recordings[7].samples == b.recordings[7].samples);
    s.seed = 2;
    CHECK_FALSE(generate_synthetic(s).recordings[7].samples == a.recordings[7].samples);
}

TEST_CASE("synthetic classes are separable by their dominant frequency") {
    SynthSpec s;
    s.subjects = 3;
    const SynthSpec r = s.resolved();
    const Corpus c = generate_synthetic(s);
    for (const Recording& rec : c.recordings) {
        CHECK(std::abs(dominant_frequency(rec.samples, 0) - r.base_freq_hz[rec.label]) <= 0.06);
    }
}

TEST_CASE("synthetic spec validation") {
    SynthSpec s;
    s.num_classes = 1;
    CHECK_THROWS_AS(s.resolved(), InvalidParameterError);
    s = SynthSpec{};
    s.base_freq_hz = {1.0, 1.0, 2.0};
    CHECK_THROWS_AS(s.resolved(), InvalidParameterError);
    s = SynthSpec{};
    s.gain_jitter = 1.0;
    CHECK_THROWS_AS(s.resolved(), InvalidParameterError);
}

TEST_CASE("CSV corpus round-trips exactly") {
    SynthSpec s;
    s.subjects = 2;
    s.duration_s = 12.0;
    const Corpus c = generate_synthetic(s);
    const fs::path dir = scratch("roundtrip");
    const fs::path manifest = write_csv_corpus(c, dir);
    const Corpus back = load_csv_corpus(manifest);
    REQUIRE(back.recordings.size() == c.recordings.size());
    CHECK(back.classes == c.classes);
    for (std::size_t i = 0; i < c.recordings.size(); ++i) {
        CHECK(back.recordings[i].samples == c.recordings[i].samples);
        CHECK(back.recordings[i].label == c.recordings[i].label);
        CHECK(back.recordings[i].subject_id == c.recordings[i].subject_id);
    }
    fs::remove_all(dir);
}

TEST_CASE("CSV parsing errors name the file and line") {
    const fs::path dir = scratch("errors");
    std::ofstream(dir / "ragged.csv") << "timestamp,x,y\n0,1,2\n0.01,1\n";
    std::ofstream(dir / "text.csv") << "0,1,abc\n";
    std::ofstream(dir / "nan.csv") << "0,1,2\n0.01,nan,2\n";
    std::ofstream(dir / "ok.csv") << "0,1,2\n\n0.01,3,4\n";
    auto message = [](const fs::path& p) {
        try {
            read_recording_csv(p, 100.0);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    CHECK(message(dir / "ragged.csv").find("ragged.csv:3") != std::string::npos);
    CHECK(message(dir / "text.csv").find("text.csv:1") != std::string::npos);
    CHECK(message(dir / "nan.csv").find("nan.csv:2") != std::string::npos);
    const Window w = read_recording_csv(dir / "ok.csv", 100.0);
    CHECK(w.timesteps() == 2);
    CHECK(w(1, 1) == 4);
    CHECK_THROWS_AS(read_recording_csv(dir / "absent.csv", 100.0), MissingFileError);

    std::ofstream(dir / "m1.tsv") << "# comment\nok.csv\tp1\twalk\t100\nabsent.csv\tp2\twalk\t100\n";
    CHECK_THROWS_AS(load_csv_corpus(dir / "m1.tsv"), MissingFileError);
    std::ofstream(dir / "m2.tsv") << "ok.csv\tp1\twalk\n";
    CHECK_THROWS_AS(load_csv_corpus(dir / "m2.tsv"), ParseError);
    std::ofstream(dir / "m3.tsv") << "ok.csv\tp1\tfly\t100\n";
    CHECK_THROWS_AS(load_csv_corpus(dir / "m3.tsv", std::vector<std::string>{"walk", "run"}), ParseError);
    std::ofstream(dir / "m4.tsv") << "ok.csv\tp1\twalk\t-5\n";
    CHECK_THROWS_AS(load_csv_corpus(dir / "m4.tsv"), ParseError);
    std::ofstream(dir / "m5.tsv") << "ok.csv\tp1\twalk\t100\nok.csv\tp2\trun\t100\n";
    const Corpus c = load_csv_corpus(dir / "m5.tsv");
    CHECK(c.classes == std::vector<std::string>{"run", "walk"});
    CHECK(c.recordings[0].label == 1);
    fs::remove_all(dir);
}

TEST_CASE("format_double is shortest round-trip") {
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(100.0) == "100");
    const double v = 1.0 / 3.0;
    CHECK(std::stod(format_double(v)) == v);
}

}
