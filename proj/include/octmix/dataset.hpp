#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "octmix/random.hpp"
#include "octmix/window.hpp"

namespace octmix::data {

/// One continuous measurement of one subject performing one activity.
/// `samples` holds the whole recording as an L x C window.
struct Recording {
    std::string subject_id;
    std::size_t label = 0;
    Window samples;
    std::string source;  // file the recording came from, if any
};

struct Corpus {
    std::vector<std::string> classes;
    std::vector<Recording> recordings;

    std::size_t num_classes() const noexcept { return classes.size(); }
    std::vector<std::string> subjects() const;  // sorted, unique
};

struct WindowingSpec {
    std::size_t frame = 256;
    std::size_t stride = 256;
    double trim_s = 5.0;

    void validate() const;
};

/// Drops round(trim_s * fs) samples from both ends, then cuts
/// floor((L' - frame) / stride) + 1 frames (none when L' < frame).
std::vector<Window> window_recording(const Recording& recording, const WindowingSpec& spec);

struct WindowingReport {
    std::size_t recordings = 0;
    std::size_t windows = 0;
    std::size_t excluded_recordings = 0;  // yielded no frame after trimming
};

/// Windows every recording and attaches one-hot labels.
LabeledBatch make_windows(const std::vector<Recording>& recordings, std::size_t num_classes,
                          const WindowingSpec& spec, WindowingReport* report = nullptr);

struct SplitSpec {
    std::size_t n_train = 10;
    std::size_t n_valid = 50;
    std::size_t n_test = 50;
};

struct Split {
    std::vector<std::string> train_subjects;
    std::vector<std::string> valid_subjects;
    std::vector<std::string> test_subjects;
    std::vector<Recording> train;
    std::vector<Recording> valid;
    std::vector<Recording> test;
};

/// Samples subjects without replacement into disjoint train/valid/test groups;
/// every recording follows its subject.
Split split_by_subject(const std::vector<Recording>& recordings, const SplitSpec& spec, Rng& rng);

/// Parameters of the synthetic sensor corpus. Per-class vectors may be left
/// empty to take the built-in defaults.
struct SynthSpec {
    std::size_t num_classes = 3;
    std::size_t subjects = 30;
    std::size_t recordings_per_subject = 2;  // per (subject, class)
    double duration_s = 30.0;
    double sample_rate_hz = 100.0;
    std::vector<double> base_freq_hz;
    std::vector<double> amplitude;
    std::vector<double> harmonic_weight;
    double noise_std = 0.05;
    double gain_jitter = 0.1;        // subject gain drawn from [1 - g, 1 + g]
    double phase_jitter_rad = 3.14;  // recording phase drawn from [-p, p]
    double gravity = 1.0;            // constant offset on the third channel
    std::uint64_t seed = 1;

    /// Fills empty per-class vectors with defaults and checks invariants.
    SynthSpec resolved() const;
    void validate() const;
};

inline constexpr std::size_t kSynthChannels = 3;

/// Per-class signature signals: base sinusoid plus second harmonic, scaled by
/// subject gain, phase-jittered, mixed into three channels, plus Gaussian noise.
Corpus generate_synthetic(const SynthSpec& spec);

/// Reads a tab-separated manifest (path, subject_id, label, sample_rate_hz)
/// and the per-recording CSV files it lists. Relative paths resolve against
/// the manifest's directory. When `classes` is given, labels outside it are
/// rejected; otherwise the vocabulary is the sorted set of manifest labels.
Corpus load_csv_corpus(const std::filesystem::path& manifest_path,
                       const std::optional<std::vector<std::string>>& classes = std::nullopt);

/// Parses one recording file (optional "timestamp,..." header, then
/// timestamp,ch_0,...,ch_{C-1} rows).
Window read_recording_csv(const std::filesystem::path& file, double sample_rate_hz);

/// Writes one CSV per recording plus manifest.tsv into `dir`. Output bytes are a
/// pure function of the corpus. Returns the manifest path.
std::filesystem::path write_csv_corpus(const Corpus& corpus, const std::filesystem::path& dir);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace octmix::data
