#include "octmix/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "octmix/error.hpp"

namespace octmix::data {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) out.push_back(field);
    if (!line.empty() && line.back() == sep) out.emplace_back();
    return out;
}

std::optional<double> parse_double(const std::string& text) {
    const std::string t = trim(text);
    if (t.empty()) return std::nullopt;
    double value = 0.0;
    const char* begin = t.data();
    const char* end = t.data() + t.size();
    if (*begin == '+') ++begin;
    const auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) return std::nullopt;
    return value;
}

std::string location(const fs::path& file, std::size_t line) {
    return file.string() + ":" + std::to_string(line);
}

}  // namespace

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) throw IoError("cannot format number");
    return std::string(buf, ptr);
}

std::vector<std::string> Corpus::subjects() const {
    std::set<std::string> ids;
    for (const Recording& r : recordings) ids.insert(r.subject_id);
    return {ids.begin(), ids.end()};
}

void WindowingSpec::validate() const {
    if (frame == 0) throw InvalidParameterError("frame must be >= 1");
    if (stride == 0) throw InvalidParameterError("stride must be >= 1");
    if (!(trim_s >= 0.0) || !std::isfinite(trim_s)) throw InvalidParameterError("trim_s must be >= 0");
}

std::vector<Window> window_recording(const Recording& recording, const WindowingSpec& spec) {
    spec.validate();
    const Window& rec = recording.samples;
    const double fs = rec.sample_rate_hz();
    const auto trim_samples = static_cast<std::size_t>(std::llround(spec.trim_s * fs));
    std::vector<Window> out;
    if (rec.timesteps() <= 2 * trim_samples) return out;
    const std::size_t kept = rec.timesteps() - 2 * trim_samples;
    if (kept < spec.frame) return out;
    const std::size_t count = (kept - spec.frame) / spec.stride + 1;
    const std::size_t channels = rec.channels();
    out.reserve(count);
    for (std::size_t w = 0; w < count; ++w) {
        const std::size_t start = trim_samples + w * spec.stride;
        std::vector<double> samples(rec.data().begin() + static_cast<std::ptrdiff_t>(start * channels),
                                    rec.data().begin() + static_cast<std::ptrdiff_t>((start + spec.frame) * channels));
        out.emplace_back(std::move(samples), spec.frame, channels, fs);
    }
    return out;
}

LabeledBatch make_windows(const std::vector<Recording>& recordings, std::size_t num_classes,
                          const WindowingSpec& spec, WindowingReport* report) {
    LabeledBatch batch;
    WindowingReport local;
    for (const Recording& r : recordings) {
        ++local.recordings;
        std::vector<Window> windows = window_recording(r, spec);
        if (windows.empty()) {
            ++local.excluded_recordings;
            continue;
        }
        const SoftLabel label = SoftLabel::one_hot(r.label, num_classes);
        for (Window& w : windows) {
            batch.windows.push_back(std::move(w));
            batch.labels.push_back(label);
        }
    }
    local.windows = batch.size();
    if (report) *report = local;
    return batch;
}

Split split_by_subject(const std::vector<Recording>& recordings, const SplitSpec& spec, Rng& rng) {
    if (spec.n_train == 0 || spec.n_test == 0) {
        throw InvalidParameterError("train and test splits need at least one subject each");
    }
    std::set<std::string> unique;
    for (const Recording& r : recordings) unique.insert(r.subject_id);
    std::vector<std::string> subjects(unique.begin(), unique.end());
    const std::size_t needed = spec.n_train + spec.n_valid + spec.n_test;
    if (needed > subjects.size()) {
        throw InsufficientSubjectsError("split needs " + std::to_string(spec.n_train) + " train + " +
                                        std::to_string(spec.n_valid) + " valid + " + std::to_string(spec.n_test) +
                                        " test = " + std::to_string(needed) + " subjects, corpus has " +
                                        std::to_string(subjects.size()));
    }
    std::shuffle(subjects.begin(), subjects.end(), rng);
    Split split;
    const auto first = subjects.begin();
    split.train_subjects.assign(first, first + static_cast<std::ptrdiff_t>(spec.n_train));
    split.valid_subjects.assign(first + static_cast<std::ptrdiff_t>(spec.n_train),
                                first + static_cast<std::ptrdiff_t>(spec.n_train + spec.n_valid));
    split.test_subjects.assign(first + static_cast<std::ptrdiff_t>(spec.n_train + spec.n_valid),
                               first + static_cast<std::ptrdiff_t>(needed));
    std::sort(split.train_subjects.begin(), split.train_subjects.end());
    std::sort(split.valid_subjects.begin(), split.valid_subjects.end());
    std::sort(split.test_subjects.begin(), split.test_subjects.end());

    std::map<std::string, int> group;
    for (const auto& s : split.train_subjects) group[s] = 0;
    for (const auto& s : split.valid_subjects) group[s] = 1;
    for (const auto& s : split.test_subjects) group[s] = 2;
    for (const Recording& r : recordings) {
        const auto it = group.find(r.subject_id);
        if (it == group.end()) continue;
        (it->second == 0 ? split.train : it->second == 1 ? split.valid : split.test).push_back(r);
    }
    return split;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

SynthSpec SynthSpec::resolved() const {
    SynthSpec out = *this;
    for (std::size_t k = out.base_freq_hz.size(); k < num_classes; ++k) {
        out.base_freq_hz.push_back(1.0 + 1.25 * static_cast<double>(k));
    }
    for (std::size_t k = out.amplitude.size(); k < num_classes; ++k) {
        out.amplitude.push_back(1.0 + 0.25 * static_cast<double>(k));
    }
    for (std::size_t k = out.harmonic_weight.size(); k < num_classes; ++k) {
        out.harmonic_weight.push_back(0.2 + 0.15 * static_cast<double>(k % 4));
    }
    out.validate();
    return out;
}

void SynthSpec::validate() const {
    if (num_classes < 2) throw InvalidParameterError("synthetic corpus needs at least two classes");
    if (subjects == 0 || recordings_per_subject == 0) {
        throw InvalidParameterError("synthetic corpus needs subjects and recordings");
    }
    if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0)) {
        throw InvalidParameterError("duration_s and sample_rate_hz must be positive");
    }
    if (base_freq_hz.size() != num_classes || amplitude.size() != num_classes ||
        harmonic_weight.size() != num_classes) {
        throw InvalidParameterError("per-class vectors must have num_classes entries");
    }
    std::set<double> distinct(base_freq_hz.begin(), base_freq_hz.end());
    if (distinct.size() != base_freq_hz.size()) throw InvalidParameterError("class base frequencies must be distinct");
    for (std::size_t k = 0; k < num_classes; ++k) {
        if (!(base_freq_hz[k] > 0.0) || !(amplitude[k] > 0.0) || !(harmonic_weight[k] >= 0.0)) {
            throw InvalidParameterError("class frequencies and amplitudes must be positive");
        }
    }
    if (!(noise_std >= 0.0) || !(gain_jitter >= 0.0) || gain_jitter >= 1.0 || !(phase_jitter_rad >= 0.0)) {
        throw InvalidParameterError("noise and jitter levels must be non-negative (gain jitter below 1)");
    }
}

Corpus generate_synthetic(const SynthSpec& raw) {
    const SynthSpec spec = raw.resolved();
    const auto length = static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
    if (length == 0) throw InvalidParameterError("synthetic recordings would be empty");
    // Channel mixing: in-phase, quadrature and attenuated in-phase.
    constexpr double kMix[kSynthChannels] = {1.0, 0.6, 0.3};

    Corpus corpus;
    for (std::size_t k = 0; k < spec.num_classes; ++k) corpus.classes.push_back("class" + std::to_string(k));
    const int width = spec.subjects > 999 ? 5 : 3;
    for (std::size_t s = 0; s < spec.subjects; ++s) {
        std::string id = std::to_string(s);
        id = "s" + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0') + id;
        Rng subject_rng = make_rng(spec.seed, {0x5b, s});
        std::uniform_real_distribution<double> gain_dist(1.0 - spec.gain_jitter, 1.0 + spec.gain_jitter);
        const double gain = spec.gain_jitter > 0.0 ? gain_dist(subject_rng) : 1.0;
        for (std::size_t k = 0; k < spec.num_classes; ++k) {
            for (std::size_t r = 0; r < spec.recordings_per_subject; ++r) {
                Rng rng = make_rng(spec.seed, {0x5c, s, k, r});
                std::uniform_real_distribution<double> phase_dist(-spec.phase_jitter_rad, spec.phase_jitter_rad);
                const double phase = spec.phase_jitter_rad > 0.0 ? phase_dist(rng) : 0.0;
                std::normal_distribution<double> noise(0.0, 1.0);
                const double f = spec.base_freq_hz[k];
                const double amp = gain * spec.amplitude[k];
                const double h = spec.harmonic_weight[k];
                std::vector<double> samples(length * kSynthChannels);
                for (std::size_t t = 0; t < length; ++t) {
                    const double time = static_cast<double>(t) / spec.sample_rate_hz;
                    const double a1 = 2.0 * std::numbers::pi * f * time + phase;
                    const double a2 = 2.0 * a1;
                    const double in_phase = amp * (std::sin(a1) + h * std::sin(a2));
                    const double quadrature = amp * (std::cos(a1) + h * std::cos(a2));
                    const double clean[kSynthChannels] = {kMix[0] * in_phase, kMix[1] * quadrature,
                                                          kMix[2] * in_phase + spec.gravity};
                    for (std::size_t c = 0; c < kSynthChannels; ++c) {
                        const double eps = spec.noise_std > 0.0 ? spec.noise_std * noise(rng) : 0.0;
                        samples[t * kSynthChannels + c] = clean[c] + eps;
                    }
                }
                Recording rec;
                rec.subject_id = id;
                rec.label = k;
                rec.samples = Window(std::move(samples), length, kSynthChannels, spec.sample_rate_hz);
                rec.source = id + "_" + corpus.classes[k] + "_r" + std::to_string(r) + ".csv";
                corpus.recordings.push_back(std::move(rec));
            }
        }
    }
    return corpus;
}

// ---------------------------------------------------------------------------
// CSV corpus

Window read_recording_csv(const fs::path& file, double sample_rate_hz) {
    std::ifstream in(file);
    if (!in) throw MissingFileError("cannot open recording " + file.string());
    std::vector<double> samples;
    std::size_t channels = 0;
    std::size_t rows = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (rows == 0 && channels == 0 && t.rfind("timestamp", 0) == 0) continue;
        const std::vector<std::string> fields = split_fields(t, ',');
        if (fields.size() < 2) {
            throw ParseError(location(file, line_no) + ": expected timestamp and at least one channel");
        }
        if (channels == 0) channels = fields.size() - 1;
        if (fields.size() - 1 != channels) {
            throw ParseError(location(file, line_no) + ": ragged row with " + std::to_string(fields.size() - 1) +
                             " channels, expected " + std::to_string(channels));
        }
        for (std::size_t f = 0; f < fields.size(); ++f) {
            const std::optional<double> v = parse_double(fields[f]);
            if (!v) {
                throw ParseError(location(file, line_no) + ": non-numeric cell '" + trim(fields[f]) + "'");
            }
            if (!std::isfinite(*v)) {
                throw ParseError(location(file, line_no) + ": non-finite value '" + trim(fields[f]) + "'");
            }
            if (f > 0) samples.push_back(*v);
        }
        ++rows;
    }
    if (rows == 0) throw ParseError(file.string() + ": no samples");
    return Window(std::move(samples), rows, channels, sample_rate_hz);
}

Corpus load_csv_corpus(const fs::path& manifest_path, const std::optional<std::vector<std::string>>& classes) {
    std::ifstream in(manifest_path);
    if (!in) throw MissingFileError("cannot open manifest " + manifest_path.string());
    struct Entry {
        fs::path path;
        std::string subject;
        std::string label;
        double rate = 0.0;
        std::size_t line = 0;
    };
    std::vector<Entry> entries;
    std::string line;
    std::size_t line_no = 0;
    const fs::path base = manifest_path.parent_path();
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        std::vector<std::string> fields = split_fields(t, '\t');
        if (fields.size() != 4) {
            throw ParseError(location(manifest_path, line_no) + ": expected 4 tab-separated fields, got " +
                             std::to_string(fields.size()));
        }
        Entry e;
        e.path = trim(fields[0]);
        if (e.path.is_relative()) e.path = base / e.path;
        e.subject = trim(fields[1]);
        e.label = trim(fields[2]);
        const std::optional<double> rate = parse_double(fields[3]);
        if (!rate || !(*rate > 0.0) || !std::isfinite(*rate)) {
            throw ParseError(location(manifest_path, line_no) + ": invalid sample rate '" + trim(fields[3]) + "'");
        }
        if (e.subject.empty() || e.label.empty()) {
            throw ParseError(location(manifest_path, line_no) + ": empty subject or label");
        }
        e.rate = *rate;
        e.line = line_no;
        entries.push_back(std::move(e));
    }

    Corpus corpus;
    if (classes) {
        corpus.classes = *classes;
    } else {
        std::set<std::string> names;
        for (const Entry& e : entries) names.insert(e.label);
        corpus.classes.assign(names.begin(), names.end());
    }
    std::map<std::string, std::size_t> index;
    for (std::size_t k = 0; k < corpus.classes.size(); ++k) index[corpus.classes[k]] = k;

    // Every referenced file and label is checked before any file is parsed.
    for (const Entry& e : entries) {
        if (!fs::is_regular_file(e.path)) {
            throw MissingFileError(location(manifest_path, e.line) + ": recording " + e.path.string() +
                                   " does not exist");
        }
        if (!index.count(e.label)) {
            throw ParseError(location(manifest_path, e.line) + ": unknown label '" + e.label + "'");
        }
    }
    for (const Entry& e : entries) {
        Recording rec;
        rec.subject_id = e.subject;
        rec.label = index.at(e.label);
        rec.samples = read_recording_csv(e.path, e.rate);
        rec.source = e.path.string();
        corpus.recordings.push_back(std::move(rec));
    }
    return corpus;
}

fs::path write_csv_corpus(const Corpus& corpus, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
    const fs::path manifest_path = dir / "manifest.tsv";
    std::ofstream manifest(manifest_path, std::ios::binary);
    if (!manifest) throw IoError("cannot write " + manifest_path.string());
    std::size_t idx = 0;
    for (const Recording& rec : corpus.recordings) {
        std::string name = rec.source.empty() ? "recording_" + std::to_string(idx) + ".csv"
                                              : fs::path(rec.source).filename().string();
        ++idx;
        const fs::path file = dir / name;
        std::ofstream out(file, std::ios::binary);
        if (!out) throw IoError("cannot write " + file.string());
        const Window& w = rec.samples;
        std::string text = "timestamp";
        for (std::size_t c = 0; c < w.channels(); ++c) text += ",ch_" + std::to_string(c);
        text += '\n';
        for (std::size_t t = 0; t < w.timesteps(); ++t) {
            text += format_double(static_cast<double>(t) / w.sample_rate_hz());
            for (std::size_t c = 0; c < w.channels(); ++c) {
                text += ',';
                text += format_double(w(t, c));
            }
            text += '\n';
        }
        out << text;
        if (!out) throw IoError("failed writing " + file.string());
        manifest << name << '\t' << rec.subject_id << '\t' << corpus.classes.at(rec.label) << '\t'
                 << format_double(w.sample_rate_hz()) << '\n';
    }
    if (!manifest) throw IoError("failed writing " + manifest_path.string());
    return manifest_path;
}

}  // namespace octmix::data
