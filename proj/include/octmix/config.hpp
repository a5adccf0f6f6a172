#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "octmix/augment.hpp"
#include "octmix/dataset.hpp"
#include "octmix/network.hpp"
#include "octmix/trainer.hpp"

namespace octmix::config {

enum class Command { GenSynth, Augment, Train, Eval, Sweep, InspectFilter };

std::string to_string(Command command);

/// Either a CSV manifest or the synthetic generator.
struct DataConfig {
    std::optional<std::filesystem::path> manifest;
    std::optional<std::vector<std::string>> classes;  // fixed label vocabulary for CSV corpora
    data::SynthSpec synthetic;
};

struct AugmentConfig {
    std::optional<augment::AugPolicy> policy;
};

struct SweepConfig {
    std::vector<double> alphas{0.5, 1.0, 5.0};
    std::vector<double> cutoffs_hz{0.1, 1.1, 2.1, 3.1, 4.1, 5.1};
    std::string variant = "rot+octmix";
};

struct FilterConfig {
    double cutoff_hz = 2.1;
    int num_taps = 0;  // 0 = default for the rate
    double sample_rate_hz = 100.0;
    std::size_t response_points = 256;
};

struct EvalConfig {
    std::optional<std::filesystem::path> model_dir;
    std::vector<std::string> subjects;  // empty = every subject in the corpus
};

/// Everything any command reads. Sections a command does not use are still
/// validated. in_channels and num_classes of `model` come from the corpus.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "octmix-out";
    DataConfig data;
    data::WindowingSpec windowing;
    data::SplitSpec split{20, 5, 5};
    std::vector<std::size_t> train_counts;  // subject-count sweep; empty = split.n_train only
    std::size_t trials = 1;
    std::string variant = "dar-ffe-ensemble";
    nn::ModelConfig model{3, {16, 32, 64}, 3, 3};
    train::TrainConfig train;  // train.policies non-empty overrides the variant presets
    bool save_models = true;
    AugmentConfig augment;
    SweepConfig sweep;
    FilterConfig filter;
    EvalConfig eval;
};

/// Name of the environment variable that overrides output_dir.
inline constexpr const char* kOutputDirEnv = "OCTMIX_OUTPUT_DIR";

/// Parses and validates `doc` for `command`. Collects every problem and
/// throws one ConfigError listing all of them.
RunConfig parse(const nlohmann::json& doc, Command command);

/// Applies one "dotted.key=value" override. The value is read as JSON when it
/// parses, otherwise as a string. Throws ConfigError.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// File (optional) < environment output dir < overrides, then parse().
RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
               Command command);

augment::AugPolicy policy_from_json(const nlohmann::json& value);
nlohmann::ordered_json policy_to_json(const augment::AugPolicy& policy);

/// Fully resolved config, as written next to every run's outputs.
nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace octmix::config
