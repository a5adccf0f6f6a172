#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "octmix/augment.hpp"
#include "octmix/metrics.hpp"
#include "octmix/network.hpp"
#include "octmix/window.hpp"

namespace octmix::train {

/// K feature extractors, one pre-training head per extractor and one combined
/// classifier over the concatenated features (branch order 1..K).
class EnsembleModel {
public:
    EnsembleModel() = default;
    EnsembleModel(const nn::ModelConfig& config, std::size_t branches, std::uint64_t seed);

    std::size_t branches() const noexcept { return extractors.size(); }
    const nn::ModelConfig& config() const noexcept { return config_; }

    std::vector<nn::FeatureExtractor> extractors;
    std::vector<nn::Classifier> heads;
    nn::Classifier combined;

    std::vector<nn::Parameter*> parameters();
    std::vector<const nn::Parameter*> parameters() const;

private:
    nn::ModelConfig config_;
};

struct TrainConfig {
    std::vector<augment::AugPolicy> policies;  // DA_1..DA_K
    std::size_t pretrain_epochs = 300;         // N
    std::size_t classifier_epochs = 300;       // M
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
    double lr = 1e-3;

    void validate() const;
};

/// Called after every epoch with the zero-based epoch index and the mean loss.
using EpochObserver = std::function<void(std::size_t epoch, double loss)>;

/// Mini-batch Adam training of one extractor/classifier pair. Each epoch uses
/// an order drawn from (phase_seed, epoch); each batch goes through
/// apply_policy with a stream drawn from (phase_seed, epoch, batch) when a
/// policy is given. Returns the per-epoch loss trace.
std::vector<double> train_network(nn::FeatureExtractor& extractor, nn::Classifier& classifier,
                                  const LabeledBatch& data, const augment::AugPolicy* policy, std::size_t epochs,
                                  std::size_t batch_size, std::uint64_t phase_seed, double lr,
                                  const EpochObserver& observer = {});

/// Seed of pre-training branch k; independent of every other branch.
std::uint64_t branch_seed(std::uint64_t seed, std::size_t branch);

/// Trains (E_k, C_k) for N epochs on DA_k-augmented batches.
std::vector<double> pretrain_branch(EnsembleModel& model, std::size_t branch, const LabeledBatch& data,
                                    const TrainConfig& config, const EpochObserver& observer = {});

/// Trains only the combined classifier for M epochs on clean data passed
/// through the frozen extractors. Throws ContractViolationError if any
/// extractor is still trainable.
std::vector<double> train_combined_classifier(EnsembleModel& model, const LabeledBatch& data,
                                              const TrainConfig& config, const EpochObserver& observer = {});

/// Marks every extractor non-trainable.
void freeze_extractors(EnsembleModel& model);

/// Full two-phase procedure: pretrain every branch, freeze, train C.
struct DarFfeTrace {
    std::vector<std::vector<double>> pretrain_loss;  // per branch
    std::vector<double> classifier_loss;
};
DarFfeTrace train_dar_ffe(EnsembleModel& model, const LabeledBatch& data, const TrainConfig& config,
                          const EpochObserver& classifier_observer = {});

/// Joint training of all extractors and the combined classifier, every branch
/// fed its own DA_k view of the same mini-batch. Heads are unused.
std::vector<double> train_simple_ensemble(EnsembleModel& model, const LabeledBatch& data,
                                          const TrainConfig& config, const EpochObserver& observer = {});

struct Prediction {
    nn::Matrix probs;
    std::vector<std::size_t> classes;
};

/// Uses E_1..E_K and the combined classifier only.
Prediction predict(const EnsembleModel& model, const LabeledBatch& batch);

metrics::ConfusionMatrix evaluate(const EnsembleModel& model, const LabeledBatch& batch);

// ---------------------------------------------------------------------------
// Experiment variants

enum class Pipeline {
    Plain,           // one extractor/classifier, trained N epochs with DA_1
    SimpleEnsemble,  // (E_1..E_K, C) trained jointly for N epochs
    DarFfe,          // pretrain N, freeze, train C for M epochs on clean data
    DaRevisited,     // pretrain N with DA_1, then all weights M epochs on clean data
};

std::string to_string(Pipeline pipeline);

struct Variant {
    std::string name;
    Pipeline pipeline = Pipeline::Plain;
    std::vector<augment::AugPolicy> policies;
    std::string note;
};

/// Preset lookup; throws UnknownVariantError listing the known names.
Variant lookup_variant(const std::string& name);
std::vector<std::string> variant_names();

/// Default DA policies of the proposed ensemble: Rotation then OctaveMix(0.5,
/// 2.1 Hz), and Rotation then mixup(5.0).
std::vector<augment::AugPolicy> default_ensemble_policies();

augment::AugPolicy no_augmentation();
augment::AugPolicy rotation_policy();
augment::AugPolicy rotation_then(augment::Step step);

/// Row label -> variant preset for the ablation table and the ensemble-pattern table.
std::vector<std::pair<std::string, std::string>> ablation_rows();
std::vector<std::pair<std::string, std::string>> ensemble_patterns();

struct Datasets {
    LabeledBatch train;
    LabeledBatch valid;  // may be empty
    LabeledBatch test;
};

struct ExperimentResult {
    EnsembleModel model;
    std::vector<std::string> policy_descriptions;
    std::vector<std::vector<double>> loss_traces;
    std::vector<double> valid_accuracy_trace;  // one entry per epoch of the final phase
    std::optional<metrics::ConfusionMatrix> valid_confusion;
    metrics::ConfusionMatrix test_confusion;

    /// Max of the validation trace (best over all epochs).
    double best_valid_accuracy() const;
};

/// Runs `variant` end to end. `config.policies` overrides the variant's
/// presets when non-empty.
ExperimentResult run_experiment(const Variant& variant, const Datasets& data, const nn::ModelConfig& model_config,
                                TrainConfig config);

/// Parameter files plus manifest.json (names, shapes, freeze flags).
void save_model(const EnsembleModel& model, const std::filesystem::path& dir);
EnsembleModel load_model(const std::filesystem::path& dir);

}  // namespace octmix::train
