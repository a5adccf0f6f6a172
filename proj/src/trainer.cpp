#include "octmix/trainer.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>

#include <json.hpp>

#include "octmix/error.hpp"
#include "octmix/random.hpp"
#include "octmix/tensor_io.hpp"

namespace octmix::train {

namespace {

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t phase_seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng = make_rng(phase_seed, {stream::kEpoch, epoch});
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

std::vector<std::span<const std::size_t>> batches_of(const std::vector<std::size_t>& order, std::size_t batch_size) {
    std::vector<std::span<const std::size_t>> out;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        out.emplace_back(order.data() + start, std::min(batch_size, order.size() - start));
    }
    return out;
}

nn::Matrix select_rows(const nn::Matrix& m, std::span<const std::size_t> rows) {
    nn::Matrix out(rows.size(), m.cols);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(rows[r] * m.cols), m.cols,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols));
    }
    return out;
}

nn::Matrix column_block(const nn::Matrix& m, std::size_t offset, std::size_t width) {
    nn::Matrix out(m.rows, width);
    for (std::size_t r = 0; r < m.rows; ++r) {
        std::copy_n(m.data.begin() + static_cast<std::ptrdiff_t>(r * m.cols + offset), width,
                    out.data.begin() + static_cast<std::ptrdiff_t>(r * width));
    }
    return out;
}

nn::Matrix ensemble_features(const EnsembleModel& model, const LabeledBatch& batch) {
    std::vector<nn::Matrix> parts;
    parts.reserve(model.branches());
    for (const nn::FeatureExtractor& e : model.extractors) parts.push_back(e.forward(batch));
    return nn::concat_columns(parts);
}

double accuracy_of(const nn::FeatureExtractor& extractor, const nn::Classifier& classifier, const LabeledBatch& batch) {
    const nn::Matrix logits = classifier.logits(extractor.forward(batch));
    std::size_t correct = 0;
    for (std::size_t r = 0; r < logits.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < logits.cols; ++k) {
            if (logits(r, k) > logits(r, best)) best = k;
        }
        if (best == batch.labels[r].argmax()) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(batch.size());
}

void require_data(const LabeledBatch& data) {
    if (data.empty()) throw ShapeError("training data is empty");
    data.validate();
}

}  // namespace

// ---------------------------------------------------------------------------
// EnsembleModel

EnsembleModel::EnsembleModel(const nn::ModelConfig& config, std::size_t branches, std::uint64_t seed)
    : config_(config) {
    config_.validate();
    if (branches == 0) throw InvalidParameterError("ensemble needs at least one branch");
    for (std::size_t k = 0; k < branches; ++k) {
        Rng e_rng = make_rng(seed, {stream::kInit, k, 0});
        extractors.emplace_back(config_, e_rng, "E" + std::to_string(k + 1));
        Rng c_rng = make_rng(seed, {stream::kInit, k, 1});
        heads.emplace_back(config_.feature_dim(), config_.num_classes, c_rng, "C" + std::to_string(k + 1));
    }
    Rng rng = make_rng(seed, {stream::kInit, stream::kClassifier});
    combined = nn::Classifier(branches * config_.feature_dim(), config_.num_classes, rng, "C");
}

std::vector<nn::Parameter*> EnsembleModel::parameters() {
    std::vector<nn::Parameter*> out;
    for (auto& e : extractors) {
        for (auto* p : e.parameters()) out.push_back(p);
    }
    for (auto& c : heads) {
        for (auto* p : c.parameters()) out.push_back(p);
    }
    for (auto* p : combined.parameters()) out.push_back(p);
    return out;
}

std::vector<const nn::Parameter*> EnsembleModel::parameters() const {
    std::vector<const nn::Parameter*> out;
    for (const auto& e : extractors) {
        for (const auto* p : e.parameters()) out.push_back(p);
    }
    for (const auto& c : heads) {
        for (const auto* p : c.parameters()) out.push_back(p);
    }
    for (const auto* p : combined.parameters()) out.push_back(p);
    return out;
}

void TrainConfig::validate() const {
    if (batch_size == 0) throw InvalidParameterError("batch_size must be >= 1");
    if (!(lr > 0.0)) throw InvalidParameterError("learning rate must be positive");
    for (const auto& p : policies) p.validate();
}

// ---------------------------------------------------------------------------
// Training phases

std::vector<double> train_network(nn::FeatureExtractor& extractor, nn::Classifier& classifier,
                                  const LabeledBatch& data, const augment::AugPolicy* policy, std::size_t epochs,
                                  std::size_t batch_size, std::uint64_t phase_seed, double lr,
                                  const EpochObserver& observer) {
    if (epochs == 0) return {};
    require_data(data);
    if (batch_size == 0) throw InvalidParameterError("batch_size must be >= 1");
    if (policy) policy->validate_for(data.timesteps(), data.channels(), data.sample_rate_hz());
    std::vector<nn::Parameter*> params = extractor.parameters();
    for (auto* p : classifier.parameters()) params.push_back(p);
    nn::Adam adam(params, nn::AdamConfig{lr});
    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        const std::vector<std::size_t> order = epoch_order(data.size(), phase_seed, epoch);
        double total = 0.0;
        std::size_t rows = 0;
        const auto batches = batches_of(order, batch_size);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            LabeledBatch batch = data.subset(batches[b]);
            if (policy) {
                Rng rng = make_rng(phase_seed, {stream::kBatch, epoch, b});
                batch = augment::apply_policy(batch, *policy, rng);
            }
            const double loss = nn::backward(extractor, classifier, batch);
            adam.step();
            total += loss * static_cast<double>(batch.size());
            rows += batch.size();
        }
        trace.push_back(total / static_cast<double>(rows));
        if (observer) observer(epoch, trace.back());
    }
    return trace;
}

std::uint64_t branch_seed(std::uint64_t seed, std::size_t branch) {
    return derive_seed(seed, {stream::kBranch, branch});
}

std::vector<double> pretrain_branch(EnsembleModel& model, std::size_t branch, const LabeledBatch& data,
                                    const TrainConfig& config, const EpochObserver& observer) {
    if (branch >= model.branches()) throw InvalidParameterError("branch index out of range");
    if (config.policies.size() != model.branches()) {
        throw InvalidParameterError("need one DA policy per ensemble branch");
    }
    config.validate();
    return train_network(model.extractors[branch], model.heads[branch], data, &config.policies[branch],
                         config.pretrain_epochs, config.batch_size, branch_seed(config.seed, branch), config.lr,
                         observer);
}

void freeze_extractors(EnsembleModel& model) {
    for (auto& e : model.extractors) e.freeze();
}

std::vector<double> train_combined_classifier(EnsembleModel& model, const LabeledBatch& data,
                                              const TrainConfig& config, const EpochObserver& observer) {
    for (std::size_t k = 0; k < model.branches(); ++k) {
        if (!model.extractors[k].frozen()) {
            throw ContractViolationError("extractor E" + std::to_string(k + 1) +
                                         " must be frozen before classifier training");
        }
    }
    config.validate();
    if (config.classifier_epochs == 0) return {};
    require_data(data);
    // Frozen extractors and clean inputs: the features are the same every epoch.
    const nn::Matrix features = ensemble_features(model, data);
    const nn::Matrix targets = nn::label_matrix(data);
    const std::uint64_t phase_seed = derive_seed(config.seed, {stream::kClassifier});
    nn::Adam adam(model.combined.parameters(), nn::AdamConfig{config.lr});
    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < config.classifier_epochs; ++epoch) {
        const std::vector<std::size_t> order = epoch_order(data.size(), phase_seed, epoch);
        double total = 0.0;
        for (std::span<const std::size_t> rows : batches_of(order, config.batch_size)) {
            const nn::Matrix x = select_rows(features, rows);
            const nn::Matrix y = select_rows(targets, rows);
            nn::zero_grads(model.combined.parameters());
            const nn::Matrix probs = nn::softmax(model.combined.logits(x));
            const double loss = nn::soft_cross_entropy(probs, y);
            model.combined.backward(x, nn::cross_entropy_logit_grad(probs, y));
            adam.step();
            total += loss * static_cast<double>(rows.size());
        }
        trace.push_back(total / static_cast<double>(data.size()));
        if (observer) observer(epoch, trace.back());
    }
    return trace;
}

DarFfeTrace train_dar_ffe(EnsembleModel& model, const LabeledBatch& data, const TrainConfig& config,
                          const EpochObserver& classifier_observer) {
    DarFfeTrace trace;
    for (std::size_t k = 0; k < model.branches(); ++k) {
        trace.pretrain_loss.push_back(pretrain_branch(model, k, data, config));
    }
    freeze_extractors(model);
    trace.classifier_loss = train_combined_classifier(model, data, config, classifier_observer);
    return trace;
}

std::vector<double> train_simple_ensemble(EnsembleModel& model, const LabeledBatch& data,
                                          const TrainConfig& config, const EpochObserver& observer) {
    const std::size_t branches = model.branches();
    if (config.policies.size() != branches) throw InvalidParameterError("need one DA policy per ensemble branch");
    config.validate();
    for (const auto& p : config.policies) {
        if (p.apply_prob != config.policies.front().apply_prob) {
            throw InvalidParameterError("joint ensemble training needs one apply_prob shared by all policies");
        }
    }
    if (config.pretrain_epochs == 0) return {};
    require_data(data);
    for (const auto& p : config.policies) p.validate_for(data.timesteps(), data.channels(), data.sample_rate_hz());

    std::vector<nn::Parameter*> params;
    for (auto& e : model.extractors) {
        for (auto* p : e.parameters()) params.push_back(p);
    }
    for (auto* p : model.combined.parameters()) params.push_back(p);
    nn::Adam adam(params, nn::AdamConfig{config.lr});
    const std::uint64_t phase_seed = derive_seed(config.seed, {stream::kJoint});
    const std::size_t width = model.config().feature_dim();

    std::vector<double> trace;
    for (std::size_t epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
        const std::vector<std::size_t> order = epoch_order(data.size(), phase_seed, epoch);
        double total = 0.0;
        std::size_t rows = 0;
        const auto batches = batches_of(order, config.batch_size);
        for (std::size_t b = 0; b < batches.size(); ++b) {
            const LabeledBatch clean = data.subset(batches[b]);
            // Every branch replays the same stream, so the coin, rotations and
            // mixing plan agree across branches and rows stay aligned.
            std::vector<LabeledBatch> views;
            for (std::size_t k = 0; k < branches; ++k) {
                Rng rng = make_rng(phase_seed, {stream::kBatch, epoch, b});
                views.push_back(augment::apply_policy(clean, config.policies[k], rng));
                if (views.back().size() != views.front().size()) {
                    throw ShapeError("ensemble branch views differ in size");
                }
            }
            const std::size_t n = views.front().size();
            nn::Matrix targets(n, data.num_classes());
            for (const LabeledBatch& v : views) {
                const nn::Matrix y = nn::label_matrix(v);
                for (std::size_t i = 0; i < y.data.size(); ++i) targets.data[i] += y.data[i];
            }
            for (double& t : targets.data) t /= static_cast<double>(branches);

            nn::zero_grads(params);
            std::vector<nn::ExtractorTape> tapes(branches);
            std::vector<nn::Matrix> parts;
            for (std::size_t k = 0; k < branches; ++k) parts.push_back(model.extractors[k].forward(views[k], tapes[k]));
            const nn::Matrix features = nn::concat_columns(parts);
            const nn::Matrix probs = nn::softmax(model.combined.logits(features));
            const double loss = nn::soft_cross_entropy(probs, targets);
            const nn::Matrix d_features = model.combined.backward(features, nn::cross_entropy_logit_grad(probs, targets));
            for (std::size_t k = 0; k < branches; ++k) {
                model.extractors[k].backward(tapes[k], column_block(d_features, k * width, width));
            }
            adam.step();
            total += loss * static_cast<double>(n);
            rows += n;
        }
        trace.push_back(total / static_cast<double>(rows));
        if (observer) observer(epoch, trace.back());
    }
    return trace;
}

Prediction predict(const EnsembleModel& model, const LabeledBatch& batch) {
    Prediction out;
    out.probs = nn::softmax(model.combined.logits(ensemble_features(model, batch)));
    out.classes.resize(out.probs.rows);
    for (std::size_t r = 0; r < out.probs.rows; ++r) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < out.probs.cols; ++k) {
            if (out.probs(r, k) > out.probs(r, best)) best = k;
        }
        out.classes[r] = best;
    }
    return out;
}

metrics::ConfusionMatrix evaluate(const EnsembleModel& model, const LabeledBatch& batch) {
    const Prediction p = predict(model, batch);
    metrics::ConfusionMatrix cm(model.config().num_classes);
    for (std::size_t r = 0; r < batch.size(); ++r) cm.add(batch.labels[r].argmax(), p.classes[r]);
    return cm;
}

// ---------------------------------------------------------------------------
// Variants

std::string to_string(Pipeline pipeline) {
    switch (pipeline) {
        case Pipeline::Plain: return "plain";
        case Pipeline::SimpleEnsemble: return "simple-ensemble";
        case Pipeline::DarFfe: return "dar-ffe";
        case Pipeline::DaRevisited: return "da-revisited";
    }
    return "unknown";
}

augment::AugPolicy no_augmentation() { return augment::AugPolicy{{}, 0.0}; }

augment::AugPolicy rotation_policy() { return augment::AugPolicy{{augment::RotationStep{}}, 0.5}; }

augment::AugPolicy rotation_then(augment::Step step) {
    return augment::AugPolicy{{augment::RotationStep{}, std::move(step)}, 0.5};
}

std::vector<augment::AugPolicy> default_ensemble_policies() {
    return {rotation_then(augment::OctaveMixStep{0.5, 2.1}), rotation_then(augment::MixupStep{5.0})};
}

namespace {

std::vector<Variant> presets() {
    using augment::MixupStep;
    using augment::OctaveMixStep;
    using augment::RicapStep;
    const auto octmix = rotation_then(OctaveMixStep{0.5, 2.1});
    const auto mixup = rotation_then(MixupStep{5.0});
    const auto ricap = rotation_then(RicapStep{5.0});
    return {
        {"none", Pipeline::Plain, {no_augmentation()}, "without DA"},
        {"rotation", Pipeline::Plain, {rotation_policy()}, "with Rotation"},
        {"rot+mixup", Pipeline::Plain, {mixup}, "Rotation then mixup"},
        {"rot+ricap", Pipeline::Plain, {ricap}, "Rotation then 1-D RICAP"},
        {"rot+octmix", Pipeline::Plain, {octmix}, "Rotation then Octave Mix"},
        {"simple-ensemble", Pipeline::SimpleEnsemble, {octmix, mixup}, "joint ensemble Rot+OctMix / Rot+mixup"},
        {"simple-ensemble-ricap-mixup", Pipeline::SimpleEnsemble, {ricap, mixup},
         "joint ensemble Rot+RICAP / Rot+mixup"},
        {"dar-ffe", Pipeline::DarFfe, {octmix}, "DAR-FFE, single Rot+OctMix branch"},
        {"dar-ffe-rotation", Pipeline::DarFfe, {rotation_policy()}, "DAR-FFE, single Rotation branch"},
        {"dar-ffe-ensemble", Pipeline::DarFfe, {octmix, mixup}, "DAR-FFE ensemble Rot+OctMix / Rot+mixup"},
        {"dar-ffe-ricap-mixup", Pipeline::DarFfe, {ricap, mixup}, "DAR-FFE ensemble Rot+RICAP / Rot+mixup"},
        {"dar-ffe-ricap-octmix", Pipeline::DarFfe, {ricap, octmix}, "DAR-FFE ensemble Rot+RICAP / Rot+OctMix"},
        {"dar-ffe-k3", Pipeline::DarFfe, {mixup, ricap, octmix}, "DAR-FFE ensemble of mixup, RICAP, OctMix"},
        {"da-revisited", Pipeline::DaRevisited, {octmix}, "pretrain with Rot+OctMix, retrain all on clean data"},
    };
}

}  // namespace

Variant lookup_variant(const std::string& name) {
    for (Variant& v : presets()) {
        if (v.name == name) return v;
    }
    std::string known;
    for (const std::string& n : variant_names()) known += (known.empty() ? "" : ", ") + n;
    throw UnknownVariantError("unknown variant '" + name + "' (known: " + known + ")");
}

std::vector<std::string> variant_names() {
    std::vector<std::string> out;
    for (const Variant& v : presets()) out.push_back(v.name);
    return out;
}

std::vector<std::pair<std::string, std::string>> ablation_rows() {
    return {{"1", "none"},
            {"2", "rotation"},
            {"3", "rot+octmix"},
            {"4", "simple-ensemble-ricap-mixup"},
            {"5", "dar-ffe-rotation"},
            {"6", "simple-ensemble"},
            {"7", "dar-ffe"},
            {"8", "dar-ffe-ricap-mixup"},
            {"9", "dar-ffe-ensemble"}};
}

std::vector<std::pair<std::string, std::string>> ensemble_patterns() {
    return {{"a", "dar-ffe-ricap-mixup"}, {"b", "dar-ffe-ensemble"}, {"c", "dar-ffe-ricap-octmix"}, {"d", "dar-ffe-k3"}};
}

double ExperimentResult::best_valid_accuracy() const {
    if (valid_accuracy_trace.empty()) throw UndefinedMetricError("no validation trace recorded");
    return *std::max_element(valid_accuracy_trace.begin(), valid_accuracy_trace.end());
}

ExperimentResult run_experiment(const Variant& variant, const Datasets& data, const nn::ModelConfig& model_config,
                                TrainConfig config) {
    if (config.policies.empty()) config.policies = variant.policies;
    config.validate();
    const std::size_t k = config.policies.size();
    if (k == 0) throw InvalidParameterError("variant " + variant.name + " has no policies");
    if ((variant.pipeline == Pipeline::Plain || variant.pipeline == Pipeline::DaRevisited) && k != 1) {
        throw InvalidParameterError("variant " + variant.name + " takes exactly one policy");
    }
    require_data(data.train);
    data.test.validate();

    ExperimentResult result;
    for (const auto& p : config.policies) result.policy_descriptions.push_back(p.describe());
    result.model = EnsembleModel(model_config, k, config.seed);
    EnsembleModel& model = result.model;
    const bool has_valid = !data.valid.empty();

    switch (variant.pipeline) {
        case Pipeline::Plain: {
            auto observe = [&](std::size_t, double) {
                if (has_valid) result.valid_accuracy_trace.push_back(accuracy_of(model.extractors[0], model.heads[0], data.valid));
            };
            result.loss_traces.push_back(pretrain_branch(model, 0, data.train, config, observe));
            model.combined = model.heads[0];
            break;
        }
        case Pipeline::SimpleEnsemble: {
            auto observe = [&](std::size_t, double) {
                if (has_valid) result.valid_accuracy_trace.push_back(metrics::accuracy(evaluate(model, data.valid)));
            };
            result.loss_traces.push_back(train_simple_ensemble(model, data.train, config, observe));
            break;
        }
        case Pipeline::DarFfe: {
            auto observe = [&](std::size_t, double) {
                if (has_valid) result.valid_accuracy_trace.push_back(metrics::accuracy(evaluate(model, data.valid)));
            };
            DarFfeTrace trace = train_dar_ffe(model, data.train, config, observe);
            result.loss_traces = std::move(trace.pretrain_loss);
            result.loss_traces.push_back(std::move(trace.classifier_loss));
            break;
        }
        case Pipeline::DaRevisited: {
            auto observe = [&](std::size_t, double) {
                if (has_valid) result.valid_accuracy_trace.push_back(accuracy_of(model.extractors[0], model.heads[0], data.valid));
            };
            result.loss_traces.push_back(pretrain_branch(model, 0, data.train, config));
            result.loss_traces.push_back(train_network(model.extractors[0], model.heads[0], data.train, nullptr,
                                                       config.classifier_epochs, config.batch_size,
                                                       derive_seed(config.seed, {stream::kRevisit}), config.lr,
                                                       observe));
            model.combined = model.heads[0];
            break;
        }
    }
    if (has_valid) {
        result.valid_confusion = evaluate(model, data.valid);
        if (result.valid_accuracy_trace.empty()) {
            result.valid_accuracy_trace.push_back(metrics::accuracy(*result.valid_confusion));
        }
    }
    result.test_confusion = evaluate(model, data.test);
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

void save_model(const EnsembleModel& model, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create model directory " + dir.string());
    nlohmann::ordered_json manifest;
    manifest["format"] = "octmix-model";
    manifest["version"] = 1;
    const nn::ModelConfig& cfg = model.config();
    manifest["model"] = {{"in_channels", cfg.in_channels},
                         {"channel_widths", cfg.channel_widths},
                         {"kernel_size", cfg.kernel_size},
                         {"num_classes", cfg.num_classes}};
    manifest["branches"] = model.branches();
    nlohmann::ordered_json params = nlohmann::ordered_json::array();
    for (const nn::Parameter* p : model.parameters()) {
        const std::string file = p->name + ".octm";
        io::Tensor t;
        t.dims.assign(p->shape.begin(), p->shape.end());
        t.values = p->value;
        io::write_tensor(dir / file, t);
        params.push_back({{"name", p->name}, {"file", file}, {"shape", p->shape}, {"frozen", !p->trainable}});
    }
    manifest["parameters"] = params;
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write model manifest");
    out << manifest.dump(2) << '\n';
}

EnsembleModel load_model(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw MissingFileError("no model manifest in " + dir.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
        nn::ModelConfig cfg;
        cfg.in_channels = manifest.at("model").at("in_channels").get<std::size_t>();
        cfg.channel_widths = manifest.at("model").at("channel_widths").get<std::vector<std::size_t>>();
        cfg.kernel_size = manifest.at("model").at("kernel_size").get<std::size_t>();
        cfg.num_classes = manifest.at("model").at("num_classes").get<std::size_t>();
        EnsembleModel model(cfg, manifest.at("branches").get<std::size_t>(), 0);
        std::map<std::string, nn::Parameter*> by_name;
        for (nn::Parameter* p : model.parameters()) by_name[p->name] = p;
        std::size_t loaded = 0;
        for (const auto& entry : manifest.at("parameters")) {
            const std::string name = entry.at("name").get<std::string>();
            const auto it = by_name.find(name);
            if (it == by_name.end()) throw ParseError("model manifest lists unknown parameter " + name);
            const io::Tensor t = io::read_tensor(dir / entry.at("file").get<std::string>());
            if (t.values.size() != it->second->value.size()) throw ShapeError("parameter " + name + " has wrong size");
            it->second->value = t.values;
            it->second->trainable = !entry.at("frozen").get<bool>();
            ++loaded;
        }
        if (loaded != by_name.size()) throw ParseError("model manifest is missing parameters");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("malformed model manifest: ") + e.what());
    }
}

}  // namespace octmix::train
