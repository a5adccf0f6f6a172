#include "octmix/config.hpp"

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "octmix/error.hpp"
#include "octmix/signal.hpp"

namespace octmix::config {

using nlohmann::json;

std::string to_string(Command command) {
    switch (command) {
        case Command::GenSynth: return "gen-synth";
        case Command::Augment: return "augment";
        case Command::Train: return "train";
        case Command::Eval: return "eval";
        case Command::Sweep: return "sweep";
        case Command::InspectFilter: return "inspect-filter";
    }
    return "unknown";
}

namespace {

// Accumulates problems instead of stopping at the first one.
class Reader {
public:
    explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

    void fail(const std::string& path, const std::string& message) { errors_.push_back(path + ": " + message); }

    // True when `node` is an object whose keys all appear in `allowed`.
    bool object(const json& node, const std::string& path, std::initializer_list<const char*> allowed) {
        if (!node.is_object()) {
            fail(path, "expected an object");
            return false;
        }
        const std::set<std::string> keys(allowed.begin(), allowed.end());
        for (const auto& [key, value] : node.items()) {
            if (!keys.contains(key)) fail(join(path, key), "unknown key");
        }
        return true;
    }

    static std::string join(const std::string& path, const std::string& key) {
        if (key.empty()) return path;
        return path.empty() ? key : path + "." + key;
    }

    void read(const json& obj, const std::string& path, const char* key, std::size_t& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
            out = v.get<std::size_t>();
        } else if (v.is_number_integer()) {
            fail(join(path, key), "must be a non-negative integer");
        } else {
            fail(join(path, key), "expected an integer");
        }
    }

    void read(const json& obj, const std::string& path, const char* key, int& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (v.is_number_integer() && v.get<std::int64_t>() >= std::numeric_limits<int>::min() &&
            (v.is_number_unsigned() ? v.get<std::uint64_t>() <= std::numeric_limits<int>::max()
                                    : v.get<std::int64_t>() <= std::numeric_limits<int>::max())) {
            out = v.get<int>();
        } else {
            fail(join(path, key), "expected an integer");
        }
    }

    void read(const json& obj, const std::string& path, const char* key, double& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (v.is_number()) {
            out = v.get<double>();
        } else {
            fail(join(path, key), "expected a number");
        }
    }

    void read(const json& obj, const std::string& path, const char* key, bool& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (v.is_boolean()) {
            out = v.get<bool>();
        } else {
            fail(join(path, key), "expected true or false");
        }
    }

    void read(const json& obj, const std::string& path, const char* key, std::string& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (v.is_string()) {
            out = v.get<std::string>();
        } else {
            fail(join(path, key), "expected a string");
        }
    }

    template <typename T>
    void read(const json& obj, const std::string& path, const char* key, std::vector<T>& out) {
        if (!obj.contains(key)) return;
        const json& v = obj.at(key);
        if (!v.is_array()) {
            fail(join(path, key), "expected a list");
            return;
        }
        std::vector<T> items;
        const std::string here = join(path, key);
        for (std::size_t i = 0; i < v.size(); ++i) {
            json wrapper = {{"", v[i]}};
            T item{};
            const std::size_t before = errors_.size();
            read(wrapper, here + "[" + std::to_string(i) + "]", "", item);
            if (errors_.size() == before) items.push_back(item);
        }
        out = std::move(items);
    }

    template <typename T>
    void read(const json& obj, const std::string& path, const char* key, std::optional<T>& out) {
        if (!obj.contains(key)) return;
        T value{};
        const std::size_t before = errors_.size();
        read(obj, path, key, value);
        if (errors_.size() == before) out = std::move(value);
    }

    void read(const json& obj, const std::string& path, const char* key, std::filesystem::path& out) {
        std::string text = out.string();
        read(obj, path, key, text);
        out = text;
    }

    void read(const json& obj, const std::string& path, const char* key,
              std::optional<std::filesystem::path>& out) {
        std::optional<std::string> text;
        read(obj, path, key, text);
        if (text) out = *text;
    }

    augment::AugPolicy policy(const json& node, const std::string& path) {
        augment::AugPolicy out{{}, 0.5};
        if (!object(node, path, {"apply_prob", "steps"})) return out;
        read(node, path, "apply_prob", out.apply_prob);
        if (!node.contains("steps")) return out;
        const json& steps = node.at("steps");
        if (!steps.is_array()) {
            fail(join(path, "steps"), "expected a list");
            return out;
        }
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const std::string here = join(path, "steps") + "[" + std::to_string(i) + "]";
            const json& s = steps[i];
            if (!s.is_object() || !s.contains("type") || !s.at("type").is_string()) {
                fail(here, "expected an object with a string \"type\"");
                continue;
            }
            const std::string type = s.at("type").get<std::string>();
            if (type == "rotation") {
                object(s, here, {"type"});
                out.steps.emplace_back(augment::RotationStep{});
            } else if (type == "mixup") {
                augment::MixupStep step;
                object(s, here, {"type", "alpha"});
                read(s, here, "alpha", step.alpha);
                out.steps.emplace_back(step);
            } else if (type == "ricap") {
                augment::RicapStep step;
                object(s, here, {"type", "alpha"});
                read(s, here, "alpha", step.alpha);
                out.steps.emplace_back(step);
            } else if (type == "octave_mix") {
                augment::OctaveMixStep step;
                object(s, here, {"type", "alpha", "cutoff_hz", "num_taps"});
                read(s, here, "alpha", step.alpha);
                read(s, here, "cutoff_hz", step.cutoff_hz);
                read(s, here, "num_taps", step.num_taps);
                out.steps.emplace_back(step);
            } else {
                fail(join(here, "type"), "unknown step '" + type + "' (rotation, mixup, ricap, octave_mix)");
            }
        }
        return out;
    }

    // Runs a library validator and records what it throws.
    template <typename F>
    void check(const std::string& path, F&& validator) {
        try {
            validator();
        } catch (const Error& e) {
            fail(path, e.what());
        }
    }

private:
    std::vector<std::string>& errors_;
};

void read_synth(Reader& r, const json& node, const std::string& path, data::SynthSpec& s) {
    if (!r.object(node, path,
                  {"num_classes", "subjects", "recordings_per_subject", "duration_s", "sample_rate_hz",
                   "base_freq_hz", "amplitude", "harmonic_weight", "noise_std", "gain_jitter", "phase_jitter_rad",
                   "gravity", "seed"})) {
        return;
    }
    r.read(node, path, "num_classes", s.num_classes);
    r.read(node, path, "subjects", s.subjects);
    r.read(node, path, "recordings_per_subject", s.recordings_per_subject);
    r.read(node, path, "duration_s", s.duration_s);
    r.read(node, path, "sample_rate_hz", s.sample_rate_hz);
    r.read(node, path, "base_freq_hz", s.base_freq_hz);
    r.read(node, path, "amplitude", s.amplitude);
    r.read(node, path, "harmonic_weight", s.harmonic_weight);
    r.read(node, path, "noise_std", s.noise_std);
    r.read(node, path, "gain_jitter", s.gain_jitter);
    r.read(node, path, "phase_jitter_rad", s.phase_jitter_rad);
    r.read(node, path, "gravity", s.gravity);
    r.read(node, path, "seed", s.seed);
}

// Shape facts known before any data is read; channels are unknown for CSV corpora.
struct KnownShape {
    std::optional<std::size_t> channels;
    std::optional<double> sample_rate_hz;
};

void check_policy(Reader& r, const std::string& path, const augment::AugPolicy& policy, const RunConfig& c,
                  const KnownShape& shape) {
    r.check(path, [&] {
        if (shape.channels && shape.sample_rate_hz) {
            policy.validate_for(c.windowing.frame, *shape.channels, *shape.sample_rate_hz);
        } else {
            policy.validate();
        }
    });
}

}  // namespace

augment::AugPolicy policy_from_json(const json& value) {
    std::vector<std::string> errors;
    Reader r(errors);
    augment::AugPolicy policy = r.policy(value, "policy");
    r.check("policy", [&] { policy.validate(); });
    if (!errors.empty()) throw ConfigError(errors);
    return policy;
}

nlohmann::ordered_json policy_to_json(const augment::AugPolicy& policy) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const augment::Step& step : policy.steps) {
        if (std::holds_alternative<augment::RotationStep>(step)) {
            steps.push_back({{"type", "rotation"}});
        } else if (const auto* m = std::get_if<augment::MixupStep>(&step)) {
            steps.push_back({{"type", "mixup"}, {"alpha", m->alpha}});
        } else if (const auto* rc = std::get_if<augment::RicapStep>(&step)) {
            steps.push_back({{"type", "ricap"}, {"alpha", rc->alpha}});
        } else if (const auto* o = std::get_if<augment::OctaveMixStep>(&step)) {
            steps.push_back({{"type", "octave_mix"}, {"alpha", o->alpha}, {"cutoff_hz", o->cutoff_hz},
                             {"num_taps", o->num_taps}});
        }
    }
    return {{"apply_prob", policy.apply_prob}, {"steps", steps}};
}

RunConfig parse(const json& doc, Command command) {
    std::vector<std::string> errors;
    Reader r(errors);
    RunConfig c;
    if (!r.object(doc, "config",
                  {"description", "seed", "output_dir", "data", "windowing", "split", "trials", "variant", "model",
                   "train", "save_models", "augment", "sweep", "filter", "eval"})) {
        throw ConfigError(errors);
    }
    r.read(doc, "", "seed", c.seed);
    r.read(doc, "", "output_dir", c.output_dir);
    r.read(doc, "", "trials", c.trials);
    r.read(doc, "", "variant", c.variant);
    r.read(doc, "", "save_models", c.save_models);

    if (doc.contains("data") && r.object(doc.at("data"), "data", {"manifest", "classes", "synthetic"})) {
        const json& d = doc.at("data");
        r.read(d, "data", "manifest", c.data.manifest);
        r.read(d, "data", "classes", c.data.classes);
        if (d.contains("synthetic")) read_synth(r, d.at("synthetic"), "data.synthetic", c.data.synthetic);
        if (c.data.manifest && d.contains("synthetic")) r.fail("data", "give either manifest or synthetic, not both");
    }
    if (doc.contains("windowing") && r.object(doc.at("windowing"), "windowing", {"frame", "stride", "trim_s"})) {
        const json& w = doc.at("windowing");
        r.read(w, "windowing", "frame", c.windowing.frame);
        r.read(w, "windowing", "stride", c.windowing.stride);
        r.read(w, "windowing", "trim_s", c.windowing.trim_s);
    }
    if (doc.contains("split") &&
        r.object(doc.at("split"), "split", {"n_train", "n_valid", "n_test", "train_counts"})) {
        const json& s = doc.at("split");
        r.read(s, "split", "n_train", c.split.n_train);
        r.read(s, "split", "n_valid", c.split.n_valid);
        r.read(s, "split", "n_test", c.split.n_test);
        r.read(s, "split", "train_counts", c.train_counts);
    }
    if (doc.contains("model") && r.object(doc.at("model"), "model", {"channel_widths", "kernel_size"})) {
        r.read(doc.at("model"), "model", "channel_widths", c.model.channel_widths);
        r.read(doc.at("model"), "model", "kernel_size", c.model.kernel_size);
    }
    if (doc.contains("train") && r.object(doc.at("train"), "train",
                                          {"pretrain_epochs", "classifier_epochs", "batch_size", "lr", "policies"})) {
        const json& t = doc.at("train");
        r.read(t, "train", "pretrain_epochs", c.train.pretrain_epochs);
        r.read(t, "train", "classifier_epochs", c.train.classifier_epochs);
        r.read(t, "train", "batch_size", c.train.batch_size);
        r.read(t, "train", "lr", c.train.lr);
        if (t.contains("policies")) {
            if (!t.at("policies").is_array()) {
                r.fail("train.policies", "expected a list of policies");
            } else {
                for (std::size_t i = 0; i < t.at("policies").size(); ++i) {
                    c.train.policies.push_back(
                        r.policy(t.at("policies")[i], "train.policies[" + std::to_string(i) + "]"));
                }
            }
        }
    }
    if (doc.contains("augment") && r.object(doc.at("augment"), "augment", {"policy"})) {
        if (doc.at("augment").contains("policy")) c.augment.policy = r.policy(doc.at("augment").at("policy"), "augment.policy");
    }
    if (doc.contains("sweep") && r.object(doc.at("sweep"), "sweep", {"alphas", "cutoffs_hz", "variant"})) {
        r.read(doc.at("sweep"), "sweep", "alphas", c.sweep.alphas);
        r.read(doc.at("sweep"), "sweep", "cutoffs_hz", c.sweep.cutoffs_hz);
        r.read(doc.at("sweep"), "sweep", "variant", c.sweep.variant);
    }
    if (doc.contains("filter") &&
        r.object(doc.at("filter"), "filter", {"cutoff_hz", "num_taps", "sample_rate_hz", "response_points"})) {
        const json& f = doc.at("filter");
        r.read(f, "filter", "cutoff_hz", c.filter.cutoff_hz);
        r.read(f, "filter", "num_taps", c.filter.num_taps);
        r.read(f, "filter", "sample_rate_hz", c.filter.sample_rate_hz);
        r.read(f, "filter", "response_points", c.filter.response_points);
    }
    if (doc.contains("eval") && r.object(doc.at("eval"), "eval", {"model_dir", "subjects"})) {
        r.read(doc.at("eval"), "eval", "model_dir", c.eval.model_dir);
        r.read(doc.at("eval"), "eval", "subjects", c.eval.subjects);
    }

    // Semantic checks: everything below runs even when earlier checks failed.
    if (c.output_dir.empty()) r.fail("output_dir", "must not be empty");
    if (c.trials == 0) r.fail("trials", "must be >= 1");

    const bool synthetic = !c.data.manifest.has_value();
    if (synthetic) {
        r.check("data.synthetic", [&] { c.data.synthetic = c.data.synthetic.resolved(); });
    }
    KnownShape shape;
    if (synthetic) {
        shape.channels = data::kSynthChannels;
        shape.sample_rate_hz = c.data.synthetic.sample_rate_hz;
        c.model.in_channels = data::kSynthChannels;
        c.model.num_classes = c.data.synthetic.num_classes;
    } else if (c.data.classes) {
        c.model.num_classes = c.data.classes->size();
    }
    r.check("windowing", [&] { c.windowing.validate(); });
    r.check("model", [&] {
        c.model.validate();
        if (c.windowing.frame < c.model.min_timesteps()) {
            throw InvalidParameterError("windowing.frame " + std::to_string(c.windowing.frame) + " is shorter than the " +
                                        std::to_string(c.model.min_timesteps()) + " steps the model needs");
        }
    });

    const bool trains = command == Command::Train || command == Command::Sweep;
    if (trains) {
        r.check("train", [&] { c.train.validate(); });
        std::vector<std::size_t> counts = c.train_counts.empty() ? std::vector<std::size_t>{c.split.n_train} : c.train_counts;
        for (std::size_t n : counts) {
            if (n == 0) r.fail("split", "train subject count must be >= 1");
            if (synthetic && n + c.split.n_valid + c.split.n_test > c.data.synthetic.subjects) {
                r.fail("split", std::to_string(n) + "/" + std::to_string(c.split.n_valid) + "/" +
                                    std::to_string(c.split.n_test) + " subjects requested but the synthetic corpus has " +
                                    std::to_string(c.data.synthetic.subjects));
            }
        }
        if (c.split.n_test == 0) r.fail("split.n_test", "must be >= 1");
    }
    for (std::size_t i = 0; i < c.train.policies.size(); ++i) {
        check_policy(r, "train.policies[" + std::to_string(i) + "]", c.train.policies[i], c, shape);
    }
    if (command == Command::Train) {
        try {
            const train::Variant v = train::lookup_variant(c.variant);
            const auto& policies = c.train.policies.empty() ? v.policies : c.train.policies;
            if ((v.pipeline == train::Pipeline::Plain || v.pipeline == train::Pipeline::DaRevisited) &&
                policies.size() != 1) {
                r.fail("train.policies", "variant " + v.name + " takes exactly one policy");
            }
            if (c.train.policies.empty()) {
                for (std::size_t i = 0; i < policies.size(); ++i) {
                    check_policy(r, "variant " + v.name + " policy " + std::to_string(i + 1), policies[i], c, shape);
                }
            }
        } catch (const UnknownVariantError& e) {
            r.fail("variant", e.what());
        }
    }
    if (command == Command::Sweep) {
        if (c.sweep.alphas.empty() || c.sweep.cutoffs_hz.empty()) r.fail("sweep", "grid is empty");
        for (double a : c.sweep.alphas) {
            if (!(a > 0.0)) r.fail("sweep.alphas", "every alpha must be positive");
        }
        for (double f : c.sweep.cutoffs_hz) {
            if (!(f > 0.0)) r.fail("sweep.cutoffs_hz", "every cutoff must be positive");
        }
        if (c.split.n_valid == 0) r.fail("split.n_valid", "sweep selects on validation accuracy; needs >= 1");
        try {
            const train::Variant v = train::lookup_variant(c.sweep.variant);
            bool has_octmix = false;
            for (const auto& p : v.policies) {
                for (const auto& s : p.steps) has_octmix |= std::holds_alternative<augment::OctaveMixStep>(s);
            }
            if (!has_octmix) r.fail("sweep.variant", v.name + " has no Octave Mix step to sweep");
        } catch (const UnknownVariantError& e) {
            r.fail("sweep.variant", e.what());
        }
    }
    if (command == Command::Augment) {
        if (!c.augment.policy) {
            r.fail("augment.policy", "required for augment");
        } else {
            check_policy(r, "augment.policy", *c.augment.policy, c, shape);
        }
    }
    if (command == Command::Eval && !c.eval.model_dir) r.fail("eval.model_dir", "required for eval");
    if (command == Command::InspectFilter) {
        r.check("filter", [&] {
            const int taps = c.filter.num_taps > 0 ? c.filter.num_taps
                                                   : signal::default_num_taps(c.filter.sample_rate_hz);
            signal::FilterSpec{c.filter.cutoff_hz, taps, c.filter.sample_rate_hz}.validate();
        });
        if (c.filter.response_points < 2) r.fail("filter.response_points", "must be >= 2");
    }
    if (!errors.empty()) throw ConfigError(errors);
    return c;
}

void apply_override(json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &doc;
    std::stringstream parts(key);
    std::string part;
    std::vector<std::string> path;
    while (std::getline(parts, part, '.')) path.push_back(part);
    for (std::size_t i = 0; i + 1 < path.size(); ++i) {
        if (path[i].empty()) throw ConfigError("override key '" + key + "' has an empty component");
        json& child = (*node)[path[i]];
        if (child.is_null()) child = json::object();
        if (!child.is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
        node = &child;
    }
    if (path.empty() || path.back().empty()) throw ConfigError("override key '" + key + "' is empty");
    (*node)[path.back()] = value;
}

RunConfig load(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides,
               Command command) {
    json doc = json::object();
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError("cannot read config file " + file->string());
        doc = json::parse(in, nullptr, false, true);
        if (doc.is_discarded()) throw ConfigError("config file " + file->string() + " is not valid JSON");
        if (!doc.is_object()) throw ConfigError("config file " + file->string() + " must hold a JSON object");
    }
    if (const char* env = std::getenv(kOutputDirEnv); env && *env) doc["output_dir"] = env;
    for (const std::string& o : overrides) apply_override(doc, o);
    return parse(doc, command);
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    using ojson = nlohmann::ordered_json;
    ojson out;
    out["seed"] = c.seed;
    out["output_dir"] = c.output_dir.string();
    ojson d = ojson::object();
    if (c.data.manifest) {
        d["manifest"] = c.data.manifest->string();
        if (c.data.classes) d["classes"] = *c.data.classes;
    } else {
        const data::SynthSpec& s = c.data.synthetic;
        d["synthetic"] = {{"num_classes", s.num_classes},
                          {"subjects", s.subjects},
                          {"recordings_per_subject", s.recordings_per_subject},
                          {"duration_s", s.duration_s},
                          {"sample_rate_hz", s.sample_rate_hz},
                          {"base_freq_hz", s.base_freq_hz},
                          {"amplitude", s.amplitude},
                          {"harmonic_weight", s.harmonic_weight},
                          {"noise_std", s.noise_std},
                          {"gain_jitter", s.gain_jitter},
                          {"phase_jitter_rad", s.phase_jitter_rad},
                          {"gravity", s.gravity},
                          {"seed", s.seed}};
    }
    out["data"] = d;
    out["windowing"] = {{"frame", c.windowing.frame}, {"stride", c.windowing.stride}, {"trim_s", c.windowing.trim_s}};
    out["split"] = {{"n_train", c.split.n_train},
                    {"n_valid", c.split.n_valid},
                    {"n_test", c.split.n_test},
                    {"train_counts", c.train_counts}};
    out["trials"] = c.trials;
    out["variant"] = c.variant;
    out["model"] = {{"channel_widths", c.model.channel_widths}, {"kernel_size", c.model.kernel_size}};
    ojson policies = ojson::array();
    for (const auto& p : c.train.policies) policies.push_back(policy_to_json(p));
    out["train"] = {{"pretrain_epochs", c.train.pretrain_epochs},
                    {"classifier_epochs", c.train.classifier_epochs},
                    {"batch_size", c.train.batch_size},
                    {"lr", c.train.lr},
                    {"policies", policies}};
    out["save_models"] = c.save_models;
    out["augment"] = ojson::object();
    if (c.augment.policy) out["augment"]["policy"] = policy_to_json(*c.augment.policy);
    out["sweep"] = {{"alphas", c.sweep.alphas}, {"cutoffs_hz", c.sweep.cutoffs_hz}, {"variant", c.sweep.variant}};
    out["filter"] = {{"cutoff_hz", c.filter.cutoff_hz},
                     {"num_taps", c.filter.num_taps},
                     {"sample_rate_hz", c.filter.sample_rate_hz},
                     {"response_points", c.filter.response_points}};
    out["eval"] = ojson::object();
    if (c.eval.model_dir) out["eval"]["model_dir"] = c.eval.model_dir->string();
    out["eval"]["subjects"] = c.eval.subjects;
    return out;
}

}  // namespace octmix::config
