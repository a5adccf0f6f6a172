#include "octmix/commands.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "octmix/dataset.hpp"
#include "octmix/error.hpp"
#include "octmix/metrics.hpp"
#include "octmix/random.hpp"
#include "octmix/signal.hpp"
#include "octmix/tensor_io.hpp"
#include "octmix/trainer.hpp"

namespace octmix::commands {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw IoError("cannot create output directory " + dir.string());
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write " + file.string());
    out << text;
    if (!out) throw IoError("write failed for " + file.string());
}

std::string percent(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

data::Corpus load_corpus(const config::RunConfig& c) {
    if (c.data.manifest) return data::load_csv_corpus(*c.data.manifest, c.data.classes);
    return data::generate_synthetic(c.data.synthetic);
}

// Channel count and rate shared by every recording.
std::pair<std::size_t, double> corpus_shape(const data::Corpus& corpus) {
    if (corpus.recordings.empty()) throw ShapeError("corpus has no recordings");
    const Window& first = corpus.recordings.front().samples;
    for (const data::Recording& r : corpus.recordings) {
        if (r.samples.channels() != first.channels() || r.samples.sample_rate_hz() != first.sample_rate_hz()) {
            throw ShapeError("recording " + r.source + " differs in channel count or sample rate from " +
                             corpus.recordings.front().source);
        }
    }
    return {first.channels(), first.sample_rate_hz()};
}

nn::ModelConfig model_for(const config::RunConfig& c, const data::Corpus& corpus) {
    nn::ModelConfig m = c.model;
    m.in_channels = corpus_shape(corpus).first;
    m.num_classes = corpus.num_classes();
    m.validate();
    return m;
}

void check_policies(const std::vector<augment::AugPolicy>& policies, const data::Corpus& corpus,
                    const config::RunConfig& c) {
    const auto [channels, rate] = corpus_shape(corpus);
    for (const auto& p : policies) p.validate_for(c.windowing.frame, channels, rate);
}

train::Datasets windows_for(const data::Split& split, std::size_t classes, const data::WindowingSpec& spec) {
    return {data::make_windows(split.train, classes, spec), data::make_windows(split.valid, classes, spec),
            data::make_windows(split.test, classes, spec)};
}

std::uint64_t trial_seed(const config::RunConfig& c, std::size_t trial) {
    return derive_seed(c.seed, {stream::kTrial, trial});
}

data::Split split_for_trial(const data::Corpus& corpus, const config::RunConfig& c, std::size_t n_train,
                            std::size_t trial) {
    Rng rng = make_rng(trial_seed(c, trial), {stream::kSplit});
    return data::split_by_subject(corpus.recordings, {n_train, c.split.n_valid, c.split.n_test}, rng);
}

ojson summary_json(const metrics::Summary& s) {
    return {{"trials", s.trials},
            {"accuracy", s.accuracy.mean},
            {"accuracy_std", s.accuracy.std},
            {"macro_f1", s.macro_f1.mean},
            {"macro_f1_std", s.macro_f1.std},
            {"accuracy_text", metrics::format_mean_std(s.accuracy)},
            {"macro_f1_text", metrics::format_mean_std(s.macro_f1)}};
}

}  // namespace

void cmd_gen_synth(const config::RunConfig& c, std::ostream& log) {
    ensure_dir(c.output_dir);
    const data::Corpus corpus = data::generate_synthetic(c.data.synthetic);
    const fs::path manifest = data::write_csv_corpus(corpus, c.output_dir);
    log << "wrote " << corpus.recordings.size() << " recordings (" << corpus.subjects().size() << " subjects, "
        << corpus.num_classes() << " classes)\nmanifest: " << manifest.string() << '\n';
}

void cmd_augment(const config::RunConfig& c, std::ostream& log) {
    const data::Corpus corpus = load_corpus(c);
    const augment::AugPolicy& policy = *c.augment.policy;
    check_policies({policy}, corpus, c);
    data::WindowingReport report;
    const LabeledBatch batch = data::make_windows(corpus.recordings, corpus.num_classes(), c.windowing, &report);
    if (batch.empty()) throw ShapeError("no recording is long enough for one window");
    Rng rng = make_rng(c.seed, {stream::kBatch});
    const LabeledBatch out = augment::apply_policy(batch, policy, rng);
    ensure_dir(c.output_dir);
    io::write_tensor(c.output_dir / "windows.octm", io::windows_tensor(out));
    io::write_tensor(c.output_dir / "labels.octm", io::labels_tensor(out));
    log << "policy " << policy.describe() << ": " << batch.size() << " windows in, " << out.size()
        << " out\nwrote " << (c.output_dir / "windows.octm").string() << " and "
        << (c.output_dir / "labels.octm").string() << '\n';
}

void cmd_train(const config::RunConfig& c, std::ostream& log) {
    const data::Corpus corpus = load_corpus(c);
    const nn::ModelConfig model = model_for(c, corpus);
    const train::Variant variant = train::lookup_variant(c.variant);
    check_policies(c.train.policies.empty() ? variant.policies : c.train.policies, corpus, c);

    ensure_dir(c.output_dir);
    write_text(c.output_dir / "config.json", config::to_json(c).dump(2) + "\n");
    std::ofstream reports(c.output_dir / "reports.jsonl", std::ios::binary);
    if (!reports) throw IoError("cannot write reports.jsonl");

    const bool count_sweep = !c.train_counts.empty();
    const std::vector<std::size_t> counts = count_sweep ? c.train_counts : std::vector<std::size_t>{c.split.n_train};
    ojson summary;
    summary["variant"] = variant.name;
    summary["pipeline"] = train::to_string(variant.pipeline);
    std::vector<std::string> policy_notes;
    ojson results = ojson::array();
    std::vector<std::pair<std::string, metrics::Summary>> table;

    for (std::size_t n_train : counts) {
        std::vector<metrics::TrialReport> valid_reports;
        std::vector<metrics::TrialReport> test_reports;
        for (std::size_t t = 0; t < c.trials; ++t) {
            const std::string id = (count_sweep ? "n" + std::to_string(n_train) + "-" : std::string{}) + "trial" +
                                   std::to_string(t);
            const train::Datasets d = windows_for(split_for_trial(corpus, c, n_train, t), corpus.num_classes(),
                                                  c.windowing);
            train::TrainConfig tc = c.train;
            tc.seed = trial_seed(c, t);
            const train::ExperimentResult r = train::run_experiment(variant, d, model, tc);
            if (policy_notes.empty()) {
                for (std::size_t k = 0; k < r.policy_descriptions.size(); ++k) {
                    policy_notes.push_back("DA_" + std::to_string(k + 1) + " = " + r.policy_descriptions[k]);
                }
            }
            if (r.valid_confusion) {
                valid_reports.push_back(metrics::make_report(id, "valid", *r.valid_confusion));
                reports << metrics::to_json_line(valid_reports.back()) << '\n';
            }
            test_reports.push_back(metrics::make_report(id, "test", r.test_confusion));
            reports << metrics::to_json_line(test_reports.back()) << '\n';
            reports.flush();
            if (c.save_models) train::save_model(r.model, c.output_dir / "models" / id);
            log << id << ": test accuracy " << percent(test_reports.back().accuracy) << "%, macro F1 "
                << percent(test_reports.back().macro_f1) << "%\n";
        }
        ojson entry;
        entry["n_train"] = n_train;
        const std::string prefix = count_sweep ? "n" + std::to_string(n_train) + " " : "";
        if (!valid_reports.empty()) {
            const auto s = metrics::aggregate_trials(valid_reports);
            entry["valid"] = summary_json(s);
            table.emplace_back(prefix + "valid", s);
        }
        const auto s = metrics::aggregate_trials(test_reports);
        entry["test"] = summary_json(s);
        table.emplace_back(prefix + "test", s);
        results.push_back(entry);
    }
    summary["policies"] = policy_notes;
    summary["results"] = results;
    write_text(c.output_dir / "summary.json", summary.dump(2) + "\n");
    log << variant.name << " (" << train::to_string(variant.pipeline) << ")\n";
    for (const auto& note : policy_notes) log << "  " << note << '\n';
    log << metrics::summary_table(table);
}

void cmd_eval(const config::RunConfig& c, std::ostream& log) {
    const train::EnsembleModel model = train::load_model(*c.eval.model_dir);
    const data::Corpus corpus = load_corpus(c);
    const auto [channels, rate] = corpus_shape(corpus);
    if (channels != model.config().in_channels || corpus.num_classes() != model.config().num_classes) {
        throw ShapeError("model expects " + std::to_string(model.config().in_channels) + " channels and " +
                         std::to_string(model.config().num_classes) + " classes; corpus has " +
                         std::to_string(channels) + " and " + std::to_string(corpus.num_classes()));
    }
    std::vector<data::Recording> chosen;
    const std::set<std::string> wanted(c.eval.subjects.begin(), c.eval.subjects.end());
    for (const data::Recording& r : corpus.recordings) {
        if (wanted.empty() || wanted.contains(r.subject_id)) chosen.push_back(r);
    }
    const LabeledBatch batch = data::make_windows(chosen, corpus.num_classes(), c.windowing);
    if (batch.empty()) throw ShapeError("no windows to evaluate");
    const metrics::TrialReport report = metrics::make_report("eval", "eval", train::evaluate(model, batch));
    ensure_dir(c.output_dir);
    write_text(c.output_dir / "eval.jsonl", metrics::to_json_line(report) + "\n");
    log << batch.size() << " windows: accuracy " << percent(report.accuracy) << "%, macro F1 "
        << percent(report.macro_f1) << "%\n";
}

void cmd_sweep(const config::RunConfig& c, std::ostream& log) {
    const data::Corpus corpus = load_corpus(c);
    const nn::ModelConfig model = model_for(c, corpus);
    const train::Variant base = train::lookup_variant(c.sweep.variant);
    check_policies(base.policies, corpus, c);

    std::vector<train::Datasets> trials;
    for (std::size_t t = 0; t < c.trials; ++t) {
        trials.push_back(windows_for(split_for_trial(corpus, c, c.split.n_train, t), corpus.num_classes(), c.windowing));
    }
    ojson grid = ojson::array();
    std::string text = "alpha \\ f_c";
    for (double f : c.sweep.cutoffs_hz) text += "\t" + data::format_double(f);
    text += '\n';
    for (double alpha : c.sweep.alphas) {
        ojson row = ojson::array();
        text += data::format_double(alpha);
        for (double cutoff : c.sweep.cutoffs_hz) {
            train::Variant v = base;
            for (auto& p : v.policies) {
                for (auto& s : p.steps) {
                    if (auto* o = std::get_if<augment::OctaveMixStep>(&s)) {
                        o->alpha = alpha;
                        o->cutoff_hz = cutoff;
                    }
                }
            }
            check_policies(v.policies, corpus, c);
            std::vector<double> best;
            for (std::size_t t = 0; t < c.trials; ++t) {
                train::TrainConfig tc = c.train;
                tc.policies.clear();
                tc.seed = trial_seed(c, t);
                best.push_back(train::run_experiment(v, trials[t], model, tc).best_valid_accuracy());
            }
            const metrics::MeanStd ms = metrics::mean_std(best);
            row.push_back({{"alpha", alpha}, {"cutoff_hz", cutoff}, {"best_valid_accuracy", ms.mean},
                           {"per_trial", best}});
            text += "\t" + percent(ms.mean);
            log << "alpha=" << data::format_double(alpha) << " f_c=" << data::format_double(cutoff)
                << ": best valid " << percent(ms.mean) << "%\n";
        }
        text += '\n';
        grid.push_back(row);
    }
    ensure_dir(c.output_dir);
    write_text(c.output_dir / "config.json", config::to_json(c).dump(2) + "\n");
    ojson out;
    out["variant"] = base.name;
    out["alphas"] = c.sweep.alphas;
    out["cutoffs_hz"] = c.sweep.cutoffs_hz;
    out["cells"] = grid;
    write_text(c.output_dir / "sweep.json", out.dump(2) + "\n");
    write_text(c.output_dir / "sweep.txt", text);
    log << text;
}

void cmd_inspect_filter(const config::RunConfig& c, std::ostream& log) {
    const int taps = c.filter.num_taps > 0 ? c.filter.num_taps : signal::default_num_taps(c.filter.sample_rate_hz);
    const signal::FilterSpec spec{c.filter.cutoff_hz, taps, c.filter.sample_rate_hz};
    const signal::FirKernel kernel = signal::design_lowpass(spec);
    io::Tensor t;
    t.dims = {kernel.taps.size()};
    t.values = kernel.taps;
    io::Tensor response;
    const std::size_t points = c.filter.response_points;
    response.dims = {points, 2};
    for (std::size_t i = 0; i < points; ++i) {
        const double f = spec.sample_rate_hz / 2.0 * static_cast<double>(i) / static_cast<double>(points - 1);
        response.values.push_back(f);
        response.values.push_back(signal::magnitude_response(kernel, f, spec.sample_rate_hz));
    }
    ensure_dir(c.output_dir);
    io::write_tensor(c.output_dir / "taps.octm", t);
    io::write_tensor(c.output_dir / "response.octm", response);
    log << kernel.taps.size() << " taps, cutoff " << data::format_double(spec.cutoff_hz) << " Hz at "
        << data::format_double(spec.sample_rate_hz) << " Hz; |H| at cutoff = "
        << data::format_double(signal::magnitude_response(kernel, spec.cutoff_hz, spec.sample_rate_hz)) << '\n';
}

void run(config::Command command, const config::RunConfig& c, std::ostream& log) {
    switch (command) {
        case config::Command::GenSynth: return cmd_gen_synth(c, log);
        case config::Command::Augment: return cmd_augment(c, log);
        case config::Command::Train: return cmd_train(c, log);
        case config::Command::Eval: return cmd_eval(c, log);
        case config::Command::Sweep: return cmd_sweep(c, log);
        case config::Command::InspectFilter: return cmd_inspect_filter(c, log);
    }
}

std::string error_kind(const std::exception& e) {
    // Most derived first.
    if (dynamic_cast<const WindowTooShortError*>(&e)) return "WindowTooShort";
    if (dynamic_cast<const ChannelGroupingError*>(&e)) return "ChannelGrouping";
    if (dynamic_cast<const ShapeError*>(&e)) return "Shape";
    if (dynamic_cast<const InvalidSpecError*>(&e)) return "InvalidSpec";
    if (dynamic_cast<const InvalidParameterError*>(&e)) return "InvalidParameter";
    if (dynamic_cast<const ContractViolationError*>(&e)) return "ContractViolation";
    if (dynamic_cast<const ParseError*>(&e)) return "Parse";
    if (dynamic_cast<const MissingFileError*>(&e)) return "MissingFile";
    if (dynamic_cast<const InsufficientSubjectsError*>(&e)) return "InsufficientSubjects";
    if (dynamic_cast<const UndefinedMetricError*>(&e)) return "UndefinedMetric";
    if (dynamic_cast<const UnknownVariantError*>(&e)) return "UnknownVariant";
    if (dynamic_cast<const ConfigError*>(&e)) return "Config";
    if (dynamic_cast<const IoError*>(&e)) return "Io";
    return "Internal";
}

}  // namespace octmix::commands
