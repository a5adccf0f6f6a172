// Acceptance suite: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "octmix/augment.hpp"
#include "octmix/commands.hpp"
#include "octmix/config.hpp"
#include "octmix/dataset.hpp"
#include "octmix/metrics.hpp"
#include "octmix/network.hpp"
#include "octmix/random.hpp"
#include "octmix/signal.hpp"
#include "octmix/trainer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace octmix;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int failures = 0;

void run(int id, const std::string& title, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("threw: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && sec > budget_s) {
        o.pass = false;
        o.detail += "; over the " + fmt("%.0f", budget_s) + " s budget";
    }
    if (!o.pass) ++failures;
    std::printf("[%s] %2d %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", id, title.c_str(), o.detail.c_str(), sec);
    std::fflush(stdout);
}

std::vector<std::vector<double>> snapshot(const std::vector<const nn::Parameter*>& params) {
    std::vector<std::vector<double>> out;
    for (const auto* p : params) out.push_back(p->value);
    return out;
}

std::vector<const nn::Parameter*> pretrain_params(const train::EnsembleModel& m) {
    std::vector<const nn::Parameter*> out;
    for (const auto& e : m.extractors) {
        for (const auto* p : e.parameters()) out.push_back(p);
    }
    for (const auto& c : m.heads) {
        for (const auto* p : c.parameters()) out.push_back(p);
    }
    return out;
}

train::Datasets synthetic_split(const data::SynthSpec& spec, data::SplitSpec split, std::uint64_t seed) {
    const data::Corpus corpus = data::generate_synthetic(spec);
    Rng rng = make_rng(seed, {stream::kSplit});
    const data::Split s = data::split_by_subject(corpus.recordings, split, rng);
    const data::WindowingSpec w;
    return {data::make_windows(s.train, corpus.num_classes(), w), data::make_windows(s.valid, corpus.num_classes(), w),
            data::make_windows(s.test, corpus.num_classes(), w)};
}

Outcome mixup_reduction() {
    std::mt19937_64 gen(101);
    const signal::FilterSpec pass{50.0, 127, 100.0};
    const double alphas[] = {0.5, 1.0, 5.0};
    double worst = 0.0;
    std::size_t nontrivial = 0;
    for (int b = 0; b < 100; ++b) {
        const LabeledBatch batch = oracle::random_batch(8, 256, 3, 100.0, 6, gen);
        const std::uint64_t seed = gen();
        const double alpha = alphas[b % 3];
        Rng r1(seed), r2(seed);
        const LabeledBatch a = augment::octave_mix(batch, {alpha}, pass, r1);
        const LabeledBatch m = augment::mixup(batch, {alpha}, r2);
        for (std::size_t i = 0; i < a.size(); ++i) {
            auto x = a.windows[i].data();
            auto y = m.windows[i].data();
            for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
            for (std::size_t k = 0; k < a.labels[i].probs.size(); ++k) {
                worst = std::max(worst, std::abs(a.labels[i].probs[k] - m.labels[i].probs[k]));
            }
            if (!(a.windows[i] == batch.windows[i])) ++nontrivial;
        }
    }
    return {worst <= 1e-6 && nontrivial > 0,
            "100 batches 8x256x3, max |octave_mix - mixup| = " + fmt("%.3g", worst)};
}

Outcome exact_reconstruction() {
    std::mt19937_64 gen(202);
    const double cutoffs[] = {0.1, 2.1, 5.1};
    std::size_t mismatched = 0;
    std::size_t samples = 0;
    for (int w = 0; w < 1000; ++w) {
        const LabeledBatch b = oracle::random_float_batch(1, 256, 3, 100.0, 2, gen);
        const auto spec = signal::FilterSpec::with_default_taps(cutoffs[w % 3], 100.0);
        const signal::Decomposition d = signal::decompose(b.windows[0], spec);
        auto x = b.windows[0].data();
        auto lo = d.low.data();
        auto hi = d.high.data();
        for (std::size_t k = 0; k < x.size(); ++k) {
            mismatched += (lo[k] + hi[k] != x[k]);
            ++samples;
        }
    }
    // Arbitrary float64 inputs: reported, not gated (see the README note).
    double worst_double = 0.0;
    std::size_t inexact_double = 0;
    for (int w = 0; w < 100; ++w) {
        const LabeledBatch b = oracle::random_batch(1, 256, 3, 100.0, 2, gen);
        const signal::Decomposition d =
            signal::decompose(b.windows[0], signal::FilterSpec::with_default_taps(cutoffs[w % 3], 100.0));
        auto x = b.windows[0].data();
        for (std::size_t k = 0; k < x.size(); ++k) {
            const double err = std::abs(d.low.data()[k] + d.high.data()[k] - x[k]);
            inexact_double += (err != 0.0);
            worst_double = std::max(worst_double, err);
        }
    }
    return {mismatched == 0,
            std::to_string(samples - mismatched) + "/" + std::to_string(samples) +
                " samples bitwise exact over 1000 float32-valued windows; full-float64 windows: " +
                std::to_string(inexact_double) + " inexact, max error " + fmt("%.2g", worst_double)};
}

Outcome gradient_suite() {
    nn::ModelConfig cfg{3, {4, 8}, 3, 3};
    Rng init(303);
    nn::Network net{nn::FeatureExtractor(cfg, init), nn::Classifier(8, 3, init)};
    std::mt19937_64 gen(304);
    LabeledBatch batch = oracle::random_batch(4, 16, 3, 100.0, 3, gen);
    for (auto& l : batch.labels) l = oracle::random_soft_label(3, gen);

    nn::backward(net, batch);
    std::vector<nn::Parameter*> params = net.extractor.parameters();
    for (auto* p : net.classifier.parameters()) params.push_back(p);
    double worst = 0.0;
    std::string worst_name;
    std::ostringstream groups;
    for (nn::Parameter* p : params) {
        const std::vector<double> analytic = p->grad;
        const std::vector<double> numeric =
            oracle::central_difference(p->value, 1e-6, [&] { return nn::evaluate_loss(net, batch); });
        double group = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            group = std::max(group, oracle::relative_error(analytic[i], numeric[i]));
        }
        groups << ' ' << p->name << '=' << fmt("%.1e", group);
        if (group > worst) {
            worst = group;
            worst_name = p->name;
        }
    }
    return {worst <= 1e-3 && params.size() == 6,
            std::to_string(params.size()) + " groups, max rel err " + fmt("%.2e", worst) + " (" + worst_name +
                ");" + groups.str()};
}

Outcome label_conservation() {
    std::mt19937_64 gen(404);
    const std::size_t n = 100;
    const std::size_t rounds = 100;
    const std::size_t classes = 5;
    std::string detail;
    bool ok = true;
    for (const char* name : {"rotation", "mixup", "ricap_1d", "octave_mix"}) {
        std::size_t checked = 0;
        std::size_t bad_simplex = 0;
        std::size_t bad_combination = 0;
        for (std::size_t r = 0; r < rounds; ++r) {
            LabeledBatch batch = oracle::random_batch(n, 64, 3, 100.0, classes, gen);
            for (auto& l : batch.labels) {
                if (gen() % 2) l = oracle::random_soft_label(classes, gen);
            }
            Rng rng(gen());
            LabeledBatch out;
            std::vector<std::size_t> pairing;
            double weight = 1.0;
            const std::string which = name;
            if (which == "rotation") {
                out = augment::rotation(batch, rng);
            } else {
                const augment::MixPlan plan = augment::draw_mix_plan(n, {which == "mixup" ? 5.0 : 0.5}, rng);
                pairing = plan.pairing;
                weight = plan.lambda;
                if (which == "mixup") {
                    out = augment::mixup(batch, plan);
                } else if (which == "ricap_1d") {
                    out = augment::ricap_1d(batch, plan);
                    weight = static_cast<double>(augment::ricap_cut(64, plan.lambda)) / 64.0;
                } else {
                    out = augment::octave_mix(batch, plan, signal::FilterSpec::with_default_taps(2.1, 100.0));
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                const auto& p = out.labels[i].probs;
                double sum = 0.0;
                bool nonneg = true;
                for (double v : p) {
                    sum += v;
                    nonneg &= v >= 0.0;
                }
                if (!nonneg || std::abs(sum - 1.0) > 1e-9) ++bad_simplex;
                std::vector<double> expected = batch.labels[i].probs;
                if (!pairing.empty()) {
                    const auto& a = batch.labels[i].probs;
                    const auto& b = batch.labels[pairing[i]].probs;
                    for (std::size_t k = 0; k < classes; ++k) expected[k] = weight * a[k] + (1.0 - weight) * b[k];
                }
                if (p != expected) ++bad_combination;
                ++checked;
            }
        }
        ok &= bad_simplex == 0 && bad_combination == 0 && checked == 10000;
        detail += std::string(detail.empty() ? "" : ", ") + name + " " + std::to_string(checked - bad_simplex) +
                  "/" + std::to_string(checked) + " on simplex, " + std::to_string(checked - bad_combination) +
                  " exact";
    }
    return {ok, detail};
}

Outcome beta_sampler() {
    bool ok = true;
    std::string detail;
    for (double alpha : {0.5, 5.0}) {
        Rng rng = make_rng(505, {static_cast<std::uint64_t>(alpha * 10)});
        const int draws = 100000;
        double sum = 0.0, sq = 0.0;
        for (int i = 0; i < draws; ++i) {
            const double x = augment::sample_lambda({alpha}, rng);
            sum += x;
            sq += x * x;
        }
        const double mean = sum / draws;
        const double var = sq / draws - mean * mean;
        const double expected = 1.0 / (8.0 * alpha + 4.0);
        const bool pass = std::abs(mean - 0.5) <= 0.02 && std::abs(var - expected) <= 0.1 * expected;
        ok &= pass;
        detail += (detail.empty() ? "" : "; ") + std::string("alpha=") + fmt("%g", alpha) + " mean " +
                  fmt("%.4f", mean) + " var " + fmt("%.5f", var) + " vs " + fmt("%.5f", expected);
    }
    return {ok, detail};
}

Outcome phase_isolation() {
    data::SynthSpec s;
    s.subjects = 4;
    const data::Corpus corpus = data::generate_synthetic(s);
    const LabeledBatch train_data = data::make_windows(corpus.recordings, corpus.num_classes(), {});
    const nn::ModelConfig cfg{3, {8, 16, 32}, 3, 3};
    train::TrainConfig tc;
    tc.policies = train::default_ensemble_policies();
    tc.pretrain_epochs = 3;
    tc.classifier_epochs = 3;
    tc.seed = 606;

    // Phase by phase, with a snapshot at the end of pre-training.
    train::EnsembleModel staged(cfg, 2, tc.seed);
    const std::uint64_t pretrain_before = augment::invocation_count();
    for (std::size_t k = 0; k < 2; ++k) train::pretrain_branch(staged, k, train_data, tc);
    const std::uint64_t pretrain_calls = augment::invocation_count() - pretrain_before;
    const auto pre = snapshot(pretrain_params(staged));
    const auto combined_before = snapshot(std::as_const(staged.combined).parameters());
    train::freeze_extractors(staged);
    const std::uint64_t calls_before = augment::invocation_count();
    train::train_combined_classifier(staged, train_data, tc);
    const std::uint64_t classifier_calls = augment::invocation_count() - calls_before;
    const bool frozen_ok = snapshot(pretrain_params(staged)) == pre;
    const bool combined_moved = snapshot(std::as_const(staged.combined).parameters()) != combined_before;

    // Full run from the same seed must land on the same weights.
    train::EnsembleModel full(cfg, 2, tc.seed);
    // The full run may make exactly as many augmentation calls as pre-training alone.
    const std::uint64_t full_before = augment::invocation_count();
    train::train_dar_ffe(full, train_data, tc);
    const bool full_matches =
        snapshot(pretrain_params(full)) == pre &&
        snapshot(std::as_const(full.combined).parameters()) == snapshot(std::as_const(staged.combined).parameters());
    const std::uint64_t full_calls = augment::invocation_count() - full_before;
    const std::uint64_t full_classifier_calls = full_calls - std::min(full_calls, pretrain_calls);
    const bool pretraining_augmented = pretrain_calls > 0 && full_calls == pretrain_calls;

    return {frozen_ok && combined_moved && classifier_calls == 0 && full_matches && full_classifier_calls == 0 &&
                pretraining_augmented,
            std::string("E_k/C_k unchanged by classifier phase: ") + (frozen_ok ? "yes" : "no") +
                ", combined C trained: " + (combined_moved ? "yes" : "no") +
                ", augmentation calls in classifier phase: " + std::to_string(classifier_calls) + "/" +
                std::to_string(full_classifier_calls) + ", full run matches staged run: " +
                (full_matches ? "yes" : "no")};
}

Outcome end_to_end() {
    data::SynthSpec s;
    s.subjects = 30;
    s.noise_std = 0.05;
    const train::Datasets d = synthetic_split(s, {20, 5, 5}, 707);
    const nn::ModelConfig cfg{3, {8, 16, 32}, 3, 3};
    train::TrainConfig plain_cfg;
    plain_cfg.pretrain_epochs = 30;
    plain_cfg.seed = 708;
    const auto plain = train::run_experiment(train::lookup_variant("none"), d, cfg, plain_cfg);
    const double plain_acc = metrics::accuracy(plain.test_confusion);

    train::TrainConfig dar_cfg;
    dar_cfg.pretrain_epochs = 30;
    dar_cfg.classifier_epochs = 30;
    dar_cfg.seed = 708;
    const auto dar = train::run_experiment(train::lookup_variant("dar-ffe-ensemble"), d, cfg, dar_cfg);
    const double dar_acc = metrics::accuracy(dar.test_confusion);
    return {plain_acc >= 0.90 && dar_acc >= plain_acc - 0.02 && dar.model.branches() == 2,
            std::to_string(d.train.size()) + " train windows; plain 30 epochs test acc " + fmt("%.1f%%", 100 * plain_acc) +
                ", DAR-FFE K=2 test acc " + fmt("%.1f%%", 100 * dar_acc)};
}

Outcome shipped_configs() {
    const fs::path root = OCTMIX_SOURCE_DIR;
    const fs::path scratch = fs::temp_directory_path() / "octmix_acceptance_configs";
    fs::remove_all(scratch);
    std::set<std::string> variants_seen;
    std::size_t ran = 0;
    std::string failed;
    std::vector<fs::path> files;
    for (const char* dir : {"configs/ablation", "configs/ensembles"}) {
        for (const auto& entry : fs::directory_iterator(root / dir)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files) {
        const fs::path out = scratch / (file.parent_path().filename().string() + "_" + file.stem().string());
        try {
            const config::RunConfig c = config::load(
                file,
                {"trials=1", "train.pretrain_epochs=2", "train.classifier_epochs=2", "output_dir=" + out.string()},
                config::Command::Train);
            std::ostringstream log;
            commands::cmd_train(c, log);
            std::ifstream reports(out / "reports.jsonl");
            std::size_t lines = 0;
            for (std::string line; std::getline(reports, line);) {
                metrics::report_from_json_line(line);
                ++lines;
            }
            if (lines != 2 || !fs::exists(out / "summary.json")) throw std::runtime_error("missing outputs");
            variants_seen.insert(c.variant);
            ++ran;
        } catch (const std::exception& e) {
            failed += " " + file.filename().string() + "(" + e.what() + ")";
        }
    }
    std::size_t missing = 0;
    for (const auto& rows : {train::ablation_rows(), train::ensemble_patterns()}) {
        for (const auto& [label, variant] : rows) missing += !variants_seen.contains(variant);
    }
    fs::remove_all(scratch);
    return {failed.empty() && missing == 0 && ran == 13,
            std::to_string(ran) + " configs ran with trials=1, N=M=2; table variants without a config: " +
                std::to_string(missing) + (failed.empty() ? "" : "; failed:" + failed)};
}

Outcome windowing_and_split() {
    data::Recording rec;
    rec.subject_id = "s000";
    std::vector<double> samples(3000 * 3);
    for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = static_cast<double>(i);
    rec.samples = Window(samples, 3000, 3, 100.0);
    const auto windows = data::window_recording(rec, {256, 256, 5.0});
    bool content = windows.size() == 7;
    for (std::size_t k = 0; content && k < windows.size(); ++k) {
        content = windows[k](0, 0) == static_cast<double>((500 + 256 * k) * 3);
    }

    std::vector<data::Recording> recs;
    for (int s = 0; s < 110; ++s) {
        for (int r = 0; r < 2; ++r) {
            data::Recording x;
            char id[16];
            std::snprintf(id, sizeof id, "p%03d", s);
            x.subject_id = id;
            x.samples = Window(1, 3, 100.0);
            recs.push_back(x);
        }
    }
    Rng rng(909);
    const data::Split split = data::split_by_subject(recs, {10, 50, 50}, rng);
    std::set<std::string> tr(split.train_subjects.begin(), split.train_subjects.end());
    std::set<std::string> va(split.valid_subjects.begin(), split.valid_subjects.end());
    std::set<std::string> te(split.test_subjects.begin(), split.test_subjects.end());
    bool disjoint = tr.size() == 10 && va.size() == 50 && te.size() == 50;
    for (const auto& s : tr) disjoint &= !va.contains(s) && !te.contains(s);
    for (const auto& s : va) disjoint &= !te.contains(s);
    bool follow = split.train.size() == 20 && split.valid.size() == 100 && split.test.size() == 100;
    for (const auto& r : split.train) follow &= tr.contains(r.subject_id);
    for (const auto& r : split.valid) follow &= va.contains(r.subject_id);
    for (const auto& r : split.test) follow &= te.contains(r.subject_id);
    return {content && disjoint && follow,
            std::to_string(windows.size()) + " windows from 3000 samples; 10/50/50 split disjoint: " +
                (disjoint ? "yes" : "no") + ", recordings follow subjects: " + (follow ? "yes" : "no")};
}

Outcome metric_oracle() {
    std::mt19937_64 gen(1010);
    double worst = 0.0;
    for (int m = 0; m < 1000; ++m) {
        const std::size_t k = 2 + gen() % 7;
        std::vector<std::vector<std::uint64_t>> counts(k, std::vector<std::uint64_t>(k));
        std::uint64_t total = 0;
        for (auto& row : counts) {
            for (auto& c : row) {
                c = (gen() % 4 == 0) ? 0 : gen() % 40;
                total += c;
            }
        }
        if (total == 0) counts[0][0] = 1;
        const metrics::ConfusionMatrix cm(counts);
        const oracle::Metrics ref = oracle::brute_force_metrics(counts);
        worst = std::max({worst, std::abs(metrics::accuracy(cm) - ref.accuracy),
                          std::abs(metrics::macro_f1(cm) - ref.macro_f1)});
    }
    return {worst <= 1e-12, "1000 random matrices, max deviation from brute force " + fmt("%.2g", worst)};
}

}  // namespace

int main() {
    run(1, "Octave Mix with pass-through cutoff equals mixup", 5, mixup_reduction);
    run(2, "low + high reconstructs the window bitwise", 5, exact_reconstruction);
    run(3, "analytic gradients match central differences", 30, gradient_suite);
    run(4, "augmented labels stay on the simplex", 0, label_conservation);
    run(5, "Beta(alpha, alpha) sampler moments", 0, beta_sampler);
    run(6, "DAR-FFE classifier phase leaves extractors and heads untouched", 0, phase_isolation);
    run(7, "desk-scale end-to-end training", 600, end_to_end);
    run(8, "every shipped table config runs end to end", 0, shipped_configs);
    run(9, "windowing arithmetic and subject split", 0, windowing_and_split);
    run(10, "accuracy and macro F1 against brute force", 0, metric_oracle);
    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
