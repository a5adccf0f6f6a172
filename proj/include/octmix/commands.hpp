#pragma once

#include <ostream>
#include <string>

#include "octmix/config.hpp"

namespace octmix::commands {

// Each command writes its artifacts under config.output_dir and a short
// human-readable log to `log`. Library errors propagate as exceptions.

/// CSV recordings plus manifest.tsv from data.synthetic.
void cmd_gen_synth(const config::RunConfig& config, std::ostream& log);

/// Windows every recording, applies augment.policy once with the run seed, and
/// writes windows.octm / labels.octm.
void cmd_augment(const config::RunConfig& config, std::ostream& log);

/// Runs every trial (and every train count of a subject-count sweep), writing
/// reports.jsonl, summary.json and one model directory per trial.
void cmd_train(const config::RunConfig& config, std::ostream& log);

/// Scores a saved model on the configured corpus; writes eval.jsonl.
void cmd_eval(const config::RunConfig& config, std::ostream& log);

/// Alpha x cutoff grid of best validation accuracy; writes sweep.json.
void cmd_sweep(const config::RunConfig& config, std::ostream& log);

/// taps.octm (taps) and response.octm (points x 2: Hz, magnitude).
void cmd_inspect_filter(const config::RunConfig& config, std::ostream& log);

void run(config::Command command, const config::RunConfig& config, std::ostream& log);

/// Short category name of an exception, used in machine-readable error records.
std::string error_kind(const std::exception& e);

}  // namespace octmix::commands
