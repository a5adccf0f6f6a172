#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "octmix/commands.hpp"
#include "octmix/config.hpp"
#include "octmix/error.hpp"
#include "octmix/trainer.hpp"

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;

void report_error(const std::exception& e, const std::vector<std::string>& problems) {
    nlohmann::ordered_json record;
    record["error"] = octmix::commands::error_kind(e);
    record["message"] = e.what();
    if (!problems.empty()) record["problems"] = problems;
    std::cerr << record.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    using octmix::config::Command;
    CLI::App app{"Octave Mix data augmentation and DAR-FFE ensemble training"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    struct Entry {
        Command command;
        CLI::App* sub;
    };
    std::optional<std::string> config_file;
    std::vector<std::string> overrides;
    std::vector<Entry> entries;
    const std::vector<std::pair<Command, std::string>> specs = {
        {Command::GenSynth, "Write a synthetic CSV corpus and manifest"},
        {Command::Augment, "Apply an augmentation policy to windowed recordings"},
        {Command::Train, "Train a variant over one or more trials"},
        {Command::Eval, "Score a saved model on a corpus"},
        {Command::Sweep, "Grid over Octave Mix alpha and cutoff"},
        {Command::InspectFilter, "Dump low-pass taps and frequency response"},
    };
    for (const auto& [command, help] : specs) {
        CLI::App* sub = app.add_subcommand(octmix::config::to_string(command), help);
        sub->add_option("-c,--config", config_file, "JSON config file");
        sub->add_option("-s,--set", overrides, "Override one key, e.g. --set train.pretrain_epochs=2")
            ->take_all()
            ->allow_extra_args(false);
        entries.push_back({command, sub});
    }
    bool list_variants = false;
    app.add_flag("--list-variants", list_variants, "Print the variant presets and exit");
    app.require_subcommand(0, 1);

    CLI11_PARSE(app, argc, argv);

    if (list_variants) {
        for (const std::string& name : octmix::train::variant_names()) {
            const auto v = octmix::train::lookup_variant(name);
            std::cout << name << '\t' << octmix::train::to_string(v.pipeline) << '\t' << v.note << '\n';
        }
        return 0;
    }
    const Entry* chosen = nullptr;
    for (const Entry& e : entries) {
        if (e.sub->parsed()) chosen = &e;
    }
    if (!chosen) {
        std::cerr << app.help();
        return kExitConfig;
    }

    octmix::config::RunConfig config;
    try {
        std::optional<std::filesystem::path> file;
        if (config_file) file = *config_file;
        config = octmix::config::load(file, overrides, chosen->command);
    } catch (const octmix::ConfigError& e) {
        report_error(e, e.problems());
        return kExitConfig;
    } catch (const std::exception& e) {
        report_error(e, {});
        return kExitConfig;
    }

    try {
        octmix::commands::run(chosen->command, config, std::cout);
    } catch (const std::exception& e) {
        report_error(e, {});
        return kExitRuntime;
    }
    return 0;
}
