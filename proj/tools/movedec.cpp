#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "movedec/cli.hpp"

namespace {

struct RawOptions {
    std::string config;
    long long seed = -1;
    bool seed_set = false;
    std::string out;
    std::string variant;
    std::string condition;
    int jobs = 1;
};

CLI::App* add_command(CLI::App& app, RawOptions& raw, const std::string& name,
                      const std::string& help, bool with_variant, bool with_condition) {
    CLI::App* c = app.add_subcommand(name, help);
    c->add_option("--config", raw.config, "experiment config file (JSON)")
        ->required()
        ->option_text("PATH");
    c->add_option("--seed", raw.seed, "override the config seed")
        ->option_text("INT")
        ->each([&raw](const std::string&) { raw.seed_set = true; });
    c->add_option("--out", raw.out, "override the output directory")->option_text("DIR");
    c->add_option("--jobs", raw.jobs, "worker threads for the compute kernels")
        ->option_text("N");
    if (with_variant)
        c->add_option("--variant", raw.variant, "restrict to one model variant")
            ->option_text("NAME");
    if (with_condition)
        c->add_option("--condition", raw.condition, "restrict to one timing condition")
            ->option_text("det|pred|pred-b");
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"movement initiation experiments on multichannel recordings"};
    app.require_subcommand(1);

    RawOptions raw;
    add_command(app, raw, "synth", "generate synthetic sessions", false, false);
    add_command(app, raw, "events", "extract movement events and score agreement", false, false);
    add_command(app, raw, "dataset", "build and cache train/test datasets", false, true);
    add_command(app, raw, "train", "train model variants", true, true);
    add_command(app, raw, "evaluate", "score saved checkpoints on the test split", true, true);
    add_command(app, raw, "ablate", "per-electrode ablation of a trained network", true, true);
    add_command(app, raw, "viz", "optimize inputs that excite first-layer units", true, true);
    add_command(app, raw, "report", "tabulate stored metrics", false, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    movedec::cli::CliOptions opt;
    opt.command = app.get_subcommands().front()->get_name();
    opt.config_path = raw.config;
    if (raw.seed_set) {
        if (raw.seed < 0) {
            std::cerr << "config error: --seed must be non-negative\n";
            return 2;
        }
        opt.seed = static_cast<std::uint64_t>(raw.seed);
    }
    if (!raw.out.empty()) opt.out = raw.out;
    if (!raw.variant.empty()) opt.variant = raw.variant;
    if (!raw.condition.empty()) opt.condition = raw.condition;
    opt.jobs = raw.jobs;

    return movedec::cli::run(opt, std::cout);
}
