// icins: command-line front end for simulate | solve | value | verify.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "icins/parallel.hpp"
#include "icins/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Inflation-linked consumption, investment and life-insurance solver"};
    app.set_version_flag("--version", std::string(ICINS_VERSION));
    app.require_subcommand(1);

    icins::RunOptions options;
    std::uint64_t seed = 0;
    std::size_t paths = 0, steps = 0;
    unsigned threads = 0;

    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", options.config_path, "Scenario file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", seed, "Override solver.seed");
        sub->add_option("--paths", paths, "Override solver.paths")->check(CLI::PositiveNumber);
        sub->add_option("--steps", steps, "Override solver.steps")->check(CLI::PositiveNumber);
        sub->add_option("--output", options.output_dir, "Output directory")->capture_default_str();
        sub->add_option("--threads", threads, "Worker threads (0 = all cores); never changes results");
    };
    for (const char* name : {"simulate", "solve", "value", "verify"}) {
        const char* help = std::string(name) == "simulate" ? "Simulate market and optimal wealth paths"
                           : std::string(name) == "solve"  ? "Solve the backward equation"
                           : std::string(name) == "value"  ? "Estimate the optimal value by Monte Carlo"
                                                           : "Run the verification battery";
        add_common(app.add_subcommand(name, help));
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : icins::kExitInvalid;
    }

    const CLI::App* sub = app.get_subcommands().front();
    options.command = icins::parse_command(sub->get_name());
    if (sub->count("--seed")) options.seed = seed;
    if (sub->count("--paths")) options.paths = paths;
    if (sub->count("--steps")) options.steps = steps;
    icins::set_thread_count(threads);

    const auto result = icins::run(options, std::cout, std::cerr);
    for (const auto& f : result.files) std::cerr << "wrote " << f << "\n";
    return result.exit_code;
}
