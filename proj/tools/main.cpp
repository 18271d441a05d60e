#include <CLI11.hpp>

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
    namespace cli = gnsp::cli;
    CLI::App app{"GNSP continual-learning experiments on a toy dual encoder"};
    app.require_subcommand(1);

    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    auto* run = app.add_subcommand("run", "Run the task sequence described by a config");
    run->add_option("--config", config, "INI config file")->required();
    run->add_option("--out", out, "Output directory")->required();
    run->add_option("--seed", seed, "Override trainer.seed");

    cli::SelftestOptions selftest_options;
    auto* selftest = app.add_subcommand("selftest", "Check the numerical invariants");
    selftest->add_flag("--perturb-projector", selftest_options.perturb_projector,
                       "Negative control: corrupt every projector before checking it");

    std::string in;
    bool log_y = false;
    auto* plot = app.add_subcommand("plot", "Render a gap or spectra CSV as SVG");
    plot->add_option("--in", in, "Input CSV")->required();
    plot->add_option("--out", out, "Output SVG")->required();
    plot->add_flag("--log-y", log_y, "Logarithmic vertical axis");

    std::string checkpoint;
    std::optional<std::string> eval_config;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on the configured tasks and probes");
    eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    eval->add_option("--config", eval_config, "INI config file (default: built-in defaults)");

    std::string probe;
    auto* exporter = app.add_subcommand("export-embeddings", "Dump a probe's image and text embeddings");
    exporter->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    exporter->add_option("--probe", probe, "Probe or task name")->required();
    exporter->add_option("--out", out, "Output CSV")->required();
    exporter->add_option("--config", eval_config, "INI config file (default: built-in defaults)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : cli::kExitConfig;
    }

    auto config_path = [&]() -> std::optional<std::filesystem::path> {
        if (eval_config) return std::filesystem::path(*eval_config);
        return std::nullopt;
    };
    if (*run) return cli::cmd_run(config, out, seed, std::cout, std::cerr);
    if (*selftest) return cli::cmd_selftest(selftest_options, std::cout);
    if (*plot) return cli::cmd_plot(in, out, log_y, std::cerr);
    if (*eval) return cli::cmd_eval(checkpoint, config_path(), std::cout, std::cerr);
    return cli::cmd_export_embeddings(checkpoint, probe, out, config_path(), std::cerr);
}
