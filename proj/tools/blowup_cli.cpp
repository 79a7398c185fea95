// Command-line driver: run a configured blow-up computation, sweep a
// parameter for absorption-coefficient curves, or check grid convergence.

#include <CLI11.hpp>

#include <blowup/cli.hpp>

int main(int argc, char** argv) {
    CLI::App app{"Self-similar rescaling solver for blow-up problems"};
    app.require_subcommand(1);

    blowup::RunOptions run_opts;
    CLI::App* run = app.add_subcommand("run", "single configured run");
    run->add_option("--config", run_opts.config_path, "config file")
        ->required();
    run->add_option("--out", run_opts.out_dir, "output directory")->required();
    run->add_option("--k-profiles", run_opts.k_profiles,
                    "levels whose rescaled profiles are written")
        ->delimiter(',');
    run->add_option("--phase-drift", run_opts.phase_drift,
                    "phase-drift prediction variant")
        ->check(CLI::IsMember({"alpha", "lambda"}));
    run->add_flag("--quiet", run_opts.quiet, "suppress progress lines");

    blowup::SweepOptions sweep_opts;
    CLI::App* sweep = app.add_subcommand("sweep", "vary one parameter");
    sweep->add_option("--config", sweep_opts.config_path, "config file")
        ->required();
    sweep->add_option("--out", sweep_opts.out_dir, "output directory")
        ->required();
    sweep->add_option("--param", sweep_opts.param, "beta, delta, or I")
        ->required();
    sweep->add_option("--values", sweep_opts.values, "comma-separated values")
        ->required()
        ->delimiter(',');
    sweep->add_option("--jobs", sweep_opts.jobs, "concurrent runs");
    sweep->add_flag("--quiet", sweep_opts.quiet, "suppress progress lines");

    blowup::ConvergeOptions conv_opts;
    CLI::App* conv = app.add_subcommand("converge", "triple-grid order check");
    conv->add_option("--config", conv_opts.config_path, "config file")
        ->required();
    conv->add_option("--out", conv_opts.out_dir, "output directory")
        ->required();
    conv->add_option("--base-I", conv_opts.base_I, "coarsest grid size");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (run->parsed()) return blowup::cmd_run(run_opts);
    if (sweep->parsed()) return blowup::cmd_sweep(sweep_opts);
    if (conv->parsed()) return blowup::cmd_converge(conv_opts);
    return 1;
}
