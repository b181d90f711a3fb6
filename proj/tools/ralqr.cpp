// Command-line front end: `run` executes a full Monte Carlo experiment
// from a config file, `solve` exposes the Riccati designs for one model,
// and `bootstrap` exposes the resampling covariance estimator for one
// trajectory file.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <Eigen/Dense>

#include "ralqr/cli.hpp"
#include "ralqr/riccati.hpp"

namespace {

void print_matrix(const char* name, const Eigen::MatrixXd& m) {
    const Eigen::IOFormat fmt(Eigen::FullPrecision, Eigen::DontAlignCols, " ", "\n");
    std::printf("%s =\n", name);
    std::cout << m.format(fmt) << "\n";
}

int run_command(const std::string& config_path, std::optional<std::uint64_t> seed,
                const std::string& out_dir, std::optional<int> workers) {
    ralqr::ExperimentConfig cfg = ralqr::parse_config(config_path);
    if (seed) cfg.master_seed = *seed;
    if (workers) cfg.workers = *workers;

    const auto start = std::chrono::steady_clock::now();
    const ralqr::RegretRecord record = ralqr::run_experiment(cfg);
    const double duration =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    for (const std::string& f : ralqr::emit_results(record, cfg, out_dir, duration))
        std::printf("wrote %s\n", f.c_str());
    return 0;
}

int solve_command(const std::string& config_path) {
    const ralqr::ExperimentConfig cfg = ralqr::parse_config(config_path);
    const auto uncertainty = ralqr::parse_uncertainty_block(config_path);

    if (uncertainty) {
        if (uncertainty->n != cfg.plant.state_dim() || uncertainty->m != cfg.plant.input_dim())
            throw ralqr::ConfigError("uncertainty: dimensions do not match the plant");
        const ralqr::BisectionDesign design = ralqr::design_with_bisection(
            cfg.plant.A, cfg.plant.B, cfg.controller.Q, cfg.controller.R, *uncertainty,
            cfg.controller.gamma, cfg.controller.epsilon);
        print_matrix("P", design.solution.P);
        print_matrix("K", design.solution.K);
        std::printf("c_gamma = %.17g\n", design.c_gamma);
    } else {
        const ralqr::RiccatiSolution sol =
            ralqr::solve_dare(cfg.plant.A, cfg.plant.B, cfg.controller.Q, cfg.controller.R);
        print_matrix("P", sol.P);
        print_matrix("K", sol.K);
        std::printf("c_gamma = %.17g\n", 1.0);
    }
    return 0;
}

int bootstrap_command(const std::string& trajectory_path, int resamples, std::uint64_t seed) {
    const ralqr::TrajectoryData data = ralqr::parse_trajectory(trajectory_path);
    const ralqr::ModelEstimate model = ralqr::least_squares_estimate(data);
    const ralqr::UncertaintyEstimate u =
        ralqr::bootstrap_model_variance(data, model, resamples, seed);
    std::printf("trace_sigma_A = %.17g\n", u.sigma_A.trace());
    std::printf("trace_sigma_B = %.17g\n", u.sigma_B.trace());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust adaptive LQR: bootstrap uncertainty + multiplicative-noise design"};
    app.require_subcommand(1);

    std::string config_path, out_dir, trajectory_path;
    std::uint64_t seed = 0;
    int workers = 0, resamples = 0;

    CLI::App* run = app.add_subcommand("run", "Run a Monte Carlo experiment and emit tables");
    run->add_option("--config", config_path, "Experiment config file")->required();
    CLI::Option* run_seed = run->add_option("--seed", seed, "Master seed (overrides the config)");
    run->add_option("--out", out_dir, "Output directory")->required();
    CLI::Option* run_workers =
        run->add_option("--workers", workers, "Worker threads (overrides the config)");

    CLI::App* solve = app.add_subcommand(
        "solve", "Solve the (generalized) Riccati design for the configured model");
    solve->add_option("--config", config_path, "Config file, optionally with an uncertainty block")
        ->required();

    CLI::App* bootstrap =
        app.add_subcommand("bootstrap", "Bootstrap the model covariance of a trajectory");
    bootstrap->add_option("--trajectory", trajectory_path, "Trajectory file")->required();
    bootstrap->add_option("--resamples", resamples, "Number of bootstrap replicates")->required();
    bootstrap->add_option("--seed", seed, "Resampling seed")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed())
            return run_command(config_path,
                               run_seed->count() ? std::optional<std::uint64_t>(seed)
                                                 : std::nullopt,
                               out_dir,
                               run_workers->count() ? std::optional<int>(workers) : std::nullopt);
        if (solve->parsed()) return solve_command(config_path);
        if (bootstrap->parsed()) return bootstrap_command(trajectory_path, resamples, seed);
    } catch (const ralqr::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ralqr::IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const ralqr::NotStabilizable& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const ralqr::MeanSquareUnstabilizable& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const ralqr::InsufficientExcitation& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const ralqr::InvalidParameter& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const ralqr::DimensionError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
