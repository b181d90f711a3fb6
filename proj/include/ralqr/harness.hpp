#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ralqr/adaptive.hpp"

namespace ralqr {

enum class Arm { CE, RMN };

const char* arm_name(Arm arm);

struct ExperimentConfig {
    LinearSystemModel plant;
    ControllerConfig controller;
    int N_s = 2000;  // Monte Carlo samples (desk scale; the full study uses 100k)
    std::vector<double> quantiles = {0.5, 0.95, 0.99, 0.999};
    std::uint64_t master_seed = 0;
    std::vector<Arm> arms = {Arm::CE, Arm::RMN};
    int workers = 1;

    void validate() const;
};

// Empirical quantile with linear interpolation between the closest
// order statistics: rank h = p * (N - 1) into the sorted values.
// `values` is destructively sorted. NaNs must be removed beforehand.
double empirical_quantile(std::vector<double>& values, double p);

// Per-timestep aggregate table for one scalar series. Row i describes
// timestep `timesteps[i]`; `quantiles` has one column per level.
// Non-finite NaN entries (aborted samples, design fallbacks) are
// excluded row-wise and counted in `excluded`.
struct QuantileTable {
    std::vector<double> levels;
    std::vector<int> timesteps;
    Eigen::VectorXd mean;
    Eigen::VectorXd median;
    Eigen::MatrixXd quantiles;  // rows x levels
    std::vector<int> excluded;
};

// Aggregates a (timesteps x samples) value matrix. Throws on an empty
// matrix or levels outside (0, 1).
QuantileTable summarize(const Eigen::MatrixXd& values, int first_timestep,
                        const std::vector<double>& levels);

// Raw per-sample series for one arm. Row i of `regret` is timestep
// t_explore + i; the diagnostic matrices start one step later (the
// first decision step). Columns of aborted samples are NaN.
struct ArmData {
    Arm arm = Arm::CE;
    Eigen::MatrixXd regret;         // (T - t_explore) x N_s
    Eigen::MatrixXd err_A;          // (T - 1 - t_explore) x N_s, Frobenius |A_hat - A|
    Eigen::MatrixXd err_B;          //   "     , |B_hat - B|
    Eigen::MatrixXd trace_sigma_A;  //   "     , trace of bootstrap sigma_A
    Eigen::MatrixXd trace_sigma_B;  //   "
    Eigen::MatrixXd c_gamma;        //   "     , NaN where the design fell back
    int aborts = 0;
    std::vector<std::uint8_t> aborted;  // per-sample abort flag
};

// Everything a run produces: the optimal-cost baseline, raw per-sample
// series per arm, and their per-timestep aggregates.
struct RegretRecord {
    int t_explore = 0;
    int T = 0;
    Eigen::VectorXd c_star;  // length T
    std::vector<double> levels;
    std::vector<ArmData> arms;
    std::vector<QuantileTable> regret_stats;   // parallel to arms
    std::vector<QuantileTable> err_A_stats;
    std::vector<QuantileTable> err_B_stats;
    std::vector<QuantileTable> sigma_A_stats;
    std::vector<QuantileTable> sigma_B_stats;
    std::vector<QuantileTable> c_gamma_stats;
};

// Recomputes the regret aggregates of each arm at the given levels.
std::vector<QuantileTable> summarize(const RegretRecord& record,
                                     const std::vector<double>& levels);

// Stage costs of the fixed gain u = K x over T steps under the noise
// streams of Monte Carlo sample `sample` (the same streams the adaptive
// arms consume, which is what makes comparisons paired).
Eigen::VectorXd simulate_fixed_gain(const LinearSystemModel& plant, const Eigen::MatrixXd& K,
                                    const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                    const Eigen::MatrixXd& X0, int T, std::uint64_t master_seed,
                                    std::uint64_t sample);

// Empirical optimal baseline c*_t: cross-sample mean stage cost of the
// true-optimal gain K* = solve_dare(A, B, Q, R).K under the per-sample
// noise realizations. Also returns K*.
struct BaselineResult {
    Eigen::VectorXd c_star;  // length T
    Eigen::MatrixXd K_star;
};

BaselineResult optimal_baseline(const LinearSystemModel& plant, const Eigen::MatrixXd& Q,
                                const Eigen::MatrixXd& R, const Eigen::MatrixXd& X0, int T,
                                int N_s, std::uint64_t master_seed);

// Full paired Monte Carlo experiment: per sample, one shared training
// trajectory and one shared estimate sequence feed every enabled arm;
// the arms differ only in gamma (CE forces gamma = 0). Samples run in
// parallel across `workers` threads into per-sample slots, and
// aggregation is a serial pass in sample order, so the result is
// bitwise identical for any worker count.
RegretRecord run_experiment(const ExperimentConfig& cfg);

}  // namespace ralqr
