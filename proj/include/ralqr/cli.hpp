#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ralqr/harness.hpp"

namespace ralqr {

// Parses and fully validates an experiment configuration file. The
// format is JSON with three sections: "plant" (A, B, W), "controller"
// (Q, R, t_explore, T, and optional U, X0, N_b, gamma, epsilon,
// uncertainty_norm) and an optional "experiment" section (N_s,
// quantiles, master_seed, arms, workers). Matrices are nested row-major
// arrays; a bare number is accepted as 1x1. A manifest written by
// emit_results can be passed back directly: its "config" object is
// unwrapped, which is what makes a run reproducible from its manifest.
// Every error names the offending field.
ExperimentConfig parse_config(const std::string& path);

// Reads the optional "uncertainty" section ({sigma_A, sigma_B}) from a
// config file; absent section yields nullopt. Used by the solve
// subcommand to pick between the plain and generalized Riccati designs.
std::optional<UncertaintyEstimate> parse_uncertainty_block(const std::string& path);

// Reads a trajectory file: JSON {"states": n x (t+1), "inputs": m x t}
// with matrices as nested row-major arrays.
TrajectoryData parse_trajectory(const std::string& path);

// Writes one delimited table per figure-equivalent quantity into
// out_dir (created if needed): regret.csv, model_error.csv,
// noise_variance.csv, cgamma_scale.csv, plus manifest.json recording
// the config echo, seed, version, duration, abort counts and file
// list. Values are printed with %.17g so tables round-trip exactly.
// Returns the paths written, manifest last.
std::vector<std::string> emit_results(const RegretRecord& record, const ExperimentConfig& cfg,
                                      const std::string& out_dir, double duration_seconds);

}  // namespace ralqr
