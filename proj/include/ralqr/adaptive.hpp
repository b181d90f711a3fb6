#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ralqr/bootstrap.hpp"
#include "ralqr/riccati.hpp"
#include "ralqr/rng.hpp"
#include "ralqr/sysid.hpp"

namespace ralqr {

// How the pair (sigma_A, sigma_B) is collapsed to the scalar that fades
// the exploration noise. MaxSpectral is the default: it is zero exactly
// when both covariances vanish and does not grow with problem dimension.
enum class UncertaintyNorm { MaxSpectral, Frobenius };

double uncertainty_scale(const UncertaintyEstimate& u, UncertaintyNorm norm);

struct ControllerConfig {
    int t_explore = 0;       // pure exploration while t <= t_explore
    Eigen::MatrixXd U;       // m x m input-excitation covariance
    int N_b = 100;           // bootstrap replicates per step
    double gamma = 1.0;      // uncertainty scaling fed to the robust design
    Eigen::MatrixXd Q;       // n x n state cost
    Eigen::MatrixXd R;       // m x m input cost
    double epsilon = 0.01;   // bisection tolerance for c_gamma
    Eigen::MatrixXd X0;      // n x n initial-state covariance
    int T = 0;               // episode horizon (steps t = 0..T-1)
    UncertaintyNorm uncertainty_norm = UncertaintyNorm::MaxSpectral;

    // Checks every invariant against the plant dimensions, including
    // t_explore > n + m (the least-squares fit cannot be full rank any
    // earlier).
    void validate(Eigen::Index n, Eigen::Index m) const;
};

// One timestep of an episode. The estimation fields are absent exactly
// during the exploration phase t <= t_explore. c_gamma is additionally
// absent when the robust design failed and the previous gain was held
// (gain_fallback set).
struct StepRecord {
    int t = 0;
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    std::optional<ModelEstimate> model;
    std::optional<UncertaintyEstimate> uncertainty;
    std::optional<Eigen::MatrixXd> gain;
    std::optional<double> c_gamma;
    double stage_cost = 0.0;  // x^T Q x + u^T R u
    bool gain_fallback = false;
};

// Root seeds for the four independent noise streams of one episode.
// Deriving them from (master, sample, role) — never from the arm — is
// what lets CE and RMN share realizations exactly.
struct EpisodeSeeds {
    std::uint64_t init_state = 0;
    std::uint64_t plant_noise = 0;
    std::uint64_t exploration = 0;
    std::uint64_t bootstrap = 0;

    static EpisodeSeeds derive(std::uint64_t master, std::uint64_t sample);
};

// Pure exploration input u_t ~ N(0, U).
Eigen::VectorXd exploration_input(const Eigen::MatrixXd& U, Rng& rng);

// Exploitation input u_t = K_hat x_t + e_t with fading excitation
// e_t ~ N(0, s U), s = uncertainty_scale(uncertainty, norm).
Eigen::VectorXd exploitation_input(const Eigen::MatrixXd& K_hat, const Eigen::VectorXd& x,
                                   const UncertaintyEstimate& uncertainty,
                                   const Eigen::MatrixXd& U, Rng& rng,
                                   UncertaintyNorm norm = UncertaintyNorm::MaxSpectral);

// Model and uncertainty estimates for every decision step
// t = t_explore + 1 .. T - 1, computed from prefixes of one training
// trajectory. Entry i corresponds to t = t_explore + 1 + i. The result
// depends only on (training data, N_b, bootstrap seed), so paired arms
// compute it once and share it.
struct EstimateSequence {
    int first_t = 0;
    std::vector<ModelEstimate> models;
    std::vector<UncertaintyEstimate> uncertainties;
};

EstimateSequence estimate_sequence(const TrajectoryData& training, const ControllerConfig& cfg,
                                   std::uint64_t bootstrap_seed);

// Full adaptive episode. With training data (offline mode) the
// estimation pipeline at time t consumes the training prefix up to t
// and the controlled trajectory only accumulates cost; without it
// (online mode) the controlled trajectory itself is the estimation
// data. A design failure at some step falls back to the previously held
// gain (zero before any design succeeded) and flags the record; an
// InsufficientExcitation from the estimator aborts the episode by
// propagating.
std::vector<StepRecord> run_adaptive_episode(const LinearSystemModel& plant,
                                             const ControllerConfig& cfg,
                                             const std::optional<TrajectoryData>& training_data,
                                             const EpisodeSeeds& seeds);

// Offline-mode episode with the estimate sequence precomputed (shared
// across arms).
std::vector<StepRecord> run_adaptive_episode(const LinearSystemModel& plant,
                                             const ControllerConfig& cfg,
                                             const EstimateSequence& estimates,
                                             const EpisodeSeeds& seeds);

}  // namespace ralqr
