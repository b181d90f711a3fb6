#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "ralqr/sysid.hpp"

namespace ralqr {

// Covariances of the vectorized model-estimate errors,
// sigma_A = Cov(vec(A_hat - A)) and sigma_B = Cov(vec(B_hat - B)).
// vec() stacks columns.
struct UncertaintyEstimate {
    Eigen::MatrixXd sigma_A;  // n^2 x n^2
    Eigen::MatrixXd sigma_B;  // nm x nm
    Eigen::Index n = 0;
    Eigen::Index m = 0;

    static UncertaintyEstimate zero(Eigen::Index n, Eigen::Index m);

    // Symmetry within 1e-10 and eigenvalues >= -1e-9.
    void validate() const;
};

// One-step prediction errors w_tau = x_{tau+1} - (A_hat x_tau + B_hat u_tau),
// stored as columns of an n x t matrix.
using ResidualSet = Eigen::MatrixXd;

ResidualSet compute_residuals(const TrajectoryData& data, const ModelEstimate& model);

struct BootstrapOptions {
    // Residuals are resampled raw by default; centering is opt-in.
    bool center_residuals = false;
};

// Semi-parametric bootstrap: replays the recorded inputs against the
// nominal model with residuals resampled iid with replacement, refits
// OLS on each synthetic trajectory, and returns the sample covariances
// of the vectorized estimate deviations (1/(N_b - 1) normalization).
// Replicate k draws from substream k of `seed`, so the output is a pure
// function of (data, model, resamples, seed, options).
UncertaintyEstimate bootstrap_model_variance(const TrajectoryData& data,
                                             const ModelEstimate& model, int resamples,
                                             std::uint64_t seed,
                                             const BootstrapOptions& options = {});

// Same, with the residual set supplied by the caller.
UncertaintyEstimate bootstrap_model_variance(const TrajectoryData& data,
                                             const ModelEstimate& model,
                                             const ResidualSet& residuals, int resamples,
                                             std::uint64_t seed,
                                             const BootstrapOptions& options = {});

}  // namespace ralqr
