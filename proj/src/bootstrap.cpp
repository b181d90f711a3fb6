#include "ralqr/bootstrap.hpp"

#include <string>

#include "ralqr/linalg.hpp"
#include "ralqr/rng.hpp"

namespace ralqr {

UncertaintyEstimate UncertaintyEstimate::zero(Eigen::Index n, Eigen::Index m) {
    UncertaintyEstimate u;
    u.n = n;
    u.m = m;
    u.sigma_A = Eigen::MatrixXd::Zero(n * n, n * n);
    u.sigma_B = Eigen::MatrixXd::Zero(n * m, n * m);
    return u;
}

void UncertaintyEstimate::validate() const {
    if (sigma_A.rows() != n * n || sigma_A.cols() != n * n)
        throw DimensionError("sigma_A must be n^2 x n^2");
    if (sigma_B.rows() != n * m || sigma_B.cols() != n * m)
        throw DimensionError("sigma_B must be nm x nm");
    if (!is_symmetric(sigma_A, 1e-10) || !is_symmetric(sigma_B, 1e-10))
        throw InvalidParameter("uncertainty covariances must be symmetric");
    if (min_eigenvalue(sigma_A) < -1e-9 || min_eigenvalue(sigma_B) < -1e-9)
        throw InvalidParameter("uncertainty covariances must be positive semidefinite");
}

ResidualSet compute_residuals(const TrajectoryData& data, const ModelEstimate& model) {
    data.validate();
    const Eigen::Index n = data.state_dim();
    const Eigen::Index m = data.input_dim();
    const Eigen::Index t = data.length();
    if (model.A.rows() != n || model.A.cols() != n)
        throw DimensionError("model A does not match trajectory state dimension");
    if (model.B.rows() != n || model.B.cols() != m)
        throw DimensionError("model B does not match trajectory input dimension");

    ResidualSet residuals(n, t);
    residuals = data.states.rightCols(t);
    residuals.noalias() -= model.A * data.states.leftCols(t);
    residuals.noalias() -= model.B * data.inputs;
    return residuals;
}

UncertaintyEstimate bootstrap_model_variance(const TrajectoryData& data,
                                             const ModelEstimate& model, int resamples,
                                             std::uint64_t seed,
                                             const BootstrapOptions& options) {
    return bootstrap_model_variance(data, model, compute_residuals(data, model), resamples,
                                    seed, options);
}

UncertaintyEstimate bootstrap_model_variance(const TrajectoryData& data,
                                             const ModelEstimate& model,
                                             const ResidualSet& residuals, int resamples,
                                             std::uint64_t seed,
                                             const BootstrapOptions& options) {
    if (resamples < 2) throw InvalidParameter("bootstrap needs at least 2 resamples");
    data.validate();
    const Eigen::Index n = data.state_dim();
    const Eigen::Index m = data.input_dim();
    const Eigen::Index t = data.length();
    if (residuals.rows() != n || residuals.cols() != t)
        throw DimensionError("residual set does not match trajectory");

    Eigen::MatrixXd pool = residuals;
    if (options.center_residuals) pool.colwise() -= pool.rowwise().mean().eval();

    UncertaintyEstimate out = UncertaintyEstimate::zero(n, m);

    // Buffers reused across replicates.
    Eigen::MatrixXd synth_states(n, t + 1);
    Eigen::MatrixXd X(t, n), Z(t, n + m), theta(n, n + m);
    Eigen::MatrixXd dev_A(n, n), dev_B(n, m);
    LeastSquaresSolver solver;

    for (int k = 0; k < resamples; ++k) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(k) + 1));

        // Replay inputs through the nominal model with resampled residuals.
        synth_states.col(0) = data.states.col(0);
        for (Eigen::Index tau = 0; tau < t; ++tau) {
            const Eigen::Index pick = static_cast<Eigen::Index>(rng.uniform_index(t));
            synth_states.col(tau + 1).noalias() = model.A * synth_states.col(tau);
            synth_states.col(tau + 1).noalias() += model.B * data.inputs.col(tau);
            synth_states.col(tau + 1) += pool.col(pick);
        }

        X = synth_states.rightCols(t).transpose();
        Z.leftCols(n) = synth_states.leftCols(t).transpose();
        Z.rightCols(m) = data.inputs.transpose();

        try {
            solver.fit(X, Z, theta);
        } catch (const InsufficientExcitation& e) {
            throw InsufficientExcitation(
                "bootstrap replicate " + std::to_string(k) + ": " + e.what(), e.condition, k);
        }

        dev_A = theta.leftCols(n) - model.A;
        dev_B = theta.rightCols(m) - model.B;
        out.sigma_A.selfadjointView<Eigen::Lower>().rankUpdate(
            Eigen::Map<const Eigen::VectorXd>(dev_A.data(), dev_A.size()));
        out.sigma_B.selfadjointView<Eigen::Lower>().rankUpdate(
            Eigen::Map<const Eigen::VectorXd>(dev_B.data(), dev_B.size()));
    }

    const double norm = 1.0 / (resamples - 1);
    out.sigma_A = norm * out.sigma_A.selfadjointView<Eigen::Lower>();
    out.sigma_B = norm * out.sigma_B.selfadjointView<Eigen::Lower>();
    return out;
}

}  // namespace ralqr
