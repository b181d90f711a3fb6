#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ralqr/errors.hpp"

namespace ralqr {

// State-input trajectory: states has one more column than inputs, and
// column tau holds x_tau / u_tau.
struct TrajectoryData {
    Eigen::MatrixXd states;  // n x (length + 1)
    Eigen::MatrixXd inputs;  // m x length

    TrajectoryData() = default;
    TrajectoryData(Eigen::MatrixXd states_in, Eigen::MatrixXd inputs_in);

    // Builds from per-timestep vectors; rejects mixed dimensions.
    static TrajectoryData from_vectors(const std::vector<Eigen::VectorXd>& states,
                                       const std::vector<Eigen::VectorXd>& inputs);

    Eigen::Index state_dim() const { return states.rows(); }
    Eigen::Index input_dim() const { return inputs.rows(); }
    Eigen::Index length() const { return inputs.cols(); }  // number of transitions

    // First t transitions (states 0..t, inputs 0..t-1).
    TrajectoryData prefix(Eigen::Index t) const;

    void validate() const;
};

// The plant: x_{t+1} = A x_t + B u_t + w_t with w_t ~ (0, W).
struct LinearSystemModel {
    Eigen::MatrixXd A;  // n x n
    Eigen::MatrixXd B;  // n x m
    Eigen::MatrixXd W;  // n x n process-noise covariance, symmetric PSD

    Eigen::Index state_dim() const { return A.rows(); }
    Eigen::Index input_dim() const { return B.cols(); }

    void validate() const;
};

// A least-squares point estimate of the dynamics matrices.
struct ModelEstimate {
    Eigen::MatrixXd A;  // n x n
    Eigen::MatrixXd B;  // n x m
};

// Regression form of a trajectory: row tau of Z is [x_tau^T u_tau^T],
// row tau of X is x_{tau+1}^T, and gram = Z^T Z.
struct DataMatrices {
    Eigen::MatrixXd X;     // t x n
    Eigen::MatrixXd Z;     // t x (n + m)
    Eigen::MatrixXd gram;  // (n + m) x (n + m)
};

DataMatrices build_data_matrices(const TrajectoryData& data);

// Reusable solver for theta = X^T Z (Z^T Z)^{-1}. The gram matrix is
// inverted through its symmetric eigendecomposition; if the smallest
// eigenvalue is below rank_threshold times the largest the fit throws
// InsufficientExcitation instead of silently pseudoinverting. Internal
// buffers are reused across calls of the same size, so the bootstrap can
// refit millions of times without allocating.
class LeastSquaresSolver {
public:
    explicit LeastSquaresSolver(double rank_threshold = 1e-10)
        : rank_threshold_(rank_threshold) {}

    // X: t x n successors, Z: t x (n+m) regressors. Writes the n x (n+m)
    // coefficient block [A B] into theta.
    void fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z, Eigen::MatrixXd& theta);

private:
    double rank_threshold_;
    Eigen::MatrixXd gram_, cross_, graminv_, scaled_vecs_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_;
};

// Batch ordinary least squares for (A, B) from one trajectory.
ModelEstimate least_squares_estimate(const TrajectoryData& data);

// Same fit from prebuilt data matrices; returns the stacked block [A B].
Eigen::MatrixXd least_squares_theta(const DataMatrices& dm);

// Incremental variant: initialize from a batch fit, then fold in one
// transition at a time via rank-one updates of the gram inverse. The
// batch estimator is the correctness reference; this exists to avoid
// refitting from scratch when data arrives sequentially.
class RecursiveLeastSquares {
public:
    RecursiveLeastSquares() = default;

    void initialize(const TrajectoryData& data);
    void update(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                const Eigen::VectorXd& x_next);

    bool initialized() const { return initialized_; }
    ModelEstimate estimate() const;

private:
    bool initialized_ = false;
    Eigen::Index n_ = 0, m_ = 0;
    Eigen::MatrixXd theta_;     // n x (n+m)
    Eigen::MatrixXd gram_inv_;  // (n+m) x (n+m)
};

}  // namespace ralqr
