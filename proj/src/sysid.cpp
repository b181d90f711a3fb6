#include "ralqr/sysid.hpp"

#include <cmath>
#include <limits>

#include "ralqr/linalg.hpp"

namespace ralqr {

TrajectoryData::TrajectoryData(Eigen::MatrixXd states_in, Eigen::MatrixXd inputs_in)
    : states(std::move(states_in)), inputs(std::move(inputs_in)) {
    validate();
}

TrajectoryData TrajectoryData::from_vectors(const std::vector<Eigen::VectorXd>& state_seq,
                                            const std::vector<Eigen::VectorXd>& input_seq) {
    if (state_seq.empty()) throw DimensionError("trajectory needs at least one state");
    const Eigen::Index n = state_seq.front().size();
    const Eigen::Index m = input_seq.empty() ? 0 : input_seq.front().size();

    TrajectoryData data;
    data.states.resize(n, static_cast<Eigen::Index>(state_seq.size()));
    data.inputs.resize(m, static_cast<Eigen::Index>(input_seq.size()));
    for (std::size_t i = 0; i < state_seq.size(); ++i) {
        if (state_seq[i].size() != n) throw DimensionError("states have mixed dimensions");
        data.states.col(static_cast<Eigen::Index>(i)) = state_seq[i];
    }
    for (std::size_t i = 0; i < input_seq.size(); ++i) {
        if (input_seq[i].size() != m) throw DimensionError("inputs have mixed dimensions");
        data.inputs.col(static_cast<Eigen::Index>(i)) = input_seq[i];
    }
    data.validate();
    return data;
}

void TrajectoryData::validate() const {
    if (states.cols() != inputs.cols() + 1)
        throw DimensionError("trajectory must satisfy #states == #inputs + 1");
}

TrajectoryData TrajectoryData::prefix(Eigen::Index t) const {
    if (t < 0 || t > length()) throw DimensionError("prefix length out of range");
    TrajectoryData out;
    out.states = states.leftCols(t + 1);
    out.inputs = inputs.leftCols(t);
    return out;
}

void LinearSystemModel::validate() const {
    const Eigen::Index n = A.rows();
    if (A.cols() != n) throw DimensionError("A must be square");
    if (B.rows() != n) throw DimensionError("B row count must match A");
    if (W.rows() != n || W.cols() != n) throw DimensionError("W must be n x n");
    if (!is_symmetric(W, 1e-10)) throw InvalidParameter("W must be symmetric");
    if (min_eigenvalue(W) < -1e-10) throw InvalidParameter("W must be positive semidefinite");
}

DataMatrices build_data_matrices(const TrajectoryData& data) {
    data.validate();
    const Eigen::Index t = data.length();
    if (t < 1) throw InvalidParameter("trajectory must contain at least one transition");
    const Eigen::Index n = data.state_dim();
    const Eigen::Index m = data.input_dim();

    DataMatrices dm;
    dm.X = data.states.rightCols(t).transpose();
    dm.Z.resize(t, n + m);
    dm.Z.leftCols(n) = data.states.leftCols(t).transpose();
    dm.Z.rightCols(m) = data.inputs.transpose();
    dm.gram.noalias() = dm.Z.transpose() * dm.Z;
    return dm;
}

void LeastSquaresSolver::fit(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                             Eigen::MatrixXd& theta) {
    if (X.rows() != Z.rows()) throw DimensionError("X and Z must have matching row counts");
    gram_.noalias() = Z.transpose() * Z;
    eig_.compute(gram_);
    const auto& evals = eig_.eigenvalues();  // ascending
    const double lambda_max = evals(evals.size() - 1);
    const double lambda_min = evals(0);
    if (lambda_min <= rank_threshold_ * lambda_max || lambda_max <= 0.0) {
        const double cond = lambda_min > 0.0 ? lambda_max / lambda_min
                                             : std::numeric_limits<double>::infinity();
        throw InsufficientExcitation("gram matrix is rank deficient", cond);
    }
    scaled_vecs_.noalias() = eig_.eigenvectors() * evals.cwiseInverse().asDiagonal();
    graminv_.noalias() = scaled_vecs_ * eig_.eigenvectors().transpose();
    cross_.noalias() = X.transpose() * Z;
    theta.resize(X.cols(), Z.cols());
    theta.noalias() = cross_ * graminv_;
}

Eigen::MatrixXd least_squares_theta(const DataMatrices& dm) {
    LeastSquaresSolver solver;
    Eigen::MatrixXd theta;
    solver.fit(dm.X, dm.Z, theta);
    return theta;
}

ModelEstimate least_squares_estimate(const TrajectoryData& data) {
    const DataMatrices dm = build_data_matrices(data);
    const Eigen::MatrixXd theta = least_squares_theta(dm);
    const Eigen::Index n = data.state_dim();
    const Eigen::Index m = data.input_dim();
    return ModelEstimate{theta.leftCols(n), theta.rightCols(m)};
}

void RecursiveLeastSquares::initialize(const TrajectoryData& data) {
    const DataMatrices dm = build_data_matrices(data);
    theta_ = least_squares_theta(dm);
    n_ = data.state_dim();
    m_ = data.input_dim();
    // The batch fit above guarantees the gram matrix is invertible.
    gram_inv_ = dm.gram.ldlt().solve(Eigen::MatrixXd::Identity(n_ + m_, n_ + m_));
    initialized_ = true;
}

void RecursiveLeastSquares::update(const Eigen::VectorXd& x, const Eigen::VectorXd& u,
                                   const Eigen::VectorXd& x_next) {
    if (!initialized_) throw UsageError("recursive estimator used before initialization");
    if (x.size() != n_ || x_next.size() != n_ || u.size() != m_)
        throw DimensionError("transition dimensions do not match the estimator");

    Eigen::VectorXd z(n_ + m_);
    z.head(n_) = x;
    z.tail(m_) = u;

    const Eigen::VectorXd pz = gram_inv_ * z;
    const double denom = 1.0 + z.dot(pz);
    const Eigen::VectorXd innovation = x_next - theta_ * z;
    theta_.noalias() += innovation * (pz / denom).transpose();
    gram_inv_.noalias() -= (pz * pz.transpose()) / denom;
}

ModelEstimate RecursiveLeastSquares::estimate() const {
    if (!initialized_) throw UsageError("recursive estimator used before initialization");
    return ModelEstimate{theta_.leftCols(n_), theta_.rightCols(m_)};
}

}  // namespace ralqr
