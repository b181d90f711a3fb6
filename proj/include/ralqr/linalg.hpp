#pragma once

#include <Eigen/Dense>

#include "ralqr/errors.hpp"

namespace ralqr {

// Column-major vectorization: stacks the columns of M.
inline Eigen::VectorXd vec(const Eigen::MatrixXd& m) {
    return Eigen::Map<const Eigen::VectorXd>(m.data(), m.size());
}

// Inverse of vec: reshapes a length rows*cols vector column-major.
inline Eigen::MatrixXd devec(const Eigen::VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
    if (v.size() != rows * cols) throw DimensionError("devec: size mismatch");
    return Eigen::Map<const Eigen::MatrixXd>(v.data(), rows, cols);
}

inline bool is_symmetric(const Eigen::MatrixXd& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * std::max(1.0, m.cwiseAbs().maxCoeff());
}

// Smallest eigenvalue of a symmetric matrix.
inline double min_eigenvalue(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Spectral norm of a symmetric PSD matrix (its largest eigenvalue).
inline double psd_spectral_norm(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
    return std::max(0.0, es.eigenvalues().maxCoeff());
}

// Checks symmetry within `sym_tol` and eigenvalues >= -eig_floor.
inline void require_psd(const Eigen::MatrixXd& m, const char* name, double sym_tol = 1e-10,
                        double eig_floor = 1e-10) {
    if (m.rows() != m.cols()) throw DimensionError(std::string(name) + " must be square");
    if (!is_symmetric(m, sym_tol)) throw InvalidParameter(std::string(name) + " must be symmetric");
    if (min_eigenvalue(m) < -eig_floor)
        throw InvalidParameter(std::string(name) + " must be positive semidefinite");
}

// Spectral radius of a general square matrix.
inline double spectral_radius(const Eigen::MatrixXd& m) {
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, /*computeEigenvectors=*/false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace ralqr
