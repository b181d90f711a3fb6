#pragma once

#include <vector>

#include <Eigen/Dense>

#include "ralqr/bootstrap.hpp"

namespace ralqr {

// Eigendecomposition of the uncertainty covariances in operator form:
// sigma_A = sum_i alpha_i vec(A_i) vec(A_i)^T with each A_i the i-th unit
// eigenvector devectorized (column-major) into an n x n matrix, and the
// analogous {beta_j, B_j} for sigma_B.
struct NoiseSpectrum {
    std::vector<double> alphas;
    std::vector<Eigen::MatrixXd> A_dirs;  // n x n, unit Frobenius norm
    std::vector<double> betas;
    std::vector<Eigen::MatrixXd> B_dirs;  // n x m, unit Frobenius norm
};

NoiseSpectrum decompose_uncertainty(const UncertaintyEstimate& u);

// Scales every noise variance by `factor`; directions are unchanged.
NoiseSpectrum scale_spectrum(NoiseSpectrum spectrum, double factor);

struct RiccatiSolution {
    Eigen::MatrixXd P;  // symmetric PSD cost matrix
    Eigen::MatrixXd K;  // optimal gain, u = K x
    int iterations = 0;
    double residual = 0.0;  // max-abs fixed-point residual at P
};

struct RiccatiOptions {
    // Value iteration stops when successive iterates differ by less than
    // max(convergence_tol, convergence_tol_rel * maxabs(P)).
    double convergence_tol = 1e-12;
    double convergence_tol_rel = 1e-13;
    // Declared divergent when maxabs(P) exceeds this or the iteration
    // budget runs out.
    double divergence_norm = 1e12;
    int max_iterations = 100000;
    // Relative cutoff for the pseudo-inverse used when R + B^T P B (+
    // noise terms) is singular, e.g. with R = 0 early in the iteration.
    double pinv_rel_cutoff = 1e-12;
    double residual_tol = 1e-9;
};

// Standard discrete algebraic Riccati equation. Uses the structure-
// preserving doubling algorithm when R is positive definite and falls
// back to value iteration otherwise (the R = 0 case). Throws
// NotStabilizable when the iteration diverges or the closed loop is
// unstable.
RiccatiSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           const RiccatiOptions& options = {});

// Generalized DARE with multiplicative noise:
//   P = Q + A^T P A + sum_i alpha_i A_i^T P A_i
//       - A^T P B (R + B^T P B + sum_j beta_j B_j^T P B_j)^{-1} B^T P A
// solved by value iteration from P_0 = Q. Divergence is the mean-square
// unstabilizability signal and throws MeanSquareUnstabilizable.
RiccatiSolution solve_gdare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                            const NoiseSpectrum& spectrum,
                            const RiccatiOptions& options = {});

struct BisectionDesign {
    RiccatiSolution solution;
    double c_gamma = 1.0;  // fraction of gamma * (sigma_A, sigma_B) actually used
};

// Finds the largest c in [0, 1] (within tolerance epsilon) such that the
// GDARE at noise level c * gamma * (sigma_A, sigma_B) is solvable, and
// returns the solution at that level. Feasibility at c = 1 is tested
// first and short-circuits. The returned c_gamma is always feasible; if
// even c = 0 fails the nominal model is not stabilizable.
BisectionDesign design_with_bisection(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                      const UncertaintyEstimate& uncertainty, double gamma,
                                      double epsilon, const RiccatiOptions& options = {});

}  // namespace ralqr
