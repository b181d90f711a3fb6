#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "ralqr/linalg.hpp"
#include "ralqr/riccati.hpp"

using namespace ralqr;

namespace {

Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

// Scalar uncertainty with Var(vec A) = a and Var(vec B) = b.
UncertaintyEstimate scalar_uncertainty(double a, double b) {
    UncertaintyEstimate u = UncertaintyEstimate::zero(1, 1);
    u.sigma_A(0, 0) = a;
    u.sigma_B(0, 0) = b;
    return u;
}

// Max-abs fixed-point residual of the generalized Riccati equation at P.
double gdare_residual(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                      const NoiseSpectrum& spectrum, const Eigen::MatrixXd& P) {
    Eigen::MatrixXd S = R + B.transpose() * P * B;
    for (std::size_t j = 0; j < spectrum.betas.size(); ++j)
        S += spectrum.betas[j] * spectrum.B_dirs[j].transpose() * P * spectrum.B_dirs[j];
    Eigen::MatrixXd next = Q + A.transpose() * P * A;
    for (std::size_t i = 0; i < spectrum.alphas.size(); ++i)
        next += spectrum.alphas[i] * spectrum.A_dirs[i].transpose() * P * spectrum.A_dirs[i];
    const Eigen::MatrixXd PA = P * A;
    next -= PA.transpose() * B * S.ldlt().solve(B.transpose() * PA);
    return (next - P).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_SUITE("riccati") {

TEST_CASE("zero covariance decomposes to an empty-weight spectrum") {
    const NoiseSpectrum s = decompose_uncertainty(UncertaintyEstimate::zero(2, 1));
    CHECK(s.alphas.size() == 4);
    CHECK(s.betas.size() == 2);
    for (double a : s.alphas) CHECK(a == 0.0);
    for (double b : s.betas) CHECK(b == 0.0);
}

TEST_CASE("scalar covariance decomposes to one direction of unit norm") {
    const NoiseSpectrum s = decompose_uncertainty(scalar_uncertainty(0.5, 0.0));
    REQUIRE(s.alphas.size() == 1);
    CHECK(s.alphas[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(std::abs(s.A_dirs[0](0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("diagonal covariance decomposes to unit-vector directions") {
    // n = 2, sigma_A = diag(2, 0, 0, 1): eigenvalues {2, 1, 0, 0} with
    // eigenvectors e1 and e4, which devectorize (column-major) to
    // [[1,0],[0,0]] and [[0,0],[0,1]].
    UncertaintyEstimate u = UncertaintyEstimate::zero(2, 1);
    u.sigma_A.diagonal() << 2.0, 0.0, 0.0, 1.0;
    const NoiseSpectrum s = decompose_uncertainty(u);
    REQUIRE(s.alphas.size() == 4);

    std::vector<double> sorted = s.alphas;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sorted[1] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sorted[2] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sorted[3] == doctest::Approx(2.0).epsilon(1e-12));

    for (std::size_t i = 0; i < s.alphas.size(); ++i) {
        CHECK(s.A_dirs[i].norm() == doctest::Approx(1.0).epsilon(1e-12));
        if (std::abs(s.alphas[i] - 2.0) < 1e-9) {
            CHECK(std::abs(s.A_dirs[i](0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
        } else if (std::abs(s.alphas[i] - 1.0) < 1e-9) {
            CHECK(std::abs(s.A_dirs[i](1, 1)) == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("decomposition reconstructs the covariance") {
    // A generic PSD matrix: M M^T for random-ish M.
    Eigen::MatrixXd M(4, 4);
    M << 1, 2, 0, -1, 0, 1, 1, 0, 2, 0, 1, 1, -1, 1, 0, 2;
    UncertaintyEstimate u = UncertaintyEstimate::zero(2, 2);
    u.sigma_A = M * M.transpose();
    u.sigma_B = 0.5 * Eigen::MatrixXd::Identity(4, 4);
    const NoiseSpectrum s = decompose_uncertainty(u);

    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(4, 4);
    for (std::size_t i = 0; i < s.alphas.size(); ++i) {
        const Eigen::VectorXd v = vec(s.A_dirs[i]);
        rebuilt += s.alphas[i] * v * v.transpose();
    }
    CHECK((rebuilt - u.sigma_A).cwiseAbs().maxCoeff() <
          1e-8 * u.sigma_A.cwiseAbs().maxCoeff());
}

TEST_CASE("a genuinely negative eigenvalue is rejected") {
    UncertaintyEstimate u = UncertaintyEstimate::zero(1, 1);
    u.sigma_A(0, 0) = -1.0;
    CHECK_THROWS_AS(decompose_uncertainty(u), InvalidParameter);
}

TEST_CASE("tiny negative eigenvalues are clipped to zero") {
    UncertaintyEstimate u = UncertaintyEstimate::zero(1, 1);
    u.sigma_A(0, 0) = -1e-12;
    const NoiseSpectrum s = decompose_uncertainty(u);
    REQUIRE(s.alphas.size() == 1);
    CHECK(s.alphas[0] == 0.0);
}

TEST_CASE("scale_spectrum multiplies weights only") {
    NoiseSpectrum s = decompose_uncertainty(scalar_uncertainty(0.5, 0.25));
    const NoiseSpectrum scaled = scale_spectrum(s, 2.0);
    CHECK(scaled.alphas[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scaled.betas[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(scaled.A_dirs[0] == s.A_dirs[0]);
}

TEST_CASE("scalar dare with free input collapses cost to one step") {
    // A = B = Q = 1, R = 0: input is free, so the controller cancels the
    // state every step. P = 1, K = -1.
    const RiccatiSolution sol = solve_dare(scalar(1), scalar(1), scalar(1), scalar(0));
    CHECK(sol.P(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(sol.K(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("dare with zero dynamics returns the stage cost") {
    // A = 0: the state dies by itself, the best input is none.
    const RiccatiSolution sol = solve_dare(scalar(0), scalar(1), scalar(3), scalar(1));
    CHECK(sol.P(0, 0) == doctest::Approx(3.0).epsilon(1e-9));
    CHECK(sol.K(0, 0) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("unreachable unstable mode is reported as not stabilizable") {
    CHECK_THROWS_AS(solve_dare(scalar(2), scalar(0), scalar(1), scalar(1)), NotStabilizable);
}

TEST_CASE("multivariate dare satisfies its fixed point and stabilizes") {
    Eigen::MatrixXd A(3, 3);
    A << 1.1, 0.2, 0.0, 0.0, 0.9, 0.3, -0.1, 0.0, 0.8;
    Eigen::MatrixXd B(3, 2);
    B << 1, 0, 0, 1, 0.5, 0.5;
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(3, 3);
    const Eigen::MatrixXd R = 0.1 * Eigen::MatrixXd::Identity(2, 2);
    const RiccatiSolution sol = solve_dare(A, B, Q, R);

    CHECK(gdare_residual(A, B, Q, R, NoiseSpectrum{}, sol.P) <
          1e-8 * std::max(1.0, sol.P.cwiseAbs().maxCoeff()));
    CHECK(is_symmetric(sol.P, 1e-10));
    CHECK(min_eigenvalue(sol.P) > -1e-10);
    CHECK(spectral_radius(A + B * sol.K) < 1.0);
    // K satisfies the gain formula at P.
    const Eigen::MatrixXd S = R + B.transpose() * sol.P * B;
    const Eigen::MatrixXd K_ref = -S.ldlt().solve(B.transpose() * sol.P * A);
    CHECK((sol.K - K_ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("gdare with an empty spectrum matches the dare") {
    Eigen::MatrixXd A(2, 2);
    A << 0.9, 0.4, -0.2, 1.0;
    Eigen::MatrixXd B(2, 1);
    B << 0.0, 1.0;
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd R = scalar(0.5);
    const RiccatiSolution dare = solve_dare(A, B, Q, R);
    const RiccatiSolution gdare =
        solve_gdare(A, B, Q, R, decompose_uncertainty(UncertaintyEstimate::zero(2, 1)));
    CHECK((dare.P - gdare.P).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((dare.K - gdare.K).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("scalar gdare with state-multiplicative noise") {
    // A = B = Q = 1, R = 0, alpha = 0.5 on direction [[1]]:
    // P = 1 + P/2 gives P = 2; the input still cancels the mean, K = -1.
    const RiccatiSolution sol = solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                                            decompose_uncertainty(scalar_uncertainty(0.5, 0)));
    CHECK(sol.P(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.K(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("scalar gdare with input-multiplicative noise") {
    // A = B = Q = 1, R = 0, beta = 1 on direction [[1]]:
    // S = (1 + beta) P, K = -1/(1 + beta) = -0.5, P = 1/(1 - A K_eff) = 2.
    const RiccatiSolution sol = solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                                            decompose_uncertainty(scalar_uncertainty(0, 1)));
    CHECK(sol.P(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(sol.K(0, 0) == doctest::Approx(-0.5).epsilon(1e-9));
}

TEST_CASE("mean-square stabilizability boundary at alpha = 1") {
    // For A = B = Q = 1, R = 0 the optimal closed loop is x_{t+1} =
    // (a_t - 1) x_t with Var(a_t) = alpha, so the mean-square dynamics
    // contract iff alpha < 1.
    CHECK_NOTHROW(solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                              decompose_uncertainty(scalar_uncertainty(0.99, 0))));
    CHECK_THROWS_AS(solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                                decompose_uncertainty(scalar_uncertainty(1.01, 0))),
                    MeanSquareUnstabilizable);
    CHECK_THROWS_AS(solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                                decompose_uncertainty(scalar_uncertainty(1.5, 0))),
                    MeanSquareUnstabilizable);
}

TEST_CASE("gdare cost grows monotonically with noise level") {
    double prev = 0.0;
    for (double alpha : {0.0, 0.2, 0.4, 0.6, 0.8}) {
        const RiccatiSolution sol =
            solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0.2),
                        decompose_uncertainty(scalar_uncertainty(alpha, 0.1 * alpha)));
        CHECK(sol.P(0, 0) > prev);
        prev = sol.P(0, 0);
    }
}

TEST_CASE("gdare solution satisfies its fixed point with both noise kinds") {
    Eigen::MatrixXd A(2, 2);
    A << 0.8, 0.5, 0.0, 0.9;
    Eigen::MatrixXd B(2, 1);
    B << 1.0, 0.3;
    const Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(2, 2);
    const Eigen::MatrixXd R = scalar(0.2);

    UncertaintyEstimate u = UncertaintyEstimate::zero(2, 1);
    u.sigma_A.diagonal() << 0.05, 0.02, 0.02, 0.04;
    u.sigma_B.diagonal() << 0.03, 0.01;
    const NoiseSpectrum spectrum = decompose_uncertainty(u);
    const RiccatiSolution sol = solve_gdare(A, B, Q, R, spectrum);

    CHECK(gdare_residual(A, B, Q, R, spectrum, sol.P) <
          1e-8 * std::max(1.0, sol.P.cwiseAbs().maxCoeff()));
    CHECK(sol.residual <= 1e-9 * std::max(1.0, sol.P.cwiseAbs().maxCoeff()));
    CHECK(is_symmetric(sol.P, 1e-10));
    CHECK(min_eigenvalue(sol.P) > -1e-10);
}

TEST_CASE("spectral terms equal the covariance-weighted quadratic form") {
    // For any symmetric P, sum_i alpha_i A_i^T P A_i has entries
    // (a, b) -> sum_{r, s} P_{rs} sigma_A[a n + r, b n + s]; check the
    // decomposition against that identity on a dense covariance.
    const int n = 2;
    Eigen::MatrixXd M(n * n, n * n);
    M << 2, 1, 0, 1, 0, 1, 1, 0, 1, 0, 2, 1, 0, 1, 0, 1;
    UncertaintyEstimate u = UncertaintyEstimate::zero(n, 1);
    u.sigma_A = M * M.transpose();
    u.sigma_B(0, 0) = 0.0;
    const NoiseSpectrum s = decompose_uncertainty(u);

    Eigen::MatrixXd P(n, n);
    P << 3, 1, 1, 2;
    Eigen::MatrixXd via_spectrum = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < s.alphas.size(); ++i)
        via_spectrum += s.alphas[i] * s.A_dirs[i].transpose() * P * s.A_dirs[i];

    Eigen::MatrixXd via_cov = Eigen::MatrixXd::Zero(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            for (int r = 0; r < n; ++r)
                for (int sdx = 0; sdx < n; ++sdx)
                    via_cov(a, b) += P(r, sdx) * u.sigma_A(a * n + r, b * n + sdx);
    CHECK((via_spectrum - via_cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("bisection returns full scale when the uncertainty is feasible") {
    const BisectionDesign d = design_with_bisection(
        scalar(1), scalar(1), scalar(1), scalar(0), scalar_uncertainty(0.5, 0), 1.0, 0.01);
    CHECK(d.c_gamma == 1.0);
    CHECK(d.solution.P(0, 0) == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("zero uncertainty bisection reduces to the dare") {
    const BisectionDesign d = design_with_bisection(scalar(1), scalar(1), scalar(1), scalar(0),
                                                    UncertaintyEstimate::zero(1, 1), 1.0, 0.01);
    CHECK(d.c_gamma == 1.0);
    CHECK(d.solution.P(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(d.solution.K(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("bisection scales back infeasible uncertainty to the boundary") {
    // alpha = 2 is infeasible; c alpha < 1 requires c < 0.5. With
    // epsilon = 0.01 the returned lower endpoint lands in [0.49, 0.5).
    const BisectionDesign d = design_with_bisection(
        scalar(1), scalar(1), scalar(1), scalar(0), scalar_uncertainty(2.0, 0), 1.0, 0.01);
    CHECK(d.c_gamma >= 0.49);
    CHECK(d.c_gamma < 0.5);
    // The returned solution is the feasible one at c_gamma.
    const RiccatiSolution ref =
        solve_gdare(scalar(1), scalar(1), scalar(1), scalar(0),
                    decompose_uncertainty(scalar_uncertainty(2.0 * d.c_gamma, 0)));
    CHECK(d.solution.P(0, 0) == doctest::Approx(ref.P(0, 0)).epsilon(1e-9));
}

TEST_CASE("gamma rescales what the bisection considers feasible") {
    // alpha = 2 with gamma = 0.25 means the full-scale design solves at
    // effective alpha 0.5, which is feasible outright.
    const BisectionDesign d = design_with_bisection(
        scalar(1), scalar(1), scalar(1), scalar(0), scalar_uncertainty(2.0, 0), 0.25, 0.01);
    CHECK(d.c_gamma == 1.0);
}

TEST_CASE("bisection on an unstabilizable nominal model throws") {
    CHECK_THROWS_AS(design_with_bisection(scalar(2), scalar(0), scalar(1), scalar(1),
                                          UncertaintyEstimate::zero(1, 1), 1.0, 0.01),
                    NotStabilizable);
}

TEST_CASE("bisection validates its tolerances") {
    CHECK_THROWS_AS(design_with_bisection(scalar(1), scalar(1), scalar(1), scalar(0),
                                          UncertaintyEstimate::zero(1, 1), 1.0, 0.0),
                    InvalidParameter);
    CHECK_THROWS_AS(design_with_bisection(scalar(1), scalar(1), scalar(1), scalar(0),
                                          UncertaintyEstimate::zero(1, 1), -1.0, 0.01),
                    InvalidParameter);
}

}  // TEST_SUITE
