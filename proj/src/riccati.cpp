#include "ralqr/riccati.hpp"

#include <cmath>

#include "ralqr/linalg.hpp"

namespace ralqr {

namespace {

void check_problem_data(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                        const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R) {
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    if (A.cols() != n) throw DimensionError("A must be square");
    if (B.rows() != n) throw DimensionError("B row count must match A");
    if (Q.rows() != n || Q.cols() != n) throw DimensionError("Q must be n x n");
    if (R.rows() != m || R.cols() != m) throw DimensionError("R must be m x m");
    require_psd(Q, "Q");
    require_psd(R, "R");
}

// Value iteration engine for the generalized Riccati equation. All
// per-iteration work happens in preallocated buffers; spectrum variances
// are scaled on the fly so bisection never copies direction matrices.
class GdareIteration {
public:
    enum class Status { Converged, Diverged };

    GdareIteration(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                   const NoiseSpectrum& spectrum, const RiccatiOptions& options)
        : A_(A), B_(B), Q_(Q), R_(R), spectrum_(spectrum), opts_(options) {
        const Eigen::Index n = A.rows();
        const Eigen::Index m = B.cols();
        P_.resize(n, n);
        Pn_.resize(n, n);
        PA_.resize(n, n);
        PB_.resize(n, m);
        tmp_nn_.resize(n, n);
        tmp_nm_.resize(n, m);
        S_.resize(m, m);
        Sinv_.resize(m, m);
        G_.resize(m, n);
        SG_.resize(m, n);
        identity_m_ = Eigen::MatrixXd::Identity(m, m);
    }

    Status run(double noise_scale, RiccatiSolution* out) {
        P_ = Q_;
        int iter = 0;
        for (; iter < opts_.max_iterations; ++iter) {
            step(noise_scale);
            const double max_p = Pn_.cwiseAbs().maxCoeff();
            if (!std::isfinite(max_p) || max_p > opts_.divergence_norm) return Status::Diverged;
            const double diff = (Pn_ - P_).cwiseAbs().maxCoeff();
            P_.swap(Pn_);
            if (diff < std::max(opts_.convergence_tol, opts_.convergence_tol_rel * max_p)) {
                finalize(noise_scale, out, iter + 1);
                return Status::Converged;
            }
        }
        return Status::Diverged;
    }

private:
    // One application of the right-hand side: Pn_ = f(P_).
    void step(double noise_scale) {
        PA_.noalias() = P_.selfadjointView<Eigen::Lower>() * A_;
        Pn_.noalias() = A_.transpose() * PA_;
        Pn_ += Q_;
        for (std::size_t i = 0; i < spectrum_.alphas.size(); ++i) {
            const double a = noise_scale * spectrum_.alphas[i];
            if (a == 0.0) continue;
            tmp_nn_.noalias() = P_.selfadjointView<Eigen::Lower>() * spectrum_.A_dirs[i];
            Pn_.noalias() += a * spectrum_.A_dirs[i].transpose() * tmp_nn_;
        }
        gain_terms(noise_scale);
        invert_S();
        SG_.noalias() = Sinv_ * G_;
        Pn_.noalias() -= G_.transpose() * SG_;
        // Symmetrize to keep rounding drift out of the fixed point.
        Pn_ = 0.5 * (Pn_ + Pn_.transpose()).eval();
    }

    // S = R + B^T P B + sum_j beta_j B_j^T P B_j and G = B^T P A at P_.
    void gain_terms(double noise_scale) {
        PB_.noalias() = P_.selfadjointView<Eigen::Lower>() * B_;
        S_.noalias() = B_.transpose() * PB_;
        S_ += R_;
        for (std::size_t j = 0; j < spectrum_.betas.size(); ++j) {
            const double b = noise_scale * spectrum_.betas[j];
            if (b == 0.0) continue;
            tmp_nm_.noalias() = P_.selfadjointView<Eigen::Lower>() * spectrum_.B_dirs[j];
            S_.noalias() += b * spectrum_.B_dirs[j].transpose() * tmp_nm_;
        }
        G_.noalias() = PB_.transpose() * A_;
    }

    void invert_S() {
        if (S_.rows() == 1) {
            const double s = S_(0, 0);
            Sinv_(0, 0) = s > 0.0 ? 1.0 / s : 0.0;
            return;
        }
        llt_.compute(S_);
        if (llt_.info() == Eigen::Success) {
            Sinv_ = llt_.solve(identity_m_);
            return;
        }
        // Singular or indefinite from rounding: pseudo-inverse with a
        // relative eigenvalue cutoff.
        eig_m_.compute(S_);
        const double cutoff =
            opts_.pinv_rel_cutoff * std::max(0.0, eig_m_.eigenvalues().cwiseAbs().maxCoeff());
        Eigen::VectorXd inv = eig_m_.eigenvalues();
        for (Eigen::Index i = 0; i < inv.size(); ++i)
            inv[i] = inv[i] > cutoff ? 1.0 / inv[i] : 0.0;
        Sinv_.noalias() =
            eig_m_.eigenvectors() * inv.asDiagonal() * eig_m_.eigenvectors().transpose();
    }

    void finalize(double noise_scale, RiccatiSolution* out, int iterations) {
        // Residual of the fixed-point equation at the converged P.
        step(noise_scale);
        const double residual = (Pn_ - P_).cwiseAbs().maxCoeff();
        // Gain at the converged P.
        gain_terms(noise_scale);
        invert_S();
        out->P = P_;
        out->K.noalias() = -(Sinv_ * G_);
        out->iterations = iterations;
        out->residual = residual;
    }

    const Eigen::MatrixXd& A_;
    const Eigen::MatrixXd& B_;
    const Eigen::MatrixXd& Q_;
    const Eigen::MatrixXd& R_;
    const NoiseSpectrum& spectrum_;
    const RiccatiOptions& opts_;

    Eigen::MatrixXd P_, Pn_, PA_, PB_, tmp_nn_, tmp_nm_, S_, Sinv_, G_, SG_, identity_m_;
    Eigen::LLT<Eigen::MatrixXd> llt_;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig_m_;
};

void check_residual(const RiccatiSolution& sol, const RiccatiOptions& opts,
                    const char* which) {
    const double bound =
        std::max(opts.residual_tol, 1e-12 * sol.P.cwiseAbs().maxCoeff());
    if (!(sol.residual <= bound))
        throw Error(std::string(which) + ": fixed-point residual " +
                    std::to_string(sol.residual) + " exceeds tolerance");
}

// Structure-preserving doubling for the standard DARE; requires R
// positive definite. Follows Chu, Fan, Lin & Wang (2004).
bool doubling_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                   const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                   const RiccatiOptions& opts, RiccatiSolution* out) {
    const Eigen::Index n = A.rows();
    const Eigen::LLT<Eigen::MatrixXd> r_llt(R);
    if (r_llt.info() != Eigen::Success) return false;

    Eigen::MatrixXd A_k = A;
    Eigen::MatrixXd G_k = B * r_llt.solve(B.transpose());
    Eigen::MatrixXd H = Q;
    Eigen::MatrixXd H_next, W, V1, V2;

    constexpr int kMaxDoublings = 120;
    for (int iter = 0; iter < kMaxDoublings; ++iter) {
        W = Eigen::MatrixXd::Identity(n, n) + G_k * H;
        const Eigen::PartialPivLU<Eigen::MatrixXd> lu(W);
        V1 = lu.solve(A_k);
        V2 = lu.solve(G_k.transpose()).transpose();
        G_k.noalias() += A_k * V2 * A_k.transpose();
        H_next = H + V1.transpose() * H * A_k;
        A_k *= V1;

        const double max_h = H_next.cwiseAbs().maxCoeff();
        if (!std::isfinite(max_h) || max_h > opts.divergence_norm) return false;
        const double diff = (H_next - H).cwiseAbs().maxCoeff();
        H = H_next;
        if (diff < std::max(opts.convergence_tol, opts.convergence_tol_rel * max_h)) {
            H = 0.5 * (H + H.transpose()).eval();
            Eigen::MatrixXd S = R + B.transpose() * H * B;
            const Eigen::LLT<Eigen::MatrixXd> s_llt(S);
            if (s_llt.info() != Eigen::Success) return false;
            out->P = H;
            out->K = -s_llt.solve(B.transpose() * H * A);
            out->iterations = iter + 1;
            Eigen::MatrixXd rhs =
                Q + A.transpose() * H * A + (A.transpose() * H * B) * out->K;
            out->residual = (rhs - H).cwiseAbs().maxCoeff();
            return true;
        }
    }
    return false;
}

}  // namespace

NoiseSpectrum decompose_uncertainty(const UncertaintyEstimate& u) {
    u.validate();
    const Eigen::Index n = u.n;
    const Eigen::Index m = u.m;

    NoiseSpectrum spectrum;
    const auto decompose = [](const Eigen::MatrixXd& sigma, Eigen::Index rows,
                              Eigen::Index cols, std::vector<double>& values,
                              std::vector<Eigen::MatrixXd>& dirs) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        values.reserve(sigma.rows());
        dirs.reserve(sigma.rows());
        for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
            double lambda = es.eigenvalues()[i];
            if (lambda < -1e-9 * scale)
                throw InvalidParameter("uncertainty covariance is not PSD");
            if (lambda < 0.0) lambda = 0.0;
            values.push_back(lambda);
            dirs.push_back(devec(es.eigenvectors().col(i), rows, cols));
        }
    };
    decompose(u.sigma_A, n, n, spectrum.alphas, spectrum.A_dirs);
    decompose(u.sigma_B, n, m, spectrum.betas, spectrum.B_dirs);
    return spectrum;
}

NoiseSpectrum scale_spectrum(NoiseSpectrum spectrum, double factor) {
    for (double& a : spectrum.alphas) a *= factor;
    for (double& b : spectrum.betas) b *= factor;
    return spectrum;
}

RiccatiSolution solve_dare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                           const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                           const RiccatiOptions& options) {
    check_problem_data(A, B, Q, R);

    RiccatiSolution sol;
    const bool r_definite = min_eigenvalue(R) > 1e-12 * std::max(1.0, R.cwiseAbs().maxCoeff());
    bool ok = false;
    if (r_definite) {
        ok = doubling_dare(A, B, Q, R, options, &sol);
    } else {
        NoiseSpectrum empty;
        GdareIteration engine(A, B, Q, R, empty, options);
        ok = engine.run(0.0, &sol) == GdareIteration::Status::Converged;
    }
    if (!ok) throw NotStabilizable("DARE iteration diverged: (A, B) is not stabilizable");
    check_residual(sol, options, "DARE");
    if (!(spectral_radius(A + B * sol.K) < 1.0))
        throw NotStabilizable("DARE solution does not stabilize the closed loop");
    return sol;
}

RiccatiSolution solve_gdare(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                            const NoiseSpectrum& spectrum, const RiccatiOptions& options) {
    check_problem_data(A, B, Q, R);
    GdareIteration engine(A, B, Q, R, spectrum, options);
    RiccatiSolution sol;
    if (engine.run(1.0, &sol) != GdareIteration::Status::Converged)
        throw MeanSquareUnstabilizable(
            "generalized Riccati iteration diverged: system is not mean-square stabilizable "
            "at this noise level");
    check_residual(sol, options, "GDARE");
    return sol;
}

BisectionDesign design_with_bisection(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                      const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                      const UncertaintyEstimate& uncertainty, double gamma,
                                      double epsilon, const RiccatiOptions& options) {
    if (!(epsilon > 0.0)) throw InvalidParameter("bisection tolerance must be positive");
    if (gamma < 0.0) throw InvalidParameter("gamma must be nonnegative");
    check_problem_data(A, B, Q, R);

    const NoiseSpectrum spectrum = decompose_uncertainty(uncertainty);
    GdareIteration engine(A, B, Q, R, spectrum, options);

    const auto feasible = [&](double c, RiccatiSolution* sol) {
        return engine.run(c * gamma, sol) == GdareIteration::Status::Converged;
    };

    BisectionDesign design;
    if (feasible(1.0, &design.solution)) {
        design.c_gamma = 1.0;
        check_residual(design.solution, options, "GDARE");
        return design;
    }
    if (!feasible(0.0, &design.solution))
        throw NotStabilizable("nominal model is not stabilizable even with zero uncertainty");

    double lo = 0.0;
    double hi = 1.0;
    RiccatiSolution probe;
    while (hi - lo >= epsilon) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid, &probe)) {
            lo = mid;
            design.solution = probe;
        } else {
            hi = mid;
        }
    }
    design.c_gamma = lo;
    check_residual(design.solution, options, "GDARE");
    return design;
}

}  // namespace ralqr
