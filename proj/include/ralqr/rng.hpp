#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "ralqr/errors.hpp"

namespace ralqr {

namespace detail {
// SplitMix64 finalizer (Stafford mix13 variant).
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Derives an independent stream seed from (master, stream, substream).
// Used to give every Monte Carlo sample, noise role, and bootstrap
// replicate its own statistically independent generator, so results do
// not depend on evaluation order or worker count.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t substream = 0) {
    std::uint64_t h = detail::mix64(master);
    h = detail::mix64(h ^ detail::mix64(stream + 0x2545f4914f6cdd1dULL));
    h = detail::mix64(h ^ detail::mix64(substream + 0x9e3779b97f4a7c15ULL));
    return h;
}

// Stream roles for seed derivation inside one Monte Carlo sample.
namespace stream_role {
inline constexpr std::uint64_t kInitState = 1;
inline constexpr std::uint64_t kPlantNoise = 2;
inline constexpr std::uint64_t kExploration = 3;
inline constexpr std::uint64_t kBootstrap = 4;
inline constexpr std::uint64_t kTrainingInputs = 5;
inline constexpr std::uint64_t kTrainingNoise = 6;
}  // namespace stream_role

// Small deterministic generator (SplitMix64 core) with Box-Muller
// Gaussian draws. Construction is a single store, so per-replicate and
// per-sample generators are cheap; std::mt19937_64 seeding is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return detail::mix64(state_ += 0x9e3779b97f4a7c15ULL); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform index in [0, n). Fixed-point multiply; bias is O(n / 2^64).
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal draw, Box-Muller with one cached mate.
    double gaussian() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double phi = 2.0 * M_PI * u2;
        cached_ = r * std::sin(phi);
        has_cached_ = true;
        return r * std::cos(phi);
    }

    // Fills `out` with iid standard normal entries.
    void gaussian_vector(Eigen::Ref<Eigen::VectorXd> out) {
        for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = gaussian();
    }

private:
    std::uint64_t state_;
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Draws from N(0, Sigma) for a fixed symmetric PSD Sigma. The square
// root factor is computed once via eigendecomposition, so semidefinite
// covariances (including zero) are handled exactly. Every draw consumes
// exactly dim() standard normals, keeping streams aligned no matter how
// the draw is scaled.
class GaussianSampler {
public:
    explicit GaussianSampler(const Eigen::MatrixXd& sigma) {
        if (sigma.rows() != sigma.cols())
            throw DimensionError("covariance matrix must be square");
        if (!sigma.isApprox(sigma.transpose(), 1e-10))
            throw DimensionError("covariance matrix must be symmetric");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
        const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
        if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()))
            throw InvalidParameter("covariance matrix has a negative eigenvalue");
        factor_ = es.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
        z_.resize(sigma.rows());
    }

    Eigen::Index dim() const { return factor_.rows(); }

    Eigen::VectorXd draw(Rng& rng) const {
        rng.gaussian_vector(z_);
        return factor_ * z_;
    }

    // Draw scaled by sqrt(scale), i.e. a sample from N(0, scale * Sigma).
    Eigen::VectorXd draw_scaled(Rng& rng, double scale) const {
        rng.gaussian_vector(z_);
        return std::sqrt(scale) * (factor_ * z_);
    }

private:
    Eigen::MatrixXd factor_;
    mutable Eigen::VectorXd z_;
};

}  // namespace ralqr
