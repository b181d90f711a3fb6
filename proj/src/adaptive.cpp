#include "ralqr/adaptive.hpp"

#include <cmath>
#include <utility>

#include "ralqr/linalg.hpp"

namespace ralqr {

namespace {

double stage_cost(const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::MatrixXd& Q,
                  const Eigen::MatrixXd& R) {
    return x.dot(Q * x) + u.dot(R * u);
}

}  // namespace

double uncertainty_scale(const UncertaintyEstimate& u, UncertaintyNorm norm) {
    switch (norm) {
        case UncertaintyNorm::MaxSpectral:
            return std::max(psd_spectral_norm(u.sigma_A), psd_spectral_norm(u.sigma_B));
        case UncertaintyNorm::Frobenius:
            return std::sqrt(u.sigma_A.squaredNorm() + u.sigma_B.squaredNorm());
    }
    throw InvalidParameter("unknown uncertainty norm");
}

void ControllerConfig::validate(Eigen::Index n, Eigen::Index m) const {
    if (t_explore <= 0) throw InvalidParameter("t_explore must be positive");
    if (t_explore <= n + m)
        throw InvalidParameter("t_explore must exceed n + m for a full-rank first fit");
    if (T < 1) throw InvalidParameter("horizon T must be at least 1");
    if (N_b < 2) throw InvalidParameter("N_b must be at least 2");
    if (gamma < 0.0) throw InvalidParameter("gamma must be nonnegative");
    if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be positive");
    if (U.rows() != m || U.cols() != m) throw DimensionError("U must be m x m");
    if (Q.rows() != n || Q.cols() != n) throw DimensionError("Q must be n x n");
    if (R.rows() != m || R.cols() != m) throw DimensionError("R must be m x m");
    if (X0.rows() != n || X0.cols() != n) throw DimensionError("X0 must be n x n");
    require_psd(U, "U");
    require_psd(Q, "Q");
    require_psd(R, "R");
    require_psd(X0, "X0");
}

EpisodeSeeds EpisodeSeeds::derive(std::uint64_t master, std::uint64_t sample) {
    EpisodeSeeds seeds;
    seeds.init_state = derive_seed(master, sample, stream_role::kInitState);
    seeds.plant_noise = derive_seed(master, sample, stream_role::kPlantNoise);
    seeds.exploration = derive_seed(master, sample, stream_role::kExploration);
    seeds.bootstrap = derive_seed(master, sample, stream_role::kBootstrap);
    return seeds;
}

Eigen::VectorXd exploration_input(const Eigen::MatrixXd& U, Rng& rng) {
    return GaussianSampler(U).draw(rng);
}

Eigen::VectorXd exploitation_input(const Eigen::MatrixXd& K_hat, const Eigen::VectorXd& x,
                                   const UncertaintyEstimate& uncertainty,
                                   const Eigen::MatrixXd& U, Rng& rng, UncertaintyNorm norm) {
    if (K_hat.cols() != x.size()) throw DimensionError("gain and state dimensions disagree");
    if (U.rows() != K_hat.rows()) throw DimensionError("U and gain dimensions disagree");
    const double s = uncertainty_scale(uncertainty, norm);
    return K_hat * x + GaussianSampler(U).draw_scaled(rng, s);
}

EstimateSequence estimate_sequence(const TrajectoryData& training, const ControllerConfig& cfg,
                                   std::uint64_t bootstrap_seed) {
    training.validate();
    if (training.length() < cfg.T - 1)
        throw DimensionError("training trajectory shorter than the decision horizon");

    EstimateSequence seq;
    seq.first_t = cfg.t_explore + 1;
    for (int t = cfg.t_explore + 1; t < cfg.T; ++t) {
        const TrajectoryData prefix = training.prefix(t);
        ModelEstimate model = least_squares_estimate(prefix);
        UncertaintyEstimate unc = bootstrap_model_variance(prefix, model, cfg.N_b,
                                                           derive_seed(bootstrap_seed, t));
        seq.models.push_back(std::move(model));
        seq.uncertainties.push_back(std::move(unc));
    }
    return seq;
}

namespace {

// The episode loop shared by offline and online modes. `estimates` is
// null in online mode, in which case the controller's own trajectory so
// far is fitted at every decision step.
std::vector<StepRecord> run_episode(const LinearSystemModel& plant, const ControllerConfig& cfg,
                                    const EstimateSequence* estimates,
                                    const EpisodeSeeds& seeds) {
    plant.validate();
    const Eigen::Index n = plant.state_dim();
    const Eigen::Index m = plant.input_dim();
    cfg.validate(n, m);
    if (estimates && estimates->first_t != cfg.t_explore + 1)
        throw UsageError("estimate sequence does not start at t_explore + 1");
    if (estimates &&
        static_cast<int>(estimates->models.size()) < std::max(0, cfg.T - cfg.t_explore - 1))
        throw UsageError("estimate sequence shorter than the horizon");

    Rng rng_init(seeds.init_state);
    Rng rng_plant(seeds.plant_noise);
    Rng rng_explore(seeds.exploration);
    const GaussianSampler x0_sampler(cfg.X0);
    const GaussianSampler u_sampler(cfg.U);
    const GaussianSampler w_sampler(plant.W);

    // Online mode accumulates its own trajectory for estimation.
    Eigen::MatrixXd own_states, own_inputs;
    if (!estimates) {
        own_states.resize(n, cfg.T + 1);
        own_inputs.resize(m, cfg.T);
    }

    Eigen::VectorXd x = x0_sampler.draw(rng_init);
    Eigen::MatrixXd held_gain = Eigen::MatrixXd::Zero(m, n);

    std::vector<StepRecord> steps;
    steps.reserve(cfg.T);
    for (int t = 0; t < cfg.T; ++t) {
        StepRecord rec;
        rec.t = t;
        rec.x = x;
        if (!estimates) own_states.col(t) = x;

        if (t <= cfg.t_explore) {
            rec.u = u_sampler.draw(rng_explore);
        } else {
            ModelEstimate model;
            UncertaintyEstimate unc;
            if (estimates) {
                const std::size_t i = static_cast<std::size_t>(t - estimates->first_t);
                model = estimates->models[i];
                unc = estimates->uncertainties[i];
            } else {
                const TrajectoryData data(own_states.leftCols(t + 1), own_inputs.leftCols(t));
                model = least_squares_estimate(data);
                unc = bootstrap_model_variance(data, model, cfg.N_b,
                                               derive_seed(seeds.bootstrap, t));
            }

            try {
                const BisectionDesign design = design_with_bisection(
                    model.A, model.B, cfg.Q, cfg.R, unc, cfg.gamma, cfg.epsilon);
                held_gain = design.solution.K;
                rec.c_gamma = design.c_gamma;
            } catch (const NotStabilizable&) {
                // Nominal estimate unstabilizable even with the noise
                // scaled to zero: hold the previous gain and try again
                // next step with fresh estimates.
                rec.gain_fallback = true;
            }
            rec.gain = held_gain;

            const double s = uncertainty_scale(unc, cfg.uncertainty_norm);
            rec.u = held_gain * x + u_sampler.draw_scaled(rng_explore, s);
            rec.model = std::move(model);
            rec.uncertainty = std::move(unc);
        }

        if (!estimates) own_inputs.col(t) = rec.u;
        rec.stage_cost = stage_cost(x, rec.u, cfg.Q, cfg.R);
        x = plant.A * x + plant.B * rec.u + w_sampler.draw(rng_plant);
        if (!estimates) own_states.col(t + 1) = x;
        steps.push_back(std::move(rec));
    }
    return steps;
}

}  // namespace

std::vector<StepRecord> run_adaptive_episode(const LinearSystemModel& plant,
                                             const ControllerConfig& cfg,
                                             const std::optional<TrajectoryData>& training_data,
                                             const EpisodeSeeds& seeds) {
    if (training_data) {
        const EstimateSequence est = estimate_sequence(*training_data, cfg, seeds.bootstrap);
        return run_episode(plant, cfg, &est, seeds);
    }
    return run_episode(plant, cfg, nullptr, seeds);
}

std::vector<StepRecord> run_adaptive_episode(const LinearSystemModel& plant,
                                             const ControllerConfig& cfg,
                                             const EstimateSequence& estimates,
                                             const EpisodeSeeds& seeds) {
    return run_episode(plant, cfg, &estimates, seeds);
}

}  // namespace ralqr
