#include "ralqr/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>

#include "ralqr/linalg.hpp"
#include "ralqr/riccati.hpp"

namespace ralqr {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

const char* arm_name(Arm arm) { return arm == Arm::CE ? "CE" : "RMN"; }

void ExperimentConfig::validate() const {
    plant.validate();
    controller.validate(plant.state_dim(), plant.input_dim());
    if (N_s < 1) throw InvalidParameter("N_s must be at least 1");
    if (workers < 1) throw InvalidParameter("workers must be at least 1");
    if (arms.empty()) throw InvalidParameter("at least one arm must be enabled");
    for (std::size_t i = 0; i < arms.size(); ++i)
        for (std::size_t j = i + 1; j < arms.size(); ++j)
            if (arms[i] == arms[j]) throw InvalidParameter("duplicate arm");
    for (double p : quantiles)
        if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("quantile levels must lie in (0, 1)");
}

double empirical_quantile(std::vector<double>& values, double p) {
    if (values.empty()) throw InvalidParameter("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidParameter("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = p * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

QuantileTable summarize(const Eigen::MatrixXd& values, int first_timestep,
                        const std::vector<double>& levels) {
    if (values.size() == 0) throw InvalidParameter("cannot summarize an empty record");
    for (double p : levels)
        if (!(p > 0.0 && p < 1.0)) throw InvalidParameter("quantile levels must lie in (0, 1)");

    QuantileTable table;
    table.levels = levels;
    const Eigen::Index rows = values.rows();
    table.timesteps.resize(rows);
    table.mean.resize(rows);
    table.median.resize(rows);
    table.quantiles.resize(rows, static_cast<Eigen::Index>(levels.size()));
    table.excluded.resize(rows);

    std::vector<double> row;
    row.reserve(values.cols());
    for (Eigen::Index i = 0; i < rows; ++i) {
        table.timesteps[i] = first_timestep + static_cast<int>(i);
        row.clear();
        for (Eigen::Index k = 0; k < values.cols(); ++k)
            if (!std::isnan(values(i, k))) row.push_back(values(i, k));
        table.excluded[i] = static_cast<int>(values.cols()) - static_cast<int>(row.size());
        if (row.empty()) {
            table.mean[i] = kNaN;
            table.median[i] = kNaN;
            table.quantiles.row(i).setConstant(kNaN);
            continue;
        }
        double sum = 0.0;
        for (double v : row) sum += v;
        table.mean[i] = sum / static_cast<double>(row.size());
        table.median[i] = empirical_quantile(row, 0.5);
        for (std::size_t q = 0; q < levels.size(); ++q)
            table.quantiles(i, static_cast<Eigen::Index>(q)) = empirical_quantile(row, levels[q]);
    }
    return table;
}

std::vector<QuantileTable> summarize(const RegretRecord& record,
                                     const std::vector<double>& levels) {
    if (record.arms.empty()) throw InvalidParameter("cannot summarize an empty record");
    std::vector<QuantileTable> tables;
    tables.reserve(record.arms.size());
    for (const ArmData& arm : record.arms)
        tables.push_back(summarize(arm.regret, record.t_explore, levels));
    return tables;
}

Eigen::VectorXd simulate_fixed_gain(const LinearSystemModel& plant, const Eigen::MatrixXd& K,
                                    const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                    const Eigen::MatrixXd& X0, int T, std::uint64_t master_seed,
                                    std::uint64_t sample) {
    plant.validate();
    if (T < 1) throw InvalidParameter("horizon T must be at least 1");
    Rng rng_init(derive_seed(master_seed, sample, stream_role::kInitState));
    Rng rng_plant(derive_seed(master_seed, sample, stream_role::kPlantNoise));
    const GaussianSampler x0_sampler(X0);
    const GaussianSampler w_sampler(plant.W);

    Eigen::VectorXd costs(T);
    Eigen::VectorXd x = x0_sampler.draw(rng_init);
    Eigen::VectorXd u(K.rows());
    for (int t = 0; t < T; ++t) {
        u.noalias() = K * x;
        costs[t] = x.dot(Q * x) + u.dot(R * u);
        x = plant.A * x + plant.B * u + w_sampler.draw(rng_plant);
    }
    return costs;
}

BaselineResult optimal_baseline(const LinearSystemModel& plant, const Eigen::MatrixXd& Q,
                                const Eigen::MatrixXd& R, const Eigen::MatrixXd& X0, int T,
                                int N_s, std::uint64_t master_seed) {
    if (N_s < 1) throw InvalidParameter("N_s must be at least 1");
    BaselineResult result;
    result.K_star = solve_dare(plant.A, plant.B, Q, R).K;
    result.c_star = Eigen::VectorXd::Zero(T);
    // Fixed sample order keeps the average bitwise reproducible.
    for (int k = 0; k < N_s; ++k)
        result.c_star += simulate_fixed_gain(plant, result.K_star, Q, R, X0, T, master_seed,
                                             static_cast<std::uint64_t>(k));
    result.c_star /= static_cast<double>(N_s);
    return result;
}

namespace {

// Generates the offline training trajectory for one sample: state
// starts at the origin and the inputs are standard Gaussian, simulated
// under the true plant noise. Produces T - 1 transitions, enough for
// the last decision step to consume data up to time T - 1.
TrajectoryData make_training_data(const LinearSystemModel& plant, int T,
                                  std::uint64_t master_seed, std::uint64_t sample,
                                  const GaussianSampler& w_sampler) {
    const Eigen::Index n = plant.state_dim();
    const Eigen::Index m = plant.input_dim();
    const int len = T - 1;
    Rng rng_u(derive_seed(master_seed, sample, stream_role::kTrainingInputs));
    Rng rng_w(derive_seed(master_seed, sample, stream_role::kTrainingNoise));

    Eigen::MatrixXd states = Eigen::MatrixXd::Zero(n, len + 1);
    Eigen::MatrixXd inputs(m, len);
    Eigen::VectorXd u(m);
    for (int tau = 0; tau < len; ++tau) {
        rng_u.gaussian_vector(u);
        inputs.col(tau) = u;
        states.col(tau + 1) =
            plant.A * states.col(tau) + plant.B * u + w_sampler.draw(rng_w);
    }
    return TrajectoryData(std::move(states), std::move(inputs));
}

}  // namespace

RegretRecord run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const int T = cfg.controller.T;
    const int t_explore = cfg.controller.t_explore;
    if (T <= t_explore + 1)
        throw InvalidParameter("horizon T must leave at least one decision step");
    const int regret_rows = T - t_explore;
    const int diag_rows = T - 1 - t_explore;

    const BaselineResult baseline =
        optimal_baseline(cfg.plant, cfg.controller.Q, cfg.controller.R, cfg.controller.X0, T,
                         cfg.N_s, cfg.master_seed);

    RegretRecord record;
    record.t_explore = t_explore;
    record.T = T;
    record.c_star = baseline.c_star;
    record.levels = cfg.quantiles;
    record.arms.resize(cfg.arms.size());
    for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
        ArmData& arm = record.arms[a];
        arm.arm = cfg.arms[a];
        arm.regret.setConstant(regret_rows, cfg.N_s, kNaN);
        arm.err_A.setConstant(diag_rows, cfg.N_s, kNaN);
        arm.err_B.setConstant(diag_rows, cfg.N_s, kNaN);
        arm.trace_sigma_A.setConstant(diag_rows, cfg.N_s, kNaN);
        arm.trace_sigma_B.setConstant(diag_rows, cfg.N_s, kNaN);
        arm.c_gamma.setConstant(diag_rows, cfg.N_s, kNaN);
        arm.aborted.assign(static_cast<std::size_t>(cfg.N_s), 0);
    }

    const GaussianSampler w_sampler(cfg.plant.W);
    std::atomic<int> next_sample{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    const auto process_sample = [&](int k) {
        const std::uint64_t sample = static_cast<std::uint64_t>(k);
        const EpisodeSeeds seeds = EpisodeSeeds::derive(cfg.master_seed, sample);

        EstimateSequence estimates;
        try {
            const TrajectoryData training =
                make_training_data(cfg.plant, T, cfg.master_seed, sample, w_sampler);
            estimates = estimate_sequence(training, cfg.controller, seeds.bootstrap);
        } catch (const InsufficientExcitation&) {
            // Shared estimates failed: every arm aborts this sample.
            for (ArmData& arm : record.arms) arm.aborted[sample] = 1;
            return;
        }

        for (ArmData& arm : record.arms) {
            ControllerConfig ctrl = cfg.controller;
            if (arm.arm == Arm::CE) ctrl.gamma = 0.0;
            const std::vector<StepRecord> steps =
                run_adaptive_episode(cfg.plant, ctrl, estimates, seeds);
            for (int t = t_explore; t < T; ++t)
                arm.regret(t - t_explore, k) = steps[t].stage_cost - baseline.c_star[t];
            for (int t = t_explore + 1; t < T; ++t) {
                const StepRecord& s = steps[t];
                const int i = t - t_explore - 1;
                arm.err_A(i, k) = (s.model->A - cfg.plant.A).norm();
                arm.err_B(i, k) = (s.model->B - cfg.plant.B).norm();
                arm.trace_sigma_A(i, k) = s.uncertainty->sigma_A.trace();
                arm.trace_sigma_B(i, k) = s.uncertainty->sigma_B.trace();
                if (s.c_gamma) arm.c_gamma(i, k) = *s.c_gamma;
            }
        }
    };

    const auto worker = [&]() {
        for (;;) {
            const int k = next_sample.fetch_add(1, std::memory_order_relaxed);
            if (k >= cfg.N_s) return;
            try {
                process_sample(k);
            } catch (...) {
                // Anything other than the handled abort is a bug or a
                // numerical failure worth surfacing; stash the first one
                // and rethrow after the pool joins.
                const std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    if (cfg.workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(cfg.workers);
        for (int w = 0; w < cfg.workers; ++w) pool.emplace_back(worker);
        for (std::thread& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    for (ArmData& arm : record.arms)
        for (std::uint8_t flag : arm.aborted) arm.aborts += flag;

    for (const ArmData& arm : record.arms) {
        record.regret_stats.push_back(summarize(arm.regret, t_explore, cfg.quantiles));
        record.err_A_stats.push_back(summarize(arm.err_A, t_explore + 1, cfg.quantiles));
        record.err_B_stats.push_back(summarize(arm.err_B, t_explore + 1, cfg.quantiles));
        record.sigma_A_stats.push_back(summarize(arm.trace_sigma_A, t_explore + 1, cfg.quantiles));
        record.sigma_B_stats.push_back(summarize(arm.trace_sigma_B, t_explore + 1, cfg.quantiles));
        record.c_gamma_stats.push_back(summarize(arm.c_gamma, t_explore + 1, cfg.quantiles));
    }
    return record;
}

}  // namespace ralqr
