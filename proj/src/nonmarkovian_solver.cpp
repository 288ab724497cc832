#include "rwnn/nonmarkovian_solver.hpp"

#include "rwnn/interval_moments.hpp"

#include <algorithm>
#include <cmath>

namespace rwnn {

namespace {

constexpr std::uint64_t kPathTag = 0x9A7B;
constexpr std::uint64_t kReservoirTag = 0x7E5E;
constexpr std::size_t kMergeGroup = 8;

/// Per-sample scalars shared by both routes.
struct JointCovariates {
    double x = 0.0;
    double level = 0.0;      // 1 - a delta
    double vol_shock = 0.0;  // sqrt(V) (dB - (b rho1 + c rho2) delta)
    double psi_shock = 0.0;  // dW1 - b delta
    double target = 0.0;
};

JointCovariates joint_covariates(const AffineDriver& driver, double rho1, double rho2, const PathBatch& paths,
                                 const TimeGrid& grid, std::size_t step, std::size_t path,
                                 const Eigen::Ref<const Eigen::VectorXd>& next_values) {
    const double t = grid.times[step];
    const double dt = grid.deltas[step];
    const auto x = paths.state(path, step);
    const auto dw = paths.increment(path, step);
    double b = 0.0;
    driver.b_at(t, x, std::span<double>(&b, 1));
    const double c = driver.c_at(t, x);
    double f_tilde = 0.0;
    driver.f_tilde_at(t, x, std::span<double>(&f_tilde, 1));
    const double db = rho1 * dw[0] + rho2 * dw[1];

    JointCovariates out;
    out.x = x[0];
    out.level = 1.0 - driver.a_at(t, x) * dt;
    out.vol_shock = std::sqrt(paths.var(path, step)) * (db - (b * rho1 + c * rho2) * dt);
    out.psi_shock = dw[0] - b * dt;
    out.target = next_values[static_cast<Eigen::Index>(path)] + f_tilde * dt;
    return out;
}

void check_inputs(const PathBatch& paths, std::size_t step) {
    if (!paths.has_variance()) throw std::logic_error("non-Markovian features: path batch carries no variance path");
    if (paths.increments.empty() || paths.noise_dim < 2)
        throw std::logic_error("non-Markovian features: path batch needs (dW1, dW2) increments");
    if (paths.dim != 1) throw std::invalid_argument("non-Markovian features: state must be the scalar log-price");
    if (step >= paths.steps) throw std::invalid_argument("non-Markovian features: step out of range");
}

double rho2_of(double rho1) { return std::sqrt(std::max(0.0, 1.0 - rho1 * rho1)); }

MomentAccumulator dense_joint_moments(const Reservoir& value_res, const Reservoir& psi_res,
                                      const AffineDriver& driver, double rho1, const PathBatch& paths,
                                      const TimeGrid& grid, std::size_t step, const Eigen::VectorXd& next,
                                      std::size_t chunk) {
    const std::size_t n = paths.paths;
    const std::size_t p = psi_res.nodes() + value_res.nodes();
    MomentAccumulator total(p, 1);
    const std::size_t chunks = chunk_count(n, chunk);
    for (std::size_t g0 = 0; g0 < chunks; g0 += kMergeGroup) {
        const std::size_t g1 = std::min(chunks, g0 + kMergeGroup);
        std::vector<MomentAccumulator> partial(g1 - g0, MomentAccumulator(p, 1));
        parallel_chunks(g1 - g0, 1, [&](std::size_t c, std::size_t, std::size_t) {
            const std::size_t begin = (g0 + c) * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            JointRegression reg =
                build_features_nonmarkovian(value_res, psi_res, driver, rho1, paths, grid, step, next, begin, end);
            Eigen::MatrixXd stacked(reg.targets.size(), static_cast<Eigen::Index>(p));
            stacked << reg.psi_features, reg.value_features;
            accumulate(partial[c], stacked, reg.targets);
        });
        for (const auto& part : partial) total.merge(part);
    }
    return total;
}

MomentAccumulator interval_joint_moments(const Reservoir& value_res, const Reservoir& psi_res,
                                         const AffineDriver& driver, double rho1, const PathBatch& paths,
                                         const TimeGrid& grid, std::size_t step, const Eigen::VectorXd& next) {
    const std::size_t n = paths.paths;
    const double rho2 = rho2_of(rho1);
    std::vector<double> state(n);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 5);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), 1);
    for (std::size_t j = 0; j < n; ++j) {
        const JointCovariates cv = joint_covariates(driver, rho1, rho2, paths, grid, step, j, next);
        const auto r = static_cast<Eigen::Index>(j);
        state[j] = cv.x;
        z(r, 0) = cv.level;
        z(r, 1) = cv.level * cv.x;
        z(r, 2) = cv.vol_shock;
        z(r, 3) = cv.psi_shock;
        z(r, 4) = cv.psi_shock * cv.x;
        y(r, 0) = cv.target;
    }
    IntervalMoments builder(state, z, y);
    // X1_k = H^Xi_k (b_k e + a_k x e)
    Eigen::MatrixXd psi_coef = Eigen::MatrixXd::Zero(psi_res.bias.size(), 5);
    psi_coef.col(3) = psi_res.bias;
    psi_coef.col(4) = psi_res.weights.col(0);
    builder.add_block(psi_res, psi_coef);
    // X2_k = H^Theta_k (b_k level + a_k level x + a_k s)
    Eigen::MatrixXd value_coef = Eigen::MatrixXd::Zero(value_res.bias.size(), 5);
    value_coef.col(0) = value_res.bias;
    value_coef.col(1) = value_res.weights.col(0);
    value_coef.col(2) = value_res.weights.col(0);
    builder.add_block(value_res, value_coef);
    return builder.moments();
}

}  // namespace

JointRegression build_features_nonmarkovian(const Reservoir& value_res, const Reservoir& psi_res,
                                            const AffineDriver& driver, double rho1, const PathBatch& paths,
                                            const TimeGrid& grid, std::size_t step,
                                            const Eigen::Ref<const Eigen::VectorXd>& next_values, std::size_t begin,
                                            std::size_t end) {
    check_inputs(paths, step);
    if (value_res.input_dim() != 1 || psi_res.input_dim() != 1)
        throw std::invalid_argument("non-Markovian features: reservoirs must take the scalar log-price");
    if (static_cast<std::size_t>(next_values.size()) != paths.paths)
        throw std::invalid_argument("non-Markovian features: next-step targets must have one entry per path");
    end = std::min(end, paths.paths);
    const std::size_t rows = end > begin ? end - begin : 0;
    const double rho2 = rho2_of(rho1);
    const auto kv = value_res.bias.size();
    const auto kp = psi_res.bias.size();

    JointRegression out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), kp),
                        Eigen::MatrixXd(static_cast<Eigen::Index>(rows), kv),
                        Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
    for (std::size_t r = 0; r < rows; ++r) {
        const JointCovariates cv = joint_covariates(driver, rho1, rho2, paths, grid, step, begin + r, next_values);
        const auto row = static_cast<Eigen::Index>(r);
        for (Eigen::Index k = 0; k < kp; ++k) {
            const double pre = preactivation(psi_res, k, &cv.x);
            out.psi_features(row, k) = active(pre) ? pre * cv.psi_shock : 0.0;
        }
        for (Eigen::Index k = 0; k < kv; ++k) {
            const double pre = preactivation(value_res, k, &cv.x);
            out.value_features(row, k) =
                active(pre) ? cv.level * pre + value_res.weights(k, 0) * cv.vol_shock : 0.0;
        }
        out.targets[row] = cv.target;
    }
    return out;
}

NonMarkovianSolve solve_nonmarkovian(const PathBatch& paths, const TimeGrid& grid, double rho1,
                                     const AffineDriver& driver, const Payoff& payoff,
                                     std::vector<Reservoir> value_reservoirs, std::vector<Reservoir> psi_reservoirs,
                                     const SolverConfig& config) {
    const std::size_t steps = grid.steps();
    if (paths.steps != steps) throw std::invalid_argument("solve_nonmarkovian: path batch and grid disagree");
    if (paths.paths == 0) throw std::invalid_argument("solve_nonmarkovian: empty path batch");
    if (value_reservoirs.size() != steps || psi_reservoirs.size() != steps)
        throw std::invalid_argument("solve_nonmarkovian: need two reservoirs per step");
    if (payoff.outputs != 1) throw std::invalid_argument("solve_nonmarkovian: payoff must be scalar");
    check_inputs(paths, 0);
    const MomentRoute route = config.route == MomentRoute::dense ? MomentRoute::dense : MomentRoute::interval;

    NonMarkovianSolve out;
    out.grid = grid;
    out.rho1 = rho1;
    out.readouts.resize(steps);
    out.diagnostics.resize(steps);
    Eigen::VectorXd next = terminal_targets(payoff, paths).col(0);

    for (std::size_t s = steps; s-- > 0;) {
        const Reservoir& vres = value_reservoirs[s];
        const Reservoir& pres = psi_reservoirs[s];
        MomentAccumulator acc =
            route == MomentRoute::interval
                ? interval_joint_moments(vres, pres, driver, rho1, paths, grid, s, next)
                : dense_joint_moments(vres, pres, driver, rho1, paths, grid, s, next, config.chunk);
        RidgeSolution sol;
        try {
            sol = ridge_solve(acc, config.ridge);
        } catch (const SingularSystemError& e) {
            throw StepSolveError(s, e);
        }
        if (!sol.beta.allFinite()) throw std::runtime_error("solve_nonmarkovian: non-finite readout at step " + std::to_string(s));
        const auto kp = pres.bias.size();
        StepReadouts readouts{Readout{sol.beta.rightCols(vres.bias.size())}, Readout{sol.beta.leftCols(kp)}};

        StepDiagnostics& diag = out.diagnostics[s];
        diag.step = s;
        diag.lambda = sol.lambda;
        diag.gram_condition = sol.gram_condition;
        diag.residual_norm = sol.residual_norm;

        // Only the value network propagates backward.
        if (s > 0) {
            next = evaluate_network(vres, readouts.theta, paths, s, config.chunk).col(0);
            if (config.absorption) {
                diag.negative_targets = static_cast<std::size_t>((next.array() < 0.0).count());
                next = next.cwiseMax(0.0);
            }
        } else {
            const double x0 = paths.state(0, 0)[0];
            out.price = net_eval(vres, readouts.theta, Eigen::VectorXd::Constant(1, x0))[0];
            if (config.absorption) out.price = std::max(out.price, 0.0);
        }
        out.readouts[s] = std::move(readouts);
    }
    out.value_reservoirs = std::move(value_reservoirs);
    out.psi_reservoirs = std::move(psi_reservoirs);
    return out;
}

NonMarkovianSolve backward_solve_nonmarkovian(const RoughBergomiModel& model, const AffineDriver& driver,
                                              const Payoff& payoff, const TimeGrid& grid, std::size_t n,
                                              const SolverConfig& config, SeedSpec seeds) {
    const VolterraKernelPlan plan = build_volterra_plan(model.hurst, grid);
    const PathBatch paths = simulate_rbergomi_paths(model, plan, grid, n, seeds.derive(kPathTag));
    const SeedSpec res_seeds = seeds.derive(kReservoirTag);
    auto value_res = sample_step_reservoirs(config, 1, grid.steps(), res_seeds, 0);
    auto psi_res = sample_step_reservoirs(config, 1, grid.steps(), res_seeds, 1);
    if (config.standardize) {
        standardize_inputs(value_res, paths);
        standardize_inputs(psi_res, paths);
    }
    return solve_nonmarkovian(paths, grid, model.rho1, driver, payoff, std::move(value_res), std::move(psi_res), config);
}

ZFields z_fields(const NonMarkovianSolve& solve, std::size_t step, double x, double v) {
    if (step >= solve.readouts.size()) throw std::invalid_argument("z_fields: step out of range");
    const Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x);
    const StepReadouts& r = solve.readouts[step];
    const double psi = net_eval(solve.psi_reservoirs[step], r.xi, xv)[0];
    const double grad = net_grad(solve.value_reservoirs[step], r.theta, xv)(0, 0);
    const double sv = std::sqrt(std::max(v, 0.0));
    const double rho2 = rho2_of(solve.rho1);
    return ZFields{psi + solve.rho1 * sv * grad, rho2 * sv * grad};
}

}  // namespace rwnn
