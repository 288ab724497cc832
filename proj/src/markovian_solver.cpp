#include "rwnn/markovian_solver.hpp"

#include "rwnn/interval_moments.hpp"

#include <algorithm>
#include <cmath>

namespace rwnn {

namespace {

constexpr std::uint64_t kPathTag = 0x9A7B;
constexpr std::uint64_t kReservoirTag = 0x7E5E;
constexpr std::size_t kMergeGroup = 8;

}  // namespace

Diffusion black_scholes_log_diffusion(const BlackScholesModel& model) {
    std::vector<double> sigma(model.sigma.data(), model.sigma.data() + model.sigma.size());
    return [sigma](double, std::span<const double>, std::span<const double> v, std::span<double> out) {
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = sigma[k] * v[k];
    };
}

Eigen::MatrixXd terminal_targets(const Payoff& payoff, const PathBatch& paths) {
    const auto n = static_cast<Eigen::Index>(paths.paths);
    const auto m = static_cast<Eigen::Index>(payoff.outputs);
    Eigen::MatrixXd y(n, m);
    std::vector<double> row(payoff.outputs);
    for (Eigen::Index j = 0; j < n; ++j) {
        payoff.eval(paths.state(static_cast<std::size_t>(j), paths.steps), row);
        for (Eigen::Index o = 0; o < m; ++o) y(j, o) = row[static_cast<std::size_t>(o)];
    }
    return y;
}

StepRegression build_features_markovian(const Reservoir& res, const AffineDriver& driver, const Diffusion& diffusion,
                                        const PathBatch& paths, const TimeGrid& grid, std::size_t step,
                                        const Eigen::Ref<const Eigen::MatrixXd>& next_values, std::size_t begin,
                                        std::size_t end) {
    if (paths.increments.empty() || paths.noise_dim == 0)
        throw std::logic_error("build_features_markovian: path batch carries no Brownian increments");
    if (step >= paths.steps) throw std::invalid_argument("build_features_markovian: step out of range");
    if (res.input_dim() != paths.dim) throw std::invalid_argument("build_features_markovian: reservoir input dimension mismatch");
    if (static_cast<std::size_t>(next_values.rows()) != paths.paths)
        throw std::invalid_argument("build_features_markovian: next-step targets must have one row per path");
    end = std::min(end, paths.paths);
    const std::size_t rows = end > begin ? end - begin : 0;
    const std::size_t d = paths.dim;
    const std::size_t dw = paths.noise_dim;
    const auto k_nodes = static_cast<Eigen::Index>(res.nodes());
    const auto m = next_values.cols();
    const double t = grid.times[step];
    const double dt = grid.deltas[step];

    StepRegression out{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), k_nodes),
                       Eigen::MatrixXd(static_cast<Eigen::Index>(rows), m)};
    std::vector<double> noise(dw), shifted(d), f_tilde(static_cast<std::size_t>(m));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t j = begin + r;
        const auto x = paths.state(j, step);
        const auto dwj = paths.increment(j, step);
        const double a = driver.a_at(t, x);
        driver.b_at(t, x, noise);
        for (std::size_t k = 0; k < dw; ++k) noise[k] = noise[k] * dt + dwj[k];
        diffusion(t, x, noise, shifted);
        driver.f_tilde_at(t, x, f_tilde);

        const double level = 1.0 - a * dt;
        const auto row = static_cast<Eigen::Index>(r);
        for (Eigen::Index k = 0; k < k_nodes; ++k) {
            const double pre = preactivation(res, k, x.data());
            if (!active(pre)) {
                out.features(row, k) = 0.0;
                continue;
            }
            double slope = 0.0;
            for (std::size_t c = 0; c < d; ++c) slope += res.weights(k, static_cast<Eigen::Index>(c)) * shifted[c];
            out.features(row, k) = level * pre + slope;
        }
        for (Eigen::Index o = 0; o < m; ++o)
            out.targets(row, o) = next_values(static_cast<Eigen::Index>(j), o) + f_tilde[static_cast<std::size_t>(o)] * dt;
    }
    return out;
}

namespace {

MomentAccumulator dense_moments(const Reservoir& res, const AffineDriver& driver, const Diffusion& diffusion,
                                const PathBatch& paths, const TimeGrid& grid, std::size_t step,
                                const Eigen::MatrixXd& next, std::size_t chunk) {
    const std::size_t n = paths.paths;
    const std::size_t m = static_cast<std::size_t>(next.cols());
    MomentAccumulator total(res.nodes(), m);
    const std::size_t chunks = chunk_count(n, chunk);
    for (std::size_t g0 = 0; g0 < chunks; g0 += kMergeGroup) {
        const std::size_t g1 = std::min(chunks, g0 + kMergeGroup);
        std::vector<MomentAccumulator> partial(g1 - g0, MomentAccumulator(res.nodes(), m));
        parallel_chunks(g1 - g0, 1, [&](std::size_t c, std::size_t, std::size_t) {
            const std::size_t begin = (g0 + c) * chunk;
            const std::size_t end = std::min(n, begin + chunk);
            StepRegression reg = build_features_markovian(res, driver, diffusion, paths, grid, step, next, begin, end);
            accumulate(partial[c], reg.features, reg.targets);
        });
        for (const auto& p : partial) total.merge(p);
    }
    return total;
}

MomentAccumulator interval_moments_markovian(const Reservoir& res, const AffineDriver& driver,
                                             const Diffusion& diffusion, const PathBatch& paths, const TimeGrid& grid,
                                             std::size_t step, const Eigen::MatrixXd& next) {
    const std::size_t n = paths.paths;
    const std::size_t dw = paths.noise_dim;
    const auto m = next.cols();
    const double t = grid.times[step];
    const double dt = grid.deltas[step];
    std::vector<double> state(n);
    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 3);
    Eigen::MatrixXd y(static_cast<Eigen::Index>(n), m);
    std::vector<double> noise(dw), f_tilde(static_cast<std::size_t>(m));
    double shifted = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto x = paths.state(j, step);
        const auto dwj = paths.increment(j, step);
        const double level = 1.0 - driver.a_at(t, x) * dt;
        driver.b_at(t, x, noise);
        for (std::size_t k = 0; k < dw; ++k) noise[k] = noise[k] * dt + dwj[k];
        diffusion(t, x, noise, std::span<double>(&shifted, 1));
        driver.f_tilde_at(t, x, f_tilde);
        const auto r = static_cast<Eigen::Index>(j);
        state[j] = x[0];
        // X_k = H_k(x) * (b_k * level + a_k * level * x + a_k * shifted)
        z(r, 0) = level;
        z(r, 1) = level * x[0];
        z(r, 2) = shifted;
        for (Eigen::Index o = 0; o < m; ++o) y(r, o) = next(r, o) + f_tilde[static_cast<std::size_t>(o)] * dt;
    }
    IntervalMoments builder(state, z, y);
    Eigen::MatrixXd coef(res.bias.size(), 3);
    coef.col(0) = res.bias;
    coef.col(1) = res.weights.col(0);
    coef.col(2) = res.weights.col(0);
    builder.add_block(res, coef);
    return builder.moments();
}

}  // namespace

Eigen::MatrixXd evaluate_network(const Reservoir& res, const Readout& readout, const PathBatch& paths,
                                 std::size_t step, std::size_t chunk) {
    const std::size_t n = paths.paths;
    Eigen::MatrixXd values(static_cast<Eigen::Index>(n), readout.theta.rows());
    parallel_chunks(n, chunk, [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::MatrixXd phi(res.bias.size(), static_cast<Eigen::Index>(end - begin));
        for (std::size_t j = begin; j < end; ++j) {
            const auto x = paths.state(j, step);
            const auto col = static_cast<Eigen::Index>(j - begin);
            for (Eigen::Index k = 0; k < res.bias.size(); ++k) {
                const double pre = preactivation(res, k, x.data());
                phi(k, col) = active(pre) ? pre : 0.0;
            }
        }
        values.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(end - begin)) =
            (readout.theta * phi).transpose();
    });
    return values;
}

std::vector<Reservoir> sample_step_reservoirs(const SolverConfig& config, std::size_t input_dim, std::size_t steps,
                                              SeedSpec seeds, std::uint32_t network) {
    ReservoirConfig rc{config.nodes, input_dim, config.range, config.connectivity};
    std::vector<Reservoir> out;
    out.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i) out.push_back(sample_reservoir(rc, seeds, i, network));
    return out;
}

void standardize_inputs(std::vector<Reservoir>& reservoirs, const PathBatch& paths) {
    if (reservoirs.size() > paths.steps + 1) throw std::invalid_argument("standardize_inputs: more reservoirs than steps");
    const auto d = static_cast<Eigen::Index>(paths.dim);
    const double n = static_cast<double>(paths.paths);
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(d);
    for (std::size_t i = reservoirs.size(); i-- > 0;) {
        std::vector<long double> sum(paths.dim, 0.0L), sum_sq(paths.dim, 0.0L);
        for (std::size_t j = 0; j < paths.paths; ++j) {
            const auto x = paths.state(j, i);
            for (std::size_t k = 0; k < paths.dim; ++k) {
                sum[k] += x[k];
                sum_sq[k] += static_cast<long double>(x[k]) * x[k];
            }
        }
        Eigen::VectorXd center(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            const long double mean = sum[k] / n;
            const long double var = sum_sq[k] / n - mean * mean;
            center[k] = static_cast<double>(mean);
            const double sd = var > 0.0L ? std::sqrt(static_cast<double>(var)) : 0.0;
            if (sd > 1e-12 * std::max(1.0, std::abs(center[k]))) scale[k] = sd;
        }
        reservoirs[i] = rescale_inputs(reservoirs[i], center, scale);
    }
}

MarkovianSolve solve_markovian(const PathBatch& paths, const TimeGrid& grid, const Diffusion& diffusion,
                               const AffineDriver& driver, const Payoff& payoff, std::vector<Reservoir> reservoirs,
                               const SolverConfig& config) {
    const std::size_t steps = grid.steps();
    if (paths.steps != steps) throw std::invalid_argument("solve_markovian: path batch and grid disagree");
    if (paths.paths == 0) throw std::invalid_argument("solve_markovian: empty path batch");
    if (reservoirs.size() != steps) throw std::invalid_argument("solve_markovian: need one reservoir per step");
    if (paths.increments.empty()) throw std::logic_error("solve_markovian: path batch carries no Brownian increments");
    for (const auto& r : reservoirs)
        if (r.input_dim() != paths.dim) throw std::invalid_argument("solve_markovian: reservoir input dimension mismatch");
    MomentRoute route = config.route;
    if (route == MomentRoute::automatic) route = paths.dim == 1 ? MomentRoute::interval : MomentRoute::dense;
    if (route == MomentRoute::interval && paths.dim != 1)
        throw std::invalid_argument("solve_markovian: interval moments need a scalar state");

    MarkovianSolve out;
    out.grid = grid;
    out.readouts.resize(steps);
    out.diagnostics.resize(steps);
    Eigen::MatrixXd next = terminal_targets(payoff, paths);

    for (std::size_t s = steps; s-- > 0;) {
        const Reservoir& res = reservoirs[s];
        MomentAccumulator acc = route == MomentRoute::interval
                                    ? interval_moments_markovian(res, driver, diffusion, paths, grid, s, next)
                                    : dense_moments(res, driver, diffusion, paths, grid, s, next, config.chunk);
        RidgeSolution sol;
        try {
            sol = ridge_solve(acc, config.ridge);
        } catch (const SingularSystemError& e) {
            throw StepSolveError(s, e);
        }
        Readout readout{std::move(sol.beta)};
        if (!readout.finite()) throw std::runtime_error("solve_markovian: non-finite readout at step " + std::to_string(s));

        StepDiagnostics& diag = out.diagnostics[s];
        diag.step = s;
        diag.lambda = sol.lambda;
        diag.gram_condition = sol.gram_condition;
        diag.residual_norm = sol.residual_norm;

        if (s > 0) {
            next = evaluate_network(res, readout, paths, s, config.chunk);
            if (config.absorption) {
                diag.negative_targets = static_cast<std::size_t>((next.array() < 0.0).count());
                next = next.cwiseMax(0.0);
            }
        } else {
            const auto x0 = paths.state(0, 0);
            out.price = net_eval(res, readout, Eigen::Map<const Eigen::VectorXd>(x0.data(), static_cast<Eigen::Index>(x0.size())));
            if (config.absorption) out.price = out.price.cwiseMax(0.0);
        }
        out.readouts[s] = std::move(readout);
    }
    out.reservoirs = std::move(reservoirs);
    return out;
}

MarkovianSolve backward_solve_markovian(const BlackScholesModel& model, const AffineDriver& driver,
                                        const Payoff& payoff, const TimeGrid& grid, std::size_t n,
                                        const SolverConfig& config, SeedSpec seeds) {
    const PathBatch paths = simulate_bs_paths(model, grid, n, seeds.derive(kPathTag));
    auto reservoirs = sample_step_reservoirs(config, model.dim(), grid.steps(), seeds.derive(kReservoirTag));
    if (config.standardize) standardize_inputs(reservoirs, paths);
    return solve_markovian(paths, grid, black_scholes_log_diffusion(model), driver, payoff, std::move(reservoirs), config);
}

}  // namespace rwnn
