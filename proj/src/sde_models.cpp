#include "rwnn/sde_models.hpp"

#include <boost/math/quadrature/tanh_sinh.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace rwnn {

void BlackScholesModel::validate() const {
    const auto d = spot.size();
    if (d == 0) throw std::invalid_argument("black-scholes: need at least one asset");
    if (sigma.size() != d || corr.rows() != d || corr.cols() != d)
        throw std::invalid_argument("black-scholes: spot, sigma and corr dimensions disagree");
    if ((spot.array() <= 0.0).any()) throw std::invalid_argument("black-scholes: spot must be positive");
    if ((sigma.array() < 0.0).any()) throw std::invalid_argument("black-scholes: sigma must be non-negative");
}

BlackScholesModel BlackScholesModel::independent(Eigen::VectorXd spot, double rate, Eigen::VectorXd sigma) {
    BlackScholesModel m;
    m.corr = Eigen::MatrixXd::Identity(spot.size(), spot.size());
    m.spot = std::move(spot);
    m.rate = rate;
    m.sigma = std::move(sigma);
    return m;
}

double RoughBergomiModel::rho2() const { return std::sqrt(std::max(0.0, 1.0 - rho1 * rho1)); }

void RoughBergomiModel::validate() const {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("rough bergomi: H must lie in (0, 1)");
    if (!(eta >= 0.0)) throw std::invalid_argument("rough bergomi: eta must be non-negative");
    if (!(rho1 >= -1.0 && rho1 <= 1.0)) throw std::invalid_argument("rough bergomi: rho must lie in [-1, 1]");
    if (!(spot > 0.0)) throw std::invalid_argument("rough bergomi: spot must be positive");
    if (!xi0) throw std::invalid_argument("rough bergomi: forward variance curve missing");
}

RoughBergomiModel RoughBergomiModel::flat(double hurst, double eta, double rho1, double rate, double spot, double xi) {
    if (!(xi > 0.0)) throw std::invalid_argument("rough bergomi: forward variance must be positive");
    RoughBergomiModel m;
    m.hurst = hurst;
    m.eta = eta;
    m.rho1 = rho1;
    m.rate = rate;
    m.spot = spot;
    m.xi0 = [xi](double) { return xi; };
    return m;
}

VolterraKernelPlan build_volterra_plan(double hurst, const TimeGrid& grid, HistoryWeights scheme) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("volterra plan: H must lie in (0, 1)");
    const std::size_t steps = grid.steps();
    const double alpha = hurst - 0.5;
    const double two_h = 2.0 * hurst;
    const double norm = std::sqrt(two_h);

    VolterraKernelPlan plan;
    plan.hurst = hurst;
    plan.grid = grid;
    plan.scheme = scheme;
    plan.recent_factor.resize(steps);
    plan.recent_cov.resize(steps);
    for (std::size_t i = 0; i < steps; ++i) {
        const double dt = grid.deltas[i];
        const double var_w = dt;
        const double cov = norm * std::pow(dt, alpha + 1.0) / (alpha + 1.0);
        const double var_i = std::pow(dt, two_h);
        const double l11 = std::sqrt(var_w);
        const double l21 = cov / l11;
        const double l22 = std::sqrt(std::max(0.0, var_i - l21 * l21));
        plan.recent_cov[i] = {var_w, cov, var_i};
        plan.recent_factor[i] = {l11, l21, l22};
    }

    plan.history.assign(VolterraKernelPlan::row_offset(steps + 1), 0.0);
    plan.implied_variance.assign(steps + 1, 0.0);
    for (std::size_t i = 1; i <= steps; ++i) {
        const double ti = grid.times[i];
        double var = plan.recent_cov[i - 1][2];
        for (std::size_t j = 0; j + 2 <= i; ++j) {
            const double far = ti - grid.times[j];
            const double near = ti - grid.times[j + 1];
            const double dt = grid.deltas[j];
            double w;
            if (scheme == HistoryWeights::variance_matched) {
                w = std::sqrt((std::pow(far, two_h) - std::pow(near, two_h)) / dt);
            } else {
                w = norm * (std::pow(far, alpha + 1.0) - std::pow(near, alpha + 1.0)) / ((alpha + 1.0) * dt);
            }
            plan.history[VolterraKernelPlan::row_offset(i) + j] = w;
            var += w * w * dt;
        }
        plan.implied_variance[i] = var;
    }
    return plan;
}

void simulate_bs_path(const BlackScholesModel& model, const Eigen::MatrixXd& corr_factor, const TimeGrid& grid,
                      SeedSpec seeds, std::size_t path, std::span<double> states, std::span<double> increments) {
    const std::size_t d = model.dim();
    const std::size_t steps = grid.steps();
    for (std::size_t k = 0; k < d; ++k) states[k] = std::log(model.spot[static_cast<Eigen::Index>(k)]);
    for (std::size_t i = 0; i < steps; ++i) {
        const double dt = grid.deltas[i];
        std::span<double> dw = increments.subspan(i * d, d);
        draw_correlated_increment(seeds, corr_factor, dt, path, i, dw);
        for (std::size_t k = 0; k < d; ++k) {
            const double s = model.sigma[static_cast<Eigen::Index>(k)];
            states[(i + 1) * d + k] = states[i * d + k] + (model.rate - 0.5 * s * s) * dt + s * dw[k];
        }
    }
}

PathBatch simulate_bs_paths(const BlackScholesModel& model, const TimeGrid& grid, std::size_t n, SeedSpec seeds) {
    model.validate();
    const Eigen::MatrixXd factor = correlation_factor(model.corr);
    const std::size_t d = model.dim();
    const std::size_t steps = grid.steps();
    PathBatch batch(n, steps, d, d, false);
    parallel_chunks(n, 2048, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            simulate_bs_path(model, factor, grid, seeds, j,
                             std::span<double>(batch.states.data() + j * (steps + 1) * d, (steps + 1) * d),
                             std::span<double>(batch.increments.data() + j * steps * d, steps * d));
        }
    });
    return batch;
}

void simulate_rbergomi_path(const RoughBergomiModel& model, const VolterraKernelPlan& plan, SeedSpec seeds,
                            std::size_t path, std::span<double> log_price, std::span<double> variance,
                            std::span<double> volterra, std::span<double> increments) {
    const TimeGrid& grid = plan.grid;
    const std::size_t steps = grid.steps();
    const double two_h = 2.0 * plan.hurst;
    const double rho1 = model.rho1;
    const double rho2 = model.rho2();
    const double eta = model.eta;

    log_price[0] = std::log(model.spot);
    volterra[0] = 0.0;
    variance[0] = model.xi0(0.0);
    for (std::size_t i = 0; i < steps; ++i) {
        const double dt = grid.deltas[i];
        RandomStream stream(seeds, Purpose::increments, path, static_cast<std::uint32_t>(i));
        const double z1 = stream.normal();
        const double z2 = stream.normal();
        const double z3 = stream.normal();
        const auto& f = plan.recent_factor[i];
        const double dw1 = f[0] * z1;
        const double recent = f[1] * z1 + f[2] * z2;
        const double dw2 = std::sqrt(dt) * z3;
        increments[2 * i] = dw1;
        increments[2 * i + 1] = dw2;

        const double v = variance[i];
        const double sv = std::sqrt(v);
        log_price[i + 1] = log_price[i] + (model.rate - 0.5 * v) * dt + sv * (rho1 * dw1 + rho2 * dw2);

        // Convolution of the kernel history with past dW^1; only dW^1 up to step i enters.
        double w_hat = recent;
        const std::size_t row = i + 1;
        const double* weights = plan.history.data() + VolterraKernelPlan::row_offset(row);
        for (std::size_t j = 0; j + 1 < row; ++j) w_hat += weights[j] * increments[2 * j];
        volterra[row] = w_hat;
        const double t = grid.times[row];
        variance[row] = model.xi0(t) * std::exp(eta * w_hat - 0.5 * eta * eta * std::pow(t, two_h));
    }
}

PathBatch simulate_rbergomi_paths(const RoughBergomiModel& model, const VolterraKernelPlan& plan,
                                  const TimeGrid& grid, std::size_t n, SeedSpec seeds) {
    model.validate();
    if (plan.grid.times != grid.times) throw std::invalid_argument("rough bergomi: plan was built on a different grid");
    if (std::abs(plan.hurst - model.hurst) > 0.0) throw std::invalid_argument("rough bergomi: plan Hurst index differs from model");
    const std::size_t steps = grid.steps();
    PathBatch batch(n, steps, 1, 2, true);
    parallel_chunks(n, 2048, [&](std::size_t, std::size_t begin, std::size_t end) {
        for (std::size_t j = begin; j < end; ++j) {
            const std::size_t off = j * (steps + 1);
            simulate_rbergomi_path(model, plan, seeds, j, std::span<double>(batch.states.data() + off, steps + 1),
                                   std::span<double>(batch.variance.data() + off, steps + 1),
                                   std::span<double>(batch.volterra.data() + off, steps + 1),
                                   std::span<double>(batch.increments.data() + j * steps * 2, steps * 2));
        }
    });
    return batch;
}

double volterra_covariance(double hurst, double s, double t) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw std::invalid_argument("volterra covariance: H must lie in (0, 1)");
    const double lo = std::min(s, t);
    if (lo <= 0.0) return 0.0;
    const double gap = std::abs(t - s);
    const double two_h = 2.0 * hurst;
    if (gap == 0.0) return std::pow(lo, two_h);
    const double alpha = hurst - 0.5;
    // Substituting v = min(s,t) - u leaves the integrable singularity at v = 0.
    auto integrand = [&](double v) { return std::pow(v, alpha) * std::pow(gap + v, alpha); };
    boost::math::quadrature::tanh_sinh<double> quad;
    return two_h * quad.integrate(integrand, 0.0, lo, 1e-14);
}

Eigen::MatrixXd cholesky_volterra_oracle(double hurst, const TimeGrid& grid, std::size_t n, SeedSpec seeds) {
    const std::size_t steps = grid.steps();
    // Time 0 is degenerate (What_0 = 0); factor the covariance of t_1..t_N.
    Eigen::MatrixXd cov(steps, steps);
    for (std::size_t a = 0; a < steps; ++a)
        for (std::size_t b = 0; b <= a; ++b) {
            const double c = volterra_covariance(hurst, grid.times[a + 1], grid.times[b + 1]);
            cov(a, b) = c;
            cov(b, a) = c;
        }
    const Eigen::MatrixXd factor = cholesky_with_jitter(cov);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(steps + 1));
    parallel_chunks(n, 4096, [&](std::size_t, std::size_t begin, std::size_t end) {
        Eigen::VectorXd z(static_cast<Eigen::Index>(steps));
        for (std::size_t j = begin; j < end; ++j) {
            RandomStream stream(seeds, Purpose::volterra_oracle, j, 0);
            for (auto& v : z) v = stream.normal();
            out.row(static_cast<Eigen::Index>(j)).tail(static_cast<Eigen::Index>(steps)) = (factor * z).transpose();
        }
    });
    return out;
}

void write_paths_csv(std::ostream& out, const PathBatch& paths, const TimeGrid& grid) {
    out << "path,time_index,time";
    for (std::size_t k = 0; k < paths.dim; ++k) out << ",state_" << k;
    if (paths.has_variance()) out << ",variance";
    out << '\n';
    out.precision(17);
    for (std::size_t j = 0; j < paths.paths; ++j)
        for (std::size_t i = 0; i <= paths.steps; ++i) {
            out << j << ',' << i << ',' << grid.times[i];
            for (double x : paths.state(j, i)) out << ',' << x;
            if (paths.has_variance()) out << ',' << paths.var(j, i);
            out << '\n';
        }
}

}  // namespace rwnn
