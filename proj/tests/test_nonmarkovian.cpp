#include "doctest.h"

#include "rwnn/benchmarks.hpp"
#include "rwnn/nonmarkovian_solver.hpp"

#include <cmath>

using namespace rwnn;

TEST_CASE("non-markovian one step with constant value basis reproduces plain Monte Carlo") {
    // Theta basis relu(0 x + 0.5) is constant with zero slope; the Xi basis at x = 0 is 0.5.
    // Features span {dW1, 1}; antithetic dW1 makes the fitted constant the payoff mean.
    const std::size_t half = 4000;
    const double dt = 0.5, xi = 0.04, rho1 = -0.6;
    PathBatch p(2 * half, 1, 1, 2, true);
    RandomStream rng(SeedSpec{17}, Purpose::increments, 0, 0);
    for (std::size_t j = 0; j < half; ++j) {
        const double w1 = std::sqrt(dt) * rng.normal();
        const double w2 = std::sqrt(dt) * rng.normal();
        for (std::size_t s = 0; s < 2; ++s) {
            const std::size_t path = 2 * j + s;
            const double sign = s == 0 ? 1.0 : -1.0;
            p.state(path, 0)[0] = 0.0;
            p.increment(path, 0)[0] = sign * w1;
            p.increment(path, 0)[1] = sign * w2;
            p.variance[path * 2] = xi;
            p.variance[path * 2 + 1] = xi;
            const double db = rho1 * sign * w1 + std::sqrt(1.0 - rho1 * rho1) * sign * w2;
            p.state(path, 1)[0] = -0.5 * xi * dt + std::sqrt(xi) * db;
        }
    }
    const TimeGrid grid = make_uniform_grid(dt, 1);
    std::vector<Reservoir> theta{Reservoir::from_weights(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 0.5))};
    std::vector<Reservoir> psi{Reservoir::from_weights(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.5))};
    SolverConfig cfg;
    cfg.ridge = 0.0;
    const double mc = mc_price(p, vanilla_call(1.0), 0.0, dt).price;
    for (MomentRoute route : {MomentRoute::dense, MomentRoute::interval}) {
        cfg.route = route;
        const auto solve = solve_nonmarkovian(p, grid, rho1, AffineDriver::zero(), vanilla_call(1.0), theta, psi, cfg);
        CHECK(solve.price == doctest::Approx(mc).epsilon(1e-8));
    }
}

TEST_CASE("non-markovian features: replay of the joint formula") {
    const auto model = RoughBergomiModel::flat(0.3, 1.9, -0.7, 0.01, 1.0, 0.05);
    const TimeGrid grid = make_uniform_grid(1.0, 6);
    const PathBatch p = simulate_rbergomi_paths(model, build_volterra_plan(0.3, grid), grid, 40, SeedSpec{7});
    const Reservoir vres = sample_reservoir({6, 1, 1.0, 1.0}, SeedSpec{8}, 0, 0);
    const Reservoir pres = sample_reservoir({5, 1, 1.0, 1.0}, SeedSpec{8}, 0, 1);
    const double a = 0.3, b = -0.4, c = 0.2, ft = 0.7;
    AffineDriver driver;
    driver.a = [=](double, std::span<const double>) { return a; };
    driver.b = [=](double, std::span<const double>, std::span<double> out) { out[0] = b; };
    driver.c = [=](double, std::span<const double>) { return c; };
    driver.f_tilde = [=](double, std::span<const double>, std::span<double> out) { out[0] = ft; };
    Eigen::VectorXd next = Eigen::VectorXd::LinSpaced(40, -1.0, 1.0);
    const std::size_t step = 3;
    const double dt = grid.deltas[step];
    const double rho2 = std::sqrt(1.0 - 0.49);
    const JointRegression reg = build_features_nonmarkovian(vres, pres, driver, -0.7, p, grid, step, next);
    for (std::size_t j = 0; j < 40; ++j) {
        const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, p.state(j, step)[0]);
        const double dw1 = p.increment(j, step)[0], dw2 = p.increment(j, step)[1];
        const double sv = std::sqrt(p.var(j, step));
        const double db = -0.7 * dw1 + rho2 * dw2;
        const Eigen::VectorXd x1 = features(pres, x) * (dw1 - b * dt);
        const Eigen::VectorXd x2 =
            (1.0 - a * dt) * features(vres, x) + features_jacobian(vres, x) * (sv * (db - (b * -0.7 + c * rho2) * dt));
        const auto r = static_cast<Eigen::Index>(j);
        CHECK((reg.psi_features.row(r).transpose() - x1).norm() <= 1e-12 * (1.0 + x1.norm()));
        CHECK((reg.value_features.row(r).transpose() - x2).norm() <= 1e-12 * (1.0 + x2.norm()));
        CHECK(reg.targets[r] == doctest::Approx(next[r] + ft * dt).epsilon(1e-14));
    }
}

TEST_CASE("non-markovian features need variance and two noise dimensions") {
    const auto bs = BlackScholesModel::independent(Eigen::VectorXd::Ones(1), 0.0, Eigen::VectorXd::Constant(1, 0.2));
    const TimeGrid grid = make_uniform_grid(1.0, 2);
    const PathBatch p = simulate_bs_paths(bs, grid, 5, SeedSpec{1});
    const Reservoir r = sample_reservoir({3, 1, 1.0, 1.0}, SeedSpec{2});
    CHECK_THROWS_AS(build_features_nonmarkovian(r, r, AffineDriver::zero(), 0.0, p, grid, 0, Eigen::VectorXd::Zero(5)),
                    std::logic_error);
}

namespace {

NonMarkovianSolve small_rough_solve(double rho1, std::uint64_t seed) {
    const auto model = RoughBergomiModel::flat(0.3, 1.9, rho1, 0.01, 1.0, 0.235 * 0.235);
    SolverConfig cfg;
    cfg.nodes = 20;
    return backward_solve_nonmarkovian(model, AffineDriver::pricing(0.01), vanilla_call(1.0), make_uniform_grid(1.0, 5),
                                       4000, cfg, SeedSpec{seed});
}

}  // namespace

TEST_CASE("z fields follow from the two readouts") {
    const auto solve = small_rough_solve(-0.7, 3);
    const double rho2 = std::sqrt(1.0 - 0.49);
    for (std::size_t s : {0u, 2u, 4u}) {
        for (double x : {-0.2, 0.0, 0.15}) {
            const double v = 0.06;
            const Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x);
            const double psi = net_eval(solve.psi_reservoirs[s], solve.readouts[s].xi, xv)[0];
            const double grad = net_grad(solve.value_reservoirs[s], solve.readouts[s].theta, xv)(0, 0);
            const ZFields z = z_fields(solve, s, x, v);
            CHECK(z.z1 == doctest::Approx(psi - 0.7 * std::sqrt(v) * grad).epsilon(1e-12));
            CHECK(z.z2 == doctest::Approx(rho2 * std::sqrt(v) * grad).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(z_fields(solve, 5, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("perfect correlation leaves no orthogonal z component") {
    for (double rho1 : {-1.0, 1.0}) {
        const auto solve = small_rough_solve(rho1, 4);
        for (std::size_t s = 0; s < 5; ++s) CHECK(z_fields(solve, s, 0.05, 0.04).z2 == 0.0);
    }
}

TEST_CASE("flat variance reduces the rough solver to Black-Scholes") {
    // eta = 0 freezes V at xi; H = 1/2 makes the Volterra process a Brownian motion.
    const double vol = 0.235, r = 0.01;
    const auto model = RoughBergomiModel::flat(0.5, 0.0, -0.7, r, 1.0, vol * vol);
    SolverConfig cfg;
    cfg.nodes = 100;
    const auto solve = backward_solve_nonmarkovian(model, AffineDriver::pricing(r), vanilla_call(1.0),
                                                   make_uniform_grid(1.0, 21), 50000, cfg, SeedSpec{5});
    const double truth = bs_closed_form(1.0, 1.0, r, vol, 1.0);
    CHECK(std::abs(solve.price - truth) / truth <= 2e-2);
}
