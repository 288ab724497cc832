// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include "rwnn/benchmarks.hpp"
#include "rwnn/experiments.hpp"
#include "rwnn/markovian_solver.hpp"
#include "rwnn/nonmarkovian_solver.hpp"
#include "rwnn/rls.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>

using namespace rwnn;
using nlohmann::json;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool ok, const std::string& detail) {
    std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

ExperimentResult run(ExperimentId id) {
    ExperimentConfig c;
    c.experiment = id;
    return run_experiment(c);
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

double mean_abs(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += std::abs(x);
    return s / static_cast<double>(v.size());
}

// --- 1 -----------------------------------------------------------------------

void closed_form() {
    const double table[5] = {0.02521640, 0.04485236, 0.06459483, 0.08433319, 0.10403539};
    double worst = 0.0;
    for (int i = 0; i < 5; ++i)
        worst = std::max(worst, std::abs(bs_closed_form(1.0, 1.0, 0.01, 0.05 * (i + 1), 1.0) - table[i]));
    report(1, "closed-form anchor", worst <= 1e-7, fmt("max |err| = %.3e (tol 1e-7)", worst));
}

// --- 2, 3 --------------------------------------------------------------------

void calls_table() {
    const auto start = std::chrono::steady_clock::now();
    const auto d = run(ExperimentId::bs_calls).document;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const auto wo = d["rel_errors"]["pde_wo_abs"].get<std::vector<double>>();
    const auto w = d["rel_errors"]["pde_w_abs"].get<std::vector<double>>();
    report(2, "markovian accuracy w/o absorption", max_abs(wo) <= 2e-2,
           fmt("max |rel err| = %.3e (tol 2e-2), %.1f s", max_abs(wo), secs));
    report(3, "absorption bias", mean_abs(w) > mean_abs(wo),
           fmt("mean |rel err| w/ abs = %.3e, w/o abs = %.3e", mean_abs(w), mean_abs(wo)));
}

// --- 4, 5 --------------------------------------------------------------------

void single_option(int id, const std::string& name, ExperimentId exp, double published) {
    const auto d = run(exp).document;
    const double ref = d["references"]["price"][0].get<double>();
    const double se = d["references"]["std_error"][0].get<double>();
    const double rel = d["rel_errors"]["pde_wo_abs"][0].get<double>();
    const double z = std::abs(ref - published) / se;
    const bool ok = std::abs(rel) <= 2e-2 && z <= 3.0;
    report(id, name, ok,
           fmt("solver rel err = %.3e (tol 2e-2); reference %.6f +- %.6f", rel, ref, se) +
               fmt(" is %.2f SE from %.6f (tol 3)", z, published));
}

// --- 6 -----------------------------------------------------------------------

void sweeps() {
    bool ok = true;
    std::string detail;
    for (auto id : {ExperimentId::bs_convergence, ExperimentId::rb_convergence}) {
        const auto d = run(id).document;
        const auto means = d["mse"]["mean"].get<std::vector<double>>();
        bool decreasing = true;
        for (std::size_t k = 1; k < means.size(); ++k) decreasing = decreasing && means[k] < means[k - 1];
        const double slope = d["slope"].get<double>();
        const bool this_ok = decreasing && slope >= -1.6 && slope <= -0.4;
        ok = ok && this_ok;
        detail += std::string(experiment_name(id)) + " mean mse";
        for (double m : means) detail += fmt(" %.3e", m);
        detail += fmt(", slope %.3f", slope) + (decreasing ? "" : ", not decreasing") + (this_ok ? " ok; " : " FAILED; ");
    }
    report(6, "empirical 1/K rate (band [-1.6, -0.4], strictly decreasing)", ok, detail);
}

// --- 7 -----------------------------------------------------------------------

Eigen::MatrixXd gaussian(std::mt19937_64& gen, Eigen::Index r, Eigen::Index c) {
    std::normal_distribution<double> z;
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = z(gen);
    return m;
}

double ridge_vs_pinv() {
    std::mt19937_64 gen(2);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Eigen::Index p = 2 + t % 9, m = 1 + t % 3, n = 4 * p + 10;
        const Eigen::MatrixXd x = gaussian(gen, n, p), y = gaussian(gen, n, m);
        MomentAccumulator acc(static_cast<std::size_t>(p), static_cast<std::size_t>(m));
        accumulate(acc, x, y);
        const Eigen::MatrixXd beta = ridge_solve(acc, 0.0).beta;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd oracle =
            (svd.matrixV() * svd.singularValues().cwiseInverse().asDiagonal() * svd.matrixU().transpose() * y).transpose();
        worst = std::max(worst, (beta - oracle).norm() / oracle.norm());
    }
    return worst;
}

/// Both solvers on one antithetic step from x = 0, against the payoff sample mean.
std::pair<double, double> one_step_equivalence() {
    const std::size_t half = 5000;
    const double dt = 0.25, sigma = 0.2, xi = 0.04, rho1 = -0.6;
    PathBatch bs(2 * half, 1, 1, 1, false);
    PathBatch rb(2 * half, 1, 1, 2, true);
    RandomStream rng(SeedSpec{41}, Purpose::increments, 0, 0);
    for (std::size_t j = 0; j < half; ++j) {
        const double w1 = std::sqrt(dt) * rng.normal(), w2 = std::sqrt(dt) * rng.normal();
        for (std::size_t s = 0; s < 2; ++s) {
            const std::size_t p = 2 * j + s;
            const double sg = s == 0 ? 1.0 : -1.0;
            bs.state(p, 0)[0] = 0.0;
            bs.increment(p, 0)[0] = sg * w1;
            bs.state(p, 1)[0] = -0.5 * sigma * sigma * dt + sigma * sg * w1;
            rb.state(p, 0)[0] = 0.0;
            rb.increment(p, 0)[0] = sg * w1;
            rb.increment(p, 0)[1] = sg * w2;
            rb.variance[2 * p] = rb.variance[2 * p + 1] = xi;
            rb.state(p, 1)[0] = -0.5 * xi * dt + std::sqrt(xi) * sg * (rho1 * w1 + std::sqrt(1 - rho1 * rho1) * w2);
        }
    }
    const TimeGrid grid = make_uniform_grid(dt, 1);
    SolverConfig cfg;
    cfg.ridge = 0.0;
    Eigen::MatrixXd a(2, 1);
    a << 1.0, 2.0;
    const auto model = BlackScholesModel::independent(Eigen::VectorXd::Ones(1), 0.0, Eigen::VectorXd::Constant(1, sigma));
    const auto m = solve_markovian(bs, grid, black_scholes_log_diffusion(model), AffineDriver::zero(), vanilla_call(1.0),
                                   {Reservoir::from_weights(a, Eigen::Vector2d(1.0, 0.5))}, cfg);
    const double mc_bs = mc_price(bs, vanilla_call(1.0), 0.0, dt).price;
    const auto n = solve_nonmarkovian(
        rb, grid, rho1, AffineDriver::zero(), vanilla_call(1.0),
        {Reservoir::from_weights(Eigen::MatrixXd::Zero(1, 1), Eigen::VectorXd::Constant(1, 0.5))},
        {Reservoir::from_weights(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.5))}, cfg);
    const double mc_rb = mc_price(rb, vanilla_call(1.0), 0.0, dt).price;
    return {std::abs(m.price[0] - mc_bs) / mc_bs, std::abs(n.price - mc_rb) / mc_rb};
}

double jacobian_vs_fd() {
    const Reservoir res = sample_reservoir({50, 3, 1.0, 0.7}, SeedSpec{3});
    std::mt19937_64 gen(5);
    const Readout ro{gaussian(gen, 2, 50)};
    double worst = 0.0;
    for (int t = 0; t < 40; ++t) {
        const Eigen::VectorXd x = gaussian(gen, 3, 1);
        const Eigen::VectorXd pre = res.weights * x + res.bias;
        if (pre.cwiseAbs().minCoeff() < 1e-3) continue;  // too close to a kink
        const Eigen::MatrixXd g = net_grad(res, ro, x);
        Eigen::MatrixXd fd(2, 3);
        const double h = 1e-6;
        for (int c = 0; c < 3; ++c) {
            Eigen::VectorXd up = x, dn = x;
            up[c] += h;
            dn[c] -= h;
            fd.col(c) = (net_eval(res, ro, up) - net_eval(res, ro, dn)) / (2 * h);
        }
        worst = std::max(worst, (g - fd).norm() / std::max(1e-12, fd.norm()));
    }
    return worst;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    return d;
}

void oracles() {
    bool ok = true;
    std::string detail;
    auto part = [&](bool pass, const std::string& text) {
        ok = ok && pass;
        detail += text + (pass ? " ok; " : " FAILED; ");
    };
    const double ridge = ridge_vs_pinv();
    part(ridge <= 1e-9, fmt("ridge vs pinv %.1e", ridge));
    const auto [m, n] = one_step_equivalence();
    part(m <= 1e-8 && n <= 1e-8, fmt("one-step vs MC %.1e / %.1e", m, n));
    const double jac = jacobian_vs_fd();
    part(jac <= 1e-4, fmt("jacobian vs FD %.1e", jac));

    const double h = 0.3, xi = 0.235 * 0.235;
    double plan_err = 0.0;
    for (std::size_t steps : {21u, 100u}) {
        const TimeGrid g = make_uniform_grid(1.0, steps);
        const auto plan = build_volterra_plan(h, g);
        for (std::size_t i = 1; i <= steps; ++i) {
            const double want = std::pow(g.times[i], 2 * h);
            plan_err = std::max(plan_err, std::abs(plan.implied_variance[i] - want) / want);
        }
    }
    part(plan_err <= 1e-10, fmt("plan variance %.1e", plan_err));

    const std::size_t n_ks = 100000;
    const TimeGrid grid = make_uniform_grid(1.0, 21);
    const auto model = RoughBergomiModel::flat(h, 1.9, -0.7, 0.01, 1.0, xi);
    const PathBatch p = simulate_rbergomi_paths(model, build_volterra_plan(h, grid), grid, n_ks, SeedSpec{5});
    const Eigen::MatrixXd oracle = cholesky_volterra_oracle(h, grid, n_ks, SeedSpec{6});
    std::vector<double> hybrid(n_ks), exact(n_ks);
    for (std::size_t j = 0; j < n_ks; ++j) {
        hybrid[j] = p.volterra[j * 22 + 21];
        exact[j] = oracle(static_cast<Eigen::Index>(j), 21);
    }
    const double ks = ks_statistic(hybrid, exact), crit = 1.628 * std::sqrt(2.0 / n_ks);
    part(ks < crit, fmt("KS %.4f < %.4f", ks, crit));

    double worst_z = 0.0;
    for (std::size_t i = 1; i <= 21; ++i) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t j = 0; j < n_ks; ++j) {
            s += p.var(j, i);
            s2 += p.var(j, i) * p.var(j, i);
        }
        const double mean = s / n_ks, se = std::sqrt((s2 / n_ks - mean * mean) / n_ks);
        worst_z = std::max(worst_z, std::abs(mean - xi) / se);
    }
    part(worst_z <= 5.0, fmt("E[V] max %.2f SE", worst_z));

    SolverConfig cfg;
    cfg.nodes = 100;
    const double vol = 0.235;
    const auto flat = RoughBergomiModel::flat(0.5, 0.0, -0.7, 0.01, 1.0, vol * vol);
    const auto solve = backward_solve_nonmarkovian(flat, AffineDriver::pricing(0.01), vanilla_call(1.0), grid, 50000, cfg, SeedSpec{5});
    const double truth = bs_closed_form(1.0, 1.0, 0.01, vol, 1.0);
    const double rel = std::abs(solve.price - truth) / truth;
    part(rel <= 2e-2, fmt("flat rough vs BS %.2e", rel));
    report(7, "oracle equivalences", ok, detail);
}

// --- 8 -----------------------------------------------------------------------

void determinism() {
    bool ok = true;
    std::string detail;
    for (auto id : {ExperimentId::bs_calls, ExperimentId::bs_basket, ExperimentId::rb_call, ExperimentId::bs_convergence,
                    ExperimentId::rb_convergence, ExperimentId::bs_scaling}) {
        ExperimentConfig c;
        c.experiment = id;
        c.steps = 6;
        c.paths = 3000;
        c.reference_paths = 5000;
        c.reference_steps = 12;
        c.repeats = 2;
        c.dims = {5, 12};
        if (id == ExperimentId::bs_convergence || id == ExperimentId::rb_convergence) c.nodes = {10, 40};
        std::string first;
        bool same = true;
        for (unsigned threads : {1u, 1u, 3u, 8u}) {
            set_thread_count(threads);
            const std::string doc = strip_wall_times(run_experiment(c).document).dump();
            if (first.empty())
                first = doc;
            else
                same = same && doc == first;
        }
        ok = ok && same;
        detail += std::string(experiment_name(id)) + (same ? " identical; " : " DIFFERS; ");
    }
    set_thread_count(0);
    report(8, "determinism across runs and thread counts", ok, detail);
}

}  // namespace

int main() {
    set_thread_count(0);
    std::printf("threads: %u\n", thread_count());
    closed_form();
    calls_table();
    single_option(4, "basket vs self-computed reference", ExperimentId::bs_basket, 0.016240);
    single_option(5, "rough Bergomi vs self-computed reference", ExperimentId::rb_call, 0.079932);
    sweeps();
    oracles();
    determinism();
    std::printf("%d criterion(s) failed\n", failures);
    return failures == 0 ? 0 : 1;
}
