#include "rwnn/experiments.hpp"

#include "rwnn/benchmarks.hpp"
#include "rwnn/markovian_solver.hpp"
#include "rwnn/nonmarkovian_solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace rwnn {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kPathTag = 1;
constexpr std::uint64_t kReservoirTag = 2;
constexpr std::uint64_t kReferenceSeedTag = 3;

constexpr double kSpot = 1.0;
constexpr double kStrike = 1.0;
constexpr double kRate = 0.01;
constexpr double kMaturity = 1.0;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

bool is_sweep(ExperimentId id) { return id == ExperimentId::bs_convergence || id == ExperimentId::rb_convergence; }

std::vector<std::size_t> nodes_of(const ExperimentConfig& c) {
    if (!c.nodes.empty()) return c.nodes;
    if (is_sweep(c.experiment)) return {10, 100, 1000};
    return {100};
}

double connectivity_of(const ExperimentConfig& c) {
    return c.connectivity.value_or(is_sweep(c.experiment) ? 1.0 : 0.5);
}

std::size_t repeats_of(const ExperimentConfig& c) { return c.repeats.value_or(is_sweep(c.experiment) ? 20 : 1); }

bool absorption_of(const ExperimentConfig& c) { return c.absorption.value_or(is_sweep(c.experiment)); }

std::size_t reference_paths_of(const ExperimentConfig& c, bool rough) {
    return c.reference_paths.value_or(rough ? 800000 : 400000);
}

std::size_t single_node_count(const ExperimentConfig& c) {
    const auto nodes = nodes_of(c);
    if (nodes.size() != 1) throw std::invalid_argument("experiment takes a single node count");
    return nodes.front();
}

SolverConfig solver_config(const ExperimentConfig& c, std::size_t nodes, bool absorption) {
    SolverConfig s;
    s.nodes = nodes;
    s.range = c.range;
    s.connectivity = connectivity_of(c);
    s.ridge = c.ridge;
    s.absorption = absorption;
    s.standardize = c.standardize;
    return s;
}

SeedSpec run_seeds(const ExperimentConfig& c, std::size_t repeat) { return SeedSpec{c.seed}.derive(repeat); }

void validate(const ExperimentConfig& c) {
    if (c.steps == 0) throw std::invalid_argument("steps must be positive");
    if (c.paths < 2) throw std::invalid_argument("paths must be at least 2");
    if (c.reference_steps == 0) throw std::invalid_argument("reference steps must be positive");
    if (repeats_of(c) == 0) throw std::invalid_argument("repeats must be positive");
    for (std::size_t k : nodes_of(c))
        if (k == 0) throw std::invalid_argument("nodes must be positive");
    if (!(c.range > 0.0)) throw std::invalid_argument("range must be positive");
    const double conn = connectivity_of(c);
    if (!(conn > 0.0 && conn <= 1.0)) throw std::invalid_argument("connectivity must lie in (0, 1]");
    if (c.ridge && !(*c.ridge >= 0.0)) throw std::invalid_argument("ridge must be non-negative");
    if (c.reference_paths && *c.reference_paths == 0) throw std::invalid_argument("reference paths must be positive");
}

json settings_of(const ExperimentConfig& c) {
    json s{{"steps", c.steps},
           {"paths", c.paths},
           {"nodes", nodes_of(c)},
           {"connectivity", connectivity_of(c)},
           {"range", c.range},
           {"standardize", c.standardize},
           {"ridge", c.ridge ? json(*c.ridge) : json("auto")},
           {"repeats", repeats_of(c)},
           {"spot", kSpot},
           {"strike", kStrike},
           {"rate", kRate},
           {"maturity", kMaturity}};
    if (is_sweep(c.experiment) || c.experiment == ExperimentId::bs_scaling) s["absorption"] = absorption_of(c);
    if (c.experiment == ExperimentId::bs_scaling) s["dims"] = c.dims;
    if (c.experiment != ExperimentId::bs_calls && c.experiment != ExperimentId::bs_convergence &&
        c.experiment != ExperimentId::bs_scaling) {
        s["reference_steps"] = c.reference_steps;
        s["reference_paths"] = reference_paths_of(c, c.experiment != ExperimentId::bs_basket);
    }
    return s;
}

double rel_error(double reference, double estimate) { return (reference - estimate) / reference; }

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

std::vector<double> column_mean(const std::vector<std::vector<double>>& rows) {
    std::vector<double> mean(rows.front().size(), 0.0);
    for (const auto& r : rows)
        for (std::size_t i = 0; i < r.size(); ++i) mean[i] += r[i];
    for (double& m : mean) m /= static_cast<double>(rows.size());
    return mean;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<double> rel_errors(const std::vector<double>& reference, const std::vector<double>& estimate) {
    std::vector<double> out(reference.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = rel_error(reference[i], estimate[i]);
    return out;
}

double total_mse(const std::vector<double>& reference, const std::vector<double>& estimate) {
    double s = 0.0;
    for (std::size_t i = 0; i < reference.size(); ++i) s += (estimate[i] - reference[i]) * (estimate[i] - reference[i]);
    return s / static_cast<double>(reference.size());
}

void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    body(out);
    if (!out) throw std::runtime_error("failed writing " + path);
}

json weights_json(const MarkovianSolve& solve) {
    json steps = json::array();
    for (std::size_t i = 0; i < solve.reservoirs.size(); ++i)
        steps.push_back({{"step", i}, {"reservoir", to_json(solve.reservoirs[i])}, {"readout", to_json(solve.readouts[i])}});
    return {{"schema", 1}, {"steps", steps}};
}

json weights_json(const NonMarkovianSolve& solve) {
    json steps = json::array();
    for (std::size_t i = 0; i < solve.value_reservoirs.size(); ++i)
        steps.push_back({{"step", i},
                         {"value_reservoir", to_json(solve.value_reservoirs[i])},
                         {"psi_reservoir", to_json(solve.psi_reservoirs[i])},
                         {"theta", to_json(solve.readouts[i].theta)},
                         {"xi", to_json(solve.readouts[i].xi)}});
    return {{"schema", 1}, {"steps", steps}};
}

template <class Solve>
void dump(const ExperimentConfig& c, const Solve& solve, const PathBatch& paths, const TimeGrid& grid) {
    if (c.dump_weights) write_file(*c.dump_weights, [&](std::ostream& o) { o << weights_json(solve).dump(1) << '\n'; });
    if (c.dump_paths) write_file(*c.dump_paths, [&](std::ostream& o) { write_paths_csv(o, paths, grid); });
}

// --- Black-Scholes tables -------------------------------------------------

/// Both absorption variants and plain MC on one shared path set.
struct TableRun {
    std::vector<double> w_abs, wo_abs, mc, mc_se;
    double time_w_abs = 0.0, time_wo_abs = 0.0, time_mc = 0.0;
};

TableRun markovian_table_run(const ExperimentConfig& c, const BlackScholesModel& model, const Payoff& payoff,
                             std::size_t repeat, bool with_absorption_column = true,
                             bool absorption_for_single = false) {
    const TimeGrid grid = make_uniform_grid(kMaturity, c.steps);
    const SeedSpec seeds = run_seeds(c, repeat);
    const PathBatch paths = simulate_bs_paths(model, grid, c.paths, seeds.derive(kPathTag));
    const std::size_t nodes = single_node_count(c);
    const auto driver = AffineDriver::pricing(model.rate);
    const auto diffusion = black_scholes_log_diffusion(model);
    auto reservoirs = sample_step_reservoirs(solver_config(c, nodes, false), model.dim(), grid.steps(),
                                             seeds.derive(kReservoirTag));
    if (c.standardize) standardize_inputs(reservoirs, paths);
    TableRun run;
    auto solve_with = [&](bool absorption, double& elapsed) {
        const auto start = Clock::now();
        auto solve = solve_markovian(paths, grid, diffusion, driver, payoff, reservoirs, solver_config(c, nodes, absorption));
        elapsed = seconds_since(start);
        return solve;
    };
    if (with_absorption_column) {
        run.w_abs = to_vector(solve_with(true, run.time_w_abs).price);
        const auto plain = solve_with(false, run.time_wo_abs);
        run.wo_abs = to_vector(plain.price);
        if (repeat == 0) dump(c, plain, paths, grid);
    } else {
        const auto solve = solve_with(absorption_for_single, run.time_wo_abs);
        (absorption_for_single ? run.w_abs : run.wo_abs) = to_vector(solve.price);
        if (repeat == 0) dump(c, solve, paths, grid);
    }
    const auto start = Clock::now();
    for (const auto& r : mc_price_each(paths, payoff, model.rate, kMaturity)) {
        run.mc.push_back(r.price);
        run.mc_se.push_back(r.std_error);
    }
    run.time_mc = seconds_since(start);
    return run;
}

ExperimentResult assemble_table(const ExperimentConfig& c, const std::vector<double>& labels, const std::string& label_name,
                                const std::vector<double>& reference, const std::vector<double>& reference_se,
                                const std::vector<TableRun>& runs, json extra_wall_times) {
    std::vector<std::vector<double>> w, wo, mc, se;
    json per_run = json::array();
    ExperimentResult result;
    result.csv_header = {"repeat", label_name, "reference", "pde_w_abs", "pde_wo_abs", "mc", "mc_std_error"};
    double time_w = 0.0, time_wo = 0.0, time_mc = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
        const TableRun& run = runs[r];
        w.push_back(run.w_abs);
        wo.push_back(run.wo_abs);
        mc.push_back(run.mc);
        se.push_back(run.mc_se);
        time_w += run.time_w_abs;
        time_wo += run.time_wo_abs;
        time_mc += run.time_mc;
        per_run.push_back({{"repeat", r},
                           {"pde_w_abs", run.w_abs},
                           {"pde_wo_abs", run.wo_abs},
                           {"mc", run.mc},
                           {"mc_std_error", run.mc_se},
                           {"mse", {{"pde_w_abs", total_mse(reference, run.w_abs)},
                                    {"pde_wo_abs", total_mse(reference, run.wo_abs)},
                                    {"mc", total_mse(reference, run.mc)}}}});
        for (std::size_t i = 0; i < labels.size(); ++i)
            result.csv_rows.push_back({static_cast<double>(r), labels[i], reference[i], run.w_abs[i], run.wo_abs[i],
                                       run.mc[i], run.mc_se[i]});
    }
    const auto mw = column_mean(w), mwo = column_mean(wo), mmc = column_mean(mc), mse_ = column_mean(se);
    json& d = result.document;
    d["schema"] = 1;
    d["experiment"] = experiment_name(c.experiment);
    d["settings"] = settings_of(c);
    d["seed"] = c.seed;
    d["prices"] = {{label_name, labels}, {"pde_w_abs", mw}, {"pde_wo_abs", mwo}, {"mc", mmc}, {"mc_std_error", mse_}};
    d["references"] = {{"price", reference}};
    if (!reference_se.empty()) d["references"]["std_error"] = reference_se;
    d["rel_errors"] = {{"pde_w_abs", rel_errors(reference, mw)},
                       {"pde_wo_abs", rel_errors(reference, mwo)},
                       {"mc", rel_errors(reference, mmc)}};
    d["mse"] = {{"pde_w_abs", total_mse(reference, mw)},
                {"pde_wo_abs", total_mse(reference, mwo)},
                {"mc", total_mse(reference, mmc)}};
    d["runs"] = per_run;
    extra_wall_times["pde_w_abs"] = time_w;
    extra_wall_times["pde_wo_abs"] = time_wo;
    extra_wall_times["mc"] = time_mc;
    d["wall_times"] = extra_wall_times;
    return result;
}

ExperimentResult run_bs_calls(const ExperimentConfig& c) {
    const std::vector<double> sigmas = scaling_sigmas(5);
    const auto model = BlackScholesModel::independent(Eigen::VectorXd::Constant(5, kSpot), kRate,
                                                      Eigen::Map<const Eigen::VectorXd>(sigmas.data(), 5));
    std::vector<double> truth;
    for (double s : sigmas) truth.push_back(bs_closed_form(kSpot, kStrike, kRate, s, kMaturity));
    std::vector<TableRun> runs;
    for (std::size_t r = 0; r < repeats_of(c); ++r) runs.push_back(markovian_table_run(c, model, call_per_asset(kStrike, 5), r));
    return assemble_table(c, sigmas, "sigma", truth, {}, runs, json::object());
}

Eigen::MatrixXd basket_correlation() {
    Eigen::MatrixXd rho(5, 5);
    rho << 1, 0.84, -0.51, -0.70, 0.15,  //
        0.84, 1, -0.66, -0.85, 0.41,     //
        -0.51, -0.66, 1, 0.55, -0.82,    //
        -0.70, -0.85, 0.55, 1, -0.51,    //
        0.15, 0.41, -0.82, -0.51, 1;
    return rho;
}

ExperimentResult run_bs_basket(const ExperimentConfig& c) {
    BlackScholesModel model;
    model.spot = Eigen::VectorXd::Constant(5, kSpot);
    model.rate = kRate;
    model.sigma = Eigen::VectorXd::LinSpaced(5, 0.05, 0.25);
    model.corr = basket_correlation();
    const Payoff payoff = basket_call(kStrike, std::vector<double>(5, 0.2));
    const PriceReport ref = reference_price(model, payoff, kMaturity, c.reference_steps, reference_paths_of(c, false),
                                            SeedSpec{c.seed}.derive(kReferenceSeedTag));
    std::vector<TableRun> runs;
    for (std::size_t r = 0; r < repeats_of(c); ++r) runs.push_back(markovian_table_run(c, model, payoff, r));
    return assemble_table(c, {0.0}, "option", {ref.price}, {ref.std_error}, runs, json{{"reference", ref.wall_time}});
}

// --- rough Bergomi ----------------------------------------------------------

RoughBergomiModel rb_model() { return RoughBergomiModel::flat(0.3, 1.9, -0.7, kRate, kSpot, 0.235 * 0.235); }

PriceReport rb_reference(const ExperimentConfig& c, const RoughBergomiModel& model) {
    return reference_price(model, vanilla_call(kStrike), kMaturity, c.reference_steps, reference_paths_of(c, true),
                           SeedSpec{c.seed}.derive(kReferenceSeedTag));
}

struct RoughPaths {
    TimeGrid grid;
    PathBatch paths;
};

RoughPaths rb_paths(const ExperimentConfig& c, const RoughBergomiModel& model, SeedSpec seeds) {
    const TimeGrid grid = make_uniform_grid(kMaturity, c.steps);
    const VolterraKernelPlan plan = build_volterra_plan(model.hurst, grid);
    return {grid, simulate_rbergomi_paths(model, plan, grid, c.paths, seeds.derive(kPathTag))};
}

NonMarkovianSolve rb_solve(const ExperimentConfig& c, const RoughBergomiModel& model, const RoughPaths& rp,
                           SeedSpec seeds, std::size_t nodes, bool absorption) {
    const SolverConfig sc = solver_config(c, nodes, absorption);
    const SeedSpec res_seeds = seeds.derive(kReservoirTag);
    auto value_res = sample_step_reservoirs(sc, 1, rp.grid.steps(), res_seeds, 0);
    auto psi_res = sample_step_reservoirs(sc, 1, rp.grid.steps(), res_seeds, 1);
    if (sc.standardize) {
        standardize_inputs(value_res, rp.paths);
        standardize_inputs(psi_res, rp.paths);
    }
    return solve_nonmarkovian(rp.paths, rp.grid, model.rho1, AffineDriver::pricing(model.rate), vanilla_call(kStrike),
                              std::move(value_res), std::move(psi_res), sc);
}

ExperimentResult run_rb_call(const ExperimentConfig& c) {
    const auto model = rb_model();
    const PriceReport ref = rb_reference(c, model);
    const std::size_t nodes = single_node_count(c);
    std::vector<TableRun> runs;
    for (std::size_t r = 0; r < repeats_of(c); ++r) {
        const SeedSpec seeds = run_seeds(c, r);
        const RoughPaths rp = rb_paths(c, model, seeds);
        TableRun run;
        auto start = Clock::now();
        run.w_abs = {rb_solve(c, model, rp, seeds, nodes, true).price};
        run.time_w_abs = seconds_since(start);
        start = Clock::now();
        const auto plain = rb_solve(c, model, rp, seeds, nodes, false);
        run.time_wo_abs = seconds_since(start);
        run.wo_abs = {plain.price};
        if (r == 0) dump(c, plain, rp.paths, rp.grid);
        start = Clock::now();
        const PriceReport mc = mc_price(rp.paths, vanilla_call(kStrike), model.rate, kMaturity);
        run.time_mc = seconds_since(start);
        run.mc = {mc.price};
        run.mc_se = {mc.std_error};
        runs.push_back(std::move(run));
    }
    return assemble_table(c, {0.0}, "option", {ref.price}, {ref.std_error}, runs, json{{"reference", ref.wall_time}});
}

// --- node sweeps ------------------------------------------------------------

ExperimentResult assemble_sweep(const ExperimentConfig& c, double reference, std::optional<PriceReport> ref_report,
                                const std::vector<std::size_t>& nodes,
                                const std::vector<std::vector<double>>& prices,  // [k][repeat]
                                const std::vector<double>& times) {
    ExperimentResult result;
    result.csv_header = {"repeat", "nodes", "price", "reference", "squared_error"};
    json records = json::array();
    std::vector<std::pair<double, double>> fit;
    std::vector<double> mean_mse;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        std::vector<double> sq;
        for (std::size_t r = 0; r < prices[k].size(); ++r) {
            const double e = prices[k][r] - reference;
            sq.push_back(e * e);
            result.csv_rows.push_back({static_cast<double>(r), static_cast<double>(nodes[k]), prices[k][r], reference, e * e});
        }
        const double m = mean_of(sq);
        mean_mse.push_back(m);
        fit.emplace_back(static_cast<double>(nodes[k]), m);
        records.push_back({{"nodes", nodes[k]},
                           {"prices", prices[k]},
                           {"mse", sq},
                           {"mean_mse", m},
                           {"q10", quantile(sq, 0.1)},
                           {"q90", quantile(sq, 0.9)},
                           {"rel_errors", [&] {
                                std::vector<double> re;
                                for (double p : prices[k]) re.push_back(rel_error(reference, p));
                                return re;
                            }()}});
    }
    json& d = result.document;
    d["schema"] = 1;
    d["experiment"] = experiment_name(c.experiment);
    d["settings"] = settings_of(c);
    d["seed"] = c.seed;
    d["prices"] = json::object();
    for (std::size_t k = 0; k < nodes.size(); ++k) d["prices"][std::to_string(nodes[k])] = prices[k];
    d["references"] = {{"price", reference}};
    if (ref_report) d["references"]["std_error"] = ref_report->std_error;
    d["rel_errors"] = json::object();
    for (std::size_t k = 0; k < nodes.size(); ++k) d["rel_errors"][std::to_string(nodes[k])] = records[k]["rel_errors"];
    d["mse"] = {{"nodes", nodes}, {"mean", mean_mse}, {"records", records}};
    d["slope"] = fit.size() >= 2 ? json(fit_loglog_slope(fit)) : json(nullptr);
    json wall = json::object();
    for (std::size_t k = 0; k < nodes.size(); ++k) wall[std::to_string(nodes[k])] = times[k];
    if (ref_report) wall["reference"] = ref_report->wall_time;
    d["wall_times"] = wall;
    return result;
}

ExperimentResult run_bs_convergence(const ExperimentConfig& c) {
    const double sigma = 0.1;
    const auto model = BlackScholesModel::independent(Eigen::VectorXd::Constant(1, kSpot), kRate,
                                                      Eigen::VectorXd::Constant(1, sigma));
    const double truth = bs_closed_form(kSpot, kStrike, kRate, sigma, kMaturity);
    const TimeGrid grid = make_uniform_grid(kMaturity, c.steps);
    const auto nodes = nodes_of(c);
    const auto payoff = vanilla_call(kStrike);
    const auto driver = AffineDriver::pricing(kRate);
    const auto diffusion = black_scholes_log_diffusion(model);
    std::vector<std::vector<double>> prices(nodes.size());
    std::vector<double> times(nodes.size(), 0.0);
    for (std::size_t r = 0; r < repeats_of(c); ++r) {
        const SeedSpec seeds = run_seeds(c, r);
        const PathBatch paths = simulate_bs_paths(model, grid, c.paths, seeds.derive(kPathTag));
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto start = Clock::now();
            const SolverConfig sc = solver_config(c, nodes[k], absorption_of(c));
            auto res = sample_step_reservoirs(sc, 1, grid.steps(), seeds.derive(kReservoirTag));
            if (sc.standardize) standardize_inputs(res, paths);
            const auto solve = solve_markovian(paths, grid, diffusion, driver, payoff, std::move(res), sc);
            times[k] += seconds_since(start);
            prices[k].push_back(solve.price[0]);
            if (r == 0 && k + 1 == nodes.size()) dump(c, solve, paths, grid);
        }
    }
    return assemble_sweep(c, truth, std::nullopt, nodes, prices, times);
}

ExperimentResult run_rb_convergence(const ExperimentConfig& c) {
    const auto model = rb_model();
    const PriceReport ref = rb_reference(c, model);
    const auto nodes = nodes_of(c);
    std::vector<std::vector<double>> prices(nodes.size());
    std::vector<double> times(nodes.size(), 0.0);
    for (std::size_t r = 0; r < repeats_of(c); ++r) {
        const SeedSpec seeds = run_seeds(c, r);
        const RoughPaths rp = rb_paths(c, model, seeds);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            const auto start = Clock::now();
            const auto solve = rb_solve(c, model, rp, seeds, nodes[k], absorption_of(c));
            times[k] += seconds_since(start);
            prices[k].push_back(solve.price);
            if (r == 0 && k + 1 == nodes.size()) dump(c, solve, rp.paths, rp.grid);
        }
    }
    return assemble_sweep(c, ref.price, ref, nodes, prices, times);
}

}  // namespace

ExperimentId parse_experiment(std::string_view name) {
    for (auto id : {ExperimentId::bs_convergence, ExperimentId::bs_calls, ExperimentId::bs_basket, ExperimentId::rb_call,
                    ExperimentId::rb_convergence, ExperimentId::bs_scaling})
        if (experiment_name(id) == name) return id;
    throw std::invalid_argument("unknown experiment: " + std::string(name));
}

std::string_view experiment_name(ExperimentId id) {
    switch (id) {
        case ExperimentId::bs_convergence: return "bs-convergence";
        case ExperimentId::bs_calls: return "bs-calls";
        case ExperimentId::bs_basket: return "bs-basket";
        case ExperimentId::rb_call: return "rb-call";
        case ExperimentId::rb_convergence: return "rb-convergence";
        case ExperimentId::bs_scaling: return "bs-scaling";
    }
    return "unknown";
}

std::vector<double> scaling_sigmas(std::size_t dim) {
    std::vector<double> s(dim);
    for (std::size_t j = 0; j < dim; ++j) s[j] = 0.05 * static_cast<double>(1 + j % 8);
    return s;
}

ExperimentResult scaling_table(const ExperimentConfig& c) {
    validate(c);
    if (c.dims.empty()) throw std::invalid_argument("scaling_table: no dimensions");
    ExperimentResult result;
    result.csv_header = {"d", "total_mse", "wall_time"};
    json rows = json::array();
    json wall = json::object();
    std::vector<double> mses;
    const bool absorption = absorption_of(c);
    for (std::size_t d : c.dims) {
        if (d == 0) throw std::invalid_argument("scaling_table: dimension must be positive");
        const auto sigmas = scaling_sigmas(d);
        const auto model = BlackScholesModel::independent(Eigen::VectorXd::Constant(static_cast<Eigen::Index>(d), kSpot),
                                                          kRate, Eigen::Map<const Eigen::VectorXd>(sigmas.data(), static_cast<Eigen::Index>(d)));
        std::vector<double> truth;
        for (double s : sigmas) truth.push_back(bs_closed_form(kSpot, kStrike, kRate, s, kMaturity));
        const TableRun run = markovian_table_run(c, model, call_per_asset(kStrike, d), 0, false, absorption);
        const auto& est = absorption ? run.w_abs : run.wo_abs;
        const double mse = total_mse(truth, est);
        mses.push_back(mse);
        rows.push_back({{"d", d}, {"total_mse", mse}});
        wall[std::to_string(d)] = run.time_wo_abs;
        result.csv_rows.push_back({static_cast<double>(d), mse, run.time_wo_abs});
    }
    json& doc = result.document;
    doc["schema"] = 1;
    doc["experiment"] = experiment_name(ExperimentId::bs_scaling);
    doc["settings"] = settings_of(c);
    doc["seed"] = c.seed;
    doc["prices"] = json::object();
    doc["references"] = {{"sigma_rule", "0.05 * (1 + j mod 8)"}};
    doc["rel_errors"] = json::object();
    doc["mse"] = {{"dims", c.dims}, {"total", mses}, {"rows", rows}};
    doc["wall_times"] = wall;
    return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    validate(config);
    switch (config.experiment) {
        case ExperimentId::bs_calls: return run_bs_calls(config);
        case ExperimentId::bs_basket: return run_bs_basket(config);
        case ExperimentId::rb_call: return run_rb_call(config);
        case ExperimentId::bs_convergence: return run_bs_convergence(config);
        case ExperimentId::rb_convergence: return run_rb_convergence(config);
        case ExperimentId::bs_scaling: return scaling_table(config);
    }
    throw std::invalid_argument("unknown experiment");
}

void write_json(std::ostream& out, const ExperimentResult& result) { out << result.document.dump(2) << '\n'; }

void write_csv(std::ostream& out, const ExperimentResult& result) {
    for (std::size_t i = 0; i < result.csv_header.size(); ++i) out << (i ? "," : "") << result.csv_header[i];
    out << '\n' << std::setprecision(17);
    for (const auto& row : result.csv_rows) {
        for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
}

nlohmann::json strip_wall_times(nlohmann::json document) {
    if (document.is_object()) {
        document.erase("wall_times");
        document.erase("wall_time");
        for (auto& [key, value] : document.items()) value = strip_wall_times(value);
    } else if (document.is_array()) {
        for (auto& value : document) value = strip_wall_times(value);
    }
    return document;
}

double fit_loglog_slope(const std::vector<std::pair<double, double>>& records) {
    if (records.size() < 2) throw std::invalid_argument("fit_loglog_slope: need at least two points");
    double mx = 0.0, my = 0.0;
    for (const auto& [k, mse] : records) {
        if (!(k > 0.0) || !(mse > 0.0)) throw std::invalid_argument("fit_loglog_slope: values must be positive");
        mx += std::log(k);
        my += std::log(mse);
    }
    const double n = static_cast<double>(records.size());
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (const auto& [k, mse] : records) {
        const double dx = std::log(k) - mx;
        sxy += dx * (std::log(mse) - my);
        sxx += dx * dx;
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_loglog_slope: need at least two distinct node counts");
    return sxy / sxx;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty sample");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace rwnn
