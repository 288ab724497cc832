#pragma once

#include "rwnn/random.hpp"

#include "json.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace rwnn {

enum class ExperimentId {
    bs_convergence,
    bs_calls,
    bs_basket,
    rb_call,
    rb_convergence,
    bs_scaling,
};

ExperimentId parse_experiment(std::string_view name);
std::string_view experiment_name(ExperimentId id);

/// Unset optionals take the per-experiment default:
/// nodes {100} for tables and {10,100,1000} for sweeps, connectivity 0.5
/// (1 for sweeps), absorption on for sweeps and off for scaling, repeats 20
/// for sweeps and 1 otherwise, reference paths 400k (Black-Scholes) or 800k
/// (rough Bergomi).
struct ExperimentConfig {
    ExperimentId experiment = ExperimentId::bs_calls;
    std::size_t steps = 21;
    std::size_t paths = 50000;
    std::vector<std::size_t> nodes;
    std::optional<double> connectivity;
    double range = 1.0;
    bool standardize = false;
    std::optional<double> ridge;
    std::optional<bool> absorption;
    std::uint64_t seed = 7;
    std::optional<std::size_t> repeats;
    std::size_t reference_steps = 100;
    std::optional<std::size_t> reference_paths;
    std::vector<std::size_t> dims{5, 10, 25, 50, 100};
    std::optional<std::string> dump_weights;
    std::optional<std::string> dump_paths;
};

struct ExperimentResult {
    nlohmann::json document;
    std::vector<std::string> csv_header;
    std::vector<std::vector<double>> csv_rows;
};

/// Runs the experiment; throws on invalid configuration or solver failure.
ExperimentResult run_experiment(const ExperimentConfig& config);

void write_json(std::ostream& out, const ExperimentResult& result);
void write_csv(std::ostream& out, const ExperimentResult& result);

/// Copy of the document without wall_time / wall_times entries.
nlohmann::json strip_wall_times(nlohmann::json document);

/// OLS slope of log(mse) on log(K).
double fit_loglog_slope(const std::vector<std::pair<double, double>>& records);

/// Linear-interpolation quantile of an unsorted sample.
double quantile(std::vector<double> values, double q);

/// sigma_j = 0.05 (1 + j mod 8): spans [0.05, 0.4], and 0.05..0.25 at d = 5.
std::vector<double> scaling_sigmas(std::size_t dim);

/// Rows (d, total MSE, wall time) of Black-Scholes calls per dimension.
ExperimentResult scaling_table(const ExperimentConfig& config);

}  // namespace rwnn
