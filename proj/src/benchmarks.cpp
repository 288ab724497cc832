#include "rwnn/benchmarks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rwnn {

namespace {

constexpr std::uint64_t kReferenceTag = 0x4EFE;
constexpr std::size_t kChunk = 4096;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

/// Mean and unbiased variance from per-chunk (sum, sum of squares) merged in chunk order.
struct Moments {
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
};

PriceReport summarize(const std::vector<Moments>& chunks, double discount) {
    Moments total;
    for (const auto& c : chunks) {
        total.sum += c.sum;
        total.sum_sq += c.sum_sq;
        total.count += c.count;
    }
    const double n = static_cast<double>(total.count);
    const double mean = total.sum / n;
    const double var = total.count > 1 ? std::max(0.0, (total.sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
    PriceReport report;
    report.price = discount * mean;
    report.std_error = discount * std::sqrt(var / n);
    return report;
}

}  // namespace

nlohmann::json to_json(const PriceReport& report) {
    return nlohmann::json{{"price", report.price},
                          {"std_error", report.std_error},
                          {"wall_time", report.wall_time},
                          {"meta", report.meta}};
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double bs_closed_form(double spot, double strike, double rate, double sigma, double maturity) {
    if (!(spot > 0.0) || !(strike > 0.0)) throw std::invalid_argument("bs_closed_form: spot and strike must be positive");
    if (sigma < 0.0 || maturity < 0.0) throw std::invalid_argument("bs_closed_form: sigma and maturity must be non-negative");
    const double discount = std::exp(-rate * maturity);
    const double vol = sigma * std::sqrt(maturity);
    if (vol == 0.0) return std::max(spot - strike * discount, 0.0);
    const double d1 = (std::log(spot / strike) + (rate + 0.5 * sigma * sigma) * maturity) / vol;
    const double d2 = d1 - vol;
    return spot * normal_cdf(d1) - strike * discount * normal_cdf(d2);
}

std::vector<PriceReport> mc_price_each(const PathBatch& paths, const Payoff& payoff, double rate, double maturity) {
    if (paths.paths == 0) throw std::invalid_argument("mc_price: empty path batch");
    const auto start = Clock::now();
    const std::size_t m = payoff.outputs;
    const std::size_t chunks = chunk_count(paths.paths, kChunk);
    std::vector<std::vector<Moments>> partial(m, std::vector<Moments>(chunks));
    parallel_chunks(paths.paths, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<double> value(m);
        for (std::size_t j = begin; j < end; ++j) {
            payoff.eval(paths.state(j, paths.steps), value);
            for (std::size_t o = 0; o < m; ++o) {
                partial[o][c].sum += value[o];
                partial[o][c].sum_sq += value[o] * value[o];
                ++partial[o][c].count;
            }
        }
    });
    const double discount = std::exp(-rate * maturity);
    std::vector<PriceReport> out;
    out.reserve(m);
    for (std::size_t o = 0; o < m; ++o) out.push_back(summarize(partial[o], discount));
    const double elapsed = seconds_since(start);
    for (auto& r : out) {
        r.wall_time = elapsed;
        r.meta = {{"paths", paths.paths}, {"steps", paths.steps}};
    }
    return out;
}

PriceReport mc_price(const PathBatch& paths, const Payoff& payoff, double rate, double maturity) {
    if (payoff.outputs != 1) throw std::invalid_argument("mc_price: payoff must be scalar");
    return mc_price_each(paths, payoff, rate, maturity).front();
}

PriceReport reference_price(const BlackScholesModel& model, const Payoff& payoff, double maturity,
                            std::size_t steps, std::size_t n_ref, SeedSpec seeds) {
    if (n_ref == 0) throw std::invalid_argument("reference_price: need at least one path");
    if (payoff.outputs != 1) throw std::invalid_argument("reference_price: payoff must be scalar");
    model.validate();
    const auto start = Clock::now();
    const TimeGrid grid = make_uniform_grid(maturity, steps);
    const Eigen::MatrixXd factor = correlation_factor(model.corr);
    const SeedSpec ref_seeds = seeds.derive(kReferenceTag);
    const std::size_t d = model.dim();
    std::vector<Moments> partial(chunk_count(n_ref, kChunk));
    parallel_chunks(n_ref, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<double> states((steps + 1) * d), incr(steps * d);
        for (std::size_t j = begin; j < end; ++j) {
            simulate_bs_path(model, factor, grid, ref_seeds, j, states, incr);
            const double v = payoff.scalar(std::span<const double>(states.data() + steps * d, d));
            partial[c].sum += v;
            partial[c].sum_sq += v * v;
            ++partial[c].count;
        }
    });
    PriceReport report = summarize(partial, std::exp(-model.rate * maturity));
    report.wall_time = seconds_since(start);
    report.meta = {{"paths", n_ref}, {"steps", steps}, {"model", "black-scholes"}};
    return report;
}

PriceReport reference_price(const RoughBergomiModel& model, const Payoff& payoff, double maturity,
                            std::size_t steps, std::size_t n_ref, SeedSpec seeds, HistoryWeights scheme) {
    if (n_ref == 0) throw std::invalid_argument("reference_price: need at least one path");
    if (payoff.outputs != 1) throw std::invalid_argument("reference_price: payoff must be scalar");
    model.validate();
    const auto start = Clock::now();
    const TimeGrid grid = make_uniform_grid(maturity, steps);
    const VolterraKernelPlan plan = build_volterra_plan(model.hurst, grid, scheme);
    const SeedSpec ref_seeds = seeds.derive(kReferenceTag);
    std::vector<Moments> partial(chunk_count(n_ref, kChunk));
    parallel_chunks(n_ref, kChunk, [&](std::size_t c, std::size_t begin, std::size_t end) {
        std::vector<double> x(steps + 1), v(steps + 1), w(steps + 1), incr(2 * steps);
        for (std::size_t j = begin; j < end; ++j) {
            simulate_rbergomi_path(model, plan, ref_seeds, j, x, v, w, incr);
            const double value = payoff.scalar(std::span<const double>(&x[steps], 1));
            partial[c].sum += value;
            partial[c].sum_sq += value * value;
            ++partial[c].count;
        }
    });
    PriceReport report = summarize(partial, std::exp(-model.rate * maturity));
    report.wall_time = seconds_since(start);
    report.meta = {{"paths", n_ref}, {"steps", steps}, {"model", "rough-bergomi"}};
    return report;
}

}  // namespace rwnn
