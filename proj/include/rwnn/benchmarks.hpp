#pragma once

#include "rwnn/core.hpp"
#include "rwnn/driver.hpp"
#include "rwnn/sde_models.hpp"

#include "json.hpp"

#include <cstddef>
#include <vector>

namespace rwnn {

struct PriceReport {
    double price = 0.0;
    double std_error = 0.0;
    double wall_time = 0.0;
    nlohmann::json meta = nlohmann::json::object();
};

nlohmann::json to_json(const PriceReport& report);

double normal_cdf(double x);

/// European call under Black-Scholes. sigma = 0 or T = 0 fall back to the
/// discounted intrinsic value.
double bs_closed_form(double spot, double strike, double rate, double sigma, double maturity);

/// e^{-rT} mean(payoff(X_T)) over the batch with its standard error. Payoff must be scalar.
PriceReport mc_price(const PathBatch& paths, const Payoff& payoff, double rate, double maturity);
/// One report per payoff output.
std::vector<PriceReport> mc_price_each(const PathBatch& paths, const Payoff& payoff, double rate, double maturity);

/// High-resolution Monte Carlo reference, streamed so paths are never stored.
/// Draws come from a dedicated namespace of `seeds`.
PriceReport reference_price(const BlackScholesModel& model, const Payoff& payoff, double maturity,
                            std::size_t steps, std::size_t n_ref, SeedSpec seeds);
PriceReport reference_price(const RoughBergomiModel& model, const Payoff& payoff, double maturity,
                            std::size_t steps, std::size_t n_ref, SeedSpec seeds,
                            HistoryWeights scheme = HistoryWeights::variance_matched);

}  // namespace rwnn
