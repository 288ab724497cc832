#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace rwnn {

/// Affine driver f(t, x, y, z1, z2) = a y + b z1 + c z2 + f_tilde.
/// Empty callables mean a zero coefficient. In the Markovian solver `b` fills a
/// row of the noise dimension and `c` is ignored; in the rough-volatility
/// solver `b` contributes its first entry.
struct AffineDriver {
    std::function<double(double t, std::span<const double> x)> a;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> b;
    std::function<double(double t, std::span<const double> x)> c;
    std::function<void(double t, std::span<const double> x, std::span<double> out)> f_tilde;

    /// f = 0.
    static AffineDriver zero() { return {}; }
    /// Discounting driver f = -r y.
    static AffineDriver pricing(double rate);

    [[nodiscard]] double a_at(double t, std::span<const double> x) const { return a ? a(t, x) : 0.0; }
    [[nodiscard]] double c_at(double t, std::span<const double> x) const { return c ? c(t, x) : 0.0; }
    void b_at(double t, std::span<const double> x, std::span<double> out) const;
    void f_tilde_at(double t, std::span<const double> x, std::span<double> out) const;
};

/// Terminal condition on log-states. `outputs` is the number of values per state.
struct Payoff {
    std::size_t outputs = 1;
    std::function<void(std::span<const double> log_state, std::span<double> out)> eval;

    [[nodiscard]] double scalar(std::span<const double> log_state) const;
};

/// (e^x - K)^+ on a one-dimensional log-state.
Payoff vanilla_call(double strike);
/// (e^{x_j} - K)^+ for each coordinate j; d outputs.
Payoff call_per_asset(double strike, std::size_t dim);
/// (sum_j w_j e^{x_j} - K)^+.
Payoff basket_call(double strike, std::vector<double> weights);

}  // namespace rwnn
