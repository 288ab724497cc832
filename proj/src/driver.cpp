#include "rwnn/driver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rwnn {

AffineDriver AffineDriver::pricing(double rate) {
    AffineDriver d;
    d.a = [rate](double, std::span<const double>) { return -rate; };
    return d;
}

void AffineDriver::b_at(double t, std::span<const double> x, std::span<double> out) const {
    if (b) {
        b(t, x, out);
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
}

void AffineDriver::f_tilde_at(double t, std::span<const double> x, std::span<double> out) const {
    if (f_tilde) {
        f_tilde(t, x, out);
    } else {
        std::fill(out.begin(), out.end(), 0.0);
    }
}

double Payoff::scalar(std::span<const double> log_state) const {
    if (outputs != 1) throw std::invalid_argument("payoff: scalar evaluation of a multi-output payoff");
    double v = 0.0;
    eval(log_state, std::span<double>(&v, 1));
    return v;
}

Payoff vanilla_call(double strike) {
    return Payoff{1, [strike](std::span<const double> x, std::span<double> out) {
                      out[0] = std::max(std::exp(x[0]) - strike, 0.0);
                  }};
}

Payoff call_per_asset(double strike, std::size_t dim) {
    return Payoff{dim, [strike](std::span<const double> x, std::span<double> out) {
                      for (std::size_t j = 0; j < x.size(); ++j) out[j] = std::max(std::exp(x[j]) - strike, 0.0);
                  }};
}

Payoff basket_call(double strike, std::vector<double> weights) {
    return Payoff{1, [strike, w = std::move(weights)](std::span<const double> x, std::span<double> out) {
                      double level = 0.0;
                      for (std::size_t j = 0; j < w.size(); ++j) level += w[j] * std::exp(x[j]);
                      out[0] = std::max(level - strike, 0.0);
                  }};
}

}  // namespace rwnn
