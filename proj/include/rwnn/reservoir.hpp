#pragma once

#include "rwnn/random.hpp"

#include <Eigen/Dense>
#include "json.hpp"

#include <cstddef>
#include <cstdint>

namespace rwnn {

struct ReservoirConfig {
    std::size_t nodes = 100;     // K
    std::size_t input_dim = 1;   // d
    double range = 1.0;          // weights and biases ~ U[-range, range]
    double connectivity = 1.0;   // fraction of A kept nonzero, in (0, 1]

    void validate() const;
    /// round(c * K * d): number of entries of A left unmasked.
    [[nodiscard]] std::size_t kept_weights() const;
};

/// Frozen random basis x -> relu(A x + b).
struct Reservoir {
    Eigen::MatrixXd weights;  // K x d
    Eigen::VectorXd bias;     // K
    ReservoirConfig config;

    [[nodiscard]] std::size_t nodes() const noexcept { return static_cast<std::size_t>(bias.size()); }
    [[nodiscard]] std::size_t input_dim() const noexcept { return static_cast<std::size_t>(weights.cols()); }

    /// Builds a reservoir from explicit weights (tests, reloaded dumps).
    static Reservoir from_weights(Eigen::MatrixXd a, Eigen::VectorXd b, double range = 1.0);
};

/// Trained linear map from K features to m outputs.
struct Readout {
    Eigen::MatrixXd theta;  // m x K

    [[nodiscard]] std::size_t outputs() const noexcept { return static_cast<std::size_t>(theta.rows()); }
    [[nodiscard]] bool finite() const { return theta.allFinite(); }
};

/// Draws A and b iid U[-R, R] and keeps exactly round(c*K*d) uniformly placed
/// entries of A. `stream` / `substream` address the draw (e.g. timestep, network).
Reservoir sample_reservoir(const ReservoirConfig& config, SeedSpec seeds, std::uint64_t stream = 0,
                           std::uint32_t substream = 0);

/// The same basis seen through the input map x -> (x - center) / scale:
/// A' = A diag(1/scale), b' = b - A' center.
Reservoir rescale_inputs(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& center,
                         const Eigen::Ref<const Eigen::VectorXd>& scale);

/// Pre-activation A x + b. Every feature routine goes through this so that
/// activity decisions agree bit-for-bit across code paths.
inline double preactivation(const Reservoir& res, Eigen::Index unit, const double* x) {
    double acc = res.bias[unit];
    for (Eigen::Index j = 0; j < res.weights.cols(); ++j) acc += res.weights(unit, j) * x[j];
    return acc;
}

/// Heaviside with H(0) = 0: a unit sitting exactly on its kink is inactive.
inline bool active(double pre) noexcept { return pre > 0.0; }

Eigen::VectorXd features(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& x);
/// Almost-everywhere Jacobian diag(H(Ax+b)) A.
Eigen::MatrixXd features_jacobian(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::VectorXd net_eval(const Reservoir& res, const Readout& readout, const Eigen::Ref<const Eigen::VectorXd>& x);
Eigen::MatrixXd net_grad(const Reservoir& res, const Readout& readout, const Eigen::Ref<const Eigen::VectorXd>& x);

nlohmann::json to_json(const Reservoir& res);
nlohmann::json to_json(const Readout& readout);
Reservoir reservoir_from_json(const nlohmann::json& j);
Readout readout_from_json(const nlohmann::json& j);

}  // namespace rwnn
