#include "rwnn/reservoir.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace rwnn {

void ReservoirConfig::validate() const {
    if (nodes == 0) throw std::invalid_argument("reservoir: nodes must be >= 1");
    if (input_dim == 0) throw std::invalid_argument("reservoir: input dimension must be >= 1");
    if (!(range > 0.0) || !std::isfinite(range)) throw std::invalid_argument("reservoir: range must be positive");
    if (!(connectivity > 0.0) || connectivity > 1.0) throw std::invalid_argument("reservoir: connectivity must lie in (0, 1]");
}

std::size_t ReservoirConfig::kept_weights() const {
    return static_cast<std::size_t>(std::llround(connectivity * static_cast<double>(nodes * input_dim)));
}

Reservoir Reservoir::from_weights(Eigen::MatrixXd a, Eigen::VectorXd b, double range) {
    if (a.rows() != b.size() || a.rows() == 0 || a.cols() == 0)
        throw std::invalid_argument("reservoir: weight and bias shapes disagree");
    Reservoir res;
    res.config.nodes = static_cast<std::size_t>(a.rows());
    res.config.input_dim = static_cast<std::size_t>(a.cols());
    res.config.range = range;
    const auto nonzero = static_cast<double>((a.array() != 0.0).count());
    res.config.connectivity = std::max(nonzero, 1.0) / static_cast<double>(a.size());
    res.weights = std::move(a);
    res.bias = std::move(b);
    return res;
}

Reservoir rescale_inputs(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& center,
                         const Eigen::Ref<const Eigen::VectorXd>& scale) {
    if (center.size() != res.weights.cols() || scale.size() != res.weights.cols())
        throw std::invalid_argument("rescale_inputs: dimension mismatch");
    if (!(scale.array() > 0.0).all()) throw std::invalid_argument("rescale_inputs: scale must be positive");
    Reservoir out = res;
    out.weights = res.weights * scale.cwiseInverse().asDiagonal();
    out.bias = res.bias - out.weights * center;
    return out;
}

Reservoir sample_reservoir(const ReservoirConfig& config, SeedSpec seeds, std::uint64_t stream,
                           std::uint32_t substream) {
    config.validate();
    const auto k = static_cast<Eigen::Index>(config.nodes);
    const auto d = static_cast<Eigen::Index>(config.input_dim);
    Reservoir res;
    res.config = config;
    res.weights.resize(k, d);
    res.bias.resize(k);

    RandomStream draws(seeds, Purpose::reservoir, stream, substream);
    for (Eigen::Index r = 0; r < k; ++r) {
        for (Eigen::Index c = 0; c < d; ++c) res.weights(r, c) = config.range * (2.0 * draws.uniform() - 1.0);
        res.bias[r] = config.range * (2.0 * draws.uniform() - 1.0);
    }

    const std::size_t total = config.nodes * config.input_dim;
    const std::size_t kept = config.kept_weights();
    if (kept < total) {
        // Partial Fisher-Yates: the first `kept` slots of `order` are the retained entries.
        std::vector<std::size_t> order(total);
        std::iota(order.begin(), order.end(), std::size_t{0});
        RandomStream mask(seeds, Purpose::connectivity, stream, substream);
        for (std::size_t i = 0; i < kept; ++i) std::swap(order[i], order[i + mask.below(total - i)]);
        for (std::size_t i = kept; i < total; ++i) {
            const auto flat = static_cast<Eigen::Index>(order[i]);
            res.weights(flat / d, flat % d) = 0.0;
        }
    }
    return res;
}

Eigen::VectorXd features(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != res.weights.cols()) throw std::invalid_argument("features: input dimension mismatch");
    const Eigen::VectorXd xc = x;
    Eigen::VectorXd out(res.bias.size());
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        const double pre = preactivation(res, k, xc.data());
        out[k] = active(pre) ? pre : 0.0;
    }
    return out;
}

Eigen::MatrixXd features_jacobian(const Reservoir& res, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (x.size() != res.weights.cols()) throw std::invalid_argument("features_jacobian: input dimension mismatch");
    const Eigen::VectorXd xc = x;
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(res.weights.rows(), res.weights.cols());
    for (Eigen::Index k = 0; k < jac.rows(); ++k)
        if (active(preactivation(res, k, xc.data()))) jac.row(k) = res.weights.row(k);
    return jac;
}

Eigen::VectorXd net_eval(const Reservoir& res, const Readout& readout, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (readout.theta.cols() != res.bias.size()) throw std::invalid_argument("net_eval: readout width does not match reservoir");
    return readout.theta * features(res, x);
}

Eigen::MatrixXd net_grad(const Reservoir& res, const Readout& readout, const Eigen::Ref<const Eigen::VectorXd>& x) {
    if (readout.theta.cols() != res.bias.size()) throw std::invalid_argument("net_grad: readout width does not match reservoir");
    return readout.theta * features_jacobian(res, x);
}

namespace {

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = rows == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(j.at(0).size());
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j.at(r).size()) != cols) throw std::invalid_argument("json: ragged matrix");
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j.at(r).at(c).get<double>();
    }
    return m;
}

}  // namespace

nlohmann::json to_json(const Reservoir& res) {
    nlohmann::json j;
    j["nodes"] = res.config.nodes;
    j["input_dim"] = res.config.input_dim;
    j["range"] = res.config.range;
    j["connectivity"] = res.config.connectivity;
    j["activation"] = "relu";
    j["A"] = matrix_json(res.weights);
    j["b"] = std::vector<double>(res.bias.data(), res.bias.data() + res.bias.size());
    return j;
}

nlohmann::json to_json(const Readout& readout) {
    return nlohmann::json{{"theta", matrix_json(readout.theta)}};
}

Reservoir reservoir_from_json(const nlohmann::json& j) {
    Eigen::MatrixXd a = matrix_from_json(j.at("A"));
    const auto b_values = j.at("b").get<std::vector<double>>();
    Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(b_values.data(), static_cast<Eigen::Index>(b_values.size()));
    Reservoir res = Reservoir::from_weights(std::move(a), std::move(b), j.at("range").get<double>());
    res.config.connectivity = j.at("connectivity").get<double>();
    return res;
}

Readout readout_from_json(const nlohmann::json& j) { return Readout{matrix_from_json(j.at("theta"))}; }

}  // namespace rwnn
