#include "rwnn/rls.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace rwnn {

MomentAccumulator::MomentAccumulator(std::size_t features, std::size_t outputs)
    : gram(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(features), static_cast<Eigen::Index>(features))),
      cross(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(outputs), static_cast<Eigen::Index>(features))) {}

void MomentAccumulator::merge(const MomentAccumulator& other) {
    if (other.gram.rows() != gram.rows() || other.cross.rows() != cross.rows())
        throw std::invalid_argument("accumulator merge: shape mismatch");
    gram += other.gram;
    cross += other.cross;
    count += other.count;
}

void accumulate(MomentAccumulator& acc, const Eigen::Ref<const Eigen::MatrixXd>& x,
                const Eigen::Ref<const Eigen::MatrixXd>& y) {
    if (x.rows() != y.rows()) throw std::invalid_argument("accumulate: X and Y have different batch sizes");
    if (x.rows() == 0) return;
    if (x.cols() != acc.gram.rows() || y.cols() != acc.cross.rows())
        throw std::invalid_argument("accumulate: column counts do not match the accumulator");
    // Fill the lower triangle by rank update, then mirror it.
    acc.gram.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
    acc.gram.triangularView<Eigen::StrictlyUpper>() = acc.gram.transpose();
    acc.cross.noalias() += y.transpose() * x;
    acc.count += static_cast<std::size_t>(x.rows());
}

double default_ridge(const MomentAccumulator& acc) {
    const auto p = acc.gram.rows();
    if (p == 0) return 0.0;
    return 1e-8 * acc.gram.trace() / static_cast<double>(p);
}

RidgeSolution ridge_solve(const MomentAccumulator& acc, std::optional<double> lambda) {
    const auto p = acc.gram.rows();
    if (p == 0) throw std::invalid_argument("ridge_solve: empty accumulator");
    if (lambda && (!(*lambda >= 0.0) || !std::isfinite(*lambda)))
        throw std::invalid_argument("ridge_solve: lambda must be >= 0");
    if (!acc.gram.allFinite() || !acc.cross.allFinite())
        throw SingularSystemError("ridge_solve: non-finite moments", std::numeric_limits<double>::quiet_NaN());
    const double lam = lambda.value_or(default_ridge(acc));
    const double scale = acc.gram.trace() / static_cast<double>(p);
    Eigen::MatrixXd system = acc.gram;
    system.diagonal().array() += lam;

    RidgeSolution sol;
    sol.lambda = lam;
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 1e-10 * (scale > 0.0 ? scale : 1.0);
    for (int attempt = 0;; ++attempt) {
        llt.compute(system);
        const bool ok = llt.info() == Eigen::Success && llt.matrixLLT().diagonal().minCoeff() > 0.0;
        if (ok) {
            sol.jitter_steps = attempt;
            break;
        }
        if (attempt == 5) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(system, Eigen::EigenvaluesOnly);
            const double lo = eig.eigenvalues().minCoeff();
            const double hi = eig.eigenvalues().maxCoeff();
            const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
            std::ostringstream msg;
            msg << "ridge_solve: system is not positive definite after jitter (condition " << cond << ")";
            throw SingularSystemError(msg.str(), cond);
        }
        system.diagonal().array() += jitter;
        sol.lambda += jitter;
        jitter *= 10.0;
    }

    sol.beta = llt.solve(acc.cross.transpose()).transpose();
    const double rcond = llt.rcond();
    sol.gram_condition = rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity();

    Eigen::MatrixXd reg = acc.gram;
    reg.diagonal().array() += sol.lambda;
    // One step of iterative refinement against the unfactored system.
    const Eigen::MatrixXd correction = acc.cross - sol.beta * reg;
    sol.beta += llt.solve(correction.transpose()).transpose();
    const double cross_norm = acc.cross.norm();
    const double resid = (sol.beta * reg - acc.cross).norm();
    sol.residual_norm = cross_norm > 0.0 ? resid / cross_norm : resid;
    return sol;
}

}  // namespace rwnn
