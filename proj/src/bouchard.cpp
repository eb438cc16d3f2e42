#include "lvsr/bouchard.hpp"

#include <cmath>
#include <string>

#include <Eigen/Cholesky>

#include "lvsr/error.hpp"

namespace lvsr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kLambdaSeriesCutoff = 1e-6;
constexpr double kDerivativeSeriesCutoff = 1e-2;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

Eigen::VectorXd lambdas(const Eigen::VectorXd& xi) { return xi.unaryExpr([](double x) { return lambda_jj(x); }); }

Eigen::VectorXd counts_of(const ModelParams& params, std::span<const ItemId> views) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(params.num_items()));
    for (auto v : views) {
        if (v < 0 || static_cast<std::size_t>(v) >= params.num_items())
            throw BoundsError("view " + std::to_string(v) + " outside catalog of " +
                              std::to_string(params.num_items()));
        c(v) += 1.0;
    }
    return c;
}

void check_state(const ModelParams& params, const BouchardState& b) {
    if (static_cast<std::size_t>(b.xi.size()) != params.num_items())
        throw ArgumentError("xi must have one entry per item");
}

}  // namespace

double lambda_jj(double xi) {
    const double x = std::abs(xi);
    if (x < kLambdaSeriesCutoff) return 0.125 - x * x / 96.0;
    // sigmoid(x) - 1/2 == tanh(x/2) / 2, without the cancellation.
    return std::tanh(0.5 * x) / (4.0 * x);
}

double lambda_jj_derivative(double xi) {
    const double x = std::abs(xi);
    const double sign = xi < 0 ? -1.0 : 1.0;
    if (x < kDerivativeSeriesCutoff) return sign * (-x / 48.0 + x * x * x / 240.0);
    const double th = std::tanh(0.5 * x);
    const double sech2 = 1.0 - th * th;
    return sign * (sech2 / (8.0 * x) - th / (4.0 * x * x));
}

double bouchard_bound(const ModelParams& params, const Eigen::VectorXd& counts, const Posterior& q,
                      const BouchardState& b) {
    check_state(params, b);
    if (q.dim() != params.dim()) throw ArgumentError("posterior dimension does not match model");
    if (counts.size() != static_cast<Eigen::Index>(params.num_items()))
        throw ArgumentError("count vector must have one entry per item");
    const double length = counts.sum();
    const auto k = static_cast<double>(params.dim());

    const Eigen::VectorXd x = params.psi * q.mean() + params.rho;
    const Eigen::VectorXd d = x.array() - b.a;
    const Eigen::VectorXd v = q.quadratic_forms(params.psi);
    const Eigen::VectorXd lam = lambdas(b.xi);

    double majorizer = b.a;
    for (Eigen::Index p = 0; p < x.size(); ++p) {
        majorizer += 0.5 * (d(p) - b.xi(p)) + lam(p) * (d(p) * d(p) + v(p) - b.xi(p) * b.xi(p)) + softplus(b.xi(p));
    }
    const double data = counts.dot(x);
    const double gaussian = -0.5 * k * kLog2Pi - 0.5 * (q.mean().squaredNorm() + q.trace()) +
                            0.5 * (k * (kLog2Pi + 1.0) + q.log_det());
    const double value = data - length * majorizer + gaussian;
    if (!std::isfinite(value)) throw NumericError("bouchard bound is not finite");
    return value;
}

double bouchard_bound(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                      const BouchardState& b) {
    return bouchard_bound(params, counts_of(params, views), q, b);
}

Eigen::MatrixXd em_update_sigma(const ModelParams& params, double length, const BouchardState& b) {
    check_state(params, b);
    const auto k = params.psi.cols();
    const Eigen::VectorXd lam = lambdas(b.xi);
    Eigen::MatrixXd precision = Eigen::MatrixXd::Identity(k, k);
    precision.noalias() += 2.0 * length * params.psi.transpose() * lam.asDiagonal() * params.psi;
    Eigen::LLT<Eigen::MatrixXd> llt(precision);
    if (llt.info() != Eigen::Success) throw NumericError("posterior precision is not positive definite");
    Eigen::MatrixXd sigma = llt.solve(Eigen::MatrixXd::Identity(k, k));
    return 0.5 * (sigma + sigma.transpose());
}

Eigen::VectorXd em_update_mu(const ModelParams& params, const Eigen::VectorXd& counts, const Eigen::MatrixXd& sigma,
                             const BouchardState& b) {
    check_state(params, b);
    if (counts.size() != static_cast<Eigen::Index>(params.num_items()))
        throw ArgumentError("count vector must have one entry per item");
    if (sigma.rows() != params.psi.cols() || sigma.cols() != params.psi.cols())
        throw ArgumentError("sigma must be K x K");
    const double length = counts.sum();
    const Eigen::VectorXd lam = lambdas(b.xi);
    const Eigen::VectorXd weight = 0.5 + 2.0 * (params.rho.array() - b.a) * lam.array();
    const Eigen::VectorXd rhs = params.psi.transpose() * (counts - length * weight);
    return sigma * rhs;
}

double em_update_a(const ModelParams& params, const Posterior& q, const BouchardState& b) {
    check_state(params, b);
    const Eigen::VectorXd lam = lambdas(b.xi);
    const Eigen::VectorXd x = params.psi * q.mean() + params.rho;
    const double p = static_cast<double>(params.num_items());
    return (-1.0 + 0.5 * p + 2.0 * lam.dot(x)) / (2.0 * lam.sum());
}

Eigen::VectorXd em_update_xi(const ModelParams& params, const Posterior& q, double a) {
    const Eigen::VectorXd d = (params.psi * q.mean() + params.rho).array() - a;
    const Eigen::VectorXd radicand = q.quadratic_forms(params.psi) + d.cwiseAbs2();
    if (radicand.size() > 0 && radicand.minCoeff() < 0.0)
        throw NumericError("internal: negative radicand in xi update");
    return radicand.cwiseSqrt();
}

EmResult em_infer(const ModelParams& params, std::span<const ItemId> views, int iterations,
                  const std::optional<EmStart>& start) {
    if (iterations < 1) throw ArgumentError("em_infer needs at least one iteration");
    const Eigen::VectorXd counts = counts_of(params, views);
    const double length = counts.sum();

    EmStart cur = start ? *start : EmStart{Posterior::standard(params.dim()), BouchardState::initial(params.num_items())};
    if (cur.q.dim() != params.dim()) throw ArgumentError("initial posterior dimension does not match model");
    check_state(params, cur.state);

    EmResult result{cur.q, cur.state, {}};
    result.bound_trace.reserve(static_cast<std::size_t>(iterations));
    Posterior q = cur.q;
    BouchardState b = cur.state;
    for (int it = 0; it < iterations; ++it) {
        try {
            b.xi = em_update_xi(params, q, b.a);
            const Eigen::MatrixXd sigma = em_update_sigma(params, length, b);
            const Eigen::VectorXd mu = em_update_mu(params, counts, sigma, b);
            q = Posterior::full(mu, sigma);
            b.a = em_update_a(params, q, b);
            result.bound_trace.push_back(bouchard_bound(params, counts, q, b));
        } catch (const NumericError& e) {
            throw NumericError("em iteration " + std::to_string(it) + ": " + e.what());
        }
    }
    result.q = std::move(q);
    result.state = std::move(b);
    return result;
}

}  // namespace lvsr
