#pragma once

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "lvsr/model.hpp"

namespace lvsr {

/// Auxiliary parameters of the softmax bound: a scalar pivot `a` and one
/// non-negative `xi` per item.
struct BouchardState {
    double a = 0.0;
    Eigen::VectorXd xi;

    static BouchardState initial(std::size_t num_items) {
        return {0.0, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(num_items))};
    }
};

/// Jaakkola-Jordan coefficient tanh(xi/2) / (4 xi), even in xi, with the
/// limit 1/8 at 0. Values lie in (0, 1/8].
double lambda_jj(double xi);
/// d lambda_jj / d xi.
double lambda_jj_derivative(double xi);

/// Analytic lower bound on the Gaussian-q ELBO of one session.
double bouchard_bound(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                      const BouchardState& b);

/// Same bound from a count vector; `counts` sums to the session length.
double bouchard_bound(const ModelParams& params, const Eigen::VectorXd& counts, const Posterior& q,
                      const BouchardState& b);

// Closed-form coordinate updates. Each maximizes the bound in its block with
// the others held fixed.
Eigen::MatrixXd em_update_sigma(const ModelParams& params, double length, const BouchardState& b);
Eigen::VectorXd em_update_mu(const ModelParams& params, const Eigen::VectorXd& counts, const Eigen::MatrixXd& sigma,
                             const BouchardState& b);
double em_update_a(const ModelParams& params, const Posterior& q, const BouchardState& b);
Eigen::VectorXd em_update_xi(const ModelParams& params, const Posterior& q, double a);

struct EmStart {
    Posterior q;
    BouchardState state;
};

struct EmResult {
    Posterior q;
    BouchardState state;
    std::vector<double> bound_trace;  ///< bound after each cycle
};

inline constexpr int kDefaultEmIterations = 100;

/// Runs exactly `iterations` cycles of the (xi, Sigma, mu, a) updates.
/// Default start: mu = 0, Sigma = I, a = 0, xi = 1. Empty sessions are allowed
/// and return the prior.
EmResult em_infer(const ModelParams& params, std::span<const ItemId> views, int iterations = kDefaultEmIterations,
                  const std::optional<EmStart>& start = std::nullopt);

}  // namespace lvsr
