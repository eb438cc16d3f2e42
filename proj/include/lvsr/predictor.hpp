#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "lvsr/data.hpp"
#include "lvsr/model.hpp"

namespace lvsr {

inline constexpr std::size_t kDefaultPredictionSamples = 100;

struct McPrediction {
    Eigen::VectorXd probs;
    Eigen::VectorXd std_error;  ///< per-item standard error of the average
};

/// Average of softmax(psi omega_s + rho) over S posterior draws.
McPrediction predict_mc_with_error(const ModelParams& params, const Posterior& q, std::size_t samples,
                                   std::uint64_t seed);
Eigen::VectorXd predict_mc(const ModelParams& params, const Posterior& q, std::size_t samples, std::uint64_t seed);

/// softmax(psi mu + rho); ignores the covariance.
Eigen::VectorXd predict_mean(const ModelParams& params, const Posterior& q);

/// Ids of the k largest scores, descending; ties go to the lower id.
std::vector<ItemId> top_k(const Eigen::VectorXd& scores, std::size_t k);

}  // namespace lvsr
