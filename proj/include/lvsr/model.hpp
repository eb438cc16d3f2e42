#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include <Eigen/Core>

#include "lvsr/data.hpp"

namespace lvsr {

/// Item embeddings `psi` (P x K, row p embeds item p) and popularity shift
/// `rho` (P). The user state has a fixed N(0, I_K) prior.
struct ModelParams {
    Eigen::MatrixXd psi;
    Eigen::VectorXd rho;

    ModelParams() = default;
    ModelParams(Eigen::MatrixXd psi_, Eigen::VectorXd rho_);

    static ModelParams zeros(std::size_t num_items, std::size_t dim);

    std::size_t num_items() const noexcept { return static_cast<std::size_t>(psi.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(psi.cols()); }

    /// Throws ArgumentError on shape problems, NumericError on non-finite entries.
    void validate() const;
};

enum class CovarianceKind { full, diagonal };

/// Gaussian q(omega) = N(mean, covariance). Full posteriors keep a K x K
/// matrix; diagonal ones keep the K variances.
class Posterior {
public:
    Posterior() = default;

    static Posterior full(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
    static Posterior diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances);
    static Posterior standard(std::size_t dim, CovarianceKind kind = CovarianceKind::full);

    CovarianceKind kind() const noexcept { return kind_; }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
    const Eigen::VectorXd& mean() const noexcept { return mean_; }

    /// Dense K x K covariance regardless of kind.
    Eigen::MatrixXd covariance() const;
    Eigen::VectorXd variances() const;
    double trace() const;
    double log_det() const;

    /// L with L L^T = covariance: Cholesky factor or element-wise sqrt.
    Eigen::MatrixXd factor() const;

    /// Row-wise psi_p Sigma psi_p^T for every row of `rows`.
    Eigen::VectorXd quadratic_forms(const Eigen::MatrixXd& rows) const;

    /// Samples mean + L eps for every row of `eps` (S x K); returns S x K.
    Eigen::MatrixXd transform(const Eigen::MatrixXd& eps) const;

    double log_density(const Eigen::VectorXd& omega) const;

private:
    CovarianceKind kind_ = CovarianceKind::full;
    Eigen::VectorXd mean_;
    Eigen::MatrixXd cov_;
    Eigen::VectorXd var_;
    Eigen::MatrixXd chol_;
};

/// Monte-Carlo estimate with the standard error of its mean.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x);
double standard_normal_log_density(const Eigen::VectorXd& omega);

/// log softmax(psi * omega + rho).
Eigen::VectorXd log_softmax_probs(const ModelParams& params, const Eigen::VectorXd& omega);

/// log p(v_1..v_T, omega | psi, rho) under the N(0, I) prior.
double log_joint(const ModelParams& params, std::span<const ItemId> views, const Eigen::VectorXd& omega);

/// Average of log_joint(omega_s) - log q(omega_s) with omega_s = mean + L eps_s.
McEstimate elbo_mc(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                   const Eigen::MatrixXd& eps);

/// Importance-sampling estimate of log p(v_1..v_T) with q as proposal. The
/// standard error is the delta-method error of the log of the weight mean.
McEstimate log_marginal_is(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                           std::size_t num_samples, std::uint64_t seed);

// Serialization. The text form is a `P K` header followed by P rows of K+1
// reals (psi_p then rho_p); the JSON form is {"P", "K", "psi", "rho"}.
std::string format_model_text(const ModelParams& params);
ModelParams parse_model_text(const std::string& text);
std::string format_model_json(const ModelParams& params);
ModelParams parse_model_json(const std::string& text);

enum class ModelFormat { text, json };

void save_model(const ModelParams& params, const std::filesystem::path& path, ModelFormat format = ModelFormat::text);
/// Detects JSON by a leading '{'.
ModelParams load_model(const std::filesystem::path& path);

}  // namespace lvsr
