#include "lvsr/model.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "lvsr/error.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)

void check_dims(const ModelParams& params, const Eigen::VectorXd& omega) {
    if (static_cast<std::size_t>(omega.size()) != params.dim())
        throw ArgumentError("latent dimension " + std::to_string(omega.size()) + " does not match model K = " +
                            std::to_string(params.dim()));
}

void check_views(const ModelParams& params, std::span<const ItemId> views) {
    for (auto v : views)
        if (v < 0 || static_cast<std::size_t>(v) >= params.num_items())
            throw BoundsError("view " + std::to_string(v) + " outside catalog of " +
                              std::to_string(params.num_items()));
}

}  // namespace

ModelParams::ModelParams(Eigen::MatrixXd psi_, Eigen::VectorXd rho_) : psi(std::move(psi_)), rho(std::move(rho_)) {
    validate();
}

ModelParams ModelParams::zeros(std::size_t num_items, std::size_t dim) {
    return ModelParams(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(num_items), static_cast<Eigen::Index>(dim)),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_items)));
}

void ModelParams::validate() const {
    if (psi.rows() < 1 || psi.cols() < 1) throw ArgumentError("model needs P >= 1 and K >= 1");
    if (rho.size() != psi.rows())
        throw ArgumentError("rho has " + std::to_string(rho.size()) + " entries, psi has " +
                            std::to_string(psi.rows()) + " rows");
    if (!psi.allFinite() || !rho.allFinite()) throw NumericError("model parameters contain non-finite values");
}

Posterior Posterior::full(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
    const auto k = mean.size();
    if (covariance.rows() != k || covariance.cols() != k)
        throw ArgumentError("covariance must be " + std::to_string(k) + "x" + std::to_string(k));
    if (!mean.allFinite() || !covariance.allFinite()) throw NumericError("posterior contains non-finite values");
    const double scale = 1.0 + covariance.cwiseAbs().maxCoeff();
    if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
        throw NumericError("posterior covariance is not symmetric");
    Posterior q;
    q.kind_ = CovarianceKind::full;
    q.mean_ = std::move(mean);
    q.cov_ = 0.5 * (covariance + covariance.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(q.cov_);
    if (llt.info() != Eigen::Success) throw NumericError("posterior covariance is not positive definite");
    q.chol_ = llt.matrixL();
    if (q.chol_.diagonal().minCoeff() <= 0.0) throw NumericError("posterior covariance is not positive definite");
    return q;
}

Posterior Posterior::diagonal(Eigen::VectorXd mean, Eigen::VectorXd variances) {
    if (variances.size() != mean.size()) throw ArgumentError("variance vector must match mean dimension");
    if (!mean.allFinite() || !variances.allFinite()) throw NumericError("posterior contains non-finite values");
    if (variances.size() > 0 && variances.minCoeff() <= 0.0)
        throw NumericError("posterior variances must be strictly positive");
    Posterior q;
    q.kind_ = CovarianceKind::diagonal;
    q.mean_ = std::move(mean);
    q.var_ = std::move(variances);
    return q;
}

Posterior Posterior::standard(std::size_t dim, CovarianceKind kind) {
    const auto k = static_cast<Eigen::Index>(dim);
    if (kind == CovarianceKind::full) return full(Eigen::VectorXd::Zero(k), Eigen::MatrixXd::Identity(k, k));
    return diagonal(Eigen::VectorXd::Zero(k), Eigen::VectorXd::Ones(k));
}

Eigen::MatrixXd Posterior::covariance() const {
    if (kind_ == CovarianceKind::full) return cov_;
    return var_.asDiagonal();
}

Eigen::VectorXd Posterior::variances() const {
    if (kind_ == CovarianceKind::full) return cov_.diagonal();
    return var_;
}

double Posterior::trace() const { return variances().sum(); }

double Posterior::log_det() const {
    if (kind_ == CovarianceKind::full) return 2.0 * chol_.diagonal().array().log().sum();
    return var_.array().log().sum();
}

Eigen::MatrixXd Posterior::factor() const {
    if (kind_ == CovarianceKind::full) return chol_;
    return var_.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd Posterior::quadratic_forms(const Eigen::MatrixXd& rows) const {
    if (kind_ == CovarianceKind::full) return (rows * cov_).cwiseProduct(rows).rowwise().sum();
    return rows.cwiseAbs2() * var_;
}

Eigen::MatrixXd Posterior::transform(const Eigen::MatrixXd& eps) const {
    if (eps.cols() != mean_.size()) throw ArgumentError("noise matrix must have K columns");
    Eigen::MatrixXd out;
    if (kind_ == CovarianceKind::full)
        out = eps * chol_.transpose();
    else
        out = eps * var_.cwiseSqrt().asDiagonal();
    out.rowwise() += mean_.transpose();
    return out;
}

double Posterior::log_density(const Eigen::VectorXd& omega) const {
    const Eigen::VectorXd d = omega - mean_;
    double maha = 0.0;
    if (kind_ == CovarianceKind::full)
        maha = chol_.triangularView<Eigen::Lower>().solve(d).squaredNorm();
    else
        maha = (d.array().square() / var_.array()).sum();
    return -0.5 * (static_cast<double>(dim()) * kLog2Pi + log_det() + maha);
}

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& x) {
    const double m = x.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((x.array() - m).exp().sum());
}

double standard_normal_log_density(const Eigen::VectorXd& omega) {
    return -0.5 * static_cast<double>(omega.size()) * kLog2Pi - 0.5 * omega.squaredNorm();
}

Eigen::VectorXd log_softmax_probs(const ModelParams& params, const Eigen::VectorXd& omega) {
    check_dims(params, omega);
    Eigen::VectorXd logits = params.psi * omega + params.rho;
    if (!logits.allFinite()) throw NumericError("non-finite logits");
    logits.array() -= log_sum_exp(logits);
    return logits;
}

double log_joint(const ModelParams& params, std::span<const ItemId> views, const Eigen::VectorXd& omega) {
    check_dims(params, omega);
    check_views(params, views);
    const Eigen::VectorXd logits = params.psi * omega + params.rho;
    if (!logits.allFinite()) throw NumericError("non-finite logits");
    double data = 0.0;
    for (auto v : views) data += logits(v);
    return data - static_cast<double>(views.size()) * log_sum_exp(logits) + standard_normal_log_density(omega);
}

McEstimate elbo_mc(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                   const Eigen::MatrixXd& eps) {
    if (eps.rows() < 1) throw ArgumentError("elbo_mc needs at least one sample");
    if (q.dim() != params.dim()) throw ArgumentError("posterior dimension does not match model");
    const Eigen::MatrixXd omega = q.transform(eps);
    Eigen::VectorXd values(omega.rows());
    for (Eigen::Index s = 0; s < omega.rows(); ++s) {
        const Eigen::VectorXd w = omega.row(s).transpose();
        values(s) = log_joint(params, views, w) - q.log_density(w);
    }
    McEstimate est;
    est.value = values.mean();
    if (values.size() > 1) {
        const double var = (values.array() - est.value).square().sum() / static_cast<double>(values.size() - 1);
        est.std_error = std::sqrt(var / static_cast<double>(values.size()));
    }
    return est;
}

McEstimate log_marginal_is(const ModelParams& params, std::span<const ItemId> views, const Posterior& q,
                           std::size_t num_samples, std::uint64_t seed) {
    if (num_samples < 1) throw ArgumentError("importance sampling needs at least one sample");
    if (q.dim() != params.dim()) throw ArgumentError("posterior dimension does not match model");
    auto rng = make_rng(seed);
    const auto k = static_cast<Eigen::Index>(q.dim());
    Eigen::VectorXd log_w(static_cast<Eigen::Index>(num_samples));
    // Draw in blocks to bound memory for large n.
    constexpr Eigen::Index kBlock = 4096;
    for (Eigen::Index start = 0; start < log_w.size(); start += kBlock) {
        const Eigen::Index n = std::min(kBlock, log_w.size() - start);
        const Eigen::MatrixXd omega = q.transform(standard_normal(n, k, rng));
        for (Eigen::Index s = 0; s < n; ++s) {
            const Eigen::VectorXd w = omega.row(s).transpose();
            log_w(start + s) = log_joint(params, views, w) - q.log_density(w);
        }
    }
    const double m = log_w.maxCoeff();
    const Eigen::ArrayXd w = (log_w.array() - m).exp();
    const double mean = w.mean();
    McEstimate est;
    est.value = m + std::log(mean);
    if (num_samples > 1) {
        const double var = (w - mean).square().sum() / static_cast<double>(num_samples - 1);
        est.std_error = std::sqrt(var / static_cast<double>(num_samples)) / mean;
    }
    return est;
}

namespace {

std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace

std::string format_model_text(const ModelParams& params) {
    std::ostringstream out;
    out << params.num_items() << ' ' << params.dim() << '\n';
    for (Eigen::Index p = 0; p < params.psi.rows(); ++p) {
        for (Eigen::Index k = 0; k < params.psi.cols(); ++k) out << format_real(params.psi(p, k)) << ' ';
        out << format_real(params.rho(p)) << '\n';
    }
    return out.str();
}

ModelParams parse_model_text(const std::string& text) {
    std::istringstream in(text);
    long long p = 0, k = 0;
    if (!(in >> p >> k) || p < 1 || k < 1) throw ParseError(1, "model header must be 'P K' with P, K >= 1");
    Eigen::MatrixXd psi(p, k);
    Eigen::VectorXd rho(p);
    for (long long i = 0; i < p; ++i) {
        for (long long j = 0; j < k; ++j)
            if (!(in >> psi(i, j))) throw ParseError(static_cast<std::size_t>(i + 2), "expected K+1 reals");
        if (!(in >> rho(i))) throw ParseError(static_cast<std::size_t>(i + 2), "expected K+1 reals");
    }
    std::string rest;
    if (in >> rest) throw ParseError(static_cast<std::size_t>(p + 2), "trailing content after P rows");
    return ModelParams(std::move(psi), std::move(rho));
}

std::string format_model_json(const ModelParams& params) {
    nlohmann::json j;
    j["P"] = params.num_items();
    j["K"] = params.dim();
    auto rows = nlohmann::json::array();
    for (Eigen::Index p = 0; p < params.psi.rows(); ++p) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < params.psi.cols(); ++k) row.push_back(params.psi(p, k));
        rows.push_back(std::move(row));
    }
    j["psi"] = std::move(rows);
    j["rho"] = std::vector<double>(params.rho.data(), params.rho.data() + params.rho.size());
    return j.dump(1) + "\n";
}

ModelParams parse_model_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        const auto p = j.at("P").get<long long>();
        const auto k = j.at("K").get<long long>();
        if (p < 1 || k < 1) throw ParseError(1, "model needs P, K >= 1");
        const auto& rows = j.at("psi");
        const auto& rho_j = j.at("rho");
        if (static_cast<long long>(rows.size()) != p || static_cast<long long>(rho_j.size()) != p)
            throw ParseError(1, "psi/rho length does not match P");
        Eigen::MatrixXd psi(p, k);
        Eigen::VectorXd rho(p);
        for (long long i = 0; i < p; ++i) {
            if (static_cast<long long>(rows[i].size()) != k) throw ParseError(1, "psi row length does not match K");
            for (long long c = 0; c < k; ++c) psi(i, c) = rows[i][c].get<double>();
            rho(i) = rho_j[i].get<double>();
        }
        return ModelParams(std::move(psi), std::move(rho));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(1, std::string("invalid model JSON: ") + e.what());
    }
}

void save_model(const ModelParams& params, const std::filesystem::path& path, ModelFormat format) {
    detail::write_file(path, format == ModelFormat::json ? format_model_json(params) : format_model_text(params));
}

ModelParams load_model(const std::filesystem::path& path) {
    const auto text = detail::read_file(path);
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && text[first] == '{') return parse_model_json(text);
    return parse_model_text(text);
}

}  // namespace lvsr
