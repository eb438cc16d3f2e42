#include "lvsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "lvsr/bouchard.hpp"
#include "lvsr/error.hpp"
#include "lvsr/random.hpp"
#include "parallel.hpp"

namespace lvsr {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kInitScale = 0.01;

enum Stream : std::uint64_t { kPsiInit = 1, kEncoderInit = 2, kShuffle = 3, kNoise = 4 };

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Eigen::VectorXd counts_vector(std::span<const ItemId> views, std::size_t num_items) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_items));
    for (auto v : views) {
        if (v < 0 || static_cast<std::size_t>(v) >= num_items)
            throw BoundsError("view " + std::to_string(v) + " outside catalog of " + std::to_string(num_items));
        c(v) += 1.0;
    }
    return c;
}

void check_inputs(const ModelParams& params, const Encoder& encoder, std::span<const ItemId> views,
                  const TrainConfig& cfg, const Eigen::MatrixXd& noise) {
    if (views.empty()) throw ArgumentError("training objective needs a non-empty session");
    if (encoder.num_items != params.num_items() || encoder.dim != params.dim())
        throw ArgumentError("encoder shape does not match model");
    if (cfg.bound == BoundKind::bouchard && encoder.kind != EncoderKind::linear_bouchard)
        throw ArgumentError("bouchard bound requires a linear_bouchard encoder");
    if (cfg.bound == BoundKind::reparam &&
        (noise.rows() < 1 || noise.cols() != static_cast<Eigen::Index>(params.dim())))
        throw ArgumentError("reparameterized objective needs an S x K noise matrix with S >= 1");
}

double penalty(const ModelParams& params, const Encoder& encoder, double l2) {
    if (l2 == 0.0) return 0.0;
    return l2 * (params.psi.squaredNorm() + weight_norm_squared(encoder));
}

/// Noisy bound with the data term at the mean and the normalizer at samples.
double reparam_bound(const ModelParams& params, const Eigen::VectorXd& counts, const Posterior& q,
                     const Eigen::MatrixXd& noise) {
    const double length = counts.sum();
    const auto k = static_cast<double>(params.dim());
    const Eigen::VectorXd x = params.psi * q.mean() + params.rho;
    const Eigen::MatrixXd omega = q.transform(noise);
    double normalizer = 0.0;
    for (Eigen::Index s = 0; s < omega.rows(); ++s) {
        const Eigen::VectorXd logits = params.psi * omega.row(s).transpose() + params.rho;
        normalizer += log_sum_exp(logits);
    }
    normalizer /= static_cast<double>(omega.rows());
    return counts.dot(x) - length * normalizer - 0.5 * k * kLog2Pi - 0.5 * (q.mean().squaredNorm() + q.trace()) +
           0.5 * (k * (kLog2Pi + 1.0) + q.log_det());
}

}  // namespace

std::string_view to_string(BoundKind kind) { return kind == BoundKind::bouchard ? "bouchard" : "reparam"; }

BoundKind bound_kind_from_string(std::string_view name) {
    if (name == "bouchard") return BoundKind::bouchard;
    if (name == "reparam") return BoundKind::reparam;
    throw ArgumentError("unknown bound '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
    if (!(learning_rate > 0.0)) throw ArgumentError("learning rate must be positive");
    if (!(l2 >= 0.0)) throw ArgumentError("l2 must be non-negative");
    if (dim < 1) throw ArgumentError("embedding dimension must be >= 1");
    if (epochs < 0) throw ArgumentError("epochs must be >= 0");
    if (batch_size < 1) throw ArgumentError("batch size must be >= 1");
    if (bound == BoundKind::reparam && mc_samples < 1) throw ArgumentError("reparam mode needs mc_samples >= 1");
    if (bound == BoundKind::bouchard && encoder_kind != EncoderKind::linear_bouchard)
        throw ArgumentError("bouchard bound requires the linear_bouchard encoder");
    if (!(rmsprop_decay > 0.0 && rmsprop_decay < 1.0)) throw ArgumentError("RMSProp decay must lie in (0, 1)");
    if (!(rmsprop_epsilon > 0.0)) throw ArgumentError("RMSProp epsilon must be positive");
}

ParameterSet ParameterSet::zeros_like(const ModelParams& params, const Encoder& encoder) {
    ParameterSet g;
    g.psi = Eigen::MatrixXd::Zero(params.psi.rows(), params.psi.cols());
    g.rho = Eigen::VectorXd::Zero(params.rho.size());
    for (const auto& l : encoder.layers) {
        g.weights.push_back(Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()));
        g.biases.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return g;
}

ParameterSet& ParameterSet::operator+=(const ParameterSet& o) {
    psi += o.psi;
    rho += o.rho;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] += o.weights[i];
        biases[i] += o.biases[i];
    }
    return *this;
}

ParameterSet& ParameterSet::operator*=(double s) {
    psi *= s;
    rho *= s;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        weights[i] *= s;
        biases[i] *= s;
    }
    return *this;
}

bool ParameterSet::all_finite() const {
    if (!psi.allFinite() || !rho.allFinite()) return false;
    for (std::size_t i = 0; i < weights.size(); ++i)
        if (!weights[i].allFinite() || !biases[i].allFinite()) return false;
    return true;
}

double session_objective(const ModelParams& params, const Encoder& encoder, std::span<const ItemId> views,
                         const TrainConfig& cfg, const Eigen::MatrixXd& noise) {
    check_inputs(params, encoder, views, cfg, noise);
    const Eigen::VectorXd counts = counts_vector(views, params.num_items());
    const Encoding enc = encode(encoder, counts);
    const double bound = cfg.bound == BoundKind::bouchard ? bouchard_bound(params, counts, enc.q, *enc.state)
                                                          : reparam_bound(params, counts, enc.q, noise);
    return bound - penalty(params, encoder, cfg.l2);
}

ObjectiveGradient gradients(const ModelParams& params, const Encoder& encoder, std::span<const ItemId> views,
                            const TrainConfig& cfg, const Eigen::MatrixXd& noise) {
    check_inputs(params, encoder, views, cfg, noise);
    const Eigen::VectorXd counts = counts_vector(views, params.num_items());
    const double length = counts.sum();
    const auto P = params.psi.rows();
    const auto K = params.psi.cols();
    const double kd = static_cast<double>(K);

    const ForwardTrace trace = forward(encoder, counts);
    const Eigen::VectorXd& head = trace.head;
    const Eigen::VectorXd mu = head.head(K);
    const Eigen::VectorXd var = head.segment(K, K).array().exp();
    if (!var.allFinite() || var.minCoeff() <= 0.0) throw NumericError("encoder variance overflow");

    ObjectiveGradient out{0.0, ParameterSet::zeros_like(params, encoder)};
    Eigen::VectorXd d_head = Eigen::VectorXd::Zero(head.size());
    Eigen::VectorXd d_mu, d_var;

    const Eigen::VectorXd x = params.psi * mu + params.rho;
    const double gaussian = -0.5 * kd * kLog2Pi - 0.5 * (mu.squaredNorm() + var.sum()) +
                            0.5 * (kd * (kLog2Pi + 1.0) + var.array().log().sum());

    if (cfg.bound == BoundKind::bouchard) {
        const Eigen::VectorXd xi_pre = head.segment(2 * K, P);
        const Eigen::VectorXd xi = xi_pre.unaryExpr([](double v) {
            return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v));
        });
        const double a = head(2 * K + P);
        const Eigen::VectorXd d = x.array() - a;
        const Eigen::MatrixXd psi_sq = params.psi.cwiseAbs2();
        const Eigen::VectorXd v = psi_sq * var;

        double majorizer = a;
        Eigen::VectorXd lam(P), g_x(P), g_xi(P);
        double sum_lam_d = 0.0;
        for (Eigen::Index p = 0; p < P; ++p) {
            lam(p) = lambda_jj(xi(p));
            const double sp = xi(p) > 0 ? xi(p) + std::log1p(std::exp(-xi(p))) : std::log1p(std::exp(xi(p)));
            const double inner = d(p) * d(p) + v(p) - xi(p) * xi(p);
            majorizer += 0.5 * (d(p) - xi(p)) + lam(p) * inner + sp;
            g_x(p) = counts(p) - length * (0.5 + 2.0 * lam(p) * d(p));
            g_xi(p) = -length * (-0.5 + lambda_jj_derivative(xi(p)) * inner - 2.0 * lam(p) * xi(p) + sigmoid(xi(p)));
            sum_lam_d += lam(p) * d(p);
        }
        out.objective = counts.dot(x) - length * majorizer + gaussian;

        const double g_a = -length * (1.0 - 0.5 * static_cast<double>(P) - 2.0 * sum_lam_d);
        const Eigen::VectorXd g_v = -length * lam;

        d_mu = params.psi.transpose() * g_x - mu;
        d_var = psi_sq.transpose() * g_v;
        d_var.array() += -0.5 + 0.5 / var.array();

        out.gradient.rho = g_x;
        out.gradient.psi = g_x * mu.transpose();
        out.gradient.psi += 2.0 * (g_v.asDiagonal() * params.psi) * var.asDiagonal();

        d_head.segment(2 * K, P) = g_xi.cwiseProduct(xi_pre.unaryExpr([](double t) { return sigmoid(t); }));
        d_head(2 * K + P) = g_a;
    } else {
        const Eigen::VectorXd sd = var.cwiseSqrt();
        const auto S = noise.rows();
        double normalizer = 0.0;
        Eigen::VectorXd g_omega_eps = Eigen::VectorXd::Zero(K);  // sum_s g_omega * eps
        Eigen::VectorXd g_omega_sum = Eigen::VectorXd::Zero(K);
        Eigen::VectorXd pi_sum = Eigen::VectorXd::Zero(P);
        Eigen::MatrixXd pi_omega = Eigen::MatrixXd::Zero(P, K);
        for (Eigen::Index s = 0; s < S; ++s) {
            const Eigen::VectorXd eps = noise.row(s).transpose();
            const Eigen::VectorXd omega = mu + sd.cwiseProduct(eps);
            const Eigen::VectorXd logits = params.psi * omega + params.rho;
            const double lse = log_sum_exp(logits);
            normalizer += lse;
            const Eigen::VectorXd pi = (logits.array() - lse).exp();
            const Eigen::VectorXd g_omega = -length * (params.psi.transpose() * pi);
            g_omega_sum += g_omega;
            g_omega_eps += g_omega.cwiseProduct(eps);
            pi_sum += pi;
            pi_omega += pi * omega.transpose();
        }
        const double inv_s = 1.0 / static_cast<double>(S);
        out.objective = counts.dot(x) - length * normalizer * inv_s + gaussian;

        out.gradient.rho = counts - length * inv_s * pi_sum;
        out.gradient.psi = counts * mu.transpose() - length * inv_s * pi_omega;
        d_mu = params.psi.transpose() * counts + inv_s * g_omega_sum - mu;
        d_var = (inv_s * g_omega_eps).cwiseQuotient(2.0 * sd);
        d_var.array() += -0.5 + 0.5 / var.array();
    }

    d_head.head(K) = d_mu;
    d_head.segment(K, K) = d_var.cwiseProduct(var);

    Eigen::VectorXd upstream = d_head;
    for (std::size_t i = encoder.layers.size(); i-- > 0;) {
        const auto& layer = encoder.layers[i];
        Eigen::VectorXd dz = upstream;
        if (layer.activation == Activation::relu)
            dz = dz.cwiseProduct((trace.pre_activations[i].array() > 0.0).cast<double>().matrix());
        out.gradient.weights[i] = trace.inputs[i] * dz.transpose();
        out.gradient.biases[i] = dz;
        if (i > 0) upstream = layer.weight * dz;
    }

    if (cfg.l2 != 0.0) {
        out.objective -= penalty(params, encoder, cfg.l2);
        out.gradient.psi -= 2.0 * cfg.l2 * params.psi;
        for (std::size_t i = 0; i < encoder.layers.size(); ++i)
            out.gradient.weights[i] -= 2.0 * cfg.l2 * encoder.layers[i].weight;
    }
    if (!std::isfinite(out.objective) || !out.gradient.all_finite())
        throw NumericError("non-finite objective or gradient");
    return out;
}

RmsProp::RmsProp(const ModelParams& params, const Encoder& encoder, double learning_rate, double decay,
                 double epsilon)
    : acc_(ParameterSet::zeros_like(params, encoder)), lr_(learning_rate), decay_(decay), eps_(epsilon) {}

void RmsProp::step(ModelParams& params, Encoder& encoder, const ParameterSet& g) {
    auto update = [this](auto& theta, auto& acc, const auto& grad) {
        acc = decay_ * acc + (1.0 - decay_) * grad.cwiseAbs2();
        theta.array() += lr_ * grad.array() / (acc.array().sqrt() + eps_);
    };
    update(params.psi, acc_.psi, g.psi);
    update(params.rho, acc_.rho, g.rho);
    for (std::size_t i = 0; i < encoder.layers.size(); ++i) {
        update(encoder.layers[i].weight, acc_.weights[i], g.weights[i]);
        update(encoder.layers[i].bias, acc_.biases[i], g.biases[i]);
    }
}

TrainResult initial_state(const SessionSet& data, const TrainConfig& cfg) {
    cfg.validate();
    const std::size_t p = data.num_items();
    if (p < 1) throw ArgumentError("catalog is empty");

    auto rng = make_rng(cfg.seed, {kPsiInit});
    std::normal_distribution<double> normal(0.0, kInitScale);
    Eigen::MatrixXd psi(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(cfg.dim));
    for (Eigen::Index i = 0; i < psi.rows(); ++i)
        for (Eigen::Index k = 0; k < psi.cols(); ++k) psi(i, k) = normal(rng);

    Eigen::VectorXd freq = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(p));
    for (const auto& s : data)
        for (auto v : s.views) freq(v) += 1.0;
    Eigen::VectorXd rho = (freq / freq.sum()).array().log();

    return TrainResult{ModelParams(std::move(psi), std::move(rho)),
                       init_encoder(cfg.encoder_kind, p, cfg.dim, make_rng(cfg.seed, {kEncoderInit})()), {}};
}

TrainResult train(const SessionSet& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
    cfg.validate();
    if (data.empty()) throw ArgumentError("training set is empty");
    for (const auto& s : data)
        if (s.views.empty()) throw ArgumentError("session '" + s.id + "' is empty; empty sessions cannot be trained on");

    TrainResult result = initial_state(data, cfg);
    ModelParams& params = result.params;
    Encoder& encoder = result.encoder;
    RmsProp optimizer(params, encoder, cfg.learning_rate, cfg.rmsprop_decay, cfg.rmsprop_epsilon);

    auto shuffle_rng = make_rng(cfg.seed, {kShuffle});
    auto noise_rng = make_rng(cfg.seed, {kNoise});
    const auto k = static_cast<Eigen::Index>(cfg.dim);
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    std::vector<Eigen::MatrixXd> noise(cfg.batch_size);
    std::vector<ObjectiveGradient> slots(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double epoch_total = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const std::size_t m = std::min(cfg.batch_size, n - start);
            for (std::size_t j = 0; j < m; ++j)
                noise[j] = cfg.bound == BoundKind::reparam
                               ? standard_normal(static_cast<Eigen::Index>(cfg.mc_samples), k, noise_rng)
                               : Eigen::MatrixXd();
            try {
                detail::parallel_for(m, cfg.threads, [&](std::size_t j) {
                    const auto& s = data[order[start + j]];
                    try {
                        slots[j] = gradients(params, encoder, s.views, cfg, noise[j]);
                    } catch (const NumericError& e) {
                        throw NumericError("session '" + s.id + "': " + e.what());
                    }
                });
            } catch (const NumericError& e) {
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ": " + e.what());
            }
            ParameterSet total = std::move(slots[0].gradient);
            double batch_objective = slots[0].objective;
            for (std::size_t j = 1; j < m; ++j) {
                total += slots[j].gradient;
                batch_objective += slots[j].objective;
            }
            total *= 1.0 / static_cast<double>(m);
            epoch_total += batch_objective;
            optimizer.step(params, encoder, total);
            if (!params.psi.allFinite() || !params.rho.allFinite())
                throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ": parameters became non-finite");
        }
        const double mean = epoch_total / static_cast<double>(n);
        if (!std::isfinite(mean))
            throw NumericError("non-finite objective at epoch " + std::to_string(epoch));
        result.loss_curve.push_back(mean);
        if (on_epoch) on_epoch(epoch, mean);
    }
    return result;
}

}  // namespace lvsr
