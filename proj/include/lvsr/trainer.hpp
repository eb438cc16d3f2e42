#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lvsr/data.hpp"
#include "lvsr/encoder.hpp"
#include "lvsr/model.hpp"

namespace lvsr {

enum class BoundKind { bouchard, reparam };

std::string_view to_string(BoundKind kind);
BoundKind bound_kind_from_string(std::string_view name);

struct TrainConfig {
    BoundKind bound = BoundKind::bouchard;
    EncoderKind encoder_kind = EncoderKind::linear_bouchard;
    std::size_t dim = 10;
    int epochs = 100;
    double learning_rate = 0.001;
    double l2 = 0.0;
    std::size_t batch_size = 10;
    std::size_t mc_samples = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-8;

    void validate() const;
};

/// Gradient (or RMSProp accumulator) with the shapes of (params, encoder).
struct ParameterSet {
    Eigen::MatrixXd psi;
    Eigen::VectorXd rho;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    static ParameterSet zeros_like(const ModelParams& params, const Encoder& encoder);
    ParameterSet& operator+=(const ParameterSet& other);
    ParameterSet& operator*=(double s);
    bool all_finite() const;
};

struct ObjectiveGradient {
    double objective = 0.0;
    ParameterSet gradient;
};

/// Per-session training objective. Bouchard mode evaluates the analytic bound
/// at the encoder output; reparam mode averages the noisy bound over the rows
/// of `noise` (S x K standard normal draws). Both subtract
/// l2 * (|psi|^2 + encoder weight norms).
double session_objective(const ModelParams& params, const Encoder& encoder, std::span<const ItemId> views,
                         const TrainConfig& cfg, const Eigen::MatrixXd& noise);

/// Objective plus its exact gradient w.r.t. psi, rho and every encoder weight,
/// by reverse accumulation through the bound and the encoder.
ObjectiveGradient gradients(const ModelParams& params, const Encoder& encoder, std::span<const ItemId> views,
                            const TrainConfig& cfg, const Eigen::MatrixXd& noise);

/// RMSProp ascent: acc <- decay acc + (1 - decay) g^2; theta += lr g / (sqrt(acc) + eps).
class RmsProp {
public:
    RmsProp(const ModelParams& params, const Encoder& encoder, double learning_rate, double decay, double epsilon);

    void step(ModelParams& params, Encoder& encoder, const ParameterSet& gradient);
    const ParameterSet& accumulators() const noexcept { return acc_; }

private:
    ParameterSet acc_;
    double lr_;
    double decay_;
    double eps_;
};

struct TrainResult {
    ModelParams params;
    Encoder encoder;
    std::vector<double> loss_curve;  ///< mean session objective per epoch
};

using EpochCallback = std::function<void(int epoch, double objective)>;

/// Initial state used by train(): psi ~ N(0, 0.01^2), rho = log of smoothed
/// empirical item frequencies, encoder from init_encoder.
TrainResult initial_state(const SessionSet& data, const TrainConfig& cfg);

TrainResult train(const SessionSet& data, const TrainConfig& cfg, const EpochCallback& on_epoch = {});

}  // namespace lvsr
