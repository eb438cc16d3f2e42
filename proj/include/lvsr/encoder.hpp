#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "lvsr/bouchard.hpp"
#include "lvsr/data.hpp"
#include "lvsr/model.hpp"

namespace lvsr {

enum class EncoderKind { linear_bouchard, linear_gaussian, deep_gaussian };

std::string_view to_string(EncoderKind kind);
EncoderKind encoder_kind_from_string(std::string_view name);

enum class Activation { identity, relu };

/// Dense layer y = W^T x + b, with W stored in x out.
struct Layer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
    Activation activation = Activation::identity;

    Eigen::Index inputs() const { return weight.rows(); }
    Eigen::Index outputs() const { return weight.cols(); }
};

/// Amortized posterior map from a session's raw count vector. The last layer
/// is the head: [mean (K), log-variance (K)] followed, for linear_bouchard,
/// by [xi pre-activation (P), a (1)].
struct Encoder {
    EncoderKind kind = EncoderKind::linear_gaussian;
    std::size_t num_items = 0;
    std::size_t dim = 0;
    std::vector<Layer> layers;

    std::size_t head_size() const;
    void validate() const;
};

struct Encoding {
    Posterior q;
    std::optional<BouchardState> state;
};

/// Forward pass keeping every layer's pre-activation and output, for backprop.
struct ForwardTrace {
    std::vector<Eigen::VectorXd> inputs;          ///< input to each layer
    std::vector<Eigen::VectorXd> pre_activations;  ///< W^T x + b per layer
    Eigen::VectorXd head;                          ///< final output
};

ForwardTrace forward(const Encoder& e, const Eigen::VectorXd& counts);

/// Interprets the head output: variance = exp(log-variance), xi = softplus.
Encoding decode_head(const Encoder& e, const Eigen::VectorXd& head);

Encoding encode(const Encoder& e, const Eigen::VectorXd& counts);
Encoding encode(const Encoder& e, const CountVector& counts);

/// Weights ~ N(0, 0.01^2), biases 0, so the initial output is near the prior.
Encoder init_encoder(EncoderKind kind, std::size_t num_items, std::size_t dim, std::uint64_t seed);

/// Sum of squared weights (biases excluded).
double weight_norm_squared(const Encoder& e);

std::string format_encoder_json(const Encoder& e);
Encoder parse_encoder_json(const std::string& text);
void save_encoder(const Encoder& e, const std::filesystem::path& path);
Encoder load_encoder(const std::filesystem::path& path);

}  // namespace lvsr
