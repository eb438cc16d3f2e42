#include "lvsr/encoder.hpp"

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "io_util.hpp"
#include "lvsr/error.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

namespace {

constexpr double kInitScale = 0.01;

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(std::string_view s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw ParseError(1, "unknown activation '" + std::string(s) + "'");
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::linear_bouchard: return "linear_bouchard";
        case EncoderKind::linear_gaussian: return "linear_gaussian";
        case EncoderKind::deep_gaussian: return "deep_gaussian";
    }
    return "unknown";
}

EncoderKind encoder_kind_from_string(std::string_view name) {
    if (name == "linear_bouchard") return EncoderKind::linear_bouchard;
    if (name == "linear_gaussian") return EncoderKind::linear_gaussian;
    if (name == "deep_gaussian") return EncoderKind::deep_gaussian;
    throw ArgumentError("unknown encoder kind '" + std::string(name) + "'");
}

std::size_t Encoder::head_size() const {
    return kind == EncoderKind::linear_bouchard ? 2 * dim + num_items + 1 : 2 * dim;
}

void Encoder::validate() const {
    if (num_items < 1 || dim < 1) throw ArgumentError("encoder needs P, K >= 1");
    const std::size_t expected_layers = kind == EncoderKind::deep_gaussian ? 4 : 1;
    if (layers.size() != expected_layers)
        throw ArgumentError(std::string(to_string(kind)) + " encoder needs " + std::to_string(expected_layers) +
                            " layers, got " + std::to_string(layers.size()));
    Eigen::Index width = static_cast<Eigen::Index>(num_items);
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.inputs() != width) throw ArgumentError("layer " + std::to_string(i) + " input width mismatch");
        if (l.bias.size() != l.outputs()) throw ArgumentError("layer " + std::to_string(i) + " bias size mismatch");
        const bool last = i + 1 == layers.size();
        if (!last && (l.outputs() != static_cast<Eigen::Index>(dim) || l.activation != Activation::relu))
            throw ArgumentError("hidden layers must be K rectifier units");
        if (last && l.activation != Activation::identity) throw ArgumentError("head layer must be linear");
        if (!l.weight.allFinite() || !l.bias.allFinite()) throw NumericError("encoder weights are not finite");
        width = l.outputs();
    }
    if (width != static_cast<Eigen::Index>(head_size())) throw ArgumentError("encoder head has the wrong size");
}

ForwardTrace forward(const Encoder& e, const Eigen::VectorXd& counts) {
    if (counts.size() != static_cast<Eigen::Index>(e.num_items))
        throw ArgumentError("count vector has " + std::to_string(counts.size()) + " entries, encoder expects " +
                            std::to_string(e.num_items));
    ForwardTrace tr;
    tr.inputs.reserve(e.layers.size());
    tr.pre_activations.reserve(e.layers.size());
    Eigen::VectorXd x = counts;
    for (const auto& l : e.layers) {
        tr.inputs.push_back(x);
        Eigen::VectorXd z = l.weight.transpose() * x + l.bias;
        x = l.activation == Activation::relu ? Eigen::VectorXd(z.cwiseMax(0.0)) : z;
        tr.pre_activations.push_back(std::move(z));
    }
    tr.head = std::move(x);
    return tr;
}

Encoding decode_head(const Encoder& e, const Eigen::VectorXd& head) {
    const auto k = static_cast<Eigen::Index>(e.dim);
    Eigen::VectorXd variances = head.segment(k, k).array().exp();
    Encoding out{Posterior::diagonal(head.head(k), std::move(variances)), std::nullopt};
    if (e.kind == EncoderKind::linear_bouchard) {
        const auto p = static_cast<Eigen::Index>(e.num_items);
        BouchardState b;
        b.xi = head.segment(2 * k, p).unaryExpr([](double v) { return softplus(v); });
        b.a = head(2 * k + p);
        out.state = std::move(b);
    }
    return out;
}

Encoding encode(const Encoder& e, const Eigen::VectorXd& counts) { return decode_head(e, forward(e, counts).head); }

Encoding encode(const Encoder& e, const CountVector& counts) {
    Eigen::VectorXd c(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) c(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]);
    return encode(e, c);
}

Encoder init_encoder(EncoderKind kind, std::size_t num_items, std::size_t dim, std::uint64_t seed) {
    if (num_items < 1 || dim < 1) throw ArgumentError("encoder needs P, K >= 1");
    Encoder e{kind, num_items, dim, {}};
    auto rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    // Hidden ReLU layers use He scaling; at a uniformly tiny scale the deep
    // encoder starts at a saddle where no gradient reaches Psi.
    auto make_layer = [&](Eigen::Index in, Eigen::Index out, Activation act) {
        const double scale = act == Activation::relu ? std::sqrt(2.0 / static_cast<double>(in)) : kInitScale;
        Layer l{Eigen::MatrixXd(in, out), Eigen::VectorXd::Zero(out), act};
        for (Eigen::Index i = 0; i < in; ++i)
            for (Eigen::Index j = 0; j < out; ++j) l.weight(i, j) = scale * normal(rng);
        return l;
    };
    const auto p = static_cast<Eigen::Index>(num_items);
    const auto k = static_cast<Eigen::Index>(dim);
    const auto head = static_cast<Eigen::Index>(e.head_size());
    if (kind == EncoderKind::deep_gaussian) {
        e.layers.push_back(make_layer(p, k, Activation::relu));
        e.layers.push_back(make_layer(k, k, Activation::relu));
        e.layers.push_back(make_layer(k, k, Activation::relu));
        e.layers.push_back(make_layer(k, head, Activation::identity));
    } else {
        e.layers.push_back(make_layer(p, head, Activation::identity));
    }
    return e;
}

double weight_norm_squared(const Encoder& e) {
    double total = 0.0;
    for (const auto& l : e.layers) total += l.weight.squaredNorm();
    return total;
}

std::string format_encoder_json(const Encoder& e) {
    nlohmann::json j;
    j["kind"] = std::string(to_string(e.kind));
    j["P"] = e.num_items;
    j["K"] = e.dim;
    auto layers = nlohmann::json::array();
    for (const auto& l : e.layers) {
        nlohmann::json lj;
        lj["shape"] = {l.inputs(), l.outputs()};
        lj["activation"] = std::string(to_string(l.activation));
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(l.weight.size()));
        for (Eigen::Index i = 0; i < l.inputs(); ++i)
            for (Eigen::Index o = 0; o < l.outputs(); ++o) w.push_back(l.weight(i, o));
        lj["weights"] = std::move(w);
        lj["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j.dump() + "\n";
}

Encoder parse_encoder_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        Encoder e;
        e.kind = encoder_kind_from_string(j.at("kind").get<std::string>());
        e.num_items = j.at("P").get<std::size_t>();
        e.dim = j.at("K").get<std::size_t>();
        for (const auto& lj : j.at("layers")) {
            const auto in = lj.at("shape").at(0).get<Eigen::Index>();
            const auto out = lj.at("shape").at(1).get<Eigen::Index>();
            const auto w = lj.at("weights").get<std::vector<double>>();
            const auto b = lj.at("bias").get<std::vector<double>>();
            if (static_cast<Eigen::Index>(w.size()) != in * out || static_cast<Eigen::Index>(b.size()) != out)
                throw ParseError(1, "layer arrays do not match declared shape");
            Layer l{Eigen::MatrixXd(in, out), Eigen::VectorXd(out),
                    activation_from_string(lj.at("activation").get<std::string>())};
            for (Eigen::Index i = 0; i < in; ++i)
                for (Eigen::Index o = 0; o < out; ++o) l.weight(i, o) = w[static_cast<std::size_t>(i * out + o)];
            for (Eigen::Index o = 0; o < out; ++o) l.bias(o) = b[static_cast<std::size_t>(o)];
            e.layers.push_back(std::move(l));
        }
        e.validate();
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(1, std::string("invalid encoder JSON: ") + ex.what());
    }
}

void save_encoder(const Encoder& e, const std::filesystem::path& path) {
    detail::write_file(path, format_encoder_json(e));
}

Encoder load_encoder(const std::filesystem::path& path) { return parse_encoder_json(detail::read_file(path)); }

}  // namespace lvsr
