#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "lvsr/encoder.hpp"
#include "lvsr/error.hpp"

using namespace lvsr;

namespace {

Encoder zero_encoder(EncoderKind kind, std::size_t p, std::size_t k) {
    Encoder e = init_encoder(kind, p, k, 0);
    for (auto& l : e.layers) {
        l.weight.setZero();
        l.bias.setZero();
    }
    return e;
}

}  // namespace

TEST_CASE("zero encoder outputs the prior") {
    for (auto kind : {EncoderKind::linear_bouchard, EncoderKind::linear_gaussian, EncoderKind::deep_gaussian}) {
        const auto e = zero_encoder(kind, 6, 3);
        const auto out = encode(e, CountVector{1, 0, 2, 0, 0, 4});
        CHECK(out.q.kind() == CovarianceKind::diagonal);
        CHECK(out.q.mean().norm() == 0.0);
        CHECK((out.q.variances().array() == 1.0).all());
        CHECK(out.state.has_value() == (kind == EncoderKind::linear_bouchard));
        if (out.state) {
            CHECK(out.state->a == 0.0);
            CHECK((out.state->xi.array() - std::log(2.0)).abs().maxCoeff() < 1e-15);
        }
    }
}

TEST_CASE("encode is a deterministic function of the counts") {
    std::mt19937_64 rng(1);
    const auto e = init_encoder(EncoderKind::deep_gaussian, 8, 4, 3);
    std::vector<ItemId> views{1, 4, 4, 7, 0, 1};
    const auto a = encode(e, to_counts(views, 8));
    std::shuffle(views.begin(), views.end(), rng);
    const auto b = encode(e, to_counts(views, 8));
    CHECK(a.q.mean() == b.q.mean());
    CHECK(a.q.variances() == b.q.variances());
}

TEST_CASE("initialization is near the prior and reproducible") {
    for (auto kind : {EncoderKind::linear_bouchard, EncoderKind::linear_gaussian, EncoderKind::deep_gaussian}) {
        const auto e = init_encoder(kind, 30, 5, 42);
        const auto out = encode(e, CountVector(30, 0));
        CHECK(out.q.mean().cwiseAbs().maxCoeff() < 0.1);
        CHECK(out.q.variances().minCoeff() >= 0.8);
        CHECK(out.q.variances().maxCoeff() <= 1.25);

        const auto again = init_encoder(kind, 30, 5, 42);
        for (std::size_t i = 0; i < e.layers.size(); ++i) {
            CHECK(e.layers[i].weight == again.layers[i].weight);
            CHECK(e.layers[i].bias == again.layers[i].bias);
        }
        CHECK(init_encoder(kind, 30, 5, 43).layers[0].weight != e.layers[0].weight);
    }
}

TEST_CASE("deep encoder layer shapes") {
    const auto e = init_encoder(EncoderKind::deep_gaussian, 100, 10, 0);
    REQUIRE(e.layers.size() == 4);
    const std::pair<Eigen::Index, Eigen::Index> shapes[] = {{100, 10}, {10, 10}, {10, 10}, {10, 20}};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(e.layers[i].inputs() == shapes[i].first);
        CHECK(e.layers[i].outputs() == shapes[i].second);
        CHECK(e.layers[i].activation == (i < 3 ? Activation::relu : Activation::identity));
    }
    CHECK(init_encoder(EncoderKind::linear_bouchard, 7, 3, 0).layers[0].outputs() == 2 * 3 + 7 + 1);
    CHECK(init_encoder(EncoderKind::linear_gaussian, 7, 3, 0).layers[0].outputs() == 6);
}

TEST_CASE("variances stay positive and xi non-negative for large inputs") {
    std::mt19937_64 rng(5);
    auto e = init_encoder(EncoderKind::linear_bouchard, 10, 3, 5);
    e.layers[0].weight *= 50.0;
    for (int trial = 0; trial < 50; ++trial) {
        CountVector c(10);
        for (auto& x : c) x = static_cast<std::int64_t>(rng() % 5);
        const auto out = encode(e, c);
        CHECK(out.q.variances().minCoeff() > 0.0);
        CHECK(out.state->xi.minCoeff() >= 0.0);
    }
}

TEST_CASE("encoder JSON round trip") {
    for (auto kind : {EncoderKind::linear_bouchard, EncoderKind::deep_gaussian}) {
        const auto e = init_encoder(kind, 12, 4, 9);
        const auto back = parse_encoder_json(format_encoder_json(e));
        CHECK(back.kind == e.kind);
        REQUIRE(back.layers.size() == e.layers.size());
        for (std::size_t i = 0; i < e.layers.size(); ++i) {
            CHECK(back.layers[i].weight == e.layers[i].weight);
            CHECK(back.layers[i].bias == e.layers[i].bias);
            CHECK(back.layers[i].activation == e.layers[i].activation);
        }
    }
}

TEST_CASE("encoder errors") {
    const auto e = init_encoder(EncoderKind::linear_gaussian, 5, 2, 0);
    CHECK_THROWS_AS(encode(e, CountVector{1, 2}), ArgumentError);
    CHECK_THROWS_AS(init_encoder(EncoderKind::linear_gaussian, 0, 2, 0), ArgumentError);
    CHECK_THROWS_AS(encoder_kind_from_string("rnn"), ArgumentError);
    CHECK_THROWS_AS(parse_encoder_json("{\"kind\":\"linear_gaussian\",\"P\":2,\"K\":1,\"layers\":[]}"), ArgumentError);
    CHECK_THROWS_AS(parse_encoder_json("not json"), ParseError);
}
