#include <cmath>

#include "doctest.h"
#include "lvsr/bouchard.hpp"
#include "lvsr/error.hpp"
#include "lvsr/predictor.hpp"
#include "lvsr/simulator.hpp"

using namespace lvsr;

TEST_CASE("length spec parsing") {
    CHECK(LengthSpec::parse("12").kind == LengthSpec::Kind::fixed);
    CHECK(LengthSpec::parse("12").value == 12.0);
    const auto p = LengthSpec::parse("poisson:9.5");
    CHECK(p.kind == LengthSpec::Kind::poisson);
    CHECK(p.value == 9.5);
    CHECK(LengthSpec::parse(p.to_string()).value == 9.5);
    CHECK_THROWS_AS(LengthSpec::parse("0"), ArgumentError);
    CHECK_THROWS_AS(LengthSpec::parse("2.5"), ArgumentError);
    CHECK_THROWS_AS(LengthSpec::parse("poisson:-1"), ArgumentError);
    CHECK_THROWS_AS(LengthSpec::parse("ten"), ArgumentError);
}

TEST_CASE("uniform model gives uniform item frequencies") {
    GroundTruth gt{ModelParams::zeros(5, 2), 3};
    const auto data = simulate(gt, 2000, LengthSpec::parse("5"));
    std::vector<double> freq(5, 0.0);
    for (const auto& s : data)
        for (auto v : s.views) freq[static_cast<std::size_t>(v)] += 1.0;
    const double n = 10000.0, sigma = std::sqrt(0.2 * 0.8 / n);
    for (double f : freq) CHECK(std::abs(f / n - 0.2) < 4 * sigma);
}

TEST_CASE("popularity offset sets item frequencies") {
    Eigen::VectorXd rho(2);
    rho << std::log(3.0), 0.0;
    GroundTruth gt{ModelParams(Eigen::MatrixXd::Zero(2, 1), rho), 5};
    const auto data = simulate(gt, 1000, LengthSpec::parse("4"));
    double first = 0.0;
    for (const auto& s : data)
        for (auto v : s.views) first += v == 0;
    const double n = 4000.0;
    CHECK(std::abs(first / n - 0.75) < 4 * std::sqrt(0.75 * 0.25 / n));
}

TEST_CASE("simulation is reproducible and session-indexed") {
    GroundTruth gt{random_ground_truth(10, 3, 7), 7};
    const auto a = simulate(gt, 50, LengthSpec::parse("poisson:4"));
    const auto b = simulate(gt, 80, LengthSpec::parse("poisson:4"));
    for (std::size_t i = 0; i < 50; ++i) CHECK(a[i] == b[i]);
    CHECK(a[0].id == "s0");
    CHECK(simulate_session(gt, 13, LengthSpec::parse("poisson:4")).session == a[13]);
    gt.seed = 8;
    CHECK(!(simulate(gt, 50, LengthSpec::parse("poisson:4"))[0] == a[0]));
    CHECK(random_ground_truth(10, 3, 7).psi == random_ground_truth(10, 3, 7).psi);
}

TEST_CASE("poisson lengths are at least one with the expected mean") {
    GroundTruth gt{ModelParams::zeros(3, 1), 1};
    const auto data = simulate(gt, 4000, LengthSpec::parse("poisson:2.5"));
    double total = 0.0;
    for (const auto& s : data) {
        CHECK(s.length() >= 1);
        total += static_cast<double>(s.length());
    }
    CHECK(std::abs(total / 4000.0 - 3.5) < 4 * std::sqrt(2.5 / 4000.0));
}

TEST_CASE("views follow the softmax given the drawn latent vector") {
    // Pearson chi-square against softmax(psi omega + rho), one long session at
    // a time. With 7 degrees of freedom the 0.999 quantile is 24.32.
    GroundTruth gt{random_ground_truth(8, 3, 21, 0.7, 0.5), 21};
    int rejections = 0;
    for (std::size_t i = 0; i < 20; ++i) {
        const auto s = simulate_session(gt, i, LengthSpec::parse("5000"));
        const Eigen::VectorXd logits = gt.params.psi * s.omega + gt.params.rho;
        const Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
        const Eigen::VectorXd expected = 5000.0 * e / e.sum();
        Eigen::VectorXd observed = Eigen::VectorXd::Zero(8);
        for (auto v : s.session.views) observed(v) += 1.0;
        const double chi2 = ((observed - expected).array().square() / expected.array()).sum();
        rejections += chi2 > 24.32;
    }
    CHECK(rejections <= 1);
}

TEST_CASE("case study fixture") {
    const auto cs = case_study_fixture();
    REQUIRE(cs.truth.params.num_items() == 7);
    REQUIRE(cs.truth.params.dim() == 5);
    Eigen::MatrixXd psi(7, 5);
    psi << .9, .05, 0, .05, 0, 1, 0, 0, 0, 0, 0, .95, 0, .1, 0, 0, 1, 0, 0, 0, 0, .2, .7, 0, 0, 0, 0, 0, 1, -1, 0, 0,
        0, -1, 1;
    CHECK(cs.truth.params.psi == psi);
    CHECK(cs.truth.params.rho.isZero(0.0));
    CHECK(cs.labels.size() == 7);
    CHECK(cs.labels[0] == "Sleek Phone");
    CHECK(cs.labels[6] == "Men's shirt");
    CHECK(case_study_scenarios().size() == 4);
}

namespace {

double phone_mass(const Eigen::VectorXd& p) {
    return p(case_study_items::sleek_phone) + p(case_study_items::city_phone);
}

}  // namespace

TEST_CASE("case study posterior behaviour") {
    const auto cs = case_study_fixture();
    const auto& params = cs.truth.params;
    const auto scenarios = case_study_scenarios();
    std::vector<EmResult> fits;
    std::vector<Eigen::VectorXd> preds;
    for (const auto& sc : scenarios) {
        fits.push_back(em_infer(params, sc.history, kDefaultEmIterations));
        preds.push_back(predict_mc(params, fits.back().q, 100000, 1));
    }

    Eigen::Index top_topic = -1;
    fits[0].q.mean().maxCoeff(&top_topic);
    CHECK(top_topic == 0);
    auto top = top_k(preds[0], 2);
    std::sort(top.begin(), top.end());
    CHECK(top == std::vector<ItemId>{case_study_items::sleek_phone, case_study_items::city_phone});

    CHECK(fits[1].q.trace() < fits[0].q.trace());
    CHECK(fits[2].q.trace() < fits[1].q.trace());
    CHECK(phone_mass(preds[2]) > phone_mass(preds[0]));

    const auto prior = predict_mc(params, Posterior::standard(5), 100000, 1);
    CHECK(preds[3](case_study_items::mens_shirt) < prior(case_study_items::mens_shirt));
}
