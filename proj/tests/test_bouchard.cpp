#include <cmath>
#include <random>

#include "doctest.h"
#include "lvsr/bouchard.hpp"
#include "lvsr/error.hpp"
#include "lvsr/random.hpp"
#include "oracles.hpp"

using namespace lvsr;

namespace {

ModelParams random_params(std::size_t p, std::size_t k, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Eigen::MatrixXd psi(p, k);
    Eigen::VectorXd rho(p);
    for (std::size_t i = 0; i < p; ++i) {
        for (std::size_t j = 0; j < k; ++j) psi(i, j) = n(rng);
        rho(i) = n(rng);
    }
    return ModelParams(psi, rho);
}

std::vector<ItemId> random_views(std::size_t t, std::size_t p, std::mt19937_64& rng) {
    std::vector<ItemId> v(t);
    for (auto& x : v) x = static_cast<ItemId>(rng() % p);
    return v;
}

Eigen::VectorXd counts(const std::vector<ItemId>& views, std::size_t p) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(p);
    for (auto v : views) c(v) += 1;
    return c;
}

long double lambda_reference(long double xi) { return (1.0L / (2.0L * xi)) * (1.0L / (1.0L + std::exp(-xi)) - 0.5L); }

}  // namespace

TEST_CASE("lambda_jj values") {
    CHECK(lambda_jj(0.0) == 0.125);
    CHECK(std::abs(lambda_jj(1.0) - 0.1155) < 1e-4);
    CHECK(std::abs(lambda_jj(1.0) - static_cast<double>(lambda_reference(1.0L))) < 1e-15);
    CHECK(lambda_jj(-1.0) == lambda_jj(1.0));
    CHECK(std::abs(lambda_jj(1e-8) - 0.125) < 1e-8);
    for (double xi : {1e-7, 1e-5, 1e-3, 0.3, 2.0, 10.0, 40.0, 700.0}) {
        const double v = lambda_jj(xi);
        CHECK(v > 0.0);
        CHECK(v <= 0.125);
        if (xi > 1e-4) CHECK(std::abs(v - static_cast<double>(lambda_reference(xi))) < 1e-12);
    }
}

TEST_CASE("lambda_jj derivative matches finite differences") {
    for (double xi : {-3.0, -0.5, -1e-3, 0.0, 2e-3, 0.009, 0.011, 0.4, 1.0, 5.0, 30.0}) {
        const double h = 1e-6;
        const double fd = (lambda_jj(xi + h) - lambda_jj(xi - h)) / (2 * h);
        CHECK(std::abs(lambda_jj_derivative(xi) - fd) < 1e-8);
    }
}

TEST_CASE("bouchard bound at the zero point") {
    for (double a : {0.0, 0.7, -1.3}) {
        const std::size_t p = 6, k = 3, t = 4;
        const std::vector<ItemId> views(t, 2);
        BouchardState b{a, Eigen::VectorXd::Zero(p)};
        const double expected = -static_cast<double>(t) * (a + p * (-a / 2 + a * a / 8 + std::log(2.0)));
        CHECK(std::abs(bouchard_bound(ModelParams::zeros(p, k), views, Posterior::standard(k), b) - expected) < 1e-12);
    }
}

TEST_CASE("bouchard bound lies below the Monte-Carlo ELBO") {
    std::mt19937_64 g(31);
    for (int trial = 0; trial < 10; ++trial) {
        const auto params = random_params(2 + g() % 8, 1 + g() % 3, g);
        const auto views = random_views(1 + g() % 10, params.num_items(), g);
        const auto em = em_infer(params, views, 20);
        auto rng = make_rng(trial);
        const auto mc = elbo_mc(params, views, em.q, standard_normal(20000, params.dim(), rng));
        CHECK(bouchard_bound(params, views, em.q, em.state) <= mc.value + 3 * mc.std_error);
        // Arbitrary (non-optimal) auxiliary parameters still give a lower bound.
        BouchardState rough{0.3, Eigen::VectorXd::Constant(params.num_items(), 2.0)};
        CHECK(bouchard_bound(params, views, em.q, rough) <= mc.value + 3 * mc.std_error);
    }
}

TEST_CASE("bouchard bound accepts diagonal posteriors") {
    std::mt19937_64 g(2);
    const auto params = random_params(5, 3, g);
    const auto views = random_views(4, 5, g);
    const Eigen::Vector3d mu(0.2, -0.1, 0.5), var(0.3, 0.8, 1.1);
    const auto b = BouchardState::initial(5);
    CHECK(bouchard_bound(params, views, Posterior::diagonal(mu, var), b) ==
          doctest::Approx(bouchard_bound(params, views, Posterior::full(mu, var.asDiagonal()), b)).epsilon(1e-13));
}

TEST_CASE("sigma update") {
    const auto b = BouchardState::initial(4);
    CHECK((em_update_sigma(ModelParams::zeros(4, 3), 5, b) - Eigen::Matrix3d::Identity()).norm() < 1e-15);

    Eigen::MatrixXd psi(1, 1);
    psi << 1.0;
    const BouchardState zero{0.0, Eigen::VectorXd::Zero(1)};
    CHECK(em_update_sigma(ModelParams(psi, Eigen::VectorXd::Zero(1)), 4, zero)(0, 0) == doctest::Approx(0.5));

    std::mt19937_64 g(9);
    const auto params = random_params(6, 3, g);
    BouchardState s{0.1, Eigen::VectorXd::Constant(6, 0.8)};
    double prev = std::numeric_limits<double>::infinity();
    for (int t = 1; t < 30; ++t) {
        const auto sigma = em_update_sigma(params, t, s);
        CHECK((sigma - sigma.transpose()).norm() == 0.0);
        CHECK(sigma.trace() <= prev);
        prev = sigma.trace();
    }
}

TEST_CASE("mu update") {
    const auto b = BouchardState::initial(3);
    CHECK(em_update_mu(ModelParams::zeros(3, 2), Eigen::Vector3d(1, 0, 2), Eigen::Matrix2d::Identity(), b).norm() ==
          0.0);

    Eigen::MatrixXd psi(2, 1);
    psi << 1, -1;
    const ModelParams sym(psi, Eigen::Vector2d::Zero());
    const BouchardState sb{0.4, Eigen::Vector2d(0.9, 0.9)};
    const auto sigma = em_update_sigma(sym, 2, sb);
    CHECK(std::abs(em_update_mu(sym, Eigen::Vector2d(1, 1), sigma, sb)(0)) < 1e-15);

    std::mt19937_64 g(12);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t p = 2 + g() % 7, k = 1 + g() % 4;
        const auto params = random_params(p, k, g);
        const auto views = random_views(1 + g() % 9, p, g);
        BouchardState st{0.3 * trial - 1.0, Eigen::VectorXd::Random(p).cwiseAbs() * 2};
        const auto sigma = em_update_sigma(params, static_cast<double>(views.size()), st);
        const auto mu = em_update_mu(params, counts(views, p), sigma, st);

        // Naive: loops over the displayed update.
        const double t = static_cast<double>(views.size());
        std::vector<double> rhs(k, 0.0);
        for (auto v : views)
            for (std::size_t j = 0; j < k; ++j) rhs[j] += params.psi(v, j);
        for (std::size_t i = 0; i < p; ++i) {
            const long double lam = lambda_reference(st.xi(i));
            const double w = 0.5 + 2.0 * (params.rho(i) - st.a) * static_cast<double>(lam);
            for (std::size_t j = 0; j < k; ++j) rhs[j] -= t * w * params.psi(i, j);
        }
        for (std::size_t j = 0; j < k; ++j) {
            double naive = 0.0;
            for (std::size_t c = 0; c < k; ++c) naive += sigma(j, c) * rhs[c];
            CHECK(std::abs(mu(j) - naive) < 1e-12 * (1.0 + std::abs(naive)));
        }
    }
}

TEST_CASE("a update") {
    for (std::size_t p : {1u, 2u, 5u, 40u}) {
        const BouchardState zero{0.0, Eigen::VectorXd::Zero(p)};
        const double a = em_update_a(ModelParams::zeros(p, 2), Posterior::standard(2), zero);
        CHECK(a == doctest::Approx(2.0 - 4.0 / p));
    }
    std::mt19937_64 g(4);
    auto params = random_params(5, 2, g);
    const auto q = Posterior::full(Eigen::Vector2d(0.3, -0.2), Eigen::Matrix2d::Identity() * 0.5);
    const BouchardState st{0.0, Eigen::VectorXd::Constant(5, 1.3)};
    const double a0 = em_update_a(params, q, st);
    params.rho.array() += 2.5;
    CHECK(em_update_a(params, q, st) == doctest::Approx(a0 + 2.5).epsilon(1e-13));
}

TEST_CASE("xi update") {
    const auto q = Posterior::standard(2);
    ModelParams flat = ModelParams::zeros(3, 2);
    flat.rho.setConstant(0.8);
    CHECK(em_update_xi(flat, q, 0.8).norm() == 0.0);

    Eigen::MatrixXd psi(1, 1);
    psi << 2.0;
    const auto q1 = Posterior::full(Eigen::VectorXd::Ones(1), Eigen::MatrixXd::Constant(1, 1, 0.25));
    CHECK(em_update_xi(ModelParams(psi, Eigen::VectorXd::Zero(1)), q1, 0.0)(0) ==
          doctest::Approx(std::sqrt(5.0)).epsilon(1e-15));

    std::mt19937_64 g(6);
    const auto params = random_params(4, 3, g);
    const auto q2 = Posterior::full(Eigen::Vector3d(0.5, -1, 0.2), Eigen::Matrix3d::Identity() * 0.3);
    const auto flipped_q = Posterior::full(-q2.mean(), q2.covariance());
    const ModelParams flipped(-params.psi, params.rho);
    CHECK((em_update_xi(params, q2, 0.4) - em_update_xi(flipped, flipped_q, 0.4)).norm() < 1e-14);
}

TEST_CASE("each update maximizes the bound in its block") {
    std::mt19937_64 g(77);
    std::normal_distribution<double> n(0.0, 0.05);
    for (int trial = 0; trial < 10; ++trial) {
        const std::size_t p = 2 + g() % 8, k = 1 + g() % 3;
        const auto params = random_params(p, k, g);
        const auto views = random_views(1 + g() % 10, p, g);
        const auto c = counts(views, p);
        auto em = em_infer(params, views, 3);
        BouchardState b = em.state;
        Posterior q = em.q;

        b.xi = em_update_xi(params, q, b.a);
        const double at_xi = bouchard_bound(params, c, q, b);
        for (int r = 0; r < 5; ++r) {
            BouchardState pert = b;
            for (Eigen::Index i = 0; i < pert.xi.size(); ++i) pert.xi(i) = std::abs(pert.xi(i) + n(g));
            CHECK(bouchard_bound(params, c, q, pert) <= at_xi + 1e-12);
        }

        const auto sigma = em_update_sigma(params, c.sum(), b);
        const auto mu = em_update_mu(params, c, sigma, b);
        q = Posterior::full(mu, sigma);
        const double at_gauss = bouchard_bound(params, c, q, b);
        for (int r = 0; r < 5; ++r) {
            Eigen::MatrixXd scale = Eigen::MatrixXd::Identity(k, k);
            for (std::size_t i = 0; i < k; ++i) scale(i, i) += n(g);
            const Eigen::MatrixXd s2 = scale * sigma * scale;
            Eigen::VectorXd m2 = mu;
            for (std::size_t i = 0; i < k; ++i) m2(i) += n(g);
            CHECK(bouchard_bound(params, c, Posterior::full(m2, s2), b) <= at_gauss + 1e-12);
        }

        b.a = em_update_a(params, q, b);
        const double at_a = bouchard_bound(params, c, q, b);
        for (double delta : {-0.1, -1e-3, 1e-3, 0.1}) {
            BouchardState pert = b;
            pert.a += delta;
            CHECK(bouchard_bound(params, c, q, pert) <= at_a + 1e-12);
        }
    }
}

TEST_CASE("updates are idempotent at their block optimum") {
    std::mt19937_64 g(13);
    const auto params = random_params(8, 3, g);
    const auto views = random_views(7, 8, g);
    const auto c = counts(views, 8);
    const auto em = em_infer(params, views, 5);
    const auto& b = em.state;

    const auto xi1 = em_update_xi(params, em.q, b.a);
    CHECK((em_update_xi(params, em.q, b.a) - xi1).cwiseAbs().maxCoeff() <= 1e-10);
    const auto s1 = em_update_sigma(params, c.sum(), b);
    CHECK((em_update_sigma(params, c.sum(), b) - s1).cwiseAbs().maxCoeff() <= 1e-10);
    const auto m1 = em_update_mu(params, c, s1, b);
    CHECK((em_update_mu(params, c, s1, b) - m1).cwiseAbs().maxCoeff() <= 1e-10);
    const double a1 = em_update_a(params, em.q, b);
    BouchardState b2 = b;
    b2.a = a1;
    CHECK(std::abs(em_update_a(params, em.q, b2) - a1) <= 1e-10);
}

TEST_CASE("em_infer with zero embeddings returns the prior after one cycle") {
    const std::vector<ItemId> views{0, 1, 1};
    const auto em = em_infer(ModelParams::zeros(4, 2), views, 1);
    CHECK(em.q.mean().norm() == 0.0);
    CHECK((em.q.covariance() - Eigen::Matrix2d::Identity()).norm() < 1e-15);
    CHECK(em.bound_trace.size() == 1);
}

TEST_CASE("em_infer defaults and empty sessions") {
    std::mt19937_64 g(1);
    const auto params = random_params(5, 2, g);
    const std::vector<ItemId> views{1, 2};
    CHECK(em_infer(params, views).bound_trace.size() == static_cast<std::size_t>(kDefaultEmIterations));
    CHECK(kDefaultEmIterations == 100);

    const auto empty = em_infer(params, std::vector<ItemId>{}, 10);
    CHECK(empty.q.mean().norm() < 1e-15);
    CHECK((empty.q.covariance() - Eigen::Matrix2d::Identity()).norm() < 1e-15);
    CHECK(std::abs(empty.bound_trace.back()) < 1e-12);

    CHECK_THROWS_AS(em_infer(params, views, 0), ArgumentError);
    CHECK_THROWS_AS(em_infer(params, std::vector<ItemId>{7}, 3), BoundsError);
}

TEST_CASE("em_infer bound trace is non-decreasing") {
    std::mt19937_64 g(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t p = 1 + g() % 50, k = 1 + g() % 10, t = 1 + g() % 30;
        const auto params = random_params(p, k, g, 0.3 + (g() % 100) / 50.0);
        const auto views = random_views(t, p, g);
        const auto em = em_infer(params, views, 50);
        for (std::size_t i = 1; i < em.bound_trace.size(); ++i) {
            const double prev = em.bound_trace[i - 1];
            CHECK(em.bound_trace[i] >= prev - 1e-8 * (1.0 + std::abs(prev)));
        }
    }
}

TEST_CASE("em_infer accepts a warm start") {
    std::mt19937_64 g(3);
    const auto params = random_params(6, 2, g);
    const auto views = random_views(5, 6, g);
    const auto cold = em_infer(params, views, 60);
    const auto warm = em_infer(params, views, 1, EmStart{cold.q, cold.state});
    CHECK(warm.bound_trace[0] >= cold.bound_trace.back() - 1e-10);
}

TEST_CASE("posterior contracts as one item repeats") {
    std::mt19937_64 g(8);
    const auto params = random_params(10, 3, g);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t t = 1; t <= 40; t += 3) {
        const std::vector<ItemId> views(t, 4);
        const double tr = em_infer(params, views).q.trace();
        CHECK(tr < prev);
        prev = tr;
    }
}
