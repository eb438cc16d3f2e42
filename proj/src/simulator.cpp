#include "lvsr/simulator.hpp"

#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "lvsr/error.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

namespace {

double parse_real(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ArgumentError("invalid length spec value '" + std::string(s) + "'");
    return v;
}

}  // namespace

LengthSpec LengthSpec::parse(std::string_view text) {
    LengthSpec spec;
    constexpr std::string_view poisson_prefix = "poisson:";
    if (text.substr(0, poisson_prefix.size()) == poisson_prefix) {
        spec.kind = Kind::poisson;
        spec.value = parse_real(text.substr(poisson_prefix.size()));
        if (!(spec.value >= 0.0) || !std::isfinite(spec.value))
            throw ArgumentError("poisson length rate must be a finite value >= 0");
    } else {
        spec.kind = Kind::fixed;
        spec.value = parse_real(text);
        if (!(spec.value >= 1.0) || spec.value != std::floor(spec.value))
            throw ArgumentError("fixed session length must be an integer >= 1");
    }
    return spec;
}

std::string LengthSpec::to_string() const {
    std::ostringstream out;
    if (kind == Kind::poisson) out << "poisson:";
    out << value;
    return out.str();
}

ModelParams random_ground_truth(std::size_t num_items, std::size_t dim, std::uint64_t seed, double psi_scale,
                                double rho_scale) {
    if (num_items < 1 || dim < 1) throw ArgumentError("ground truth needs P, K >= 1");
    auto rng = make_rng(seed, {0x6774});
    Eigen::MatrixXd psi = psi_scale * standard_normal(static_cast<Eigen::Index>(num_items),
                                                      static_cast<Eigen::Index>(dim), rng);
    Eigen::VectorXd rho = rho_scale * standard_normal(static_cast<Eigen::Index>(num_items), 1, rng);
    return ModelParams(std::move(psi), std::move(rho));
}

namespace {

void check_length(const LengthSpec& length) {
    if (length.kind == LengthSpec::Kind::fixed && !(length.value >= 1.0))
        throw ArgumentError("fixed session length must be >= 1");
    if (length.kind == LengthSpec::Kind::poisson && !(length.value >= 0.0))
        throw ArgumentError("poisson length rate must be >= 0");
}

SimulatedSession draw_session(const GroundTruth& gt, std::size_t index, const LengthSpec& length) {
    auto rng = make_rng(gt.seed, {static_cast<std::uint64_t>(index)});
    SimulatedSession out;
    out.omega = standard_normal(static_cast<Eigen::Index>(gt.params.dim()), 1, rng);
    const Eigen::VectorXd logits = gt.params.psi * out.omega + gt.params.rho;
    const Eigen::VectorXd weights = (logits.array() - logits.maxCoeff()).exp();
    std::discrete_distribution<ItemId> pick(weights.data(), weights.data() + weights.size());

    std::size_t t = 0;
    if (length.kind == LengthSpec::Kind::fixed) {
        t = static_cast<std::size_t>(length.value);
    } else {
        std::poisson_distribution<std::size_t> pois(length.value);
        t = length.value > 0.0 ? pois(rng) + 1 : 1;
    }
    out.session.id = "s" + std::to_string(index);
    out.session.views.reserve(t);
    for (std::size_t j = 0; j < t; ++j) out.session.views.push_back(pick(rng));
    return out;
}

}  // namespace

SimulatedSession simulate_session(const GroundTruth& gt, std::size_t index, const LengthSpec& length) {
    gt.params.validate();
    check_length(length);
    return draw_session(gt, index, length);
}

SessionSet simulate(const GroundTruth& gt, std::size_t num_sessions, const LengthSpec& length) {
    gt.params.validate();
    check_length(length);
    if (num_sessions < 1) throw ArgumentError("simulate needs at least one session");
    std::vector<Session> sessions;
    sessions.reserve(num_sessions);
    for (std::size_t i = 0; i < num_sessions; ++i) sessions.push_back(draw_session(gt, i, length).session);
    return SessionSet(ItemCatalog(gt.params.num_items()), std::move(sessions));
}

CaseStudy case_study_fixture() {
    Eigen::MatrixXd psi(7, 5);
    psi << 0.9, 0.05, 0.0, 0.05, 0.0,
           1.0, 0.0,  0.0, 0.0,  0.0,
           0.0, 0.95, 0.0, 0.1,  0.0,
           0.0, 1.0,  0.0, 0.0,  0.0,
           0.0, 0.2,  0.7, 0.0,  0.0,
           0.0, 0.0,  0.0, 1.0, -1.0,
           0.0, 0.0,  0.0, -1.0, 1.0;
    return CaseStudy{GroundTruth{ModelParams(std::move(psi), Eigen::VectorXd::Zero(7)), 0},
                     {"Sleek Phone", "City Phone", "Rice", "Coscous", "Beer", "Women's shirt", "Men's shirt"}};
}

std::vector<CaseStudyScenario> case_study_scenarios() {
    using namespace case_study_items;
    std::vector<ItemId> twenty_city(21, city_phone);
    twenty_city[0] = sleek_phone;
    return {
        {"one sleek phone", {sleek_phone}},
        {"one sleek phone, two city phones", {sleek_phone, city_phone, city_phone}},
        {"one sleek phone, twenty city phones", std::move(twenty_city)},
        {"two women's shirts, one sleek phone", {womens_shirt, womens_shirt, sleek_phone}},
    };
}

}  // namespace lvsr
