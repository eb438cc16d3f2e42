#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "lvsr/data.hpp"
#include "lvsr/model.hpp"

namespace lvsr {

struct GroundTruth {
    ModelParams params;
    std::uint64_t seed = 0;
};

/// Fixed length, or Poisson(lambda) + 1.
struct LengthSpec {
    enum class Kind { fixed, poisson } kind = Kind::fixed;
    double value = 10.0;

    /// "12" or "poisson:9.5".
    static LengthSpec parse(std::string_view text);
    std::string to_string() const;
};

/// psi* ~ N(0, psi_scale^2), rho* ~ N(0, rho_scale^2).
ModelParams random_ground_truth(std::size_t num_items, std::size_t dim, std::uint64_t seed, double psi_scale = 1.0,
                                double rho_scale = 1.0);

struct SimulatedSession {
    Eigen::VectorXd omega;
    Session session;
};

/// Session `index` of simulate(), together with its latent vector.
SimulatedSession simulate_session(const GroundTruth& gt, std::size_t index, const LengthSpec& length);

/// Draws omega ~ N(0, I) once per session, then i.i.d. views from
/// softmax(psi* omega + rho*). Session i uses the stream (seed, i), so the
/// output is reproducible and independent of generation order.
SessionSet simulate(const GroundTruth& gt, std::size_t num_sessions, const LengthSpec& length);

struct CaseStudy {
    GroundTruth truth;
    std::vector<std::string> labels;
};

/// Seven products over five topics (phones, grains, drinks, women's and
/// men's clothes) with rho = 0.
CaseStudy case_study_fixture();

struct CaseStudyScenario {
    std::string name;
    std::vector<ItemId> history;
};

/// The four illustrative histories: one sleek phone; plus two city phones;
/// plus twenty city phones; two women's shirts and a sleek phone.
std::vector<CaseStudyScenario> case_study_scenarios();

namespace case_study_items {
inline constexpr ItemId sleek_phone = 0;
inline constexpr ItemId city_phone = 1;
inline constexpr ItemId rice = 2;
inline constexpr ItemId couscous = 3;
inline constexpr ItemId beer = 4;
inline constexpr ItemId womens_shirt = 5;
inline constexpr ItemId mens_shirt = 6;
}  // namespace case_study_items

}  // namespace lvsr
