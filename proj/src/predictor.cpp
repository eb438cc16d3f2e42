#include "lvsr/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvsr/error.hpp"
#include "lvsr/random.hpp"

namespace lvsr {

namespace {

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    if (!logits.allFinite()) throw NumericError("non-finite logits");
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return e / e.sum();
}

void check(const ModelParams& params, const Posterior& q) {
    if (q.dim() != params.dim()) throw ArgumentError("posterior dimension does not match model");
}

}  // namespace

McPrediction predict_mc_with_error(const ModelParams& params, const Posterior& q, std::size_t samples,
                                   std::uint64_t seed) {
    check(params, q);
    if (samples < 1) throw ArgumentError("predict_mc needs at least one sample");
    auto rng = make_rng(seed);
    const auto p = params.psi.rows();
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(p);
    constexpr Eigen::Index kBlock = 4096;
    const auto total = static_cast<Eigen::Index>(samples);
    for (Eigen::Index start = 0; start < total; start += kBlock) {
        const Eigen::Index n = std::min(kBlock, total - start);
        const Eigen::MatrixXd omega = q.transform(standard_normal(n, static_cast<Eigen::Index>(q.dim()), rng));
        const Eigen::MatrixXd logits = (omega * params.psi.transpose()).rowwise() + params.rho.transpose();
        for (Eigen::Index s = 0; s < n; ++s) {
            const Eigen::VectorXd pr = softmax(logits.row(s).transpose());
            sum += pr;
            sum_sq += pr.cwiseAbs2();
        }
    }
    const double s = static_cast<double>(samples);
    McPrediction out;
    out.probs = sum / s;
    out.std_error = Eigen::VectorXd::Zero(p);
    if (samples > 1) {
        const Eigen::ArrayXd var = ((sum_sq.array() - s * out.probs.array().square()) / (s - 1.0)).max(0.0);
        out.std_error = (var / s).sqrt().matrix();
    }
    return out;
}

Eigen::VectorXd predict_mc(const ModelParams& params, const Posterior& q, std::size_t samples, std::uint64_t seed) {
    return predict_mc_with_error(params, q, samples, seed).probs;
}

Eigen::VectorXd predict_mean(const ModelParams& params, const Posterior& q) {
    check(params, q);
    return softmax(params.psi * q.mean() + params.rho);
}

std::vector<ItemId> top_k(const Eigen::VectorXd& scores, std::size_t k) {
    const auto n = static_cast<std::size_t>(scores.size());
    if (k < 1 || k > n) throw ArgumentError("top_k needs 1 <= k <= " + std::to_string(n));
    std::vector<ItemId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(k), ids.end(), [&](ItemId a, ItemId b) {
        if (scores(a) != scores(b)) return scores(a) > scores(b);
        return a < b;
    });
    ids.resize(k);
    return ids;
}

}  // namespace lvsr
