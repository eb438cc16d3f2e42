#include "lvsr/baselines.hpp"

#include <cmath>
#include <string>

#include "lvsr/error.hpp"

namespace lvsr {

Eigen::VectorXd PopularityModel::predict() const {
    Eigen::VectorXd p(static_cast<Eigen::Index>(counts.size()));
    for (std::size_t i = 0; i < counts.size(); ++i) p(static_cast<Eigen::Index>(i)) = static_cast<double>(counts[i]);
    const double total = p.sum();
    if (total <= 0.0) return Eigen::VectorXd::Constant(p.size(), 1.0 / static_cast<double>(p.size()));
    return p / total;
}

PopularityModel fit_popularity(const SessionSet& train) {
    if (train.empty()) throw ArgumentError("popularity baseline needs training sessions");
    PopularityModel m{std::vector<std::int64_t>(train.num_items(), 0)};
    for (const auto& s : train)
        for (auto v : s.views) ++m.counts[static_cast<std::size_t>(v)];
    return m;
}

ItemKnnModel fit_itemknn(const SessionSet& train) {
    if (train.empty()) throw ArgumentError("item-KNN baseline needs training sessions");
    const auto p = static_cast<Eigen::Index>(train.num_items());
    if (p < 2) throw ArgumentError("item-KNN baseline needs at least two items");
    const double n = static_cast<double>(train.size());

    Eigen::MatrixXd cocount = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd row = Eigen::VectorXd::Zero(p);
    for (const auto& s : train) {
        row.setZero();
        for (auto v : s.views) row(v) += 1.0;
        cocount.selfadjointView<Eigen::Lower>().rankUpdate(row);
        mean += row;
    }
    cocount.triangularView<Eigen::StrictlyUpper>() = cocount.transpose();
    mean /= n;

    const Eigen::MatrixXd cov = cocount / n - mean * mean.transpose();
    const Eigen::VectorXd inv_sd = cov.diagonal().cwiseSqrt().cwiseInverse();
    Eigen::MatrixXd corr = inv_sd.asDiagonal() * cov * inv_sd.asDiagonal();
    corr = 0.5 * (corr + corr.transpose());
    if (!corr.allFinite()) throw NumericError("item correlation matrix is not finite");
    return ItemKnnModel{std::move(corr)};
}

Eigen::VectorXd ItemKnnModel::predict(std::span<const ItemId> history) const {
    if (history.empty()) throw ArgumentError("item-KNN prediction needs a non-empty history");
    const ItemId last = history.back();
    if (last < 0 || last >= corr.rows()) throw BoundsError("item " + std::to_string(last) + " outside catalog");
    Eigen::VectorXd scores = corr.row(last).transpose();
    scores.array() -= scores.minCoeff();
    const double total = scores.sum();
    if (total <= 0.0) return Eigen::VectorXd::Constant(scores.size(), 1.0 / static_cast<double>(scores.size()));
    return scores / total;
}

}  // namespace lvsr
