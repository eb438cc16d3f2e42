#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "lvsr/data.hpp"

namespace lvsr {

/// Non-personalized ranking by training view counts.
struct PopularityModel {
    std::vector<std::int64_t> counts;

    Eigen::VectorXd predict() const;
};

PopularityModel fit_popularity(const SessionSet& train);

/// Item-item Pearson correlation of the session x item count matrix. The
/// identity is added to the raw co-count matrix before normalization so that
/// every item has a non-zero variance.
struct ItemKnnModel {
    Eigen::MatrixXd corr;

    /// Row of the last viewed item, min-subtracted and normalized; uniform
    /// when the row is constant.
    Eigen::VectorXd predict(std::span<const ItemId> history) const;
};

ItemKnnModel fit_itemknn(const SessionSet& train);

}  // namespace lvsr
