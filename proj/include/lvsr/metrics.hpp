#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lvsr/baselines.hpp"
#include "lvsr/data.hpp"
#include "lvsr/encoder.hpp"
#include "lvsr/model.hpp"

namespace lvsr {

inline constexpr std::size_t kDefaultMetricK = 5;

/// Binary gain is 1 / log2(rank + 1). Literal evaluates
/// 1{hit} * sum_i (2^{r_i} - 1) / log2(i + 1) with r_i the i-th highest
/// predicted probability.
enum class DcgMode { binary, literal };

int recall_at_k(std::span<const ItemId> predicted, ItemId truth);
double dcg_at_k(std::span<const ItemId> predicted, ItemId truth);
double dcg_at_k_literal(std::span<const ItemId> predicted, const Eigen::VectorXd& probs, ItemId truth);

/// Scores the next item given a history; `session_index` seeds any sampling.
using NextItemScorer = std::function<Eigen::VectorXd(std::span<const ItemId> history, std::size_t session_index)>;

struct EvalConfig {
    std::size_t metric_k = kDefaultMetricK;
    std::size_t mc_samples = 100;
    int em_iterations = 100;
    DcgMode dcg = DcgMode::binary;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct MetricSummary {
    double rc_at_k = 0.0;
    double dcg_at_k = 0.0;
    std::size_t evaluated = 0;
    std::size_t skipped = 0;  ///< sessions with fewer than two views
};

/// Leave-last-out: predict view T from views 1..T-1, average over sessions.
MetricSummary evaluate(const SessionSet& test, const NextItemScorer& scorer, const EvalConfig& cfg);

enum class OnlineLatent { ae, em };
enum class OnlineNextItem { mc, mean };

struct ReportRow {
    std::string train_algorithm;
    std::string online_latent;     ///< "AE", "EM" or empty for baselines
    std::string online_next_item;  ///< "MC", "mean" or empty for baselines
    MetricSummary metrics;
};

/// Row label for a trained encoder: Bouch/AE, RT/AE or RT/Deep AE.
std::string train_algorithm_label(EncoderKind kind);

/// Latent-model scorer for one (online latent, next item) combination.
NextItemScorer make_lvm_scorer(const ModelParams& params, const Encoder* encoder, OnlineLatent latent,
                               OnlineNextItem next, const EvalConfig& cfg);

/// {AE, EM} x {MC, mean}; AE rows need an encoder.
std::vector<ReportRow> evaluate_lvm(const ModelParams& params, const Encoder* encoder, const SessionSet& test,
                                    const EvalConfig& cfg, const std::string& train_algorithm);

ReportRow evaluate_popularity(const PopularityModel& model, const SessionSet& test, const EvalConfig& cfg);
ReportRow evaluate_itemknn(const ItemKnnModel& model, const SessionSet& test, const EvalConfig& cfg);

/// train_algorithm,online_latent,online_next_item,rc_at_k,dcg_at_k
std::string format_report_csv(const std::vector<ReportRow>& rows);
std::string format_report_text(const std::vector<ReportRow>& rows, std::size_t metric_k);

}  // namespace lvsr
