#include "lvsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "lvsr/bouchard.hpp"
#include "lvsr/error.hpp"
#include "lvsr/predictor.hpp"
#include "parallel.hpp"

namespace lvsr {

namespace {

std::uint64_t prediction_seed(std::uint64_t seed, std::size_t index) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1));
}

}  // namespace

int recall_at_k(std::span<const ItemId> predicted, ItemId truth) {
    return std::find(predicted.begin(), predicted.end(), truth) != predicted.end() ? 1 : 0;
}

double dcg_at_k(std::span<const ItemId> predicted, ItemId truth) {
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth) return 1.0 / std::log2(static_cast<double>(i) + 2.0);
    return 0.0;
}

double dcg_at_k_literal(std::span<const ItemId> predicted, const Eigen::VectorXd& probs, ItemId truth) {
    if (!recall_at_k(predicted, truth)) return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        total += (std::exp2(probs(predicted[i])) - 1.0) / std::log2(static_cast<double>(i) + 2.0);
    return total;
}

MetricSummary evaluate(const SessionSet& test, const NextItemScorer& scorer, const EvalConfig& cfg) {
    if (cfg.metric_k < 1 || cfg.metric_k > test.num_items())
        throw ArgumentError("metric K must lie in [1, P]");
    const std::size_t n = test.size();
    std::vector<double> rc(n, 0.0), dcg(n, 0.0);
    std::vector<char> used(n, 0);
    detail::parallel_for(n, cfg.threads, [&](std::size_t i) {
        const auto& views = test[i].views;
        if (views.size() < 2) return;
        const std::span<const ItemId> history(views.data(), views.size() - 1);
        const ItemId truth = views.back();
        const Eigen::VectorXd probs = scorer(history, i);
        if (probs.size() != static_cast<Eigen::Index>(test.num_items()))
            throw ArgumentError("scorer returned the wrong number of items");
        const auto ranked = top_k(probs, cfg.metric_k);
        rc[i] = recall_at_k(ranked, truth);
        dcg[i] = cfg.dcg == DcgMode::binary ? dcg_at_k(ranked, truth) : dcg_at_k_literal(ranked, probs, truth);
        used[i] = 1;
    });
    MetricSummary out;
    for (std::size_t i = 0; i < n; ++i) {
        if (!used[i]) {
            ++out.skipped;
            continue;
        }
        ++out.evaluated;
        out.rc_at_k += rc[i];
        out.dcg_at_k += dcg[i];
    }
    if (out.evaluated > 0) {
        out.rc_at_k /= static_cast<double>(out.evaluated);
        out.dcg_at_k /= static_cast<double>(out.evaluated);
    }
    return out;
}

std::string train_algorithm_label(EncoderKind kind) {
    switch (kind) {
        case EncoderKind::linear_bouchard: return "Bouch/AE";
        case EncoderKind::linear_gaussian: return "RT/AE";
        case EncoderKind::deep_gaussian: return "RT/Deep AE";
    }
    return "LVM";
}

NextItemScorer make_lvm_scorer(const ModelParams& params, const Encoder* encoder, OnlineLatent latent,
                               OnlineNextItem next, const EvalConfig& cfg) {
    if (latent == OnlineLatent::ae && encoder == nullptr) throw ArgumentError("AE inference needs an encoder");
    return [&params, encoder, latent, next, cfg](std::span<const ItemId> history, std::size_t index) {
        Posterior q = latent == OnlineLatent::ae
                          ? encode(*encoder, to_counts(history, params.num_items())).q
                          : em_infer(params, history, cfg.em_iterations).q;
        if (next == OnlineNextItem::mean) return predict_mean(params, q);
        return predict_mc(params, q, cfg.mc_samples, prediction_seed(cfg.seed, index));
    };
}

std::vector<ReportRow> evaluate_lvm(const ModelParams& params, const Encoder* encoder, const SessionSet& test,
                                    const EvalConfig& cfg, const std::string& train_algorithm) {
    if (test.num_items() != params.num_items()) throw ArgumentError("test catalog does not match model");
    std::vector<ReportRow> rows;
    std::vector<OnlineLatent> latents;
    if (encoder) latents.push_back(OnlineLatent::ae);
    latents.push_back(OnlineLatent::em);
    for (auto latent : latents) {
        // Infer each posterior once and reuse it for both next-item rules.
        std::vector<std::optional<Posterior>> posteriors(test.size());
        detail::parallel_for(test.size(), cfg.threads, [&](std::size_t i) {
            const auto& v = test[i].views;
            if (v.size() < 2) return;
            const std::span<const ItemId> history(v.data(), v.size() - 1);
            posteriors[i] = latent == OnlineLatent::ae ? encode(*encoder, to_counts(history, params.num_items())).q
                                                       : em_infer(params, history, cfg.em_iterations).q;
        });
        for (auto next : {OnlineNextItem::mc, OnlineNextItem::mean}) {
            auto scorer = [&](std::span<const ItemId>, std::size_t index) {
                const Posterior& q = *posteriors[index];
                if (next == OnlineNextItem::mean) return predict_mean(params, q);
                return predict_mc(params, q, cfg.mc_samples, prediction_seed(cfg.seed, index));
            };
            rows.push_back(ReportRow{train_algorithm, latent == OnlineLatent::ae ? "AE" : "EM",
                                     next == OnlineNextItem::mc ? "MC" : "mean", evaluate(test, scorer, cfg)});
        }
    }
    return rows;
}

ReportRow evaluate_popularity(const PopularityModel& model, const SessionSet& test, const EvalConfig& cfg) {
    const Eigen::VectorXd probs = model.predict();
    auto scorer = [&](std::span<const ItemId>, std::size_t) { return probs; };
    return ReportRow{"Pop", "", "", evaluate(test, scorer, cfg)};
}

ReportRow evaluate_itemknn(const ItemKnnModel& model, const SessionSet& test, const EvalConfig& cfg) {
    auto scorer = [&](std::span<const ItemId> history, std::size_t) { return model.predict(history); };
    return ReportRow{"ItemKNN", "", "", evaluate(test, scorer, cfg)};
}

std::string format_report_csv(const std::vector<ReportRow>& rows) {
    std::ostringstream out;
    out << "train_algorithm,online_latent,online_next_item,rc_at_k,dcg_at_k\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f", r.metrics.rc_at_k, r.metrics.dcg_at_k);
        out << r.train_algorithm << ',' << r.online_latent << ',' << r.online_next_item << ',' << buf << '\n';
    }
    return out.str();
}

std::string format_report_text(const std::vector<ReportRow>& rows, std::size_t metric_k) {
    std::ostringstream out;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-12s %-8s %-10s %8s %8s\n", "Train", "Latent", "NextItem",
                  ("RC@" + std::to_string(metric_k)).c_str(), ("DCG@" + std::to_string(metric_k)).c_str());
    out << buf;
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%-12s %-8s %-10s %8.3f %8.3f\n", r.train_algorithm.c_str(),
                      r.online_latent.c_str(), r.online_next_item.c_str(), r.metrics.rc_at_k, r.metrics.dcg_at_k);
        out << buf;
    }
    return out.str();
}

}  // namespace lvsr
