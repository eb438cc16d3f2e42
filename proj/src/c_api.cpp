#include "lvsr/lvsr.h"

#include <algorithm>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "lvsr/lvsr.hpp"

struct lvsr_sessions {
    lvsr::SessionSet data;
};

struct lvsr_model {
    lvsr::ModelParams params;
};

struct lvsr_encoder {
    lvsr::Encoder encoder;
};

namespace {

thread_local std::string last_error;

int status_for(lvsr::ErrorKind kind) {
    switch (kind) {
    case lvsr::ErrorKind::argument: return LVSR_ERR_ARGUMENT;
    case lvsr::ErrorKind::parse: return LVSR_ERR_PARSE;
    case lvsr::ErrorKind::bounds: return LVSR_ERR_BOUNDS;
    case lvsr::ErrorKind::numeric: return LVSR_ERR_NUMERIC;
    case lvsr::ErrorKind::io: return LVSR_ERR_IO;
    }
    return LVSR_ERR_INTERNAL;
}

template <class F>
int guarded(F&& f) {
    try {
        f();
        last_error.clear();
        return LVSR_OK;
    } catch (const lvsr::Error& e) {
        last_error = e.what();
        return status_for(e.kind());
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return LVSR_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return LVSR_ERR_INTERNAL;
    }
}

void require(bool ok, const char* what) {
    if (!ok) throw lvsr::ArgumentError(what);
}

lvsr::BoundKind to_bound(int b) {
    if (b == LVSR_BOUND_BOUCHARD) return lvsr::BoundKind::bouchard;
    if (b == LVSR_BOUND_REPARAM) return lvsr::BoundKind::reparam;
    throw lvsr::ArgumentError("unknown bound " + std::to_string(b));
}

lvsr::EncoderKind to_encoder_kind(int k) {
    switch (k) {
    case LVSR_ENCODER_LINEAR_BOUCHARD: return lvsr::EncoderKind::linear_bouchard;
    case LVSR_ENCODER_LINEAR_GAUSSIAN: return lvsr::EncoderKind::linear_gaussian;
    case LVSR_ENCODER_DEEP_GAUSSIAN: return lvsr::EncoderKind::deep_gaussian;
    }
    throw lvsr::ArgumentError("unknown encoder kind " + std::to_string(k));
}

int from_encoder_kind(lvsr::EncoderKind k) {
    switch (k) {
    case lvsr::EncoderKind::linear_bouchard: return LVSR_ENCODER_LINEAR_BOUCHARD;
    case lvsr::EncoderKind::linear_gaussian: return LVSR_ENCODER_LINEAR_GAUSSIAN;
    case lvsr::EncoderKind::deep_gaussian: return LVSR_ENCODER_DEEP_GAUSSIAN;
    }
    return -1;
}

std::span<const lvsr::ItemId> view_span(const int64_t* views, size_t length) {
    require(views != nullptr || length == 0, "views is null");
    return {views, length};
}

lvsr::Posterior posterior_from(size_t k, const double* mean, const double* covariance) {
    require(mean && covariance, "posterior mean and covariance are required");
    Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mean, static_cast<Eigen::Index>(k));
    Eigen::MatrixXd cov = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        covariance, static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    return lvsr::Posterior::full(std::move(mu), std::move(cov));
}

lvsr::EvalConfig eval_config(const lvsr_eval_config* cfg) {
    lvsr::EvalConfig out;
    if (!cfg) return out;
    out.metric_k = cfg->metric_k;
    out.mc_samples = cfg->mc_samples;
    out.em_iterations = cfg->em_iterations;
    require(cfg->dcg == LVSR_DCG_BINARY || cfg->dcg == LVSR_DCG_LITERAL, "unknown dcg mode");
    out.dcg = cfg->dcg == LVSR_DCG_LITERAL ? lvsr::DcgMode::literal : lvsr::DcgMode::binary;
    out.seed = cfg->seed;
    out.threads = cfg->threads;
    return out;
}

void copy_label(char* dst, size_t cap, const std::string& src) {
    require(src.size() < cap, "report label too long");
    std::memcpy(dst, src.c_str(), src.size() + 1);
}

void to_c_row(const lvsr::ReportRow& r, lvsr_report_row* out) {
    *out = lvsr_report_row{};
    copy_label(out->train_algorithm, sizeof out->train_algorithm, r.train_algorithm);
    copy_label(out->online_latent, sizeof out->online_latent, r.online_latent);
    copy_label(out->online_next_item, sizeof out->online_next_item, r.online_next_item);
    out->rc_at_k = r.metrics.rc_at_k;
    out->dcg_at_k = r.metrics.dcg_at_k;
    out->evaluated = r.metrics.evaluated;
    out->skipped = r.metrics.skipped;
}

lvsr::ReportRow from_c_row(const lvsr_report_row& r) {
    lvsr::ReportRow out;
    out.train_algorithm = r.train_algorithm;
    out.online_latent = r.online_latent;
    out.online_next_item = r.online_next_item;
    out.metrics.rc_at_k = r.rc_at_k;
    out.metrics.dcg_at_k = r.dcg_at_k;
    out.metrics.evaluated = r.evaluated;
    out.metrics.skipped = r.skipped;
    return out;
}

const lvsr::CaseStudy& case_study() {
    static const lvsr::CaseStudy cs = lvsr::case_study_fixture();
    return cs;
}

const std::vector<lvsr::CaseStudyScenario>& scenarios() {
    static const std::vector<lvsr::CaseStudyScenario> s = lvsr::case_study_scenarios();
    return s;
}

}  // namespace

extern "C" {

const char* lvsr_version(void) { return "0.1.0"; }

const char* lvsr_last_error(void) { return last_error.c_str(); }

const char* lvsr_status_name(int status) {
    switch (status) {
    case LVSR_OK: return "ok";
    case LVSR_ERR_ARGUMENT: return "invalid argument";
    case LVSR_ERR_PARSE: return "parse error";
    case LVSR_ERR_BOUNDS: return "out of bounds";
    case LVSR_ERR_NUMERIC: return "numeric failure";
    case LVSR_ERR_IO: return "i/o error";
    case LVSR_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

int lvsr_bound_from_string(const char* name, int* out) {
    return guarded([&] {
        require(name && out, "null argument");
        *out = lvsr::bound_kind_from_string(name) == lvsr::BoundKind::bouchard ? LVSR_BOUND_BOUCHARD
                                                                                : LVSR_BOUND_REPARAM;
    });
}

int lvsr_encoder_kind_from_string(const char* name, int* out) {
    return guarded([&] {
        require(name && out, "null argument");
        *out = from_encoder_kind(lvsr::encoder_kind_from_string(name));
    });
}

const char* lvsr_bound_name(int bound) {
    if (bound == LVSR_BOUND_BOUCHARD) return "bouchard";
    if (bound == LVSR_BOUND_REPARAM) return "reparam";
    return nullptr;
}

const char* lvsr_encoder_kind_name(int kind) {
    switch (kind) {
    case LVSR_ENCODER_LINEAR_BOUCHARD: return "linear_bouchard";
    case LVSR_ENCODER_LINEAR_GAUSSIAN: return "linear_gaussian";
    case LVSR_ENCODER_DEEP_GAUSSIAN: return "deep_gaussian";
    }
    return nullptr;
}

int lvsr_sessions_load(const char* path, int64_t num_items, lvsr_sessions** out) {
    return guarded([&] {
        require(path && out, "null argument");
        std::optional<std::size_t> p;
        if (num_items > 0) p = static_cast<std::size_t>(num_items);
        *out = new lvsr_sessions{lvsr::load_sessions(path, p)};
    });
}

int lvsr_sessions_create(int64_t num_items, size_t count, const char* const* ids, const size_t* lengths,
                         const int64_t* views, lvsr_sessions** out) {
    return guarded([&] {
        require(out != nullptr, "null argument");
        require(num_items > 0, "num_items must be positive");
        require(count == 0 || lengths, "lengths is null");
        std::vector<lvsr::Session> sessions(count);
        size_t offset = 0;
        for (size_t i = 0; i < count; ++i) {
            sessions[i].id = ids ? std::string(ids[i]) : "s" + std::to_string(i);
            const auto span = view_span(views ? views + offset : nullptr, lengths[i]);
            sessions[i].views.assign(span.begin(), span.end());
            offset += lengths[i];
        }
        *out = new lvsr_sessions{
            lvsr::SessionSet(lvsr::ItemCatalog(static_cast<std::size_t>(num_items)), std::move(sessions))};
    });
}

int lvsr_sessions_save(const lvsr_sessions* s, const char* path) {
    return guarded([&] {
        require(s && path, "null argument");
        lvsr::write_sessions(s->data, path);
    });
}

void lvsr_sessions_free(lvsr_sessions* s) { delete s; }

size_t lvsr_sessions_count(const lvsr_sessions* s) { return s ? s->data.size() : 0; }

size_t lvsr_sessions_num_items(const lvsr_sessions* s) { return s ? s->data.num_items() : 0; }

size_t lvsr_sessions_num_views(const lvsr_sessions* s) { return s ? s->data.num_views() : 0; }

int lvsr_sessions_get(const lvsr_sessions* s, size_t index, const char** id, const int64_t** views, size_t* length) {
    return guarded([&] {
        require(s != nullptr, "null argument");
        if (index >= s->data.size()) throw lvsr::BoundsError("session index " + std::to_string(index) + " out of range");
        const auto& session = s->data[index];
        if (id) *id = session.id.c_str();
        if (views) *views = session.views.data();
        if (length) *length = session.views.size();
    });
}

int lvsr_sessions_split(const lvsr_sessions* s, double test_fraction, uint64_t seed, lvsr_sessions** train,
                        lvsr_sessions** test) {
    return guarded([&] {
        require(s && train && test, "null argument");
        auto [tr, te] = lvsr::split_by_session(s->data, test_fraction, seed);
        auto* a = new lvsr_sessions{std::move(tr)};
        auto* b = new (std::nothrow) lvsr_sessions{std::move(te)};
        if (!b) {
            delete a;
            throw std::bad_alloc();
        }
        *train = a;
        *test = b;
    });
}

int lvsr_sessions_filter_top(const lvsr_sessions* s, size_t keep, lvsr_sessions** out) {
    return guarded([&] {
        require(s && out, "null argument");
        *out = new lvsr_sessions{lvsr::filter_top_items(s->data, keep)};
    });
}

int lvsr_model_create(size_t num_items, size_t dim, const double* psi, const double* rho, lvsr_model** out) {
    return guarded([&] {
        require(psi && rho && out, "null argument");
        const auto p = static_cast<Eigen::Index>(num_items), k = static_cast<Eigen::Index>(dim);
        Eigen::MatrixXd m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(psi, p, k);
        Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(rho, p);
        lvsr::ModelParams params(std::move(m), std::move(r));
        params.validate();
        *out = new lvsr_model{std::move(params)};
    });
}

int lvsr_model_load(const char* path, lvsr_model** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new lvsr_model{lvsr::load_model(path)};
    });
}

int lvsr_model_save(const lvsr_model* m, const char* path, int format) {
    return guarded([&] {
        require(m && path, "null argument");
        require(format == LVSR_FORMAT_TEXT || format == LVSR_FORMAT_JSON, "unknown model format");
        lvsr::save_model(m->params, path, format == LVSR_FORMAT_JSON ? lvsr::ModelFormat::json : lvsr::ModelFormat::text);
    });
}

void lvsr_model_free(lvsr_model* m) { delete m; }

size_t lvsr_model_num_items(const lvsr_model* m) { return m ? m->params.num_items() : 0; }

size_t lvsr_model_dim(const lvsr_model* m) { return m ? m->params.dim() : 0; }

int lvsr_model_copy_psi(const lvsr_model* m, double* out) {
    return guarded([&] {
        require(m && out, "null argument");
        const auto& psi = m->params.psi;
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(out, psi.rows(), psi.cols()) = psi;
    });
}

int lvsr_model_copy_rho(const lvsr_model* m, double* out) {
    return guarded([&] {
        require(m && out, "null argument");
        Eigen::Map<Eigen::VectorXd>(out, m->params.rho.size()) = m->params.rho;
    });
}

int lvsr_random_ground_truth(size_t num_items, size_t dim, uint64_t seed, double psi_scale, double rho_scale,
                             lvsr_model** out) {
    return guarded([&] {
        require(out != nullptr, "null argument");
        *out = new lvsr_model{lvsr::random_ground_truth(num_items, dim, seed, psi_scale, rho_scale)};
    });
}

int lvsr_simulate(const lvsr_model* truth, uint64_t seed, size_t num_sessions, const char* length_spec,
                  lvsr_sessions** out) {
    return guarded([&] {
        require(truth && length_spec && out, "null argument");
        const lvsr::GroundTruth gt{truth->params, seed};
        *out = new lvsr_sessions{lvsr::simulate(gt, num_sessions, lvsr::LengthSpec::parse(length_spec))};
    });
}

int lvsr_case_study_model(lvsr_model** out) {
    return guarded([&] {
        require(out != nullptr, "null argument");
        *out = new lvsr_model{case_study().truth.params};
    });
}

const char* lvsr_case_study_label(size_t item) {
    const auto& labels = case_study().labels;
    return item < labels.size() ? labels[item].c_str() : nullptr;
}

size_t lvsr_case_study_scenario_count(void) { return scenarios().size(); }

int lvsr_case_study_scenario(size_t index, const char** name, const int64_t** views, size_t* length) {
    return guarded([&] {
        if (index >= scenarios().size()) throw lvsr::BoundsError("scenario index out of range");
        const auto& sc = scenarios()[index];
        if (name) *name = sc.name.c_str();
        if (views) *views = sc.history.data();
        if (length) *length = sc.history.size();
    });
}

void lvsr_train_config_default(lvsr_train_config* cfg) {
    if (!cfg) return;
    const lvsr::TrainConfig d;
    cfg->bound = d.bound == lvsr::BoundKind::bouchard ? LVSR_BOUND_BOUCHARD : LVSR_BOUND_REPARAM;
    cfg->encoder_kind = from_encoder_kind(d.encoder_kind);
    cfg->dim = d.dim;
    cfg->epochs = d.epochs;
    cfg->learning_rate = d.learning_rate;
    cfg->l2 = d.l2;
    cfg->batch_size = d.batch_size;
    cfg->mc_samples = d.mc_samples;
    cfg->seed = d.seed;
    cfg->threads = d.threads;
}

int lvsr_train(const lvsr_sessions* data, const lvsr_train_config* cfg, lvsr_epoch_callback on_epoch, void* user,
               lvsr_model** model, lvsr_encoder** encoder, double* loss_curve) {
    return guarded([&] {
        require(data && cfg && model, "null argument");
        lvsr::TrainConfig c;
        c.bound = to_bound(cfg->bound);
        c.encoder_kind = to_encoder_kind(cfg->encoder_kind);
        c.dim = cfg->dim;
        c.epochs = cfg->epochs;
        c.learning_rate = cfg->learning_rate;
        c.l2 = cfg->l2;
        c.batch_size = cfg->batch_size;
        c.mc_samples = cfg->mc_samples;
        c.seed = cfg->seed;
        c.threads = cfg->threads;
        lvsr::EpochCallback cb;
        if (on_epoch) cb = [&](int epoch, double objective) { on_epoch(epoch, objective, user); };
        auto result = lvsr::train(data->data, c, cb);
        if (loss_curve) std::copy(result.loss_curve.begin(), result.loss_curve.end(), loss_curve);
        auto* m = new lvsr_model{std::move(result.params)};
        if (encoder) {
            auto* e = new (std::nothrow) lvsr_encoder{std::move(result.encoder)};
            if (!e) {
                delete m;
                throw std::bad_alloc();
            }
            *encoder = e;
        }
        *model = m;
    });
}

int lvsr_encoder_load(const char* path, lvsr_encoder** out) {
    return guarded([&] {
        require(path && out, "null argument");
        *out = new lvsr_encoder{lvsr::load_encoder(path)};
    });
}

int lvsr_encoder_save(const lvsr_encoder* e, const char* path) {
    return guarded([&] {
        require(e && path, "null argument");
        lvsr::save_encoder(e->encoder, path);
    });
}

void lvsr_encoder_free(lvsr_encoder* e) { delete e; }

int lvsr_encoder_kind(const lvsr_encoder* e) { return e ? from_encoder_kind(e->encoder.kind) : -1; }

size_t lvsr_encoder_num_items(const lvsr_encoder* e) { return e ? e->encoder.num_items : 0; }

size_t lvsr_encoder_dim(const lvsr_encoder* e) { return e ? e->encoder.dim : 0; }

int lvsr_em_infer(const lvsr_model* m, const int64_t* views, size_t length, int iterations, double* mean,
                  double* covariance, double* final_bound) {
    return guarded([&] {
        require(m != nullptr, "null argument");
        const auto fit = lvsr::em_infer(m->params, view_span(views, length), iterations);
        const auto k = static_cast<Eigen::Index>(m->params.dim());
        if (mean) Eigen::Map<Eigen::VectorXd>(mean, k) = fit.q.mean();
        if (covariance)
            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(covariance, k, k) =
                fit.q.covariance();
        if (final_bound) *final_bound = fit.bound_trace.back();
    });
}

int lvsr_encode(const lvsr_encoder* e, const int64_t* views, size_t length, double* mean, double* variances) {
    return guarded([&] {
        require(e != nullptr, "null argument");
        const auto out = lvsr::encode(e->encoder, lvsr::to_counts(view_span(views, length), e->encoder.num_items));
        const auto k = static_cast<Eigen::Index>(e->encoder.dim);
        if (mean) Eigen::Map<Eigen::VectorXd>(mean, k) = out.q.mean();
        if (variances) Eigen::Map<Eigen::VectorXd>(variances, k) = out.q.variances();
    });
}

int lvsr_predict(const lvsr_model* m, const double* mean, const double* covariance, int next_item, size_t samples,
                 uint64_t seed, double* probs) {
    return guarded([&] {
        require(m && probs, "null argument");
        const auto q = posterior_from(m->params.dim(), mean, covariance);
        Eigen::VectorXd p;
        if (next_item == LVSR_NEXT_MC)
            p = lvsr::predict_mc(m->params, q, samples, seed);
        else if (next_item == LVSR_NEXT_MEAN)
            p = lvsr::predict_mean(m->params, q);
        else
            throw lvsr::ArgumentError("unknown next-item method");
        Eigen::Map<Eigen::VectorXd>(probs, p.size()) = p;
    });
}

int lvsr_predict_session(const lvsr_model* m, const lvsr_encoder* e, const int64_t* views, size_t length, int latent,
                         int next_item, size_t samples, int em_iterations, uint64_t seed, double* probs) {
    return guarded([&] {
        require(m && probs, "null argument");
        lvsr::EvalConfig cfg;
        cfg.mc_samples = samples;
        cfg.em_iterations = em_iterations;
        cfg.seed = seed;
        require(latent == LVSR_LATENT_AE || latent == LVSR_LATENT_EM, "unknown online latent method");
        require(next_item == LVSR_NEXT_MC || next_item == LVSR_NEXT_MEAN, "unknown next-item method");
        const auto scorer = lvsr::make_lvm_scorer(
            m->params, e ? &e->encoder : nullptr,
            latent == LVSR_LATENT_AE ? lvsr::OnlineLatent::ae : lvsr::OnlineLatent::em,
            next_item == LVSR_NEXT_MC ? lvsr::OnlineNextItem::mc : lvsr::OnlineNextItem::mean, cfg);
        const Eigen::VectorXd p = scorer(view_span(views, length), 0);
        Eigen::Map<Eigen::VectorXd>(probs, p.size()) = p;
    });
}

int lvsr_top_k(const double* scores, size_t count, size_t k, int64_t* out) {
    return guarded([&] {
        require(scores && out, "null argument");
        const auto ids = lvsr::top_k(Eigen::Map<const Eigen::VectorXd>(scores, static_cast<Eigen::Index>(count)), k);
        std::copy(ids.begin(), ids.end(), out);
    });
}

void lvsr_eval_config_default(lvsr_eval_config* cfg) {
    if (!cfg) return;
    const lvsr::EvalConfig d;
    cfg->metric_k = d.metric_k;
    cfg->mc_samples = d.mc_samples;
    cfg->em_iterations = d.em_iterations;
    cfg->dcg = LVSR_DCG_BINARY;
    cfg->seed = d.seed;
    cfg->threads = d.threads;
}

int lvsr_evaluate_lvm(const lvsr_model* m, const lvsr_encoder* e, const lvsr_sessions* test,
                      const lvsr_eval_config* cfg, const char* train_algorithm, lvsr_report_row* rows, size_t* count) {
    return guarded([&] {
        require(m && test && rows && count, "null argument");
        const auto result = lvsr::evaluate_lvm(m->params, e ? &e->encoder : nullptr, test->data, eval_config(cfg),
                                               train_algorithm ? train_algorithm : "LVM");
        for (size_t i = 0; i < result.size(); ++i) to_c_row(result[i], &rows[i]);
        *count = result.size();
    });
}

int lvsr_evaluate_baseline(int baseline, const lvsr_sessions* train, const lvsr_sessions* test,
                           const lvsr_eval_config* cfg, lvsr_report_row* row) {
    return guarded([&] {
        require(train && test && row, "null argument");
        const auto c = eval_config(cfg);
        if (baseline == LVSR_BASELINE_POPULARITY)
            to_c_row(lvsr::evaluate_popularity(lvsr::fit_popularity(train->data), test->data, c), row);
        else if (baseline == LVSR_BASELINE_ITEMKNN)
            to_c_row(lvsr::evaluate_itemknn(lvsr::fit_itemknn(train->data), test->data, c), row);
        else
            throw lvsr::ArgumentError("unknown baseline");
    });
}

const char* lvsr_train_algorithm_label(int encoder_kind) {
    static const std::string labels[] = {
        lvsr::train_algorithm_label(lvsr::EncoderKind::linear_bouchard),
        lvsr::train_algorithm_label(lvsr::EncoderKind::linear_gaussian),
        lvsr::train_algorithm_label(lvsr::EncoderKind::deep_gaussian),
    };
    if (encoder_kind < 0 || encoder_kind > 2) return nullptr;
    return labels[encoder_kind].c_str();
}

int lvsr_format_report(const lvsr_report_row* rows, size_t count, size_t metric_k, int text, char* buffer,
                       size_t capacity, size_t* needed) {
    return guarded([&] {
        require(rows || count == 0, "rows is null");
        std::vector<lvsr::ReportRow> r;
        for (size_t i = 0; i < count; ++i) r.push_back(from_c_row(rows[i]));
        const std::string out = text ? lvsr::format_report_text(r, metric_k) : lvsr::format_report_csv(r);
        if (needed) *needed = out.size();
        if (buffer && capacity > 0) {
            const size_t n = std::min(out.size(), capacity - 1);
            std::memcpy(buffer, out.data(), n);
            buffer[n] = '\0';
        }
    });
}

}  // extern "C"
