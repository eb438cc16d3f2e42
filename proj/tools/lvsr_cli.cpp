#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "lvsr/lvsr.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

struct Failure {
    int exit_code;
    std::string message;
};

int exit_code_for(int status) {
    switch (status) {
    case LVSR_ERR_ARGUMENT: return kUsage;
    case LVSR_ERR_NUMERIC: return kNumeric;
    default: return kData;
    }
}

void check(int status) {
    if (status != LVSR_OK) throw Failure{exit_code_for(status), lvsr_last_error()};
}

struct SessionsDeleter {
    void operator()(lvsr_sessions* p) const { lvsr_sessions_free(p); }
};
struct ModelDeleter {
    void operator()(lvsr_model* p) const { lvsr_model_free(p); }
};
struct EncoderDeleter {
    void operator()(lvsr_encoder* p) const { lvsr_encoder_free(p); }
};
using Sessions = std::unique_ptr<lvsr_sessions, SessionsDeleter>;
using Model = std::unique_ptr<lvsr_model, ModelDeleter>;
using Encoder = std::unique_ptr<lvsr_encoder, EncoderDeleter>;

Sessions load_sessions(const std::string& path, std::int64_t num_items) {
    lvsr_sessions* s = nullptr;
    check(lvsr_sessions_load(path.c_str(), num_items, &s));
    return Sessions(s);
}

Model load_model(const std::string& path) {
    lvsr_model* m = nullptr;
    check(lvsr_model_load(path.c_str(), &m));
    return Model(m);
}

Encoder load_encoder(const std::string& path) {
    lvsr_encoder* e = nullptr;
    check(lvsr_encoder_load(path.c_str(), &e));
    return Encoder(e);
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", x);
    return buf;
}

void write_text(const std::string& path, const std::string& text) {
    if (path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Failure{kData, "cannot open " + path + " for writing"};
    out << text;
    if (!out) throw Failure{kData, "failed writing " + path};
}

// The resolved configuration of a run, saved beside its primary output.
void write_config(const std::string& command, const std::string& primary_output, json cfg) {
    const fs::path dir = primary_output == "-" ? fs::path(".") : fs::path(primary_output).parent_path();
    cfg["command"] = command;
    cfg["library_version"] = lvsr_version();
    write_text((dir / (command + "_config.json")).string(), cfg.dump(2) + "\n");
}

std::vector<std::int64_t> session_views(const lvsr_sessions* s, std::size_t i, std::string* id) {
    const char* sid = nullptr;
    const int64_t* views = nullptr;
    std::size_t n = 0;
    check(lvsr_sessions_get(s, i, &sid, &views, &n));
    if (id) *id = sid;
    return {views, views + n};
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
    std::size_t num_items = 20;
    std::size_t k = 5;
    std::size_t sessions = 100;
    std::string length = "10";
    std::uint64_t seed = 0;
    double psi_scale = 1.0;
    double rho_scale = 1.0;
    std::string ground_truth;
    std::string out = "sessions.csv";
    std::string truth_out = "ground_truth.txt";
};

int run_simulate(const SimulateArgs& a) {
    Model truth;
    if (!a.ground_truth.empty()) {
        truth = load_model(a.ground_truth);
    } else {
        lvsr_model* m = nullptr;
        check(lvsr_random_ground_truth(a.num_items, a.k, a.seed, a.psi_scale, a.rho_scale, &m));
        truth.reset(m);
    }
    lvsr_sessions* s = nullptr;
    check(lvsr_simulate(truth.get(), a.seed, a.sessions, a.length.c_str(), &s));
    Sessions data(s);
    check(lvsr_sessions_save(data.get(), a.out.c_str()));
    check(lvsr_model_save(truth.get(), a.truth_out.c_str(), LVSR_FORMAT_TEXT));
    std::cerr << "wrote " << lvsr_sessions_count(data.get()) << " sessions (" << lvsr_sessions_num_views(data.get())
              << " views) to " << a.out << "\n";
    write_config("simulate", a.out,
                 {{"num_items", lvsr_model_num_items(truth.get())},
                  {"k", lvsr_model_dim(truth.get())},
                  {"sessions", a.sessions},
                  {"length", a.length},
                  {"seed", a.seed},
                  {"psi_scale", a.psi_scale},
                  {"rho_scale", a.rho_scale},
                  {"ground_truth", a.ground_truth},
                  {"out", a.out},
                  {"truth_out", a.truth_out}});
    return kOk;
}

// ---- split ----------------------------------------------------------------

struct SplitArgs {
    std::string data = "sessions.csv";
    std::int64_t num_items = 0;
    double test_fraction = 0.2;
    std::size_t top_items = 0;
    std::uint64_t seed = 0;
    std::string train_out = "train.csv";
    std::string test_out = "test.csv";
};

int run_split(const SplitArgs& a) {
    Sessions data = load_sessions(a.data, a.num_items);
    if (a.top_items > 0) {
        lvsr_sessions* f = nullptr;
        check(lvsr_sessions_filter_top(data.get(), a.top_items, &f));
        data.reset(f);
    }
    lvsr_sessions *tr = nullptr, *te = nullptr;
    check(lvsr_sessions_split(data.get(), a.test_fraction, a.seed, &tr, &te));
    Sessions train(tr), test(te);
    check(lvsr_sessions_save(train.get(), a.train_out.c_str()));
    check(lvsr_sessions_save(test.get(), a.test_out.c_str()));
    std::cerr << "split " << lvsr_sessions_count(data.get()) << " sessions into " << lvsr_sessions_count(train.get())
              << " train / " << lvsr_sessions_count(test.get()) << " test\n";
    write_config("split", a.train_out,
                 {{"data", a.data},
                  {"num_items", lvsr_sessions_num_items(data.get())},
                  {"test_fraction", a.test_fraction},
                  {"top_items", a.top_items},
                  {"seed", a.seed},
                  {"train_out", a.train_out},
                  {"test_out", a.test_out}});
    return kOk;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
    std::string data = "sessions.csv";
    std::int64_t num_items = 0;
    std::string config;
    std::string bound;
    std::string encoder;
    std::size_t k = 10;
    int epochs = 100;
    double lr = 0.001;
    double l2 = 0.0;
    std::size_t batch_size = 10;
    std::size_t mc_samples = 1;
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    std::string out = "model.txt";
    std::string encoder_out = "encoder.json";
    std::string loss_out = "loss.csv";
    std::string format = "text";
    bool quiet = false;
};

// Fills every option not given on the command line from the JSON config.
void apply_config_file(const CLI::App& cmd, TrainArgs& a) {
    if (a.config.empty()) return;
    std::ifstream in(a.config);
    if (!in) throw Failure{kData, "cannot open config " + a.config};
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw Failure{kData, "config " + a.config + ": " + e.what()};
    }
    if (!cfg.is_object()) throw Failure{kData, "config " + a.config + " must be a JSON object"};
    auto take = [&](const char* key, const char* flag, auto& field) {
        if (!cfg.contains(key) || cmd.count(flag) > 0) return;
        try {
            cfg.at(key).get_to(field);
        } catch (const json::exception& e) {
            throw Failure{kData, std::string("config key '") + key + "': " + e.what()};
        }
    };
    static const std::vector<std::string> known = {"data",   "num_items",  "bound",      "encoder", "k",
                                                   "epochs", "lr",         "l2",         "batch_size",
                                                   "mc_samples", "seed",   "threads",    "deterministic",
                                                   "out",    "encoder_out", "loss_out",  "format"};
    for (const auto& [key, value] : cfg.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw Failure{kUsage, "unknown config key '" + key + "'"};
    take("data", "--data", a.data);
    take("num_items", "--num-items", a.num_items);
    take("bound", "--bound", a.bound);
    take("encoder", "--encoder", a.encoder);
    take("k", "--k", a.k);
    take("epochs", "--epochs", a.epochs);
    take("lr", "--lr", a.lr);
    take("l2", "--l2", a.l2);
    take("batch_size", "--batch-size", a.batch_size);
    take("mc_samples", "--mc-samples", a.mc_samples);
    take("seed", "--seed", a.seed);
    take("threads", "--threads", a.threads);
    take("deterministic", "--deterministic", a.deterministic);
    take("out", "--out", a.out);
    take("encoder_out", "--encoder-out", a.encoder_out);
    take("loss_out", "--loss-out", a.loss_out);
    take("format", "--format", a.format);
}

int run_train(const CLI::App& cmd, TrainArgs a) {
    apply_config_file(cmd, a);
    lvsr_train_config cfg;
    lvsr_train_config_default(&cfg);
    if (a.bound.empty()) a.bound = a.encoder.empty() || a.encoder == "linear_bouchard" ? "bouchard" : "reparam";
    check(lvsr_bound_from_string(a.bound.c_str(), &cfg.bound));
    if (a.encoder.empty())
        a.encoder = cfg.bound == LVSR_BOUND_BOUCHARD ? "linear_bouchard" : "linear_gaussian";
    check(lvsr_encoder_kind_from_string(a.encoder.c_str(), &cfg.encoder_kind));
    if (a.format != "text" && a.format != "json") throw Failure{kUsage, "--format must be text or json"};
    if (a.deterministic) a.threads = 1;
    cfg.dim = a.k;
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.l2 = a.l2;
    cfg.batch_size = a.batch_size;
    cfg.mc_samples = a.mc_samples;
    cfg.seed = a.seed;
    cfg.threads = a.threads;

    Sessions data = load_sessions(a.data, a.num_items);
    std::vector<double> loss(a.epochs > 0 ? static_cast<std::size_t>(a.epochs) : 0);
    struct Progress {
        int epochs;
        bool quiet;
    } progress{a.epochs, a.quiet};
    auto on_epoch = [](int epoch, double objective, void* user) {
        const auto* p = static_cast<Progress*>(user);
        const int step = p->epochs >= 20 ? p->epochs / 10 : 1;
        if (!p->quiet && ((epoch + 1) % step == 0 || epoch + 1 == p->epochs))
            std::cerr << "epoch " << epoch + 1 << "/" << p->epochs << "  objective " << fmt(objective) << "\n";
    };
    lvsr_model* m = nullptr;
    lvsr_encoder* e = nullptr;
    check(lvsr_train(data.get(), &cfg, on_epoch, &progress, &m, &e, loss.data()));
    Model model(m);
    Encoder encoder(e);

    check(lvsr_model_save(model.get(), a.out.c_str(), a.format == "json" ? LVSR_FORMAT_JSON : LVSR_FORMAT_TEXT));
    check(lvsr_encoder_save(encoder.get(), a.encoder_out.c_str()));
    std::string csv = "epoch,objective\n";
    for (std::size_t i = 0; i < loss.size(); ++i) csv += std::to_string(i + 1) + "," + fmt(loss[i]) + "\n";
    write_text(a.loss_out, csv);

    write_config("train", a.out,
                 {{"data", a.data},
                  {"num_items", lvsr_sessions_num_items(data.get())},
                  {"bound", a.bound},
                  {"encoder", a.encoder},
                  {"k", a.k},
                  {"epochs", a.epochs},
                  {"lr", a.lr},
                  {"l2", a.l2},
                  {"batch_size", a.batch_size},
                  {"mc_samples", a.mc_samples},
                  {"seed", a.seed},
                  {"threads", a.threads},
                  {"deterministic", a.deterministic},
                  {"out", a.out},
                  {"encoder_out", a.encoder_out},
                  {"loss_out", a.loss_out},
                  {"format", a.format}});
    return kOk;
}

// ---- infer ----------------------------------------------------------------

struct InferArgs {
    std::string model = "model.txt";
    std::string data = "sessions.csv";
    int em_iterations = 100;
    std::string out = "posteriors.csv";
};

int run_infer(const InferArgs& a) {
    Model model = load_model(a.model);
    Sessions data = load_sessions(a.data, static_cast<std::int64_t>(lvsr_model_num_items(model.get())));
    const std::size_t k = lvsr_model_dim(model.get());

    std::ostringstream out;
    out << "session_id";
    for (std::size_t j = 0; j < k; ++j) out << ",mu_" << j + 1;
    for (std::size_t j = 0; j < k; ++j) out << ",var_" << j + 1;
    out << ",bound\n";
    std::vector<double> mean(k), cov(k * k);
    for (std::size_t i = 0; i < lvsr_sessions_count(data.get()); ++i) {
        std::string id;
        const auto views = session_views(data.get(), i, &id);
        double bound = 0.0;
        check(lvsr_em_infer(model.get(), views.data(), views.size(), a.em_iterations, mean.data(), cov.data(), &bound));
        out << id;
        for (double x : mean) out << "," << fmt(x);
        for (std::size_t j = 0; j < k; ++j) out << "," << fmt(cov[j * k + j]);
        out << "," << fmt(bound) << "\n";
    }
    write_text(a.out, out.str());
    if (a.out != "-")
        write_config("infer", a.out,
                     {{"model", a.model}, {"data", a.data}, {"em_iterations", a.em_iterations}, {"out", a.out}});
    return kOk;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
    std::string model = "model.txt";
    std::string encoder = "encoder.json";
    std::string data = "sessions.csv";
    std::string latent = "em";
    std::string next = "mc";
    std::size_t samples = 100;
    int em_iterations = 100;
    std::size_t top_k = 5;
    std::uint64_t seed = 0;
    std::string out = "predictions.csv";
};

std::uint64_t session_seed(std::uint64_t seed, std::size_t index) {
    return seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1));
}

int run_predict(const PredictArgs& a) {
    if (a.latent != "em" && a.latent != "ae") throw Failure{kUsage, "--latent must be em or ae"};
    if (a.next != "mc" && a.next != "mean") throw Failure{kUsage, "--next must be mc or mean"};
    Model model = load_model(a.model);
    Encoder encoder;
    if (a.latent == "ae") encoder = load_encoder(a.encoder);
    const std::size_t p = lvsr_model_num_items(model.get());
    Sessions data = load_sessions(a.data, static_cast<std::int64_t>(p));

    std::ostringstream out;
    out << "session_id,rank,item_id,probability\n";
    std::vector<double> probs(p);
    std::vector<std::int64_t> top(a.top_k);
    for (std::size_t i = 0; i < lvsr_sessions_count(data.get()); ++i) {
        std::string id;
        const auto views = session_views(data.get(), i, &id);
        check(lvsr_predict_session(model.get(), encoder.get(), views.data(), views.size(),
                                   a.latent == "ae" ? LVSR_LATENT_AE : LVSR_LATENT_EM,
                                   a.next == "mc" ? LVSR_NEXT_MC : LVSR_NEXT_MEAN, a.samples, a.em_iterations,
                                   session_seed(a.seed, i), probs.data()));
        check(lvsr_top_k(probs.data(), p, a.top_k, top.data()));
        for (std::size_t r = 0; r < a.top_k; ++r)
            out << id << "," << r + 1 << "," << top[r] << "," << fmt(probs[static_cast<std::size_t>(top[r])]) << "\n";
    }
    write_text(a.out, out.str());
    if (a.out != "-")
        write_config("predict", a.out,
                     {{"model", a.model},
                      {"encoder", a.latent == "ae" ? a.encoder : ""},
                      {"data", a.data},
                      {"latent", a.latent},
                      {"next", a.next},
                      {"samples", a.samples},
                      {"em_iterations", a.em_iterations},
                      {"top_k", a.top_k},
                      {"seed", a.seed},
                      {"out", a.out}});
    return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
    std::string model = "model.txt";
    std::string encoder = "encoder.json";
    std::string train = "sessions.csv";
    std::string test = "sessions.csv";
    std::int64_t num_items = 0;
    std::string algorithm = "all";
    std::string label;
    std::size_t metric_k = 5;
    std::size_t samples = 100;
    int em_iterations = 100;
    std::string dcg = "binary";
    std::uint64_t seed = 0;
    int threads = 1;
    bool deterministic = false;
    std::string out = "report.csv";
};

int run_eval(const CLI::App& cmd, EvalArgs a) {
    const bool want_lvm = a.algorithm == "all" || a.algorithm == "lvm";
    const bool want_pop = a.algorithm == "all" || a.algorithm == "pop";
    const bool want_knn = a.algorithm == "all" || a.algorithm == "itemknn";
    if (a.dcg != "binary" && a.dcg != "literal") throw Failure{kUsage, "--dcg must be binary or literal"};
    if (a.deterministic) a.threads = 1;

    lvsr_eval_config cfg;
    lvsr_eval_config_default(&cfg);
    cfg.metric_k = a.metric_k;
    cfg.mc_samples = a.samples;
    cfg.em_iterations = a.em_iterations;
    cfg.dcg = a.dcg == "literal" ? LVSR_DCG_LITERAL : LVSR_DCG_BINARY;
    cfg.seed = a.seed;
    cfg.threads = a.threads;

    Model model;
    Encoder encoder;
    std::int64_t num_items = a.num_items;
    if (want_lvm) {
        model = load_model(a.model);
        num_items = static_cast<std::int64_t>(lvsr_model_num_items(model.get()));
        // The encoder is optional unless named explicitly; without it only EM rows are reported.
        if (cmd.count("--encoder") > 0 || fs::exists(a.encoder)) encoder = load_encoder(a.encoder);
    }
    Sessions test = load_sessions(a.test, num_items);
    if (num_items <= 0) num_items = static_cast<std::int64_t>(lvsr_sessions_num_items(test.get()));

    std::vector<lvsr_report_row> rows;
    if (want_pop || want_knn) {
        Sessions train = load_sessions(a.train, num_items);
        if (lvsr_sessions_num_items(train.get()) != lvsr_sessions_num_items(test.get()))
            throw Failure{kData, "train and test files disagree on the number of items; pass --num-items"};
        for (int baseline : {LVSR_BASELINE_POPULARITY, LVSR_BASELINE_ITEMKNN}) {
            if ((baseline == LVSR_BASELINE_POPULARITY && !want_pop) || (baseline == LVSR_BASELINE_ITEMKNN && !want_knn))
                continue;
            lvsr_report_row row;
            check(lvsr_evaluate_baseline(baseline, train.get(), test.get(), &cfg, &row));
            rows.push_back(row);
        }
    }
    if (want_lvm) {
        std::string label = a.label;
        if (label.empty()) label = encoder ? lvsr_train_algorithm_label(lvsr_encoder_kind(encoder.get())) : "LVM";
        lvsr_report_row lvm[4];
        std::size_t n = 0;
        check(lvsr_evaluate_lvm(model.get(), encoder.get(), test.get(), &cfg, label.c_str(), lvm, &n));
        rows.insert(rows.end(), lvm, lvm + n);
    }

    auto render = [&](int text) {
        std::size_t needed = 0;
        check(lvsr_format_report(rows.data(), rows.size(), a.metric_k, text, nullptr, 0, &needed));
        std::string s(needed + 1, '\0');
        check(lvsr_format_report(rows.data(), rows.size(), a.metric_k, text, s.data(), s.size(), &needed));
        s.resize(needed);
        return s;
    };
    write_text(a.out, render(0));
    if (a.out != "-") {
        std::cout << render(1);
        write_config("eval", a.out,
                     {{"model", want_lvm ? a.model : ""},
                      {"encoder", encoder ? a.encoder : ""},
                      {"train", (want_pop || want_knn) ? a.train : ""},
                      {"test", a.test},
                      {"num_items", num_items},
                      {"algorithm", a.algorithm},
                      {"k_metric", a.metric_k},
                      {"samples", a.samples},
                      {"em_iterations", a.em_iterations},
                      {"dcg", a.dcg},
                      {"seed", a.seed},
                      {"threads", a.threads},
                      {"deterministic", a.deterministic},
                      {"out", a.out}});
    }
    return kOk;
}

// ---- case-study -----------------------------------------------------------

struct CaseStudyArgs {
    int em_iterations = 100;
    std::size_t samples = 10000;
    std::uint64_t seed = 0;
};

int run_case_study(const CaseStudyArgs& a) {
    lvsr_model* m = nullptr;
    check(lvsr_case_study_model(&m));
    Model model(m);
    const std::size_t p = lvsr_model_num_items(model.get()), k = lvsr_model_dim(model.get());
    std::vector<double> mean(k), cov(k * k), probs(p);

    for (std::size_t s = 0; s < lvsr_case_study_scenario_count(); ++s) {
        const char* name = nullptr;
        const int64_t* views = nullptr;
        std::size_t n = 0;
        check(lvsr_case_study_scenario(s, &name, &views, &n));
        double bound = 0.0;
        check(lvsr_em_infer(model.get(), views, n, a.em_iterations, mean.data(), cov.data(), &bound));
        check(lvsr_predict(model.get(), mean.data(), cov.data(), LVSR_NEXT_MC, a.samples, a.seed, probs.data()));

        std::string block = "scenario " + std::to_string(s + 1) + ": " + name + "\n  history:";
        for (std::size_t t = 0; t < n; ++t) block += std::string(t ? ", " : " ") + lvsr_case_study_label(views[t]);
        char cell[32];
        double trace = 0.0;
        block += "\n  mu:   ";
        for (double x : mean) {
            std::snprintf(cell, sizeof cell, " %8.4f", x);
            block += cell;
        }
        block += "\n  var:  ";
        for (std::size_t j = 0; j < k; ++j) {
            trace += cov[j * k + j];
            std::snprintf(cell, sizeof cell, " %8.4f", cov[j * k + j]);
            block += cell;
        }
        block += "\n  trace: " + fmt(trace) + "\n  next item:\n";
        for (std::size_t i = 0; i < p; ++i) {
            char line[96];
            std::snprintf(line, sizeof line, "    %-14s %.4f\n", lvsr_case_study_label(i), probs[i]);
            block += line;
        }
        std::cout << block;
        std::cout << "\n";
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent-variable session recommender: simulate, train, infer, predict and evaluate."};
    app.require_subcommand(1);
    app.set_version_flag("--version", lvsr_version());

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate sessions from a latent-variable ground truth");
    simulate->add_option("--num-items", sim.num_items, "Number of items P")->capture_default_str();
    simulate->add_option("--k", sim.k, "Latent dimension K")->capture_default_str();
    simulate->add_option("--sessions", sim.sessions, "Number of sessions")->capture_default_str();
    simulate->add_option("--length", sim.length, "Session length: N or poisson:RATE")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--psi-scale", sim.psi_scale, "Std. dev. of random ground-truth embeddings")
        ->capture_default_str();
    simulate->add_option("--rho-scale", sim.rho_scale, "Std. dev. of random ground-truth popularity offsets")
        ->capture_default_str();
    simulate->add_option("--ground-truth", sim.ground_truth, "Use this model file instead of a random ground truth");
    simulate->add_option("--out", sim.out, "Session CSV to write")->capture_default_str();
    simulate->add_option("--truth-out", sim.truth_out, "Ground-truth model file to write")->capture_default_str();

    SplitArgs spl;
    auto* split = app.add_subcommand("split", "Split sessions into train and test sets");
    split->add_option("--data", spl.data, "Session CSV")->capture_default_str();
    split->add_option("--num-items", spl.num_items, "Catalog size (default: largest id + 1)");
    split->add_option("--test-fraction", spl.test_fraction, "Fraction of sessions held out")->capture_default_str();
    split->add_option("--top-items", spl.top_items, "Keep only the N most viewed items first (0 keeps all)")
        ->capture_default_str();
    split->add_option("--seed", spl.seed, "Random seed")->capture_default_str();
    split->add_option("--train-out", spl.train_out, "Training CSV to write")->capture_default_str();
    split->add_option("--test-out", spl.test_out, "Test CSV to write")->capture_default_str();

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Fit item embeddings and an encoder");
    train->add_option("--data", tr.data, "Training session CSV")->capture_default_str();
    train->add_option("--num-items", tr.num_items, "Catalog size (default: largest id + 1)");
    train->add_option("--config", tr.config, "JSON file of defaults; command-line flags take precedence");
    train->add_option("--bound", tr.bound, "Training bound: bouchard or reparam (default follows --encoder)");
    train->add_option("--encoder", tr.encoder,
                      "linear_bouchard, linear_gaussian or deep_gaussian (default follows --bound)");
    train->add_option("--k", tr.k, "Latent dimension K")->capture_default_str();
    train->add_option("--epochs", tr.epochs, "Passes over the data")->capture_default_str();
    train->add_option("--lr", tr.lr, "RMSProp learning rate")->capture_default_str();
    train->add_option("--l2", tr.l2, "L2 penalty on embeddings and encoder weights")->capture_default_str();
    train->add_option("--batch-size", tr.batch_size, "Sessions per update")->capture_default_str();
    train->add_option("--mc-samples", tr.mc_samples, "Noise draws per session (reparam)")->capture_default_str();
    train->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
    train->add_option("--threads", tr.threads, "Worker threads for gradient evaluation")->capture_default_str();
    train->add_flag("--deterministic", tr.deterministic, "Force a single thread");
    train->add_option("--out", tr.out, "Model file to write")->capture_default_str();
    train->add_option("--encoder-out", tr.encoder_out, "Encoder JSON to write")->capture_default_str();
    train->add_option("--loss-out", tr.loss_out, "Loss curve CSV (epoch, objective)")->capture_default_str();
    train->add_option("--format", tr.format, "Model file format: text or json")->capture_default_str();
    train->add_flag("--quiet", tr.quiet, "No progress output");

    InferArgs inf;
    auto* infer = app.add_subcommand("infer", "Per-session posterior by EM on the variational bound");
    infer->add_option("--model", inf.model, "Model file")->capture_default_str();
    infer->add_option("--data", inf.data, "Session CSV")->capture_default_str();
    infer->add_option("--em-iterations", inf.em_iterations, "EM cycles per session")->capture_default_str();
    infer->add_option("--out", inf.out, "Output CSV, or - for standard output")->capture_default_str();

    PredictArgs pre;
    auto* predict = app.add_subcommand("predict", "Top-k next-item predictions for each session");
    predict->add_option("--model", pre.model, "Model file")->capture_default_str();
    predict->add_option("--encoder", pre.encoder, "Encoder JSON (used with --latent ae)")->capture_default_str();
    predict->add_option("--data", pre.data, "Session CSV; each full session is the history")->capture_default_str();
    predict->add_option("--latent", pre.latent, "Posterior from em or ae")->capture_default_str();
    predict->add_option("--next", pre.next, "Next-item rule: mc or mean")->capture_default_str();
    predict->add_option("--samples", pre.samples, "Monte Carlo samples")->capture_default_str();
    predict->add_option("--em-iterations", pre.em_iterations, "EM cycles per session")->capture_default_str();
    predict->add_option("--top-k", pre.top_k, "Items listed per session")->capture_default_str();
    predict->add_option("--seed", pre.seed, "Random seed")->capture_default_str();
    predict->add_option("--out", pre.out, "Output CSV, or - for standard output")->capture_default_str();

    EvalArgs ev;
    auto* eval = app.add_subcommand("eval", "Leave-last-out recall and DCG");
    eval->add_option("--model", ev.model, "Model file")->capture_default_str();
    eval->add_option("--encoder", ev.encoder, "Encoder JSON; AE rows are skipped when absent")->capture_default_str();
    eval->add_option("--train", ev.train, "Training CSV for the baselines")->capture_default_str();
    eval->add_option("--test", ev.test, "Test CSV")->capture_default_str();
    eval->add_option("--num-items", ev.num_items, "Catalog size when no model is loaded");
    eval->add_option("--algorithm", ev.algorithm, "all, lvm, pop or itemknn")
        ->check(CLI::IsMember({"all", "lvm", "pop", "itemknn"}))
        ->capture_default_str();
    eval->add_option("--label", ev.label, "Row label for the latent model (default from the encoder kind)");
    eval->add_option("--k-metric", ev.metric_k, "Cut-off K for RC@K and DCG@K")->capture_default_str();
    eval->add_option("--samples", ev.samples, "Monte Carlo samples per prediction")->capture_default_str();
    eval->add_option("--em-iterations", ev.em_iterations, "EM cycles per session")->capture_default_str();
    eval->add_option("--dcg", ev.dcg, "DCG gain: binary or literal")->capture_default_str();
    eval->add_option("--seed", ev.seed, "Random seed")->capture_default_str();
    eval->add_option("--threads", ev.threads, "Worker threads")->capture_default_str();
    eval->add_flag("--deterministic", ev.deterministic, "Force a single thread");
    eval->add_option("--out", ev.out, "Report CSV, or - for standard output")->capture_default_str();

    CaseStudyArgs cs;
    auto* case_study = app.add_subcommand("case-study", "Posterior and next-item behaviour on the seven-product example");
    case_study->add_option("--em-iterations", cs.em_iterations, "EM cycles")->capture_default_str();
    case_study->add_option("--samples", cs.samples, "Monte Carlo samples")->capture_default_str();
    case_study->add_option("--seed", cs.seed, "Random seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        const auto parsed = app.get_subcommands();
        std::cerr << "error: " << e.what() << "\n\n" << (parsed.empty() ? app.help() : parsed.front()->help());
        return kUsage;
    }

    try {
        if (*simulate) return run_simulate(sim);
        if (*split) return run_split(spl);
        if (*train) return run_train(*train, tr);
        if (*infer) return run_infer(inf);
        if (*predict) return run_predict(pre);
        if (*eval) return run_eval(*eval, ev);
        if (*case_study) return run_case_study(cs);
    } catch (const Failure& f) {
        std::cerr << "error: " << f.message << "\n";
        return f.exit_code;
    }
    return kUsage;
}
