#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "doctest.h"
#include "lvsr/lvsr.h"

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "lvsr_c_api_test";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("status codes and last error") {
    lvsr_sessions* s = nullptr;
    CHECK(lvsr_sessions_load("/nonexistent/sessions.csv", 0, &s) == LVSR_ERR_IO);
    CHECK(s == nullptr);
    CHECK(std::string(lvsr_last_error()).size() > 0);
    CHECK(std::string(lvsr_status_name(LVSR_ERR_NUMERIC)) == "numeric failure");

    int bound = -1;
    CHECK(lvsr_bound_from_string("reparam", &bound) == LVSR_OK);
    CHECK(bound == LVSR_BOUND_REPARAM);
    CHECK(std::string(lvsr_last_error()).empty());
    CHECK(lvsr_bound_from_string("tilted", &bound) == LVSR_ERR_ARGUMENT);
    int kind = -1;
    CHECK(lvsr_encoder_kind_from_string("deep_gaussian", &kind) == LVSR_OK);
    CHECK(std::string(lvsr_encoder_kind_name(kind)) == "deep_gaussian");
    CHECK(lvsr_model_load(nullptr, nullptr) == LVSR_ERR_ARGUMENT);
}

TEST_CASE("sessions round trip through a file") {
    const char* ids[] = {"a", "b"};
    const size_t lengths[] = {3, 2};
    const int64_t views[] = {0, 2, 2, 1, 0};
    lvsr_sessions* s = nullptr;
    REQUIRE(lvsr_sessions_create(3, 2, ids, lengths, views, &s) == LVSR_OK);
    CHECK(lvsr_sessions_count(s) == 2);
    CHECK(lvsr_sessions_num_views(s) == 5);

    const auto path = scratch("sessions.csv");
    REQUIRE(lvsr_sessions_save(s, path.c_str()) == LVSR_OK);
    lvsr_sessions* back = nullptr;
    REQUIRE(lvsr_sessions_load(path.c_str(), 3, &back) == LVSR_OK);
    const char* id = nullptr;
    const int64_t* v = nullptr;
    size_t n = 0;
    REQUIRE(lvsr_sessions_get(back, 1, &id, &v, &n) == LVSR_OK);
    CHECK(std::string(id) == "b");
    REQUIRE(n == 2);
    CHECK(v[0] == 1);
    CHECK(v[1] == 0);
    CHECK(lvsr_sessions_get(back, 2, &id, &v, &n) == LVSR_ERR_BOUNDS);

    const int64_t bad[] = {5};
    const size_t one[] = {1};
    lvsr_sessions* invalid = nullptr;
    CHECK(lvsr_sessions_create(3, 1, nullptr, one, bad, &invalid) == LVSR_ERR_BOUNDS);
    lvsr_sessions_free(s);
    lvsr_sessions_free(back);
}

TEST_CASE("simulate, split, train, evaluate") {
    lvsr_model* truth = nullptr;
    REQUIRE(lvsr_random_ground_truth(8, 2, 3, 1.0, 1.0, &truth) == LVSR_OK);
    lvsr_sessions* data = nullptr;
    REQUIRE(lvsr_simulate(truth, 3, 60, "6", &data) == LVSR_OK);
    lvsr_sessions *train = nullptr, *test = nullptr;
    REQUIRE(lvsr_sessions_split(data, 0.25, 1, &train, &test) == LVSR_OK);
    CHECK(lvsr_sessions_count(train) + lvsr_sessions_count(test) == 60);

    lvsr_train_config cfg;
    lvsr_train_config_default(&cfg);
    CHECK(cfg.learning_rate == 0.001);
    cfg.dim = 2;
    cfg.epochs = 5;
    std::vector<double> loss(5);
    int calls = 0;
    auto on_epoch = [](int, double, void* user) { ++*static_cast<int*>(user); };
    lvsr_model* model = nullptr;
    lvsr_encoder* enc = nullptr;
    REQUIRE(lvsr_train(train, &cfg, on_epoch, &calls, &model, &enc, loss.data()) == LVSR_OK);
    CHECK(calls == 5);
    for (double l : loss) CHECK(std::isfinite(l));
    CHECK(lvsr_model_dim(model) == 2);
    CHECK(lvsr_encoder_kind(enc) == LVSR_ENCODER_LINEAR_BOUCHARD);

    lvsr_eval_config ecfg;
    lvsr_eval_config_default(&ecfg);
    ecfg.mc_samples = 10;
    ecfg.em_iterations = 10;
    lvsr_report_row rows[6];
    size_t count = 0;
    REQUIRE(lvsr_evaluate_lvm(model, enc, test, &ecfg, lvsr_train_algorithm_label(LVSR_ENCODER_LINEAR_BOUCHARD), rows,
                              &count) == LVSR_OK);
    CHECK(count == 4);
    CHECK(std::string(rows[0].train_algorithm) == "Bouch/AE");
    REQUIRE(lvsr_evaluate_baseline(LVSR_BASELINE_POPULARITY, train, test, &ecfg, &rows[4]) == LVSR_OK);
    REQUIRE(lvsr_evaluate_baseline(LVSR_BASELINE_ITEMKNN, train, test, &ecfg, &rows[5]) == LVSR_OK);
    CHECK(std::string(rows[5].train_algorithm) == "ItemKNN");

    size_t needed = 0;
    REQUIRE(lvsr_format_report(rows, 6, 5, 0, nullptr, 0, &needed) == LVSR_OK);
    std::string csv(needed + 1, '\0');
    REQUIRE(lvsr_format_report(rows, 6, 5, 0, csv.data(), csv.size(), &needed) == LVSR_OK);
    csv.resize(needed);
    CHECK(csv.rfind("train_algorithm,online_latent,online_next_item,rc_at_k,dcg_at_k\n", 0) == 0);

    const auto mpath = scratch("model.json"), epath = scratch("encoder.json");
    REQUIRE(lvsr_model_save(model, mpath.c_str(), LVSR_FORMAT_JSON) == LVSR_OK);
    REQUIRE(lvsr_encoder_save(enc, epath.c_str()) == LVSR_OK);
    lvsr_model* m2 = nullptr;
    lvsr_encoder* e2 = nullptr;
    REQUIRE(lvsr_model_load(mpath.c_str(), &m2) == LVSR_OK);
    REQUIRE(lvsr_encoder_load(epath.c_str(), &e2) == LVSR_OK);
    std::vector<double> psi1(16), psi2(16);
    lvsr_model_copy_psi(model, psi1.data());
    lvsr_model_copy_psi(m2, psi2.data());
    CHECK(psi1 == psi2);

    const int64_t history[] = {1, 4, 4};
    std::vector<double> p_ae(8), p_em(8);
    REQUIRE(lvsr_predict_session(m2, e2, history, 3, LVSR_LATENT_AE, LVSR_NEXT_MEAN, 0, 0, 0, p_ae.data()) == LVSR_OK);
    REQUIRE(lvsr_predict_session(m2, nullptr, history, 3, LVSR_LATENT_EM, LVSR_NEXT_MC, 50, 20, 1, p_em.data()) ==
            LVSR_OK);
    double sum = 0.0;
    for (double x : p_em) sum += x;
    CHECK(sum == doctest::Approx(1.0));
    CHECK(lvsr_predict_session(m2, nullptr, history, 3, LVSR_LATENT_AE, LVSR_NEXT_MC, 50, 20, 1, p_ae.data()) ==
          LVSR_ERR_ARGUMENT);

    lvsr_model_free(truth);
    lvsr_model_free(model);
    lvsr_model_free(m2);
    lvsr_encoder_free(enc);
    lvsr_encoder_free(e2);
    lvsr_sessions_free(data);
    lvsr_sessions_free(train);
    lvsr_sessions_free(test);
}

TEST_CASE("case study through the C interface") {
    lvsr_model* m = nullptr;
    REQUIRE(lvsr_case_study_model(&m) == LVSR_OK);
    CHECK(lvsr_model_num_items(m) == 7);
    CHECK(std::string(lvsr_case_study_label(1)) == "City Phone");
    CHECK(lvsr_case_study_label(7) == nullptr);
    REQUIRE(lvsr_case_study_scenario_count() == 4);

    const int64_t* views = nullptr;
    size_t n = 0;
    REQUIRE(lvsr_case_study_scenario(0, nullptr, &views, &n) == LVSR_OK);
    std::vector<double> mean(5), cov(25), probs(7);
    double bound = 0.0;
    REQUIRE(lvsr_em_infer(m, views, n, 100, mean.data(), cov.data(), &bound) == LVSR_OK);
    CHECK(bound < 0.0);
    REQUIRE(lvsr_predict(m, mean.data(), cov.data(), LVSR_NEXT_MC, 2000, 1, probs.data()) == LVSR_OK);
    int64_t top[2];
    REQUIRE(lvsr_top_k(probs.data(), 7, 2, top) == LVSR_OK);
    CHECK(((top[0] == 0 && top[1] == 1) || (top[0] == 1 && top[1] == 0)));
    CHECK(lvsr_top_k(probs.data(), 7, 8, top) == LVSR_ERR_ARGUMENT);

    cov[0] = -1.0;
    CHECK(lvsr_predict(m, mean.data(), cov.data(), LVSR_NEXT_MC, 10, 1, probs.data()) == LVSR_ERR_NUMERIC);
    lvsr_model_free(m);
}
