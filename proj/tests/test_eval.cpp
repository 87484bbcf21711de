#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "relgen/config.hpp"
#include "relgen/errors.hpp"
#include "relgen/eval.hpp"
#include "relgen/rng.hpp"
#include "relgen/task.hpp"
#include "stats_util.hpp"

using namespace relgen;

namespace {

Matrix random_matrix(std::size_t n, std::size_t w, Rng& rng) {
  Matrix x(n, w);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < w; ++c) x(r, c) = static_cast<float>(rng.normal());
  }
  return x;
}

bool mixed_labels(const std::vector<std::uint8_t>& y) {
  bool pos = false, neg = false;
  for (std::uint8_t v : y) (v != 0 ? pos : neg) = true;
  return pos && neg;
}

/// Fully observed task; labels either a linear rule on the first two features
/// or fair coins. Regenerates labels until both blocks hold both classes.
IclTask synthetic_task(std::size_t nc, std::size_t nq, std::size_t w, bool learnable, Rng& rng) {
  IclTask t;
  t.x_ctx = random_matrix(nc, w, rng);
  t.x_query = random_matrix(nq, w, rng);
  t.missing_ctx.assign(nc * w, 0);
  t.missing_query.assign(nq * w, 0);
  auto fill = [&](const Matrix& x, std::vector<std::uint8_t>& y) {
    y.resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      if (learnable) {
        double s = x(r, 0) + 0.5 * x(r, 1) + 0.3 * rng.normal();
        y[r] = s > 0.0 ? 1 : 0;
      } else {
        y[r] = rng.uniform() < 0.5 ? 1 : 0;
      }
    }
  };
  for (int attempt = 0; attempt < 200; ++attempt) {
    fill(t.x_ctx, t.y_ctx);
    fill(t.x_query, t.y_query);
    if (mixed_labels(t.y_ctx) && mixed_labels(t.y_query)) return t;
  }
  throw std::runtime_error("synthetic task never produced mixed labels");
}

}  // namespace

TEST_CASE("roc auc matches hand-ranked examples") {
  std::vector<std::uint8_t> y = {0, 0, 1, 1};

  SUBCASE("perfect ranking") {
    std::vector<double> s = {0.1, 0.2, 0.8, 0.9};
    CHECK(roc_auc(s, y) == 1.0);
  }
  SUBCASE("inverted ranking") {
    std::vector<double> s = {0.9, 0.8, 0.2, 0.1};
    CHECK(roc_auc(s, y) == 0.0);
  }
  SUBCASE("all scores tied") {
    std::vector<double> s = {0.4, 0.4, 0.4, 0.4};
    CHECK(roc_auc(s, y) == 0.5);
  }
  SUBCASE("interleaved ranking counts ordered pairs") {
    std::vector<double> s = {1.0, 2.0, 3.0, 4.0};
    std::vector<std::uint8_t> yi = {0, 1, 0, 1};
    CHECK(roc_auc(s, yi) == 0.75);
  }
  SUBCASE("partial tie gives half credit") {
    std::vector<double> s = {1.0, 1.0, 2.0};
    std::vector<std::uint8_t> yt = {1, 0, 0};
    CHECK(roc_auc(s, yt) == 0.25);
  }
  SUBCASE("single-class labels are rejected") {
    std::vector<double> s = {0.1, 0.2};
    std::vector<std::uint8_t> ones = {1, 1};
    std::vector<std::uint8_t> zeros = {0, 0};
    CHECK_THROWS_AS(roc_auc(s, ones), DegenerateError);
    CHECK_THROWS_AS(roc_auc(s, zeros), DegenerateError);
  }
  SUBCASE("mismatched sizes are rejected") {
    std::vector<double> s = {0.1, 0.2, 0.3};
    CHECK_THROWS_AS(roc_auc(s, y), DimensionError);
  }
}

TEST_CASE("roc auc equals the quadratic pair-counting oracle") {
  Rng rng(91001);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 2 + rng.uniform_int(49);
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.uniform_int(8));
      labels[i] = static_cast<std::uint8_t>(rng.uniform_int(2));
    }
    labels[0] = 0;
    labels[1] = 1;
    CHECK(roc_auc(scores, labels) == testutil::auc_quadratic(scores, labels));
  }
}

TEST_CASE("roc auc on label-independent scores is near one half") {
  Rng rng(91002);
  std::size_t n = 10000;
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = static_cast<std::uint8_t>(rng.uniform_int(2));
  }
  labels[0] = 0;
  labels[1] = 1;
  CHECK(std::abs(roc_auc(scores, labels) - 0.5) < 0.02);
}

TEST_CASE("logistic gradient matches central finite differences") {
  Rng rng(91010);
  const double l2 = 0.37;
  const double h = 1e-5;
  for (int trial = 0; trial < 10; ++trial) {
    Matrix x = random_matrix(20, 5, rng);
    std::vector<std::uint8_t> y(20);
    for (auto& v : y) v = static_cast<std::uint8_t>(rng.uniform_int(2));
    y[0] = 0;
    y[1] = 1;
    std::vector<double> w(5);
    for (auto& v : w) v = rng.normal() * 0.5;
    double bias = rng.normal() * 0.5;

    std::vector<double> grad = logistic_gradient(x, y, w, bias, l2);
    REQUIRE(grad.size() == 6);
    for (std::size_t j = 0; j < 6; ++j) {
      double fd;
      if (j < 5) {
        std::vector<double> lo = w, hi = w;
        lo[j] -= h;
        hi[j] += h;
        fd = (logistic_loss(x, y, hi, bias, l2) - logistic_loss(x, y, lo, bias, l2)) / (2.0 * h);
      } else {
        fd = (logistic_loss(x, y, w, bias + h, l2) - logistic_loss(x, y, w, bias - h, l2)) /
             (2.0 * h);
      }
      CHECK(std::abs(grad[j] - fd) / (std::abs(fd) + 1e-6) < 1e-4);
    }
  }
}

TEST_CASE("logistic fit separates and descends monotonically") {
  Matrix x(2, 1);
  x(0, 0) = -1.0f;
  x(1, 0) = 1.0f;
  std::vector<std::uint8_t> y = {0, 1};

  SUBCASE("separable pair scores queries on the correct side") {
    std::vector<double> history;
    LogisticModel m = fit_logistic(x, y, 1e-3, 200, &history);
    REQUIRE(!history.empty());
    CHECK(history.front() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);

    Matrix q(2, 1);
    q(0, 0) = -2.0f;
    q(1, 0) = 2.0f;
    std::vector<double> p = predict_logistic(m, q);
    CHECK(p[0] < 0.5);
    CHECK(p[1] > 0.5);
    CHECK(p[1] > 0.8);
  }
  SUBCASE("refitting is bitwise deterministic") {
    LogisticModel a = fit_logistic(x, y, 1e-3, 50);
    LogisticModel b = fit_logistic(x, y, 1e-3, 50);
    CHECK(a.bias == b.bias);
    REQUIRE(a.w.size() == b.w.size());
    for (std::size_t i = 0; i < a.w.size(); ++i) CHECK(a.w[i] == b.w[i]);
  }
  SUBCASE("single-class context is rejected") {
    std::vector<std::uint8_t> ones = {1, 1};
    CHECK_THROWS_AS(fit_logistic(x, ones, 1e-3, 10), DegenerateError);
  }
  SUBCASE("random fits never increase the loss") {
    Rng rng(91020);
    for (int trial = 0; trial < 5; ++trial) {
      Matrix xr = random_matrix(30, 4, rng);
      std::vector<std::uint8_t> yr(30);
      for (auto& v : yr) v = static_cast<std::uint8_t>(rng.uniform_int(2));
      yr[0] = 0;
      yr[1] = 1;
      std::vector<double> history;
      fit_logistic(xr, yr, 1e-2, 120, &history);
      for (std::size_t i = 1; i < history.size(); ++i) CHECK(history[i] <= history[i - 1]);
    }
  }
}

TEST_CASE("large ridge drives weights to zero and predictions to prevalence") {
  Rng rng(91030);
  Matrix x = random_matrix(40, 4, rng);
  std::vector<std::uint8_t> y(40, 0);
  for (std::size_t i = 0; i < 12; ++i) y[i] = 1;

  LogisticModel m = fit_logistic(x, y, 300.0, 15000);
  for (double wc : m.w) CHECK(std::abs(wc) < 5e-3);

  Matrix q = random_matrix(10, 4, rng);
  std::vector<double> p = predict_logistic(m, q);
  for (double v : p) CHECK(std::abs(v - 0.3) < 5e-3);
}

TEST_CASE("feature preparation imputes with context means and standardizes without query leakage") {
  IclTask t;
  t.x_ctx = Matrix(4, 2);
  t.x_ctx(0, 0) = 1.0f;
  t.x_ctx(0, 1) = 10.0f;
  t.x_ctx(1, 0) = 2.0f;
  t.x_ctx(1, 1) = 999.0f;  // masked, must not leak into statistics
  t.x_ctx(2, 0) = 3.0f;
  t.x_ctx(2, 1) = 30.0f;
  t.x_ctx(3, 0) = 6.0f;
  t.x_ctx(3, 1) = 777.0f;  // masked
  t.missing_ctx = {0, 0, 0, 1, 0, 0, 0, 1};
  t.x_query = Matrix(2, 2);
  t.x_query(0, 0) = 4.0f;
  t.x_query(0, 1) = 40.0f;
  t.x_query(1, 0) = 5.0f;  // masked
  t.x_query(1, 1) = 5.0f;  // masked
  t.missing_query = {0, 0, 1, 1};
  t.y_ctx = {0, 1, 0, 1};
  t.y_query = {0, 1};

  PreparedFeatures f = prepare_features(t);
  REQUIRE(f.ctx.rows() == 4);
  REQUIRE(f.ctx.cols() == 4);
  REQUIRE(f.query.rows() == 2);
  REQUIRE(f.query.cols() == 4);

  const double sd0 = std::sqrt(3.5);
  const double sd1 = std::sqrt(50.0);
  auto cell = [](double v) { return doctest::Approx(v).epsilon(1e-5); };

  CHECK(f.ctx(0, 0) == cell(-2.0 / sd0));
  CHECK(f.ctx(1, 0) == cell(-1.0 / sd0));
  CHECK(f.ctx(2, 0) == cell(0.0));
  CHECK(f.ctx(3, 0) == cell(3.0 / sd0));
  CHECK(f.ctx(0, 1) == cell(-10.0 / sd1));
  CHECK(f.ctx(1, 1) == cell(0.0));
  CHECK(f.ctx(2, 1) == cell(10.0 / sd1));
  CHECK(f.ctx(3, 1) == cell(0.0));
  for (std::size_t r = 0; r < 4; ++r) CHECK(f.ctx(r, 2) == 0.0f);
  CHECK(f.ctx(0, 3) == cell(-1.0));
  CHECK(f.ctx(1, 3) == cell(1.0));
  CHECK(f.ctx(2, 3) == cell(-1.0));
  CHECK(f.ctx(3, 3) == cell(1.0));

  CHECK(f.query(0, 0) == cell(1.0 / sd0));
  CHECK(f.query(0, 1) == cell(20.0 / sd1));
  CHECK(f.query(0, 2) == 0.0f);
  CHECK(f.query(0, 3) == cell(-1.0));
  CHECK(f.query(1, 0) == cell(0.0));
  CHECK(f.query(1, 1) == cell(0.0));
  CHECK(f.query(1, 2) == 0.0f);  // constant context indicator stays zero
  CHECK(f.query(1, 3) == cell(1.0));

  SUBCASE("fully masked column maps to zeros") {
    IclTask u;
    u.x_ctx = Matrix(2, 1);
    u.x_ctx(0, 0) = 7.0f;
    u.x_ctx(1, 0) = 9.0f;
    u.missing_ctx = {1, 1};
    u.x_query = Matrix(1, 1);
    u.x_query(0, 0) = 4.0f;
    u.missing_query = {1};
    u.y_ctx = {0, 1};
    u.y_query = {1};
    PreparedFeatures g = prepare_features(u);
    for (std::size_t c = 0; c < 2; ++c) {
      CHECK(g.ctx(0, c) == 0.0f);
      CHECK(g.ctx(1, c) == 0.0f);
      CHECK(g.query(0, c) == 0.0f);
    }
  }
  SUBCASE("mask size mismatch is rejected") {
    IclTask bad = t;
    bad.missing_ctx.pop_back();
    CHECK_THROWS_AS(prepare_features(bad), DimensionError);
  }
}

TEST_CASE("knn scores the positive share among the nearest context rows") {
  Matrix ctx(6, 1);
  float xs[6] = {0.0f, 1.0f, 2.0f, 10.0f, 11.0f, 12.0f};
  for (std::size_t r = 0; r < 6; ++r) ctx(r, 0) = xs[r];
  std::vector<std::uint8_t> y = {1, 1, 1, 0, 0, 0};

  SUBCASE("clusters resolve cleanly") {
    Matrix q(2, 1);
    q(0, 0) = 1.1f;
    q(1, 0) = 10.9f;
    std::vector<double> p = predict_knn(ctx, y, q, 3);
    CHECK(p[0] == 1.0);
    CHECK(p[1] == 0.0);
  }
  SUBCASE("distance ties resolve by row index") {
    Matrix ctx2(2, 1);
    ctx2(0, 0) = 0.0f;
    ctx2(1, 0) = 2.0f;
    Matrix q(1, 1);
    q(0, 0) = 1.0f;
    std::vector<std::uint8_t> y2 = {1, 0};
    CHECK(predict_knn(ctx2, y2, q, 1)[0] == 1.0);
    std::vector<std::uint8_t> y3 = {0, 1};
    CHECK(predict_knn(ctx2, y3, q, 1)[0] == 0.0);
  }
  SUBCASE("k larger than the context clamps to the prevalence") {
    Matrix q(1, 1);
    q(0, 0) = 5.0f;
    CHECK(predict_knn(ctx, y, q, 50)[0] == 0.5);
  }
  SUBCASE("empty context is rejected") {
    Matrix none(0, 1);
    std::vector<std::uint8_t> yn;
    Matrix q(1, 1);
    CHECK_THROWS_AS(predict_knn(none, yn, q, 3), DegenerateError);
  }
}

TEST_CASE("task evaluation reports auc within bounds on generated blocks") {
  GeneratorConfig cfg = default_config();
  BlockTasks block = build_tasks(cfg, 818181, TaskCategory::one_hop);
  REQUIRE(!block.tasks.empty());
  const IclTask& task = block.tasks.front();
  EvalConfig ec;
  for (Baseline b : {Baseline::logistic, Baseline::knn}) {
    EvalResult r = evaluate_task(task, b, ec);
    CHECK(r.auc >= 0.0);
    CHECK(r.auc <= 1.0);
    CHECK(r.baseline == b);
    CHECK(r.n_ctx == 512);
    CHECK(r.meta.db_seed == task.meta.db_seed);
    CHECK(r.meta.target_column == task.meta.target_column);
  }
}

TEST_CASE("stream evaluation skips degenerate tasks and aggregates the rest") {
  SUBCASE("empty stream yields empty stats") {
    std::vector<IclTask> none;
    EvalStats stats = evaluate_stream(none, Baseline::logistic, EvalConfig{});
    CHECK(stats.evaluated == 0);
    CHECK(stats.skipped == 0);
    CHECK(stats.mean_auc == 0.0);
    CHECK(stats.median_auc == 0.0);
    CHECK(stats.results.empty());
  }
  SUBCASE("degenerate tasks are counted, not fatal") {
    Rng rng(91040);
    std::vector<IclTask> tasks;
    for (int i = 0; i < 3; ++i) tasks.push_back(synthetic_task(60, 30, 4, true, rng));
    IclTask one_class_query = synthetic_task(60, 30, 4, true, rng);
    std::fill(one_class_query.y_query.begin(), one_class_query.y_query.end(), std::uint8_t{1});
    tasks.push_back(one_class_query);
    IclTask one_class_ctx = synthetic_task(60, 30, 4, true, rng);
    std::fill(one_class_ctx.y_ctx.begin(), one_class_ctx.y_ctx.end(), std::uint8_t{0});
    tasks.push_back(one_class_ctx);

    EvalStats stats = evaluate_stream(tasks, Baseline::logistic, EvalConfig{});
    CHECK(stats.evaluated == 3);
    CHECK(stats.skipped == 2);
    REQUIRE(stats.results.size() == 3);

    std::vector<double> aucs;
    for (const EvalResult& r : stats.results) aucs.push_back(r.auc);
    std::sort(aucs.begin(), aucs.end());
    double mean = (aucs[0] + aucs[1] + aucs[2]) / 3.0;
    CHECK(stats.mean_auc == doctest::Approx(mean).epsilon(1e-12));
    CHECK(stats.median_auc == aucs[1]);
  }
  SUBCASE("even counts average the middle pair") {
    Rng rng(91041);
    std::vector<IclTask> tasks;
    for (int i = 0; i < 4; ++i) tasks.push_back(synthetic_task(60, 30, 4, true, rng));
    EvalStats stats = evaluate_stream(tasks, Baseline::knn, EvalConfig{});
    REQUIRE(stats.evaluated == 4);
    std::vector<double> aucs;
    for (const EvalResult& r : stats.results) aucs.push_back(r.auc);
    std::sort(aucs.begin(), aucs.end());
    CHECK(stats.median_auc == doctest::Approx(0.5 * (aucs[1] + aucs[2])).epsilon(1e-12));
  }
}

TEST_CASE("label-shuffled streams score at chance and learnable streams above") {
  Rng rng(91050);
  std::vector<IclTask> shuffled;
  for (int i = 0; i < 200; ++i) shuffled.push_back(synthetic_task(120, 60, 6, false, rng));
  EvalStats chance = evaluate_stream(shuffled, Baseline::logistic, EvalConfig{});
  CHECK(chance.skipped == 0);
  CHECK(chance.median_auc > 0.47);
  CHECK(chance.median_auc < 0.53);

  std::vector<IclTask> learnable;
  for (int i = 0; i < 40; ++i) learnable.push_back(synthetic_task(120, 60, 6, true, rng));
  EvalStats strong = evaluate_stream(learnable, Baseline::logistic, EvalConfig{});
  CHECK(strong.median_auc > 0.75);
  CHECK(strong.median_auc > chance.median_auc + 0.05);

  EvalStats knn = evaluate_stream(learnable, Baseline::knn, EvalConfig{});
  CHECK(knn.median_auc > 0.65);
}

TEST_CASE("evaluation results serialize to json") {
  Rng rng(91060);
  IclTask task = synthetic_task(50, 20, 3, true, rng);
  task.meta.db_seed = 777;
  task.meta.category = TaskCategory::two_hop;
  task.meta.target_table = 2;
  task.meta.target_column = 5;
  task.meta.positive_class = 1;
  EvalResult r = evaluate_task(task, Baseline::knn, EvalConfig{});
  nlohmann::ordered_json j = eval_result_to_json(r);
  CHECK(j["db_seed"] == 777);
  CHECK(j["category"] == "two_hop");
  CHECK(j["target_table"] == 2);
  CHECK(j["target_column"] == 5);
  CHECK(j["positive_class"] == 1);
  CHECK(j["baseline"] == "knn");
  CHECK(j["n_ctx"] == 50);
  CHECK(j["auc"].is_number());
}

TEST_CASE("evaluation config and baseline names reject invalid input") {
  EvalConfig bad;
  bad.l2 = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = EvalConfig{};
  bad.iters = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = EvalConfig{};
  bad.knn_k = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  CHECK(baseline_from_name("logistic") == Baseline::logistic);
  CHECK(baseline_from_name("knn") == Baseline::knn);
  CHECK(baseline_name(Baseline::logistic) == "logistic");
  CHECK(baseline_name(Baseline::knn) == "knn");
  CHECK_THROWS_AS(baseline_from_name("forest"), FormatError);
}
