#include "relgen/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relgen/accum.hpp"
#include "relgen/errors.hpp"

namespace relgen {

std::string baseline_name(Baseline b) {
  switch (b) {
    case Baseline::logistic: return "logistic";
    case Baseline::knn: return "knn";
  }
  throw ContractError("unhandled baseline");
}

Baseline baseline_from_name(const std::string& name) {
  if (name == "logistic") return Baseline::logistic;
  if (name == "knn") return Baseline::knn;
  throw FormatError("unknown baseline: " + name);
}

void EvalConfig::validate() const {
  if (l2 < 0.0) throw ConfigError("eval.l2: negative");
  if (iters < 1) throw ConfigError("eval.iters: must be positive");
  if (knn_k < 1) throw ConfigError("eval.knn_k: must be positive");
}

namespace {

void check_shapes(const Matrix& x, const std::vector<std::uint8_t>& y,
                  const std::vector<double>& w) {
  if (x.rows() != y.size()) throw DimensionError("labels do not match the feature rows");
  if (x.cols() != w.size()) throw DimensionError("weights do not match the feature width");
}

double dot_row(const Matrix& x, std::size_t r, const std::vector<double>& w, double bias) {
  double z = bias;
  for (std::size_t c = 0; c < x.cols(); ++c) z += static_cast<double>(x(r, c)) * w[c];
  return z;
}

/// log(1 + exp(v)) without overflow.
double log1pexp(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double sigmoid(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

}  // namespace

double logistic_loss(const Matrix& x, const std::vector<std::uint8_t>& y,
                     const std::vector<double>& w, double bias, double l2) {
  check_shapes(x, y, w);
  const double n = static_cast<double>(x.rows());
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double z = dot_row(x, r, w, bias);
    double sign = y[r] != 0 ? 1.0 : -1.0;
    loss += log1pexp(-sign * z);
  }
  loss /= n;
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return loss + 0.5 * l2 * reg;
}

std::vector<double> logistic_gradient(const Matrix& x, const std::vector<std::uint8_t>& y,
                                      const std::vector<double>& w, double bias, double l2) {
  check_shapes(x, y, w);
  const double n = static_cast<double>(x.rows());
  std::vector<double> grad(w.size() + 1, 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double z = dot_row(x, r, w, bias);
    double sign = y[r] != 0 ? 1.0 : -1.0;
    double coeff = -sign * sigmoid(-sign * z) / n;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      grad[c] += coeff * static_cast<double>(x(r, c));
    }
    grad[w.size()] += coeff;
  }
  for (std::size_t c = 0; c < w.size(); ++c) grad[c] += l2 * w[c];
  return grad;
}

LogisticModel fit_logistic(const Matrix& x, const std::vector<std::uint8_t>& y, double l2,
                           std::int32_t iters, std::vector<double>* loss_history) {
  if (x.rows() != y.size()) throw DimensionError("labels do not match the feature rows");
  bool pos = false, neg = false;
  for (std::uint8_t v : y) (v != 0 ? pos : neg) = true;
  if (!pos || !neg) throw DegenerateError("single-class context cannot fit a classifier");

  LogisticModel model;
  model.w.assign(x.cols(), 0.0);
  double loss = logistic_loss(x, y, model.w, model.bias, l2);
  if (loss_history != nullptr) loss_history->push_back(loss);

  for (std::int32_t it = 0; it < iters; ++it) {
    std::vector<double> grad = logistic_gradient(x, y, model.w, model.bias, l2);
    double gnorm2 = 0.0;
    for (double g : grad) gnorm2 += g * g;
    if (gnorm2 < 1e-24) break;

    double step = 1.0;
    std::vector<double> trial(model.w.size());
    double trial_bias = 0.0;
    double trial_loss = loss;
    bool accepted = false;
    // Armijo backtracking keeps the descent monotone.
    for (int halvings = 0; halvings < 40; ++halvings) {
      for (std::size_t c = 0; c < model.w.size(); ++c) {
        trial[c] = model.w[c] - step * grad[c];
      }
      trial_bias = model.bias - step * grad[model.w.size()];
      trial_loss = logistic_loss(x, y, trial, trial_bias, l2);
      if (trial_loss <= loss - 1e-4 * step * gnorm2) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    model.w.swap(trial);
    model.bias = trial_bias;
    loss = trial_loss;
    if (loss_history != nullptr) loss_history->push_back(loss);
  }
  return model;
}

std::vector<double> predict_logistic(const LogisticModel& model, const Matrix& x) {
  if (x.cols() != model.w.size()) throw DimensionError("weights do not match the feature width");
  std::vector<double> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    out[r] = sigmoid(dot_row(x, r, model.w, model.bias));
  }
  return out;
}

std::vector<double> predict_knn(const Matrix& x_ctx, const std::vector<std::uint8_t>& y_ctx,
                                const Matrix& x_query, std::int32_t k) {
  if (x_ctx.rows() != y_ctx.size()) throw DimensionError("labels do not match the context rows");
  if (x_ctx.cols() != x_query.cols()) throw DimensionError("context and query widths differ");
  if (x_ctx.rows() == 0) throw DegenerateError("empty context");
  const std::size_t kk = std::min<std::size_t>(static_cast<std::size_t>(k), x_ctx.rows());
  std::vector<double> out(x_query.rows());
  std::vector<std::pair<double, std::size_t>> dist(x_ctx.rows());
  for (std::size_t q = 0; q < x_query.rows(); ++q) {
    for (std::size_t r = 0; r < x_ctx.rows(); ++r) {
      double d = 0.0;
      for (std::size_t c = 0; c < x_ctx.cols(); ++c) {
        double diff = static_cast<double>(x_ctx(r, c)) - static_cast<double>(x_query(q, c));
        d += diff * diff;
      }
      dist[r] = {d, r};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(kk), dist.end());
    double pos = 0.0;
    for (std::size_t i = 0; i < kk; ++i) pos += y_ctx[dist[i].second];
    out[q] = pos / static_cast<double>(kk);
  }
  return out;
}

double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores do not match the labels");
  std::size_t n_pos = 0;
  for (std::uint8_t v : labels) n_pos += v != 0 ? 1 : 0;
  std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DegenerateError("single-class labels have no ranking");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Average ranks over tied runs, then the Mann-Whitney U statistic.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] != 0) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  double u = rank_sum_pos - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

PreparedFeatures prepare_features(const IclTask& task) {
  const std::size_t w = task.x_ctx.cols();
  const std::size_t nc = task.x_ctx.rows();
  const std::size_t nq = task.x_query.rows();
  if (task.x_query.cols() != w) throw DimensionError("context and query widths differ");
  if (task.missing_ctx.size() != nc * w || task.missing_query.size() != nq * w) {
    throw DimensionError("missing masks do not match the feature blocks");
  }

  // Context-only statistics: observed-cell means for imputation, then
  // whole-column moments (after imputation) for z-scoring.
  std::vector<double> impute(w, 0.0);
  for (std::size_t c = 0; c < w; ++c) {
    std::vector<float> seen;
    for (std::size_t r = 0; r < nc; ++r) {
      if (task.missing_ctx[r * w + c] == 0) seen.push_back(task.x_ctx(r, c));
    }
    if (!seen.empty()) impute[c] = sorted_sum(seen) / static_cast<double>(seen.size());
  }

  auto fill = [&](const Matrix& src, const std::vector<std::uint8_t>& mask, Matrix& dst) {
    const std::size_t n = src.rows();
    dst = Matrix(n, 2 * w, 0.0f);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        bool miss = mask[r * w + c] != 0;
        dst(r, c) = miss ? static_cast<float>(impute[c]) : src(r, c);
        dst(r, w + c) = miss ? 1.0f : 0.0f;
      }
    }
  };
  PreparedFeatures out;
  fill(task.x_ctx, task.missing_ctx, out.ctx);
  fill(task.x_query, task.missing_query, out.query);

  for (std::size_t c = 0; c < 2 * w; ++c) {
    std::vector<float> col(nc);
    for (std::size_t r = 0; r < nc; ++r) col[r] = out.ctx(r, c);
    Moments m = sorted_moments(col);
    double sd = std::sqrt(m.var);
    auto rescale = [&](Matrix& x) {
      for (std::size_t r = 0; r < x.rows(); ++r) {
        double v = sd < 1e-12 ? 0.0 : (static_cast<double>(x(r, c)) - m.mean) / sd;
        x(r, c) = static_cast<float>(v);
      }
    };
    rescale(out.ctx);
    rescale(out.query);
  }
  return out;
}

EvalResult evaluate_task(const IclTask& task, Baseline baseline, const EvalConfig& cfg) {
  cfg.validate();
  PreparedFeatures feats = prepare_features(task);
  std::vector<double> scores;
  if (baseline == Baseline::logistic) {
    LogisticModel model = fit_logistic(feats.ctx, task.y_ctx, cfg.l2, cfg.iters);
    scores = predict_logistic(model, feats.query);
  } else {
    scores = predict_knn(feats.ctx, task.y_ctx, feats.query, cfg.knn_k);
  }
  EvalResult r;
  r.meta = task.meta;
  r.baseline = baseline;
  r.n_ctx = static_cast<std::int32_t>(task.x_ctx.rows());
  r.auc = roc_auc(scores, task.y_query);
  return r;
}

EvalStats evaluate_stream(std::span<const IclTask> tasks, Baseline baseline,
                          const EvalConfig& cfg) {
  EvalStats stats;
  std::vector<double> aucs;
  for (const IclTask& task : tasks) {
    try {
      EvalResult r = evaluate_task(task, baseline, cfg);
      aucs.push_back(r.auc);
      stats.results.push_back(std::move(r));
      ++stats.evaluated;
    } catch (const DegenerateError&) {
      ++stats.skipped;
    }
  }
  if (!aucs.empty()) {
    std::vector<double> sorted(aucs);
    std::sort(sorted.begin(), sorted.end());
    stats.mean_auc = sorted_sum(sorted) / static_cast<double>(sorted.size());
    std::size_t mid = sorted.size() / 2;
    stats.median_auc = sorted.size() % 2 == 1
                           ? sorted[mid]
                           : 0.5 * (sorted[mid - 1] + sorted[mid]);
  }
  return stats;
}

nlohmann::ordered_json eval_result_to_json(const EvalResult& r) {
  nlohmann::ordered_json j;
  j["db_seed"] = r.meta.db_seed;
  j["category"] = task_category_name(r.meta.category);
  j["target_table"] = r.meta.target_table;
  j["target_column"] = r.meta.target_column;
  j["positive_class"] = r.meta.positive_class;
  j["baseline"] = baseline_name(r.baseline);
  j["n_ctx"] = r.n_ctx;
  j["auc"] = r.auc;
  return j;
}

}  // namespace relgen
