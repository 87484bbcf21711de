#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "relgen/task.hpp"
#include "relgen/tensor.hpp"

namespace relgen {

enum class Baseline { logistic, knn };

std::string baseline_name(Baseline b);
Baseline baseline_from_name(const std::string& name);

struct EvalConfig {
  double l2 = 1e-3;          ///< ridge penalty on the weights (bias exempt)
  std::int32_t iters = 300;
  std::int32_t knn_k = 15;

  void validate() const;
};

/// Logistic weights over prepared features; the bias is unregularized so that
/// infinite l2 shrinks predictions to the context prevalence.
struct LogisticModel {
  std::vector<double> w;
  double bias = 0.0;
};

double logistic_loss(const Matrix& x, const std::vector<std::uint8_t>& y,
                     const std::vector<double>& w, double bias, double l2);

/// Gradient of logistic_loss; last entry is the bias derivative.
std::vector<double> logistic_gradient(const Matrix& x, const std::vector<std::uint8_t>& y,
                                      const std::vector<double>& w, double bias, double l2);

/// Full-batch descent with backtracking line search from zero weights; the
/// loss never increases across iterations. Throws DegenerateError when y is
/// single-class. loss_history, when given, records the loss after each
/// accepted step.
LogisticModel fit_logistic(const Matrix& x, const std::vector<std::uint8_t>& y, double l2,
                           std::int32_t iters, std::vector<double>* loss_history = nullptr);

std::vector<double> predict_logistic(const LogisticModel& model, const Matrix& x);

/// Mean positive-label share among the k nearest context rows (Euclidean);
/// distance ties resolve by row index.
std::vector<double> predict_knn(const Matrix& x_ctx, const std::vector<std::uint8_t>& y_ctx,
                                const Matrix& x_query, std::int32_t k);

/// Mann-Whitney ROC-AUC via average ranks; ties contribute one half. Throws
/// DegenerateError when labels are single-class.
double roc_auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// Model-ready feature blocks: masked cells imputed with context column
/// means, one missing-indicator column appended per feature, then z-scored
/// with context-only statistics (query leakage-free). Constant columns map
/// to zero.
struct PreparedFeatures {
  Matrix ctx;
  Matrix query;
};

PreparedFeatures prepare_features(const IclTask& task);

struct EvalResult {
  TaskMeta meta;
  Baseline baseline = Baseline::logistic;
  double auc = 0.0;
  std::int32_t n_ctx = 0;
};

EvalResult evaluate_task(const IclTask& task, Baseline baseline, const EvalConfig& cfg);

/// Aggregates over a task list; degenerate tasks (single-class context or
/// query) are skipped and counted, never fatal. An empty stream yields empty
/// stats.
struct EvalStats {
  std::int64_t evaluated = 0;
  std::int64_t skipped = 0;
  double mean_auc = 0.0;
  double median_auc = 0.0;
  std::vector<EvalResult> results;
};

EvalStats evaluate_stream(std::span<const IclTask> tasks, Baseline baseline,
                          const EvalConfig& cfg);

nlohmann::ordered_json eval_result_to_json(const EvalResult& r);

}  // namespace relgen
