// Copyright 2026 The softmil Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "softmil/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace softmil {

namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 58;
constexpr double kCertificateScale = 1e-5;

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

double l1_of_penalized(const ModelWeights& m) {
  double l1 = 0.0;
  for (Eigen::Index i = 0; i < m.dim(); ++i) {
    if (m.penalized[i]) l1 += std::abs(m.w[i]);
  }
  return l1;
}

// Steepest-descent direction of the nonsmooth objective: the minimum-norm
// subgradient, coordinatewise.
Eigen::VectorXd pseudo_gradient(const ModelWeights& m, const Eigen::VectorXd& grad,
                                double per_dim_lambda) {
  Eigen::VectorXd pg(grad.size());
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    if (!m.penalized[i]) {
      pg[i] = grad[i];
    } else if (m.w[i] > 0.0) {
      pg[i] = grad[i] + per_dim_lambda;
    } else if (m.w[i] < 0.0) {
      pg[i] = grad[i] - per_dim_lambda;
    } else if (grad[i] + per_dim_lambda < 0.0) {
      pg[i] = grad[i] + per_dim_lambda;
    } else if (grad[i] - per_dim_lambda > 0.0) {
      pg[i] = grad[i] - per_dim_lambda;
    } else {
      pg[i] = 0.0;
    }
  }
  return pg;
}

StationarityReport certificate(const ModelWeights& m, const Eigen::VectorXd& grad,
                               double per_dim_lambda, double objective_value) {
  StationarityReport report;
  report.tolerance = kCertificateScale * std::max(1.0, std::abs(objective_value));
  double worst = 0.0;
  for (Eigen::Index i = 0; i < grad.size(); ++i) {
    double violation = 0.0;
    if (!m.penalized[i]) {
      violation = std::abs(grad[i]);
    } else if (m.w[i] == 0.0) {
      violation = std::max(0.0, std::abs(grad[i]) - per_dim_lambda);
    } else {
      violation = std::abs(grad[i] + per_dim_lambda * sgn(m.w[i]));
    }
    worst = std::max(worst, violation);
  }
  report.max_violation = worst;
  report.satisfied = worst <= report.tolerance;
  return report;
}

struct Correction {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

// Two-loop recursion over the smooth-gradient history, applied to the
// pseudo-gradient.
Eigen::VectorXd lbfgs_direction(const std::deque<Correction>& history, const Eigen::VectorXd& pg) {
  Eigen::VectorXd q = -pg;
  if (history.empty()) return q;
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    alpha[k] = history[k].rho * history[k].s.dot(q);
    q -= alpha[k] * history[k].y;
  }
  const Correction& last = history.back();
  q *= last.s.dot(last.y) / last.y.squaredNorm();
  for (std::size_t k = 0; k < history.size(); ++k) {
    const double beta = history[k].rho * history[k].y.dot(q);
    q += (alpha[k] - beta) * history[k].s;
  }
  return q;
}

}  // namespace

void validate_optimizer_config(const OptimizerConfig& cfg) {
  if (cfg.max_iterations < 1) throw std::invalid_argument("optimizer: max_iterations must be >= 1");
  if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("optimizer: tolerance must be positive");
  if (cfg.memory < 1) throw std::invalid_argument("optimizer: memory must be >= 1");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("optimizer: lambda must be nonnegative");
}

StationarityReport check_stationarity(std::span<const Bag> bags, const ModelWeights& weights,
                                      const NormalizationMode& mode, bool use_annotator_weights) {
  const NormalizationMode smooth{mode.kind, 0.0};
  const ObjectiveReport report = evaluate_objective(bags, weights, smooth, use_annotator_weights);
  const double per_dim = mode.lambda / static_cast<double>(weights.dim());
  const double full = report.value + per_dim * l1_of_penalized(weights);
  return certificate(weights, report.gradient, per_dim, full);
}

FitResult fit(std::span<const Bag> bags, const OptimizerConfig& cfg, const NormalizationMode& mode,
              bool use_annotator_weights, const std::optional<ModelWeights>& w0) {
  validate_optimizer_config(cfg);
  if (bags.empty()) throw std::invalid_argument("fit: empty bag list");
  const NormalizationMode smooth{mode.kind, 0.0};

  FitResult result;
  if (w0.has_value()) {
    validate_weights(*w0);
    result.weights = *w0;
  }

  // First evaluation also validates bags and fixes the dimension.
  {
    const Eigen::Index d = bags.front().instances.cols();
    if (!w0.has_value()) result.weights = ModelWeights::zeros(d);
  }
  ModelWeights& model = result.weights;
  const double per_dim = cfg.lambda / static_cast<double>(model.dim());

  ObjectiveReport report = evaluate_objective(bags, model, smooth, use_annotator_weights);
  double objective_value = report.value + per_dim * l1_of_penalized(model);
  if (!std::isfinite(objective_value)) {
    throw std::runtime_error("fit: non-finite objective at iteration 0");
  }
  result.objective_history.push_back(objective_value);

  std::deque<Correction> history;
  int stalled = 0;
  bool certified = false;

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    const StationarityReport cert = certificate(model, report.gradient, per_dim, objective_value);
    if (cert.satisfied) {
      certified = true;
      break;
    }

    const Eigen::VectorXd pg = pseudo_gradient(model, report.gradient, per_dim);
    Eigen::VectorXd dir = lbfgs_direction(history, pg);
    // Keep the direction inside the descent halfspace of the pseudo-gradient.
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      if (model.penalized[i] && dir[i] * pg[i] >= 0.0) dir[i] = 0.0;
    }
    if (dir.isZero(0.0)) break;

    // Orthant chosen by current signs, or by the pseudo-gradient at zeros.
    Eigen::VectorXd orthant(dir.size());
    for (Eigen::Index i = 0; i < dir.size(); ++i) {
      orthant[i] = model.w[i] != 0.0 ? sgn(model.w[i]) : sgn(-pg[i]);
    }

    double alpha = history.empty() ? std::min(1.0, 1.0 / dir.norm()) : 1.0;
    bool accepted = false;
    ModelWeights trial = model;
    ObjectiveReport trial_report;
    double trial_value = 0.0;
    for (int bt = 0; bt < kMaxBacktracks; ++bt) {
      trial.w = model.w + alpha * dir;
      for (Eigen::Index i = 0; i < trial.w.size(); ++i) {
        if (model.penalized[i] && trial.w[i] * orthant[i] <= 0.0) trial.w[i] = 0.0;
      }
      trial_report = evaluate_objective(bags, trial, smooth, use_annotator_weights);
      trial_value = trial_report.value + per_dim * l1_of_penalized(trial);
      if (!std::isfinite(trial_value)) {
        throw std::runtime_error("fit: non-finite objective at iteration " +
                                 std::to_string(iter + 1));
      }
      const double directional = pg.dot(trial.w - model.w);
      if (trial_value <= objective_value + kArmijo * directional) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    Correction corr;
    corr.s = trial.w - model.w;
    corr.y = trial_report.gradient - report.gradient;
    const double sy = corr.s.dot(corr.y);
    if (sy > 1e-10 * corr.s.norm() * corr.y.norm()) {
      corr.rho = 1.0 / sy;
      history.push_back(std::move(corr));
      if (history.size() > static_cast<std::size_t>(cfg.memory)) history.pop_front();
    }

    const double decrease = (objective_value - trial_value) / std::max(1.0, std::abs(objective_value));
    model.w = trial.w;
    report = std::move(trial_report);
    objective_value = trial_value;
    result.objective_history.push_back(objective_value);
    result.iterations = iter + 1;

    stalled = decrease < cfg.tolerance ? stalled + 1 : 0;
    if (stalled >= 3) break;
  }

  if (!certified) {
    certified = certificate(model, report.gradient, per_dim, objective_value).satisfied;
  }
  result.converged = certified;
  result.objective_value = objective_value;
  result.nnz = 0;
  for (Eigen::Index i = 0; i < model.dim(); ++i) {
    result.nnz += model.penalized[i] && model.w[i] != 0.0;
  }
  return result;
}

std::vector<double> default_lambda_grid() {
  std::vector<double> grid;
  grid.reserve(20);
  for (int i = 0; i < 20; ++i) {
    grid.push_back(std::pow(10.0, -3.0 + 3.0 * i / 19.0));
  }
  return grid;
}

LambdaSweepResult lambda_sweep(const SweepSplit& train, const SweepSplit& validation,
                               const SweepConfig& sweep_cfg, const OptimizerConfig& cfg,
                               const NormalizationMode& mode, bool use_annotator_weights) {
  if (sweep_cfg.grid.empty()) throw std::invalid_argument("lambda_sweep: empty grid");
  for (std::size_t i = 1; i < sweep_cfg.grid.size(); ++i) {
    if (!(sweep_cfg.grid[i] > sweep_cfg.grid[i - 1])) {
      throw std::invalid_argument("lambda_sweep: grid must be strictly increasing");
    }
  }

  LambdaSweepResult result;
  std::optional<ModelWeights> warm;
  double best_score = -std::numeric_limits<double>::infinity();
  for (double lambda : sweep_cfg.grid) {
    OptimizerConfig point_cfg = cfg;
    point_cfg.lambda = lambda;
    SweepPoint point;
    point.lambda = lambda;
    point.fit = fit(train.bags, point_cfg, mode, use_annotator_weights,
                    sweep_cfg.warm_start ? warm : std::nullopt);
    if (sweep_cfg.warm_start) warm = point.fit.weights;

    point.train_roc =
        froc(train.eval, candidate_scores(train.eval, point.fit.weights), sweep_cfg.fp_points);
    point.validation_roc = froc(validation.eval, candidate_scores(validation.eval, point.fit.weights),
                                sweep_cfg.fp_points);

    double score = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < sweep_cfg.fp_points.size(); ++f) {
      const double train_sens = point.train_roc.gt_sensitivity[f];
      const double val_sens = point.validation_roc.gt_sensitivity[f];
      score = std::min(score, val_sens - sweep_cfg.gap_penalty * std::abs(train_sens - val_sens));
    }
    point.selection_score = score;
    // >= so equal scores resolve to the sparser (larger) lambda.
    if (score >= best_score) {
      best_score = score;
      result.selected_index = result.points.size();
    }
    result.points.push_back(std::move(point));
  }
  result.selected_lambda = result.points[result.selected_index].lambda;
  return result;
}

}  // namespace softmil
