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

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "softmil/evaluation.hpp"
#include "softmil/mil.hpp"

namespace softmil {

struct OptimizerConfig {
  int max_iterations = 500;
  double tolerance = 1e-9;  // relative objective decrease per accepted step
  int memory = 10;          // quasi-Newton history length
  double lambda = 0.0;
};

void validate_optimizer_config(const OptimizerConfig& cfg);

struct FitResult {
  ModelWeights weights;
  double objective_value = 0.0;
  int iterations = 0;
  bool converged = false;
  int nnz = 0;  // penalized coordinates that are not exactly zero
  std::vector<double> objective_history;
};

/// First-order optimality for min N(w) + (lambda/d) * l1(w_penalized):
/// at zeros the smooth gradient must fit inside the penalty band, elsewhere it
/// must cancel the penalty subgradient, all within
/// tol = 1e-5 * max(1, |F(w)|).
struct StationarityReport {
  bool satisfied = false;
  double max_violation = 0.0;
  double tolerance = 0.0;
};

StationarityReport check_stationarity(std::span<const Bag> bags, const ModelWeights& weights,
                                      const NormalizationMode& mode, bool use_annotator_weights);

/// Orthant-constrained limited-memory quasi-Newton minimization of the
/// penalized objective. Zeros in the result are exact; cfg.lambda is the
/// penalty strength (mode.lambda is ignored here).
FitResult fit(std::span<const Bag> bags, const OptimizerConfig& cfg, const NormalizationMode& mode,
              bool use_annotator_weights, const std::optional<ModelWeights>& w0 = std::nullopt);

// --- regularization-path model selection -------------------------------------

struct SweepSplit {
  std::vector<Bag> bags;
  EvalSet eval;
};

struct SweepConfig {
  std::vector<double> grid;       // strictly increasing lambdas
  std::vector<double> fp_points;  // operating points used for selection
  double gap_penalty = 1.0;       // weight of the train/validation gap
  bool warm_start = true;
};

struct SweepPoint {
  double lambda = 0.0;
  FitResult fit;
  RocTable train_roc;
  RocTable validation_roc;
  double selection_score = 0.0;
};

struct LambdaSweepResult {
  std::vector<SweepPoint> points;
  std::size_t selected_index = 0;
  double selected_lambda = 0.0;
};

/// 20 logarithmic points spanning [1e-3, 1].
std::vector<double> default_lambda_grid();

/// Trains along the grid (warm-started), scores GT/image sensitivity on train
/// and validation at each FP point, and selects the lambda maximizing
/// min over FP points of validation sensitivity minus the penalized
/// train/validation gap. Ties resolve to the sparser (larger) lambda.
LambdaSweepResult lambda_sweep(const SweepSplit& train, const SweepSplit& validation,
                               const SweepConfig& sweep_cfg, const OptimizerConfig& cfg,
                               const NormalizationMode& mode, bool use_annotator_weights);

}  // namespace softmil
