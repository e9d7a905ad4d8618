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

#include "softmil/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "softmil/numeric.hpp"

namespace softmil {

Eigen::VectorXd finite_difference_gradient(std::span<const Bag> bags, const ModelWeights& weights,
                                           const NormalizationMode& mode,
                                           bool use_annotator_weights, double step) {
  const NormalizationMode unpenalized{mode.kind, 0.0};
  ModelWeights probe = weights;
  Eigen::VectorXd fd(weights.dim());
  for (Eigen::Index i = 0; i < weights.dim(); ++i) {
    const double w0 = weights.w[i];
    probe.w[i] = w0 + step;
    const double plus = objective(bags, probe, unpenalized, use_annotator_weights);
    probe.w[i] = w0 - step;
    const double minus = objective(bags, probe, unpenalized, use_annotator_weights);
    probe.w[i] = w0;
    fd[i] = (plus - minus) / (2.0 * step);
  }
  return fd;
}

Eigen::MatrixXd finite_difference_hessian(std::span<const Bag> bags, const ModelWeights& weights,
                                          const NormalizationMode& mode,
                                          bool use_annotator_weights, double step) {
  ModelWeights probe = weights;
  Eigen::MatrixXd fd(weights.dim(), weights.dim());
  for (Eigen::Index j = 0; j < weights.dim(); ++j) {
    const double w0 = weights.w[j];
    probe.w[j] = w0 + step;
    const Eigen::VectorXd plus = gradient(bags, probe, mode, use_annotator_weights);
    probe.w[j] = w0 - step;
    const Eigen::VectorXd minus = gradient(bags, probe, mode, use_annotator_weights);
    probe.w[j] = w0;
    fd.col(j) = (plus - minus) / (2.0 * step);
  }
  return fd;
}

double relative_error(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double scale = std::max(analytic.lpNorm<Eigen::Infinity>(), 1e-12);
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
  const double scale = std::max(analytic.lpNorm<Eigen::Infinity>(), 1e-12);
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

std::vector<Bag> random_bags(std::uint64_t seed, int n_bags, Eigen::Index dim, int max_bag_size) {
  Rng rng(seed);
  std::vector<Bag> bags;
  bags.reserve(static_cast<std::size_t>(n_bags));
  for (int b = 0; b < n_bags; ++b) {
    Bag bag;
    bag.bag_id = b + 1;
    bag.image_id = b + 1;
    bag.annotator_weight = rng.uniform(0.2, 1.0);
    // Roughly half hard negatives, echoing the imbalanced production mix.
    const bool hard_negative = rng.bernoulli(0.5);
    const int k = hard_negative ? 1 : rng.uniform_int(1, max_bag_size);
    bag.instances.resize(k, dim);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c + 1 < dim; ++c) bag.instances(r, c) = rng.normal();
      bag.instances(r, dim - 1) = 1.0;
    }
    if (hard_negative) {
      bag.kind = BagKind::kHardNegative;
      bag.p_target = 0.0;
    } else {
      bag.kind = BagKind::kSoftPositive;
      bag.p_target = rng.uniform(0.0, 1.0);
    }
    bags.push_back(std::move(bag));
  }
  // Per-class normalization needs both kinds; force one of each.
  if (n_bags >= 2) {
    bags[0].kind = BagKind::kSoftPositive;
    if (bags[0].instances.rows() == 1 && bags[0].p_target == 0.0) bags[0].p_target = 0.5;
    bags[1].kind = BagKind::kHardNegative;
    bags[1].p_target = 0.0;
    if (bags[1].instances.rows() > 1) {
      bags[1].instances = bags[1].instances.topRows(1).eval();
    }
  }
  return bags;
}

ModelWeights random_weights(std::uint64_t seed, Eigen::Index dim) {
  Rng rng(seed);
  ModelWeights m = ModelWeights::zeros(dim);
  for (Eigen::Index i = 0; i < dim; ++i) m.w[i] = 0.5 * rng.normal();
  return m;
}

std::vector<GradCheckCase> gradient_check_sweep(std::uint64_t seed, int n_cases,
                                                std::span<const int> dims,
                                                std::span<const int> bag_sizes, bool with_hessian,
                                                double step) {
  static constexpr Normalization kModes[] = {Normalization::kRaw, Normalization::kPerSample,
                                             Normalization::kPerClass};
  std::vector<GradCheckCase> cases;
  cases.reserve(static_cast<std::size_t>(n_cases));
  for (int i = 0; i < n_cases; ++i) {
    GradCheckCase c;
    c.dim = dims[static_cast<std::size_t>(i) % dims.size()];
    c.bag_size = bag_sizes[static_cast<std::size_t>(i) % bag_sizes.size()];
    c.normalization = kModes[static_cast<std::size_t>(i) % 3];
    c.use_annotator_weights = (i / 3) % 2 == 1;

    const std::uint64_t case_seed = seed + 977u * static_cast<std::uint64_t>(i);
    const std::vector<Bag> bags = random_bags(case_seed, 8, c.dim, c.bag_size);
    const ModelWeights weights = random_weights(case_seed ^ 0xabcdefULL, c.dim);
    const NormalizationMode mode{c.normalization, 0.0};

    const Eigen::VectorXd analytic = gradient(bags, weights, mode, c.use_annotator_weights);
    const Eigen::VectorXd numeric =
        finite_difference_gradient(bags, weights, mode, c.use_annotator_weights, step);
    c.gradient_error = relative_error(analytic, numeric);

    if (with_hessian) {
      const Eigen::MatrixXd analytic_h = hessian(bags, weights, mode, c.use_annotator_weights);
      const Eigen::MatrixXd numeric_h =
          finite_difference_hessian(bags, weights, mode, c.use_annotator_weights, step);
      c.hessian_error = relative_error(analytic_h, numeric_h);
    }
    cases.push_back(c);
  }
  return cases;
}

}  // namespace softmil
