// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file uq.hpp
 * @brief Entropy-based and variance-based uncertainty decomposition.
 *
 * Epistemic uncertainty (EU) is the mean entropy of the per-demonstration-set
 * answer distributions; aleatoric uncertainty (AU) is the gap between the
 * entropy of the pooled distribution and EU. Naming follows the source
 * method's convention (EU = expected per-set entropy, AU = mutual information
 * between prediction and demonstration choice), which inverts the convention
 * common in the Bayesian deep-learning literature; the `method` tag on the
 * report and this note are the guard rails for downstream readers.
 *
 * All entropies are natural-log (nats). 0 * ln 0 is taken as 0; no epsilon
 * smoothing happens here.
 */

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "icluq/error.hpp"
#include "icluq/types.hpp"

namespace icluq::uq {

inline constexpr double kDistributionSumTolerance = 1e-9;

/// How the pooled (total-uncertainty) distribution is formed from the matrix.
///
/// `uniform_mixture` normalizes each column first and averages with weight
/// 1/L; it guarantees AU >= 0 and matches the raw-sum formula whenever column
/// masses are equal. `raw_sum` normalizes after summing the raw columns;
/// unequal column masses then act as data-dependent mixture weights and AU
/// may come out negative. Uniform is the default, raw-sum is kept for
/// fidelity studies.
enum class Pooling { uniform_mixture, raw_sum };

/// Shannon entropy of a normalized probability vector, in nats.
///
/// Requires entries >= 0 summing to 1 within 1e-9; throws NotADistribution
/// otherwise. Result lies in [0, ln K].
inline double entropy(std::span<const double> dist) {
  ICLUQ_REQUIRE(!dist.empty(), ErrorCode::NotADistribution, "empty vector");
  double sum = 0.0;
  for (double p : dist) {
    ICLUQ_REQUIRE(std::isfinite(p) && p >= 0.0, ErrorCode::NotADistribution,
                  "entries must be finite and non-negative");
    sum += p;
  }
  ICLUQ_REQUIRE(std::abs(sum - 1.0) <= kDistributionSumTolerance, ErrorCode::NotADistribution,
                "entries sum to " + std::to_string(sum));
  double h = 0.0;
  for (double p : dist)
    if (p > 0.0) h -= p * std::log(p);
  return h < 0.0 ? 0.0 : h;
}

/// Normalizes raw mass to a probability vector. Throws AllZeroMass when
/// every entry is zero.
inline std::vector<double> normalize(const AnswerDistribution& dist) {
  dist.validate();
  double sum = 0.0;
  for (double m : dist.mass) sum += m;
  std::vector<double> out(dist.mass.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = dist.mass[i] / sum;
  return out;
}

/// Entropy-based decomposition of a K x L probability matrix.
///
/// EU is the mean entropy of the normalized columns; total is the entropy of
/// the pooled distribution (see Pooling); AU := total - EU, so additivity
/// holds exactly. Under uniform pooling AU >= 0 by Jensen's inequality.
inline UncertaintyReport decompose_entropy(const ProbabilityMatrix& matrix,
                                           Pooling pooling = Pooling::uniform_mixture) {
  matrix.validate();
  const std::size_t l = matrix.l_demo_sets();
  const std::size_t k = matrix.k_labels();

  double entropy_sum = 0.0;
  std::vector<double> pooled(k, 0.0);
  for (const auto& col : matrix.columns) {
    const std::vector<double> q = normalize(col);
    entropy_sum += entropy(q);
    if (pooling == Pooling::uniform_mixture) {
      for (std::size_t i = 0; i < k; ++i) pooled[i] += q[i] / static_cast<double>(l);
    } else {
      for (std::size_t i = 0; i < k; ++i) pooled[i] += col.mass[i];
    }
  }
  if (pooling == Pooling::raw_sum) pooled = normalize(AnswerDistribution{pooled});

  UncertaintyReport report;
  report.method = Method::entropy;
  report.epistemic = entropy_sum / static_cast<double>(l);
  report.total = entropy(pooled);
  report.aleatoric = report.total - report.epistemic;
  return report;
}

/// Variance-based decomposition of an M x L scalar grid via the law of total
/// variance: EU is the population variance of the per-configuration row
/// means, AU the mean of the per-configuration (within-row) population
/// variances, and total = EU + AU equals the population variance of the
/// flattened grid.
inline UncertaintyReport decompose_variance(const ScalarGrid& grid) {
  grid.validate();
  const std::size_t m = grid.m_configs();
  const std::size_t l = grid.l_demo_sets();
  ICLUQ_REQUIRE(m * l >= 2, ErrorCode::DegenerateGrid, "need at least two values");

  std::vector<double> row_means(m, 0.0);
  double within_sum = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    double mean = 0.0;
    for (double v : grid.rows[i]) mean += v;
    mean /= static_cast<double>(l);
    row_means[i] = mean;
    double var = 0.0;
    for (double v : grid.rows[i]) var += (v - mean) * (v - mean);
    within_sum += var / static_cast<double>(l);
  }

  double grand = 0.0;
  for (double rm : row_means) grand += rm;
  grand /= static_cast<double>(m);
  double between = 0.0;
  for (double rm : row_means) between += (rm - grand) * (rm - grand);
  between /= static_cast<double>(m);

  UncertaintyReport report;
  report.method = Method::variance;
  report.epistemic = between;
  report.aleatoric = within_sum / static_cast<double>(m);
  report.total = report.epistemic + report.aleatoric;
  return report;
}

/// Scalar encoding for the variance route: class labels become their integer
/// ids, the only scalar a black-box setting exposes. rows index
/// configurations, columns demonstration sets.
inline ScalarGrid label_grid(const std::vector<std::vector<int>>& labels) {
  ScalarGrid grid;
  grid.rows.reserve(labels.size());
  for (const auto& row : labels) {
    std::vector<double> values(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) values[i] = static_cast<double>(row[i]);
    grid.rows.push_back(std::move(values));
  }
  return grid;
}

/// Alternative encoding: per-class indicator grids decomposed separately and
/// summed over the K classes.
inline UncertaintyReport decompose_variance_onehot(const std::vector<std::vector<int>>& labels,
                                                   std::size_t k) {
  ICLUQ_REQUIRE(k >= 1, ErrorCode::InvalidArgument, "need k >= 1");
  UncertaintyReport sum;
  sum.method = Method::variance;
  for (std::size_t c = 0; c < k; ++c) {
    ScalarGrid indicator;
    indicator.rows.reserve(labels.size());
    for (const auto& row : labels) {
      std::vector<double> values(row.size());
      for (std::size_t i = 0; i < row.size(); ++i)
        values[i] = row[i] == static_cast<int>(c) ? 1.0 : 0.0;
      indicator.rows.push_back(std::move(values));
    }
    const UncertaintyReport rep = decompose_variance(indicator);
    sum.total += rep.total;
    sum.epistemic += rep.epistemic;
    sum.aleatoric += rep.aleatoric;
  }
  return sum;
}

}  // namespace icluq::uq
