// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file types.hpp
 * @brief Shared domain types: answer distributions, probability matrices,
 *        decoded sequences, label spaces, and uncertainty reports.
 */

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "icluq/error.hpp"

namespace icluq {

/// Unnormalized per-label probability mass aggregated from decoded sequences.
/// Entries are non-negative and at least one must be positive.
struct AnswerDistribution {
  std::vector<double> mass;

  std::size_t k_labels() const { return mass.size(); }

  void validate() const {
    ICLUQ_REQUIRE(!mass.empty(), ErrorCode::InvalidArgument, "empty distribution");
    bool any_positive = false;
    for (double m : mass) {
      ICLUQ_REQUIRE(m >= 0.0 && std::isfinite(m), ErrorCode::InvalidArgument,
                    "mass entries must be finite and non-negative");
      if (m > 0.0) any_positive = true;
    }
    ICLUQ_REQUIRE(any_positive, ErrorCode::AllZeroMass, "all-zero distribution");
  }
};

/// K x L matrix of answer distributions; column j is the aggregated answer
/// distribution obtained under demonstration set j, rows index labels.
struct ProbabilityMatrix {
  std::vector<AnswerDistribution> columns;

  std::size_t l_demo_sets() const { return columns.size(); }
  std::size_t k_labels() const { return columns.empty() ? 0 : columns.front().k_labels(); }
  const AnswerDistribution& column(std::size_t j) const { return columns.at(j); }

  void validate() const {
    ICLUQ_REQUIRE(!columns.empty(), ErrorCode::InvalidArgument, "matrix needs at least one column");
    const std::size_t k = columns.front().k_labels();
    for (const auto& col : columns) {
      ICLUQ_REQUIRE(col.k_labels() == k, ErrorCode::ShapeMismatch,
                    "columns must share the same label count");
      col.validate();
    }
  }
};

enum class Method { entropy, variance };

inline std::string_view to_string(Method m) {
  return m == Method::entropy ? "entropy" : "variance";
}

/// One instance's decomposed uncertainty. Under the entropy method the values
/// are in nats and total == epistemic + aleatoric holds exactly by
/// construction; under the variance method all three are variances.
struct UncertaintyReport {
  double total = 0.0;
  double epistemic = 0.0;
  double aleatoric = 0.0;
  Method method = Method::entropy;
};

/// M x L grid of scalar-encoded outputs: rows index model configurations,
/// columns index demonstration sets.
struct ScalarGrid {
  std::vector<std::vector<double>> rows;

  std::size_t m_configs() const { return rows.size(); }
  std::size_t l_demo_sets() const { return rows.empty() ? 0 : rows.front().size(); }

  void validate() const {
    ICLUQ_REQUIRE(!rows.empty() && !rows.front().empty(), ErrorCode::InvalidArgument,
                  "grid must be at least 1x1");
    for (const auto& r : rows)
      ICLUQ_REQUIRE(r.size() == rows.front().size(), ErrorCode::ShapeMismatch,
                    "grid rows must have equal length");
  }
};

/// One generated token with its log-probability and the top-k alternatives
/// the endpoint reported at that position (sorted by descending logprob).
struct TokenScore {
  std::string token;
  double logprob = 0.0;
  std::vector<std::pair<std::string, double>> top_alternatives;
};

/// One decoded hypothesis: full text, per-token scores, and the sequence
/// log-probability (the sum of token logprobs).
struct GeneratedSequence {
  std::string text;
  std::vector<TokenScore> tokens;
  double sequence_logprob = 0.0;
};

/// Checks the structural invariants of a decoded sequence: token logprobs
/// are non-positive, alternatives are sorted by descending logprob, and the
/// sequence logprob equals the token sum within 1e-6.
inline void validate_sequence(const GeneratedSequence& seq) {
  double sum = 0.0;
  for (const auto& tok : seq.tokens) {
    ICLUQ_REQUIRE(tok.logprob <= 0.0, ErrorCode::InvalidArgument,
                  "token logprob must be <= 0");
    for (std::size_t i = 1; i < tok.top_alternatives.size(); ++i)
      ICLUQ_REQUIRE(tok.top_alternatives[i - 1].second >= tok.top_alternatives[i].second,
                    ErrorCode::InvalidArgument, "alternatives must be sorted by logprob");
    sum += tok.logprob;
  }
  ICLUQ_REQUIRE(std::abs(sum - seq.sequence_logprob) <= 1e-6, ErrorCode::InvalidArgument,
                "sequence logprob does not match token sum");
}

/// Ordered class set for a task; ids are distinct and contiguous from 0.
struct LabelSpace {
  struct Entry {
    int id = 0;
    std::string name;
  };
  std::vector<Entry> labels;

  std::size_t k() const { return labels.size(); }

  const std::string& name_of(int id) const {
    for (const auto& e : labels)
      if (e.id == id) return e.name;
    raise(ErrorCode::UnknownLabel, "label id " + std::to_string(id));
  }

  bool contains(int id) const {
    for (const auto& e : labels)
      if (e.id == id) return true;
    return false;
  }

  /// Position of a label id in the ordered list, or npos. Ids and positions
  /// coincide for a full space but diverge after masking.
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t index_of(int id) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i].id == id) return i;
    return npos;
  }

  void validate() const {
    ICLUQ_REQUIRE(!labels.empty(), ErrorCode::InvalidArgument, "empty label space");
    for (std::size_t i = 0; i < labels.size(); ++i)
      ICLUQ_REQUIRE(labels[i].id == static_cast<int>(i), ErrorCode::InvalidArgument,
                    "label ids must be contiguous from 0");
  }

  /// The subset of labels not in `masked_ids`, preserving original ids and
  /// order. Used by the semantic-OOD protocol; the result intentionally
  /// violates the contiguity invariant of a full space.
  LabelSpace without(const std::vector<int>& masked_ids) const {
    LabelSpace out;
    for (const auto& e : labels) {
      bool masked = false;
      for (int m : masked_ids) masked |= (m == e.id);
      if (!masked) out.labels.push_back(e);
    }
    return out;
  }
};

/// The answering token found in a decoded sequence.
struct ExtractedAnswer {
  int label_id = 0;
  double probability = 0.0;
  std::size_t source_token_index = 0;
};

}  // namespace icluq
