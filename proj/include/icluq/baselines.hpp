// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file baselines.hpp
 * @brief Comparison uncertainty scores: length-normalized likelihood,
 *        token-level entropy, and semantic (cluster) uncertainty.
 *
 * All three return "higher = more uncertain" so detection metrics need no
 * per-method sign flipping.
 */

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <vector>

#include "icluq/answer.hpp"
#include "icluq/error.hpp"
#include "icluq/types.hpp"
#include "icluq/uq.hpp"

namespace icluq::baselines {

enum class BaselineMethod { likelihood, token_entropy, semantic };

struct UncertaintyScore {
  double value = 0.0;
  BaselineMethod method = BaselineMethod::likelihood;
  std::size_t n_sequences_used = 0;
};

/// Negative mean token logprob per sequence, averaged over sequences.
inline UncertaintyScore likelihood_uncertainty(const std::vector<GeneratedSequence>& seqs) {
  ICLUQ_REQUIRE(!seqs.empty(), ErrorCode::InvalidArgument, "need at least one sequence");
  double total = 0.0;
  for (const auto& seq : seqs) {
    ICLUQ_REQUIRE(!seq.tokens.empty(), ErrorCode::EmptySequence, "sequence has no tokens");
    double sum = 0.0;
    for (const auto& tok : seq.tokens) sum += tok.logprob;
    total += -sum / static_cast<double>(seq.tokens.size());
  }
  return {total / static_cast<double>(seqs.size()), BaselineMethod::likelihood, seqs.size()};
}

/// Mean entropy of the per-token distributions, where each token's
/// distribution is the renormalized exp of its top-k alternative logprobs.
inline UncertaintyScore token_entropy_uncertainty(const std::vector<GeneratedSequence>& seqs) {
  ICLUQ_REQUIRE(!seqs.empty(), ErrorCode::InvalidArgument, "need at least one sequence");
  double total = 0.0;
  for (const auto& seq : seqs) {
    ICLUQ_REQUIRE(!seq.tokens.empty(), ErrorCode::EmptySequence, "sequence has no tokens");
    double seq_sum = 0.0;
    for (const auto& tok : seq.tokens) {
      ICLUQ_REQUIRE(!tok.top_alternatives.empty(), ErrorCode::MissingAlternatives,
                    "token '" + tok.token + "' carries no alternatives");
      std::vector<double> probs;
      probs.reserve(tok.top_alternatives.size());
      double mass = 0.0;
      for (const auto& [text, lp] : tok.top_alternatives) {
        probs.push_back(std::exp(lp));
        mass += probs.back();
      }
      for (double& p : probs) p /= mass;
      seq_sum += uq::entropy(probs);
    }
    total += seq_sum / static_cast<double>(seq.tokens.size());
  }
  return {total / static_cast<double>(seqs.size()), BaselineMethod::token_entropy, seqs.size()};
}

/// Entropy over clusters of semantically equivalent sequences. For
/// constrained classification the equivalence is exact: two answers are
/// equivalent iff they extract to the same label, which collapses the
/// bidirectional-entailment criterion of the cited method to its exact form
/// and keeps the score computable offline. Unparseable sequences share one
/// "other" cluster. A different equivalence (e.g. NLI-backed) can be plugged
/// in through `equivalence_key`.
inline UncertaintyScore semantic_uncertainty(
    const std::vector<GeneratedSequence>& seqs, const LabelSpace& space,
    const std::function<int(const GeneratedSequence&)>* equivalence_key = nullptr) {
  ICLUQ_REQUIRE(!seqs.empty(), ErrorCode::InvalidArgument, "need at least one sequence");

  // Cluster mass uses the full sequence probability, matching the cited
  // method's use of sequence likelihoods.
  std::map<int, double> cluster_mass;
  double total_mass = 0.0;
  for (const auto& seq : seqs) {
    int key;
    if (equivalence_key) {
      key = (*equivalence_key)(seq);
    } else {
      const auto ans = answer::try_extract_label(seq, space);
      key = ans ? ans->label_id : -1;  // -1: shared "other" cluster
    }
    const double mass = std::exp(seq.sequence_logprob);
    cluster_mass[key] += mass;
    total_mass += mass;
  }

  std::vector<double> probs;
  probs.reserve(cluster_mass.size());
  for (const auto& [key, mass] : cluster_mass) probs.push_back(mass / total_mass);
  return {uq::entropy(probs), BaselineMethod::semantic, seqs.size()};
}

}  // namespace icluq::baselines
