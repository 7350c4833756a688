// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file simulator.hpp
 * @brief Deterministic synthetic in-context "model" with separately tunable
 *        demonstration-driven and configuration-driven noise, plus a
 *        Monte-Carlo ground-truth oracle for the full pipeline.
 *
 * Generative model for one test instance:
 *   - a base distribution puts `base_accuracy` mass on the true label and
 *     spreads the rest uniformly;
 *   - each demonstration set draws a concept c ~ Dirichlet(alpha * base),
 *     shared by all configurations under that set (large alpha keeps
 *     concepts close to the base, small alpha spreads them);
 *   - each configuration draws i.i.d. Gaussian logit noise of scale tau,
 *     shared across demonstration sets (the configuration is the same
 *     "model" whichever demonstrations it sees);
 *   - the cell distribution is softmax(log c + noise).
 *
 * Every draw is keyed by counter-based hashing of
 * (seed, tag, instance, demo set / config), so any cell is computable
 * independently and in parallel.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "icluq/answer.hpp"
#include "icluq/error.hpp"
#include "icluq/rng.hpp"
#include "icluq/types.hpp"
#include "icluq/uq.hpp"

namespace icluq::sim {

struct SimWorld {
  std::size_t k = 6;
  double concept_concentration = 2.0;  // alpha > 0; large => similar concepts
  double config_noise = 0.5;           // tau >= 0; logit noise scale
  double base_accuracy = 0.6;          // mass on the true label, in (1/k, 1)
  std::uint64_t seed = 7;

  void validate() const {
    ICLUQ_REQUIRE(k >= 2, ErrorCode::InvalidConfig, "k must be >= 2");
    ICLUQ_REQUIRE(concept_concentration > 0.0, ErrorCode::InvalidConfig, "alpha must be > 0");
    ICLUQ_REQUIRE(config_noise >= 0.0, ErrorCode::InvalidConfig, "tau must be >= 0");
    ICLUQ_REQUIRE(base_accuracy > 1.0 / static_cast<double>(k) && base_accuracy < 1.0,
                  ErrorCode::InvalidConfig, "base_accuracy must lie in (1/k, 1)");
  }
};

struct SimInstance {
  std::uint64_t instance_id = 0;
  int true_label = 0;
};

namespace detail {

inline constexpr std::uint64_t kConceptTag = 0x434f4e43;  // "CONC"
inline constexpr std::uint64_t kNoiseTag = 0x4e4f4953;    // "NOIS"
inline constexpr std::uint64_t kLabelTag = 0x4c41424c;    // "LABL"

/// Base distribution over the advertised labels for this instance.
inline std::vector<double> base_distribution(const SimWorld& world, int true_label,
                                             const std::vector<int>& advertised) {
  const std::size_t k = advertised.size();
  std::vector<double> base(k);
  std::size_t true_pos = LabelSpace::npos;
  for (std::size_t i = 0; i < k; ++i)
    if (advertised[i] == true_label) true_pos = i;
  if (true_pos == LabelSpace::npos) {
    // True label not advertised: the model has no channel for it, so the
    // base mass redistributes uniformly over what it may answer.
    std::fill(base.begin(), base.end(), 1.0 / static_cast<double>(k));
  } else {
    const double rest = (1.0 - world.base_accuracy) / static_cast<double>(k - 1);
    std::fill(base.begin(), base.end(), rest);
    base[true_pos] = world.base_accuracy;
  }
  return base;
}

}  // namespace detail

/// All k labels advertised, in id order.
inline std::vector<int> full_label_set(const SimWorld& world) {
  std::vector<int> ids(world.k);
  for (std::size_t i = 0; i < world.k; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

/// Numeric label space matching the simulator's digit answers.
inline LabelSpace numeric_label_space(const std::vector<int>& advertised) {
  LabelSpace space;
  for (int id : advertised) space.labels.push_back({id, ""});
  return space;
}

/// Deterministic test instance; the true label is a seed-derived draw.
inline SimInstance make_instance(const SimWorld& world, std::uint64_t instance_id) {
  const std::uint64_t key = rng::derive_key({world.seed, detail::kLabelTag, instance_id});
  return {instance_id, static_cast<int>(key % world.k)};
}

/// The cell distribution for (instance, demonstration set, configuration)
/// over the advertised labels, normalized. Deterministic in all ids.
inline std::vector<double> sim_answer_distribution(const SimWorld& world,
                                                   const SimInstance& instance,
                                                   std::uint64_t demo_set_id,
                                                   std::uint64_t config_id,
                                                   const std::vector<int>& advertised) {
  world.validate();
  ICLUQ_REQUIRE(advertised.size() >= 2, ErrorCode::InvalidConfig,
                "need at least two advertised labels");
  const std::size_t k = advertised.size();
  const std::vector<double> base = detail::base_distribution(world, instance.true_label, advertised);

  // Concept draw in log space: log of Dirichlet(alpha * base). Softmax is
  // shift-invariant, so unnormalized log-gamma draws are enough.
  rng::Stream concept_stream(rng::derive_key(
      {world.seed, detail::kConceptTag, instance.instance_id, demo_set_id}));
  std::vector<double> logits(k);
  for (std::size_t i = 0; i < k; ++i)
    logits[i] = concept_stream.next_log_gamma(world.concept_concentration * base[i]);

  rng::Stream noise_stream(rng::derive_key(
      {world.seed, detail::kNoiseTag, instance.instance_id, config_id}));
  for (std::size_t i = 0; i < k; ++i)
    logits[i] += world.config_noise * noise_stream.next_normal();

  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  std::vector<double> probs(k);
  for (std::size_t i = 0; i < k; ++i) {
    probs[i] = std::exp(logits[i] - max_logit);
    sum += probs[i];
  }
  for (double& p : probs) p /= sum;
  return probs;
}

inline std::vector<double> sim_answer_distribution(const SimWorld& world,
                                                   const SimInstance& instance,
                                                   std::uint64_t demo_set_id,
                                                   std::uint64_t config_id) {
  return sim_answer_distribution(world, instance, demo_set_id, config_id, full_label_set(world));
}

/// Converts a distribution over advertised labels into a one-token decoded
/// sequence: the argmax label's digit string at log of its probability, with
/// the positive-probability labels as sorted alternatives. Shaped exactly
/// like gateway output so downstream code is source-agnostic.
inline GeneratedSequence sequence_from_distribution(const std::vector<double>& probs,
                                                    const std::vector<int>& advertised) {
  ICLUQ_REQUIRE(probs.size() == advertised.size(), ErrorCode::ShapeMismatch,
                "distribution / label set size mismatch");
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[argmax]) argmax = i;

  TokenScore token;
  token.token = std::to_string(advertised[argmax]);
  token.logprob = std::min(0.0, std::log(probs[argmax]));
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0)
      token.top_alternatives.emplace_back(std::to_string(advertised[i]),
                                          std::min(0.0, std::log(probs[i])));
  std::stable_sort(token.top_alternatives.begin(), token.top_alternatives.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  GeneratedSequence seq;
  seq.text = token.token;
  seq.sequence_logprob = token.logprob;
  seq.tokens.push_back(std::move(token));
  return seq;
}

inline GeneratedSequence sim_generate(const SimWorld& world, const SimInstance& instance,
                                      std::uint64_t demo_set_id, std::uint64_t config_id,
                                      const std::vector<int>& advertised) {
  return sequence_from_distribution(
      sim_answer_distribution(world, instance, demo_set_id, config_id, advertised), advertised);
}

inline GeneratedSequence sim_generate(const SimWorld& world, const SimInstance& instance,
                                      std::uint64_t demo_set_id, std::uint64_t config_id) {
  return sim_generate(world, instance, demo_set_id, config_id, full_label_set(world));
}

/// Runs the production path (sim_generate -> extract -> aggregate ->
/// build_matrix -> decompose_entropy) for one instance over demonstration
/// sets [demo_base, demo_base + L) and configurations [config_base,
/// config_base + M).
inline UncertaintyReport pipeline_decomposition(const SimWorld& world,
                                                const SimInstance& instance, std::size_t l_sets,
                                                std::size_t m_configs,
                                                std::uint64_t demo_base = 0,
                                                std::uint64_t config_base = 0) {
  const auto advertised = full_label_set(world);
  const LabelSpace space = numeric_label_space(advertised);
  std::vector<AnswerDistribution> columns;
  columns.reserve(l_sets);
  for (std::size_t j = 0; j < l_sets; ++j) {
    std::vector<GeneratedSequence> seqs;
    seqs.reserve(m_configs);
    for (std::size_t m = 0; m < m_configs; ++m)
      seqs.push_back(sim_generate(world, instance, demo_base + j, config_base + m));
    columns.push_back(answer::aggregate(seqs, space).dist);
  }
  return uq::decompose_entropy(answer::build_matrix(std::move(columns)));
}

/// Monte-Carlo ground truth for the (L, M) pipeline estimator.
struct GroundTruth {
  UncertaintyReport mean;   // mean of the replicate decompositions
  double sd_total = 0.0;    // sample SD of a single replicate estimate
  double sd_epistemic = 0.0;
  double sd_aleatoric = 0.0;
  std::size_t replicates = 0;
};

/**
 * Estimates the expected (total, EU, AU) of an (l_sets x m_configs) pipeline
 * run and the sampling spread of a single run, by replicating the estimator
 * on fresh demo-set and configuration draws. The computation is a direct
 * transcription of the aggregation and entropy formulas, independent of the
 * answer-extraction and decomposition modules it is used to check.
 *
 * mc_samples counts cell evaluations; it must allow at least 10 replicates
 * (mc_samples >= 10 * l_sets * m_configs).
 */
inline GroundTruth ground_truth_decomposition(const SimWorld& world, const SimInstance& instance,
                                              std::size_t l_sets, std::size_t m_configs,
                                              std::size_t mc_samples) {
  world.validate();
  ICLUQ_REQUIRE(l_sets >= 1 && m_configs >= 1, ErrorCode::InvalidArgument, "need L, M >= 1");
  const std::size_t per_replicate = l_sets * m_configs;
  const std::size_t replicates = mc_samples / per_replicate;
  ICLUQ_REQUIRE(replicates >= 10, ErrorCode::InvalidArgument,
                "mc_samples must be >= 10 * l_sets * m_configs");

  // Fresh id ranges far away from any pipeline run's ids.
  constexpr std::uint64_t kOracleDemoBase = 1ULL << 40;
  constexpr std::uint64_t kOracleConfigBase = 1ULL << 41;
  const auto advertised = full_label_set(world);
  const std::size_t k = advertised.size();

  auto plain_entropy = [](const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
      if (v > 0.0) h -= v * std::log(v);
    return h;
  };

  std::vector<double> totals(replicates), eus(replicates), aus(replicates);
  for (std::size_t r = 0; r < replicates; ++r) {
    std::vector<double> pooled(k, 0.0);
    double entropy_sum = 0.0;
    for (std::size_t j = 0; j < l_sets; ++j) {
      std::vector<double> mass(k, 0.0);
      for (std::size_t m = 0; m < m_configs; ++m) {
        const auto dist = sim_answer_distribution(world, instance,
                                                  kOracleDemoBase + r * l_sets + j,
                                                  kOracleConfigBase + r * m_configs + m);
        std::size_t argmax = 0;
        for (std::size_t i = 1; i < k; ++i)
          if (dist[i] > dist[argmax]) argmax = i;
        mass[argmax] += dist[argmax];
      }
      double mass_sum = 0.0;
      for (double v : mass) mass_sum += v;
      for (double& v : mass) v /= mass_sum;
      entropy_sum += plain_entropy(mass);
      for (std::size_t i = 0; i < k; ++i) pooled[i] += mass[i] / static_cast<double>(l_sets);
    }
    eus[r] = entropy_sum / static_cast<double>(l_sets);
    totals[r] = plain_entropy(pooled);
    aus[r] = totals[r] - eus[r];
  }

  auto mean_of = [&](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  auto sd_of = [&](const std::vector<double>& v, double mean) {
    if (v.size() < 2) return 0.0;
    double s = 0.0;
    for (double x : v) s += (x - mean) * (x - mean);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };

  GroundTruth gt;
  gt.replicates = replicates;
  gt.mean.method = Method::entropy;
  gt.mean.total = mean_of(totals);
  gt.mean.epistemic = mean_of(eus);
  gt.mean.aleatoric = mean_of(aus);
  gt.sd_total = sd_of(totals, gt.mean.total);
  gt.sd_epistemic = sd_of(eus, gt.mean.epistemic);
  gt.sd_aleatoric = sd_of(aus, gt.mean.aleatoric);
  return gt;
}

}  // namespace icluq::sim
