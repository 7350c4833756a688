// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file eval.hpp
 * @brief Experiment protocols (misclassification, OOD-demonstration
 *        detection, semantic-OOD detection) and report assembly.
 *
 * Per instance the runner obtains L x M sequences (live endpoint, trace
 * replay, or simulator), decomposes the answer matrix into EU/AU/total, and
 * scores the three baselines over the flattened sequence list (baselines are
 * pooled by mean over all L x M sequences; the report records the rule).
 * Detection metrics are computed per method; degenerate inputs (one class
 * only) surface as explicit "undefined" markers rather than 0 or NaN.
 *
 * The predicted label is the argmax of the uniform-pooled mixture of the
 * normalized matrix columns: the same distribution whose entropy is the
 * reported total uncertainty. Majority vote over sequences is available
 * behind an option.
 */

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "icluq/answer.hpp"
#include "icluq/baselines.hpp"
#include "icluq/error.hpp"
#include "icluq/format.hpp"
#include "icluq/gateway.hpp"
#include "icluq/metrics.hpp"
#include "icluq/prompting.hpp"
#include "icluq/simulator.hpp"
#include "icluq/types.hpp"
#include "icluq/uq.hpp"

namespace icluq::eval {

enum class Protocol { misclassification, ood_demo, semantic_ood };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::misclassification: return "misclassification";
    case Protocol::ood_demo: return "ood_demo";
    case Protocol::semantic_ood: return "semantic_ood";
  }
  return "unknown";
}

inline Protocol protocol_from_string(std::string_view s) {
  if (s == "misclassification") return Protocol::misclassification;
  if (s == "ood_demo") return Protocol::ood_demo;
  if (s == "semantic_ood") return Protocol::semantic_ood;
  raise(ErrorCode::InvalidArgument, "unknown protocol: " + std::string(s));
}

/// Uncertainty methods in report order.
inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names{"epistemic", "aleatoric",     "total",
                                              "likelihood", "token_entropy", "semantic"};
  return names;
}

struct ScoredInstance {
  std::string instance_id;
  std::map<std::string, double> scores;
  int predicted_label = -1;
  int true_label = -1;
  int detection_label = 0;  // meaning depends on the protocol
  std::size_t n_unparseable = 0;
};

/// AUPR/AUROC for one method; nullopt marks "undefined" (degenerate labels).
struct MethodMetrics {
  std::optional<double> aupr;
  std::optional<double> auroc;
};

/// One evaluation that could not be scored; the run continues without it and
/// the manifest ships with the partial report.
struct FailedInstance {
  std::string instance_id;
  std::string error;
};

struct EvalReport {
  Protocol protocol = Protocol::misclassification;
  std::vector<std::pair<std::string, MethodMetrics>> per_method;
  double accuracy = 0.0;
  std::size_t n_instances = 0;
  std::size_t n_positives = 0;
  std::string config_fingerprint;
  std::string trace_fingerprint;
  std::string pooling_rule = "mean_over_all_sequences";
  std::string note;  // e.g. why metrics are undefined
  std::vector<ScoredInstance> scored;
  std::vector<FailedInstance> failures;

  bool partial() const { return !failures.empty(); }
};

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

enum class SourceKind { live, replay, simulator };

inline std::string_view to_string(SourceKind s) {
  switch (s) {
    case SourceKind::live: return "live";
    case SourceKind::replay: return "replay";
    case SourceKind::simulator: return "simulator";
  }
  return "unknown";
}

struct RunConfig {
  SourceKind source = SourceKind::simulator;
  std::size_t l_sets = 4;
  std::size_t m_sequences = 10;
  std::size_t max_new_tokens = 16;
  std::size_t logprob_top_k = 5;
  std::uint64_t seed = 7;
  prompting::Strategy strategy = prompting::Strategy::random;
  prompting::SizeParams demo_sizes;
  std::map<std::string, double> decode_params;
  std::vector<int> masked_labels;  // semantic_ood only
  bool majority_vote = false;
  uq::Pooling pooling = uq::Pooling::uniform_mixture;
  std::size_t parallel = 1;

  // Simulator knobs.
  sim::SimWorld world;
  std::size_t sim_instances = 200;
  double sim_ood_alpha = 0.0;  // 0 => world.concept_concentration / 16

  double effective_ood_alpha() const {
    return sim_ood_alpha > 0.0 ? sim_ood_alpha : world.concept_concentration / 16.0;
  }
};

/// Canonical digest of everything that determines a run's outputs. Two
/// reports with equal config and trace fingerprints are byte-identical.
inline std::string config_fingerprint(const RunConfig& cfg, Protocol protocol,
                                      const std::string& dataset_tag) {
  std::string canon = "icluq-config-v1\n";
  canon += "protocol=" + std::string(to_string(protocol)) + "\n";
  canon += "source=" + std::string(to_string(cfg.source)) + "\n";
  canon += "l_sets=" + std::to_string(cfg.l_sets) + "\n";
  canon += "m_sequences=" + std::to_string(cfg.m_sequences) + "\n";
  canon += "max_new_tokens=" + std::to_string(cfg.max_new_tokens) + "\n";
  canon += "logprob_top_k=" + std::to_string(cfg.logprob_top_k) + "\n";
  canon += "seed=" + std::to_string(cfg.seed) + "\n";
  canon += "strategy=" + std::string(prompting::to_string(cfg.strategy)) + "\n";
  canon += "n_random=" + std::to_string(cfg.demo_sizes.n_random) + "\n";
  canon += "per_class=" + std::to_string(cfg.demo_sizes.per_class) + "\n";
  for (const auto& [key, value] : cfg.decode_params)
    canon += "param:" + key + "=" + format_double(value) + "\n";
  canon += "masked=";
  for (int m : cfg.masked_labels) canon += std::to_string(m) + ",";
  canon += "\n";
  canon += "majority_vote=" + std::to_string(cfg.majority_vote) + "\n";
  canon += "pooling=" + std::string(cfg.pooling == uq::Pooling::uniform_mixture ? "uniform" : "raw_sum") + "\n";
  canon += "world=" + std::to_string(cfg.world.k) + "," + format_double(cfg.world.concept_concentration) +
           "," + format_double(cfg.world.config_noise) + "," + format_double(cfg.world.base_accuracy) +
           "," + std::to_string(cfg.world.seed) + "\n";
  canon += "sim_instances=" + std::to_string(cfg.sim_instances) + "\n";
  canon += "sim_ood_alpha=" + format_double(cfg.sim_ood_alpha) + "\n";
  canon += "datasets=" + dataset_tag + "\n";
  return gateway::sha256_hex(canon);
}

// ---------------------------------------------------------------------------
// Instance scoring
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kDemoSeedTag = 0x44454d4f;  // "DEMO"
inline constexpr std::uint64_t kOodDemoBase = 1ULL << 20;

/// Runs fn(i) for i in [0, n) on up to `workers` threads; results must be
/// written to pre-sized slots. The first exception wins and is rethrown.
template <typename Fn>
void parallel_for_indexed(std::size_t n, std::size_t workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t count = std::min(workers, n);
  threads.reserve(count);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct InstanceScores {
  std::map<std::string, double> scores;
  int predicted = -1;
  std::size_t n_unparseable = 0;
};

/// Shared scoring of one instance's L sequence groups: matrix decomposition,
/// baselines over the flattened list, and the predicted label.
inline InstanceScores score_columns(const std::vector<std::vector<GeneratedSequence>>& per_column,
                                    const LabelSpace& space, const RunConfig& cfg) {
  InstanceScores out;
  std::vector<AnswerDistribution> columns;
  columns.reserve(per_column.size());
  std::vector<GeneratedSequence> flat;
  for (const auto& seqs : per_column) {
    auto agg = answer::aggregate(seqs, space);
    out.n_unparseable += agg.n_unparseable;
    columns.push_back(std::move(agg.dist));
    flat.insert(flat.end(), seqs.begin(), seqs.end());
  }
  const ProbabilityMatrix matrix = answer::build_matrix(std::move(columns));
  const UncertaintyReport rep = uq::decompose_entropy(matrix, cfg.pooling);
  out.scores["epistemic"] = rep.epistemic;
  out.scores["aleatoric"] = rep.aleatoric;
  out.scores["total"] = rep.total;
  out.scores["likelihood"] = baselines::likelihood_uncertainty(flat).value;
  out.scores["token_entropy"] = baselines::token_entropy_uncertainty(flat).value;
  out.scores["semantic"] = baselines::semantic_uncertainty(flat, space).value;

  // Prediction from the same uniform-pooled distribution whose entropy is
  // the reported total uncertainty.
  std::vector<double> pooled(space.k(), 0.0);
  for (const auto& col : matrix.columns) {
    const auto q = uq::normalize(col);
    for (std::size_t i = 0; i < pooled.size(); ++i)
      pooled[i] += q[i] / static_cast<double>(matrix.l_demo_sets());
  }
  std::size_t argmax = 0;
  for (std::size_t i = 1; i < pooled.size(); ++i)
    if (pooled[i] > pooled[argmax]) argmax = i;
  out.predicted = space.labels[argmax].id;

  if (cfg.majority_vote) {
    std::map<int, std::size_t> votes;
    for (const auto& seq : flat)
      if (auto ans = answer::try_extract_label(seq, space)) ++votes[ans->label_id];
    std::size_t best = 0;
    for (const auto& [label, n] : votes)
      if (n > best) {
        best = n;
        out.predicted = label;
      }
  }
  return out;
}

inline MethodMetrics safe_metrics(const std::vector<double>& scores,
                                  const std::vector<int>& labels) {
  MethodMetrics m;
  try {
    m.auroc = metrics::auroc(scores, labels);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingleClass) throw;
  }
  try {
    m.aupr = metrics::aupr(scores, labels);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoPositives && e.code() != ErrorCode::SingleClass) throw;
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Experiment runner
// ---------------------------------------------------------------------------

/// Binds a run configuration to its inputs. Dataset mode (live/replay)
/// renders prompts and calls the generation source; simulator mode produces
/// sequences directly from the synthetic world. `prompt_observer`, when set,
/// receives every rendered prompt (used for audits).
class ExperimentRunner {
 public:
  RunConfig cfg;
  gateway::GenerationSource* source = nullptr;
  const prompting::Dataset* test = nullptr;
  const prompting::Dataset* demo_source = nullptr;
  const prompting::Dataset* ood_demo_source = nullptr;
  const prompting::PromptTemplate* tmpl = nullptr;
  std::string trace_fingerprint;
  std::function<void(const std::string&)> prompt_observer;

  /// Misclassification detection: detection label is 1 iff the pooled
  /// prediction differs from the true label.
  EvalReport run_misclassification() {
    EvalReport report = make_report(Protocol::misclassification);
    std::vector<Job> jobs;
    if (cfg.source == SourceKind::simulator) {
      const auto advertised = sim::full_label_set(cfg.world);
      const auto space = std::make_shared<LabelSpace>(sim::numeric_label_space(advertised));
      for (std::size_t i = 0; i < cfg.sim_instances; ++i)
        jobs.push_back({"sim#" + std::to_string(i), [this, i, advertised, space] {
                          const sim::SimInstance inst = sim::make_instance(cfg.world, i);
                          auto scores = score_sim_instance(cfg.world, inst, advertised, *space, 0);
                          return finalize(std::move(scores), "sim#" + std::to_string(i),
                                          inst.true_label, /*detection=*/-1);
                        }});
    } else {
      require_datasets();
      for (std::size_t i = 0; i < test->size(); ++i)
        jobs.push_back({test->instances[i].id, [this, i] {
                          auto scores = score_prompted_instance(*demo_source, test->label_space, i, 0);
                          return finalize(std::move(scores), test->instances[i].id,
                                          test->instances[i].label_id, /*detection=*/-1);
                        }});
    }
    run_jobs(report, jobs);
    for (auto& s : report.scored) s.detection_label = s.predicted_label != s.true_label ? 1 : 0;
    assemble(report);
    return report;
  }

  /// OOD-demonstration detection: every instance is evaluated under the
  /// in-domain demo source (label 0) and the OOD demo source (label 1).
  EvalReport run_ood_demo_detection() {
    EvalReport report = make_report(Protocol::ood_demo);
    std::vector<Job> jobs;
    if (cfg.source == SourceKind::simulator) {
      const auto advertised = sim::full_label_set(cfg.world);
      const auto space = std::make_shared<LabelSpace>(sim::numeric_label_space(advertised));
      auto ood_world = std::make_shared<sim::SimWorld>(cfg.world);
      ood_world->concept_concentration = cfg.effective_ood_alpha();
      for (std::size_t i = 0; i < cfg.sim_instances; ++i) {
        const std::string base_id = "sim#" + std::to_string(i);
        jobs.push_back({base_id + "|in", [this, i, advertised, space, base_id] {
                          const sim::SimInstance inst = sim::make_instance(cfg.world, i);
                          auto scores = score_sim_instance(cfg.world, inst, advertised, *space, 0);
                          return finalize(std::move(scores), base_id + "|in", inst.true_label, 0);
                        }});
        jobs.push_back({base_id + "|ood", [this, i, advertised, space, ood_world, base_id] {
                          const sim::SimInstance inst = sim::make_instance(cfg.world, i);
                          auto scores = score_sim_instance(*ood_world, inst, advertised, *space,
                                                           detail::kOodDemoBase);
                          return finalize(std::move(scores), base_id + "|ood", inst.true_label, 1);
                        }});
      }
    } else {
      require_datasets();
      ICLUQ_REQUIRE(ood_demo_source != nullptr, ErrorCode::InvalidConfig,
                    "ood_demo needs an OOD demonstration dataset");
      for (std::size_t i = 0; i < test->size(); ++i) {
        jobs.push_back({test->instances[i].id + "|in", [this, i] {
                          auto scores = score_prompted_instance(*demo_source, test->label_space, i, 0);
                          return finalize(std::move(scores), test->instances[i].id + "|in",
                                          test->instances[i].label_id, 0);
                        }});
        jobs.push_back({test->instances[i].id + "|ood", [this, i] {
                          auto scores =
                              score_prompted_instance(*ood_demo_source, test->label_space, i, 1);
                          return finalize(std::move(scores), test->instances[i].id + "|ood",
                                          test->instances[i].label_id, 1);
                        }});
      }
    }
    run_jobs(report, jobs);
    assemble(report);
    return report;
  }

  /// Semantic-OOD detection: masked classes leave the advertised label set
  /// entirely (legend and demonstrations); instances whose true class is
  /// masked are the positives.
  EvalReport run_semantic_ood() {
    ICLUQ_REQUIRE(!cfg.masked_labels.empty(), ErrorCode::InvalidArgument,
                  "semantic_ood needs a non-empty masked label set");
    EvalReport report = make_report(Protocol::semantic_ood);
    if (cfg.source == SourceKind::simulator) {
      auto advertised = sim::full_label_set(cfg.world);
      std::erase_if(advertised, [&](int id) {
        return std::find(cfg.masked_labels.begin(), cfg.masked_labels.end(), id) !=
               cfg.masked_labels.end();
      });
      ICLUQ_REQUIRE(!advertised.empty(), ErrorCode::AllLabelsMasked, "every class is masked");
      ICLUQ_REQUIRE(advertised.size() < cfg.world.k, ErrorCode::InvalidArgument,
                    "masked set must name existing classes");
      const auto space = std::make_shared<LabelSpace>(sim::numeric_label_space(advertised));
      std::vector<Job> jobs;
      for (std::size_t i = 0; i < cfg.sim_instances; ++i)
        jobs.push_back({"sim#" + std::to_string(i), [this, i, advertised, space] {
                          const sim::SimInstance inst = sim::make_instance(cfg.world, i);
                          auto scores = score_sim_instance(cfg.world, inst, advertised, *space, 0);
                          const bool masked =
                              std::find(cfg.masked_labels.begin(), cfg.masked_labels.end(),
                                        inst.true_label) != cfg.masked_labels.end();
                          return finalize(std::move(scores), "sim#" + std::to_string(i),
                                          inst.true_label, masked ? 1 : 0);
                        }});
      run_jobs(report, jobs);
    } else {
      require_datasets();
      for (int m : cfg.masked_labels)
        ICLUQ_REQUIRE(test->label_space.contains(m), ErrorCode::InvalidArgument,
                      "masked label " + std::to_string(m) + " not in the label space");
      const LabelSpace advertised = test->label_space.without(cfg.masked_labels);
      ICLUQ_REQUIRE(!advertised.labels.empty(), ErrorCode::AllLabelsMasked,
                    "every class is masked");
      ICLUQ_REQUIRE(advertised.labels.size() < test->label_space.labels.size(),
                    ErrorCode::InvalidArgument, "masked set must name existing classes");
      const auto demo_pool = std::make_shared<prompting::Dataset>(
          prompting::restrict_to_labels(*demo_source, advertised));
      const auto masked_space = std::make_shared<LabelSpace>(advertised);
      std::vector<Job> jobs;
      for (std::size_t i = 0; i < test->size(); ++i)
        jobs.push_back({test->instances[i].id, [this, i, demo_pool, masked_space] {
                          auto scores = score_prompted_instance(*demo_pool, *masked_space, i, 0);
                          const bool masked =
                              std::find(cfg.masked_labels.begin(), cfg.masked_labels.end(),
                                        test->instances[i].label_id) != cfg.masked_labels.end();
                          return finalize(std::move(scores), test->instances[i].id,
                                          test->instances[i].label_id, masked ? 1 : 0);
                        }});
      run_jobs(report, jobs);
    }
    assemble(report);
    return report;
  }

 private:
  /// One scoring unit: evaluates to a ScoredInstance or records a failure.
  struct Job {
    std::string id;
    std::function<ScoredInstance()> eval;
  };

  /// Runs jobs with bounded parallelism. A job failing with a library Error
  /// becomes a manifest entry and the run continues; results keep job order.
  void run_jobs(EvalReport& report, std::vector<Job>& jobs) {
    std::vector<ScoredInstance> results(jobs.size());
    std::vector<std::unique_ptr<FailedInstance>> failed(jobs.size());
    detail::parallel_for_indexed(jobs.size(), cfg.parallel, [&](std::size_t i) {
      try {
        results[i] = jobs[i].eval();
      } catch (const Error& e) {
        failed[i] = std::make_unique<FailedInstance>(FailedInstance{jobs[i].id, e.what()});
      }
    });
    report.scored.reserve(jobs.size());
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (failed[i])
        report.failures.push_back(std::move(*failed[i]));
      else
        report.scored.push_back(std::move(results[i]));
    }
  }

  EvalReport make_report(Protocol protocol) {
    EvalReport report;
    report.protocol = protocol;
    std::string tag;
    if (test) tag += "test=" + test->name + ";";
    if (demo_source) tag += "demo=" + demo_source->name + ";";
    if (ood_demo_source) tag += "ood=" + ood_demo_source->name + ";";
    report.config_fingerprint = config_fingerprint(cfg, protocol, tag);
    report.trace_fingerprint = trace_fingerprint;
    return report;
  }

  void require_datasets() const {
    ICLUQ_REQUIRE(test != nullptr && demo_source != nullptr && tmpl != nullptr && source != nullptr,
                  ErrorCode::InvalidConfig,
                  "dataset mode needs a test set, a demo source, a template, and a source");
  }

  std::size_t test_size_checked() const {
    require_datasets();
    return test->size();
  }

  /// L x M sequences for one test instance via prompts and the source.
  detail::InstanceScores score_prompted_instance(const prompting::Dataset& demos,
                                                 const LabelSpace& space, std::size_t index,
                                                 std::uint64_t condition) {
    const std::uint64_t demo_seed =
        rng::derive_key({cfg.seed, detail::kDemoSeedTag, index, condition});
    const auto batches =
        prompting::sample_demo_batches(demos, cfg.strategy, cfg.demo_sizes, cfg.l_sets, demo_seed);
    std::vector<std::vector<GeneratedSequence>> per_column;
    per_column.reserve(cfg.l_sets);
    for (std::size_t j = 0; j < cfg.l_sets; ++j) {
      const std::string prompt =
          prompting::render_prompt(*tmpl, batches[j], test->instances[index].text, space);
      if (prompt_observer) prompt_observer(prompt);
      gateway::GenerationRequest req;
      req.prompt = prompt;
      req.num_sequences = cfg.m_sequences;
      req.max_new_tokens = cfg.max_new_tokens;
      req.logprob_top_k = cfg.logprob_top_k;
      req.decode_params = cfg.decode_params;
      req.instance_id = test->instances[index].id;
      req.demo_set_id = static_cast<int>(j);
      per_column.push_back(source->generate(req));
    }
    return detail::score_columns(per_column, space, cfg);
  }

  /// L x M sequences for one instance straight from the simulator.
  detail::InstanceScores score_sim_instance(const sim::SimWorld& world,
                                            const sim::SimInstance& inst,
                                            const std::vector<int>& advertised,
                                            const LabelSpace& space, std::uint64_t demo_base) {
    std::vector<std::vector<GeneratedSequence>> per_column;
    per_column.reserve(cfg.l_sets);
    for (std::size_t j = 0; j < cfg.l_sets; ++j) {
      std::vector<GeneratedSequence> seqs;
      seqs.reserve(cfg.m_sequences);
      for (std::size_t m = 0; m < cfg.m_sequences; ++m)
        seqs.push_back(sim::sim_generate(world, inst, demo_base + j, m, advertised));
      per_column.push_back(std::move(seqs));
    }
    return detail::score_columns(per_column, space, cfg);
  }

  static ScoredInstance finalize(detail::InstanceScores&& scores, std::string id, int true_label,
                                 int detection) {
    ScoredInstance s;
    s.instance_id = std::move(id);
    s.scores = std::move(scores.scores);
    s.predicted_label = scores.predicted;
    s.true_label = true_label;
    if (detection >= 0) s.detection_label = detection;
    s.n_unparseable = scores.n_unparseable;
    return s;
  }

  /// Metrics, accuracy, and counts from the scored instances.
  void assemble(EvalReport& report) {
    report.n_instances = report.scored.size();
    std::size_t correct = 0;
    std::vector<int> labels;
    labels.reserve(report.scored.size());
    for (const auto& s : report.scored) {
      if (s.predicted_label == s.true_label) ++correct;
      labels.push_back(s.detection_label);
      if (s.detection_label == 1) ++report.n_positives;
    }
    report.accuracy =
        report.scored.empty() ? 0.0 : static_cast<double>(correct) / report.scored.size();

    bool any_undefined = false;
    for (const auto& method : method_names()) {
      MethodMetrics m;
      if (!report.scored.empty()) {
        std::vector<double> scores;
        scores.reserve(report.scored.size());
        for (const auto& s : report.scored) scores.push_back(s.scores.at(method));
        m = detail::safe_metrics(scores, labels);
      }
      any_undefined |= !m.aupr.has_value() || !m.auroc.has_value();
      report.per_method.emplace_back(method, m);
    }
    if (any_undefined)
      report.note = "metrics undefined: detection labels contain a single class";
    if (report.partial()) {
      if (!report.note.empty()) report.note += "; ";
      report.note += "partial: " + std::to_string(report.failures.size()) +
                     " instance(s) failed, see failures.csv";
    }
  }
};

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

inline std::string scores_csv(const EvalReport& report) {
  std::string out = "instance_id,true_label,predicted_label,detection_label";
  for (const auto& m : method_names()) out += "," + m;
  out += ",n_unparseable\n";
  for (const auto& s : report.scored) {
    out += s.instance_id + "," + std::to_string(s.true_label) + "," +
           std::to_string(s.predicted_label) + "," + std::to_string(s.detection_label);
    for (const auto& m : method_names()) out += "," + format_double(s.scores.at(m));
    out += "," + std::to_string(s.n_unparseable) + "\n";
  }
  return out;
}

inline std::string summary_csv(const EvalReport& report) {
  std::string out =
      "protocol,method,aupr,auroc,accuracy,n_instances,n_positives,config_fingerprint,"
      "trace_fingerprint\n";
  for (const auto& [method, m] : report.per_method) {
    out += std::string(to_string(report.protocol)) + "," + method + ",";
    out += (m.aupr ? format_double(*m.aupr) : "undefined");
    out += ",";
    out += (m.auroc ? format_double(*m.auroc) : "undefined");
    out += "," + format_double(report.accuracy) + "," + std::to_string(report.n_instances) + "," +
           std::to_string(report.n_positives) + "," + report.config_fingerprint + "," +
           report.trace_fingerprint + "\n";
  }
  return out;
}

inline std::string markdown_report(const EvalReport& report) {
  std::string out = "# Evaluation report\n\n";
  out += "- protocol: " + std::string(to_string(report.protocol)) + "\n";
  out += "- accuracy: " + format_double(report.accuracy) + "\n";
  out += "- instances: " + std::to_string(report.n_instances) +
         " (positives: " + std::to_string(report.n_positives) + ")\n";
  out += "- baseline pooling: " + report.pooling_rule + "\n";
  out += "- config fingerprint: " + report.config_fingerprint + "\n";
  out += "- trace fingerprint: " + report.trace_fingerprint + "\n";
  if (!report.note.empty()) out += "- note: " + report.note + "\n";
  out += "\n| method | AUPR | AUROC |\n|---|---|---|\n";
  for (const auto& [method, m] : report.per_method) {
    out += "| " + method + " | " + (m.aupr ? format_double(*m.aupr) : "undefined") + " | " +
           (m.auroc ? format_double(*m.auroc) : "undefined") + " |\n";
  }
  return out;
}

/// Writes scores.csv, report.csv, report.md, and optionally per-method
/// ROC/PR curve point files into out_dir.
inline void save_report(const EvalReport& report, const std::string& out_dir,
                        bool emit_points = false) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  ICLUQ_REQUIRE(!ec, ErrorCode::StorageFailure, "cannot create " + out_dir);

  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream out(out_dir + "/" + name, std::ios::binary);
    ICLUQ_REQUIRE(out.good(), ErrorCode::StorageFailure, "cannot write " + out_dir + "/" + name);
    out << content;
  };
  write("scores.csv", scores_csv(report));
  write("report.csv", summary_csv(report));
  write("report.md", markdown_report(report));
  if (report.partial()) {
    std::string manifest = "instance_id,error\n";
    for (const auto& f : report.failures) {
      std::string quoted = f.error;
      std::size_t pos = 0;
      while ((pos = quoted.find('"', pos)) != std::string::npos) {
        quoted.replace(pos, 1, "\"\"");
        pos += 2;
      }
      manifest += f.instance_id + ",\"" + quoted + "\"\n";
    }
    write("failures.csv", manifest);
  }

  if (emit_points) {
    std::vector<int> labels;
    for (const auto& s : report.scored) labels.push_back(s.detection_label);
    for (const auto& method : method_names()) {
      std::vector<double> scores;
      for (const auto& s : report.scored) scores.push_back(s.scores.at(method));
      try {
        std::string roc = "fpr,tpr,threshold\n";
        for (const auto& p : metrics::roc_points(scores, labels))
          roc += format_double(p.x) + "," + format_double(p.y) + "," +
                 format_double(p.threshold) + "\n";
        write("points_" + method + "_roc.csv", roc);
        std::string pr = "recall,precision,threshold\n";
        for (const auto& p : metrics::pr_points(scores, labels))
          pr += format_double(p.x) + "," + format_double(p.y) + "," +
                format_double(p.threshold) + "\n";
        write("points_" + method + "_pr.csv", pr);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SingleClass && e.code() != ErrorCode::NoPositives) throw;
      }
    }
  }
}

}  // namespace icluq::eval
