// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>

#include "icluq/eval.hpp"
#include "support.hpp"

using namespace icluq;
using testsupport::data_path;

namespace {

class ScriptedSource : public gateway::GenerationSource {
 public:
  using Fn = std::function<std::vector<GeneratedSequence>(const gateway::GenerationRequest&)>;
  explicit ScriptedSource(Fn fn) : fn_(std::move(fn)) {}
  std::vector<GeneratedSequence> generate(const gateway::GenerationRequest& req) override {
    return fn_(req);
  }
  std::string describe() const override { return "scripted"; }

 private:
  Fn fn_;
};

eval::RunConfig small_sim_config() {
  eval::RunConfig cfg;
  cfg.source = eval::SourceKind::simulator;
  cfg.sim_instances = 20;
  cfg.l_sets = 4;
  cfg.m_sequences = 10;
  return cfg;
}

std::optional<double> metric(const eval::EvalReport& report, const std::string& method,
                             bool roc = true) {
  for (const auto& [name, m] : report.per_method)
    if (name == method) return roc ? m.auroc : m.aupr;
  return std::nullopt;
}

}  // namespace

TEST_CASE("simulator misclassification run is well-formed and deterministic") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  const auto report = runner.run_misclassification();

  CHECK(report.n_instances == 20);
  CHECK(report.accuracy >= 0.0);
  CHECK(report.accuracy <= 1.0);
  REQUIRE(report.per_method.size() == 6);
  CHECK(report.scored.size() == 20);
  for (const auto& s : report.scored) {
    CHECK((s.detection_label == 0 || s.detection_label == 1));
    CHECK(s.detection_label == (s.predicted_label != s.true_label ? 1 : 0));
    CHECK(s.scores.at("epistemic") >= 0.0);
    CHECK(s.scores.at("total") >= -1e-12);
  }

  eval::ExperimentRunner again;
  again.cfg = runner.cfg;
  const auto second = again.run_misclassification();
  CHECK(eval::summary_csv(report) == eval::summary_csv(second));
  CHECK(eval::scores_csv(report) == eval::scores_csv(second));
}

TEST_CASE("parallel evaluation reproduces the serial report byte for byte") {
  eval::ExperimentRunner serial;
  serial.cfg = small_sim_config();
  const auto a = serial.run_misclassification();

  eval::ExperimentRunner parallel;
  parallel.cfg = small_sim_config();
  parallel.cfg.parallel = 4;
  const auto b = parallel.run_misclassification();
  CHECK(eval::scores_csv(a) == eval::scores_csv(b));
  CHECK(eval::summary_csv(a) == eval::summary_csv(b));
}

TEST_CASE("near-perfect worlds yield undefined detection metrics") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  runner.cfg.world.base_accuracy = 0.999;
  runner.cfg.world.concept_concentration = 1e9;
  runner.cfg.world.config_noise = 0.0;
  const auto report = runner.run_misclassification();
  CHECK(report.accuracy == 1.0);
  CHECK(report.n_positives == 0);
  for (const auto& [name, m] : report.per_method) {
    CHECK_FALSE(m.auroc.has_value());
    CHECK_FALSE(m.aupr.has_value());
  }
  CHECK(report.note.find("undefined") != std::string::npos);
  const auto csv = eval::summary_csv(report);
  CHECK(csv.find("undefined") != std::string::npos);
}

TEST_CASE("indistinguishable ood conditions sit near chance") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  runner.cfg.sim_instances = 100;
  runner.cfg.sim_ood_alpha = runner.cfg.world.concept_concentration;  // same world
  const auto report = runner.run_ood_demo_detection();
  CHECK(report.n_instances == 200);
  CHECK(report.n_positives == 100);
  for (const auto& method : {"epistemic", "aleatoric", "total"}) {
    const auto roc = metric(report, method);
    REQUIRE(roc.has_value());
    CHECK(*roc > 0.4);
    CHECK(*roc < 0.6);
  }
}

TEST_CASE("wider ood concept spread is detectable") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  runner.cfg.sim_instances = 100;
  runner.cfg.world.concept_concentration = 8.0;  // ood alpha defaults to 8/16
  const auto report = runner.run_ood_demo_detection();
  const auto roc = metric(report, "aleatoric");
  REQUIRE(roc.has_value());
  CHECK(*roc > 0.5);
}

TEST_CASE("semantic ood masks validate their input") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  SECTION("empty mask is a precondition violation") {
    runner.cfg.masked_labels = {};
    CHECK_THROWS_AS(runner.run_semantic_ood(), Error);
  }
  SECTION("masking everything is refused") {
    runner.cfg.masked_labels = {0, 1, 2, 3, 4, 5};
    CHECK_THROWS_MATCHES(runner.run_semantic_ood(), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::AllLabelsMasked;
                         }));
  }
}

TEST_CASE("semantic ood detects masked-class instances in the simulator") {
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  runner.cfg.sim_instances = 120;
  runner.cfg.masked_labels = {1, 2};
  const auto report = runner.run_semantic_ood();
  CHECK(report.n_instances == 120);
  CHECK(report.n_positives > 0);
  CHECK(report.n_positives < 120);
  // Masked-true instances can never be predicted correctly.
  for (const auto& s : report.scored)
    if (s.detection_label == 1) CHECK(s.predicted_label != s.true_label);
  const auto roc = metric(report, "epistemic");
  REQUIRE(roc.has_value());
  CHECK(*roc > 0.5);
}

TEST_CASE("prediction follows the pooled answer distribution") {
  const auto space = prompting::load_label_space(data_path("labels/financial.json"));
  auto test = prompting::load_dataset(data_path("financial_mini.jsonl"),
                                      prompting::FileFormat::jsonl, space,
                                      prompting::Split::test);
  test.instances.resize(1);
  const auto demos = prompting::load_dataset(data_path("financial_mini.jsonl"),
                                             prompting::FileFormat::jsonl, space);
  const auto tmpl = prompting::load_template(data_path("templates/default.tmpl"));

  // Column 0 is all label 0; column 1 puts most of its small mass on label 2.
  // Normalized columns (1, 0, 0) and (0.05, 0, 0.95) pool to (0.525, 0,
  // 0.475), so the pooled prediction is label 0 even though label 2 wins the
  // raw vote count 4 to 3.
  auto make = [](int label, double p) {
    GeneratedSequence seq;
    seq.text = std::to_string(label);
    seq.tokens.push_back({seq.text, std::log(p), {{seq.text, std::log(p)}}});
    seq.sequence_logprob = std::log(p);
    return seq;
  };
  ScriptedSource source([&](const gateway::GenerationRequest& req) {
    if (req.demo_set_id == 0)
      return std::vector<GeneratedSequence>{make(0, 0.9), make(0, 0.8)};
    return std::vector<GeneratedSequence>{make(2, 0.1), make(2, 0.05), make(2, 0.02),
                                          make(2, 0.02), make(0, 0.01)};
  });

  eval::ExperimentRunner runner;
  runner.cfg.source = eval::SourceKind::live;
  runner.cfg.l_sets = 2;
  runner.cfg.m_sequences = 2;
  runner.cfg.demo_sizes.n_random = 2;
  runner.source = &source;
  runner.test = &test;
  runner.demo_source = &demos;
  runner.tmpl = &tmpl;
  const auto report = runner.run_misclassification();
  REQUIRE(report.scored.size() == 1);
  CHECK(report.scored[0].predicted_label == 0);

  // Majority vote over the same sequences picks label 2 instead.
  ScriptedSource voter([&](const gateway::GenerationRequest& req) {
    if (req.demo_set_id == 0)
      return std::vector<GeneratedSequence>{make(0, 0.9), make(0, 0.8)};
    return std::vector<GeneratedSequence>{make(2, 0.1), make(2, 0.05), make(2, 0.02),
                                          make(2, 0.02), make(0, 0.01)};
  });
  eval::ExperimentRunner majority;
  majority.cfg = runner.cfg;
  majority.cfg.majority_vote = true;
  majority.source = &voter;
  majority.test = &test;
  majority.demo_source = &demos;
  majority.tmpl = &tmpl;
  CHECK(majority.run_misclassification().scored[0].predicted_label == 2);
}

TEST_CASE("dataset-mode semantic ood filters every prompt") {
  const auto space = prompting::load_label_space(data_path("labels/emotion.json"));
  const auto test = prompting::load_dataset(data_path("emotion_test20.jsonl"),
                                            prompting::FileFormat::jsonl, space,
                                            prompting::Split::test);
  const auto demos = prompting::load_dataset(data_path("emotion_mini.jsonl"),
                                             prompting::FileFormat::jsonl, space);
  const auto tmpl = prompting::load_template(data_path("templates/default.tmpl"));
  testsupport::PromptHashSource source(6);

  eval::ExperimentRunner runner;
  runner.cfg.source = eval::SourceKind::live;
  runner.cfg.l_sets = 2;
  runner.cfg.m_sequences = 4;
  runner.cfg.strategy = prompting::Strategy::class_balanced;
  runner.cfg.demo_sizes.per_class = 1;
  runner.cfg.masked_labels = {1, 2};
  runner.source = &source;
  runner.test = &test;
  runner.demo_source = &demos;
  runner.tmpl = &tmpl;

  std::vector<std::string> prompts;
  runner.prompt_observer = [&](const std::string& p) { prompts.push_back(p); };
  const auto report = runner.run_semantic_ood();

  REQUIRE(prompts.size() == test.size() * runner.cfg.l_sets);
  for (const auto& p : prompts) {
    CHECK(p.find("1: Joy") == std::string::npos);
    CHECK(p.find("2: Love") == std::string::npos);
    CHECK(p.find("Category: {1:") == std::string::npos);
    CHECK(p.find("Category: {2:") == std::string::npos);
    CHECK(p.find("four categories") != std::string::npos);
  }
  CHECK(report.n_positives == 7);  // seven masked-true instances in the fixture
}

TEST_CASE("dataset-mode ood detection evaluates both demo conditions") {
  const auto space = prompting::load_label_space(data_path("labels/emotion.json"));
  const auto test = prompting::load_dataset(data_path("emotion_test20.jsonl"),
                                            prompting::FileFormat::jsonl, space,
                                            prompting::Split::test);
  const auto demos = prompting::load_dataset(data_path("emotion_mini.jsonl"),
                                             prompting::FileFormat::jsonl, space);
  const auto fin_space = prompting::load_label_space(data_path("labels/financial.json"));
  const auto ood_demos = prompting::load_dataset(data_path("financial_mini.jsonl"),
                                                 prompting::FileFormat::jsonl, fin_space);
  const auto tmpl = prompting::load_template(data_path("templates/default.tmpl"));
  testsupport::PromptHashSource source(6);

  eval::ExperimentRunner runner;
  runner.cfg.source = eval::SourceKind::live;
  runner.cfg.l_sets = 2;
  runner.cfg.m_sequences = 4;
  runner.cfg.demo_sizes.n_random = 4;
  runner.source = &source;
  runner.test = &test;
  runner.demo_source = &demos;
  runner.ood_demo_source = &ood_demos;
  runner.tmpl = &tmpl;

  std::vector<std::string> prompts;
  runner.prompt_observer = [&](const std::string& p) { prompts.push_back(p); };
  const auto report = runner.run_ood_demo_detection();

  CHECK(report.n_instances == 2 * test.size());
  CHECK(report.n_positives == test.size());
  REQUIRE(report.scored.size() == 2 * test.size());
  CHECK(report.scored[0].instance_id.find("|in") != std::string::npos);
  CHECK(report.scored[1].instance_id.find("|ood") != std::string::npos);
  // Both conditions rendered prompts; the OOD ones carry financial wording
  // under the emotion legend.
  const std::size_t with_financial =
      std::count_if(prompts.begin(), prompts.end(), [](const std::string& p) {
        return p.find("Negative}") != std::string::npos ||
               p.find("Positive}") != std::string::npos || p.find("Neutral}") != std::string::npos;
      });
  CHECK(prompts.size() == 2 * test.size() * runner.cfg.l_sets);
  CHECK(with_financial == test.size() * runner.cfg.l_sets);
  for (const auto& p : prompts) CHECK(p.find("0: Sadness") != std::string::npos);
}

TEST_CASE("per-instance failures flush a manifest and keep the rest") {
  const auto space = prompting::load_label_space(data_path("labels/emotion.json"));
  auto test = prompting::load_dataset(data_path("emotion_test20.jsonl"),
                                      prompting::FileFormat::jsonl, space,
                                      prompting::Split::test);
  test.instances.resize(5);
  const auto demos = prompting::load_dataset(data_path("emotion_mini.jsonl"),
                                             prompting::FileFormat::jsonl, space);
  const auto tmpl = prompting::load_template(data_path("templates/default.tmpl"));

  testsupport::PromptHashSource good(6);
  std::atomic<int> calls{0};
  ScriptedSource flaky([&](const gateway::GenerationRequest& req) {
    // Third instance's first request blows up; everything else succeeds.
    if (req.instance_id == test.instances[2].id)
      raise(ErrorCode::EndpointUnreachable, "injected outage");
    calls.fetch_add(1);
    return good.generate(req);
  });

  eval::ExperimentRunner runner;
  runner.cfg.source = eval::SourceKind::live;
  runner.cfg.l_sets = 2;
  runner.cfg.m_sequences = 4;
  runner.cfg.demo_sizes.n_random = 4;
  runner.source = &flaky;
  runner.test = &test;
  runner.demo_source = &demos;
  runner.tmpl = &tmpl;
  const auto report = runner.run_misclassification();

  CHECK(report.partial());
  REQUIRE(report.failures.size() == 1);
  CHECK(report.failures[0].instance_id == test.instances[2].id);
  CHECK(report.failures[0].error.find("EndpointUnreachable") != std::string::npos);
  CHECK(report.scored.size() == 4);
  CHECK(report.n_instances == 4);
  CHECK(report.note.find("partial") != std::string::npos);

  const auto dir = testsupport::fresh_temp_dir("manifest_out");
  eval::save_report(report, dir);
  const auto manifest = testsupport::slurp(dir + "/failures.csv");
  CHECK(manifest.find(test.instances[2].id) != std::string::npos);
  CHECK(manifest.find("injected outage") != std::string::npos);
}

TEST_CASE("equal fingerprints mean equal bytes") {
  eval::ExperimentRunner a;
  a.cfg = small_sim_config();
  eval::ExperimentRunner b;
  b.cfg = small_sim_config();
  const auto ra = a.run_misclassification();
  const auto rb = b.run_misclassification();
  REQUIRE(ra.config_fingerprint == rb.config_fingerprint);
  REQUIRE(ra.trace_fingerprint == rb.trace_fingerprint);
  CHECK(eval::summary_csv(ra) == eval::summary_csv(rb));
  CHECK(eval::scores_csv(ra) == eval::scores_csv(rb));
  CHECK(eval::markdown_report(ra) == eval::markdown_report(rb));

  eval::ExperimentRunner c;
  c.cfg = small_sim_config();
  c.cfg.seed = 8;
  CHECK(c.run_misclassification().config_fingerprint != ra.config_fingerprint);
}

TEST_CASE("save_report writes the full artifact set") {
  const auto dir = testsupport::fresh_temp_dir("report_out");
  eval::ExperimentRunner runner;
  runner.cfg = small_sim_config();
  const auto report = runner.run_misclassification();
  eval::save_report(report, dir, /*emit_points=*/true);
  CHECK(std::filesystem::exists(dir + "/scores.csv"));
  CHECK(std::filesystem::exists(dir + "/report.csv"));
  CHECK(std::filesystem::exists(dir + "/report.md"));
  CHECK(std::filesystem::exists(dir + "/points_epistemic_roc.csv"));
  CHECK(std::filesystem::exists(dir + "/points_semantic_pr.csv"));

  const auto summary = testsupport::slurp(dir + "/report.csv");
  CHECK(summary.find("misclassification,epistemic,") != std::string::npos);
}
