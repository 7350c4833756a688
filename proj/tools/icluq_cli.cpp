// SPDX-License-Identifier: Apache-2.0

// Command-line surface: run (experiment protocols over live/replay/simulator
// sources), decompose (per-instance reports from a trace), simulate (oracle
// sweeps over the synthetic grid), metrics (AUPR/AUROC from a scores CSV),
// and render (prompt inspection).
//
// Exit codes: 0 success, 1 validation/usage error, 2 upstream failure
// (endpoint, trace, or storage).

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "icluq/icluq.hpp"

namespace {

using namespace icluq;

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::EndpointUnreachable:
    case ErrorCode::LogprobsUnsupported:
    case ErrorCode::TruncatedResponse:
    case ErrorCode::StorageFailure:
    case ErrorCode::TraceMiss:
    case ErrorCode::SchemaVersionMismatch:
      return 2;
    default:
      return 1;
  }
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  ICLUQ_REQUIRE(in.good(), ErrorCode::StorageFailure, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return gateway::sha256_hex(buf.str());
}

prompting::FileFormat format_for(const std::string& path) {
  return path.size() >= 4 && path.substr(path.size() - 4) == ".csv" ? prompting::FileFormat::csv
                                                                    : prompting::FileFormat::jsonl;
}

struct RunOptions {
  std::string protocol = "misclassification";
  std::string source = "simulator";
  std::string trace;
  bool record_on_miss = false;
  std::string dataset, labels, demo_dataset, demo_labels, ood_demo_dataset, ood_demo_labels;
  std::string template_path;
  std::string task;
  std::string demo_counts_path;
  std::string strategy = "random";
  std::size_t n_demos = 0;     // 0 = look up the task default
  std::size_t per_class = 0;   // 0 = look up the task default
  std::size_t l_sets = 4;
  std::size_t m_sequences = 10;
  std::size_t max_new_tokens = 16;
  std::size_t logprob_top_k = 5;
  std::uint64_t seed = 7;
  std::vector<int> mask_labels;
  std::string out_dir;
  bool emit_points = false;
  std::size_t parallel = 0;  // 0 = 4 for live sources, 1 otherwise
  bool majority_vote = false;
  std::string pooling = "uniform";
  double temperature = -1.0;  // <0 = leave unset
  double top_p = -1.0;
  int num_beams = 0;
  std::string endpoint, api_key, model;
  bool chat = false;
  // simulator knobs
  std::size_t sim_k = 6;
  double sim_alpha = 2.0;
  double sim_tau = 0.5;
  double sim_base_accuracy = 0.6;
  std::size_t sim_instances = 200;
  double sim_ood_alpha = 0.0;
};

void add_run_options(CLI::App* cmd, RunOptions& opt) {
  cmd->add_option("--protocol", opt.protocol, "misclassification | ood_demo | semantic_ood")
      ->check(CLI::IsMember({"misclassification", "ood_demo", "semantic_ood"}));
  cmd->add_option("--source", opt.source, "live | replay | simulator")
      ->check(CLI::IsMember({"live", "replay", "simulator"}));
  cmd->add_option("--trace", opt.trace, "trace JSONL (replay input / live recording)");
  cmd->add_flag("--record-on-miss", opt.record_on_miss,
                "replay mode: fall back to the live endpoint and record misses");
  cmd->add_option("--dataset", opt.dataset, "test split JSONL/CSV");
  cmd->add_option("--labels", opt.labels, "test label-space JSON");
  cmd->add_option("--demo-dataset", opt.demo_dataset, "demonstration source (default: --dataset)");
  cmd->add_option("--demo-labels", opt.demo_labels, "demo label space (default: --labels)");
  cmd->add_option("--ood-demo-dataset", opt.ood_demo_dataset, "OOD demonstration source");
  cmd->add_option("--ood-demo-labels", opt.ood_demo_labels, "OOD demo label space");
  cmd->add_option("--template", opt.template_path, "prompt template file");
  cmd->add_option("--task", opt.task, "task name for demo-count defaults (default: dataset stem)");
  cmd->add_option("--demo-counts", opt.demo_counts_path, "demo-count defaults JSON");
  cmd->add_option("--strategy", opt.strategy, "random | class")
      ->check(CLI::IsMember({"random", "class"}));
  cmd->add_option("--n-demos", opt.n_demos, "demos per set (random strategy)");
  cmd->add_option("--per-class", opt.per_class, "demos per class (class strategy)");
  cmd->add_option("--l-sets", opt.l_sets, "demonstration sets per instance");
  cmd->add_option("--m-sequences", opt.m_sequences, "decoded sequences per set");
  cmd->add_option("--max-new-tokens", opt.max_new_tokens, "generation length cap");
  cmd->add_option("--logprob-top-k", opt.logprob_top_k, "alternatives per token");
  cmd->add_option("--seed", opt.seed, "root seed");
  cmd->add_option("--mask-labels", opt.mask_labels, "label ids to mask (semantic_ood)")
      ->delimiter(',');
  cmd->add_option("--out-dir", opt.out_dir, "report output directory")->required();
  cmd->add_flag("--emit-points", opt.emit_points, "also dump ROC/PR curve points");
  cmd->add_option("--parallel", opt.parallel, "concurrent instance evaluations");
  cmd->add_flag("--majority-vote", opt.majority_vote, "predict by sequence vote instead of pooling");
  cmd->add_option("--pooling", opt.pooling, "uniform | raw_sum")
      ->check(CLI::IsMember({"uniform", "raw_sum"}));
  cmd->add_option("--temperature", opt.temperature, "decode temperature");
  cmd->add_option("--top-p", opt.top_p, "nucleus sampling mass");
  cmd->add_option("--num-beams", opt.num_beams, "beam width for endpoints that support it");
  cmd->add_option("--endpoint", opt.endpoint, "OpenAI-compatible base URL")
      ->envname("ICLUQ_ENDPOINT");
  cmd->add_option("--api-key", opt.api_key, "bearer token")->envname("ICLUQ_API_KEY");
  cmd->add_option("--model", opt.model, "model name")->envname("ICLUQ_MODEL");
  cmd->add_flag("--chat", opt.chat, "use the chat completions route");
  cmd->add_option("--sim-k", opt.sim_k, "simulator label count");
  cmd->add_option("--sim-alpha", opt.sim_alpha, "simulator concept concentration");
  cmd->add_option("--sim-tau", opt.sim_tau, "simulator config-noise scale");
  cmd->add_option("--sim-base-accuracy", opt.sim_base_accuracy, "simulator base accuracy");
  cmd->add_option("--sim-instances", opt.sim_instances, "simulator test instances");
  cmd->add_option("--sim-ood-alpha", opt.sim_ood_alpha,
                  "simulator OOD concentration (0 = alpha/16)");
}

int run_command(const RunOptions& opt) {
  eval::RunConfig cfg;
  cfg.l_sets = opt.l_sets;
  cfg.m_sequences = opt.m_sequences;
  cfg.max_new_tokens = opt.max_new_tokens;
  cfg.logprob_top_k = opt.logprob_top_k;
  cfg.seed = opt.seed;
  cfg.strategy = prompting::strategy_from_string(opt.strategy);
  cfg.masked_labels = opt.mask_labels;
  cfg.majority_vote = opt.majority_vote;
  cfg.pooling = opt.pooling == "uniform" ? uq::Pooling::uniform_mixture : uq::Pooling::raw_sum;
  if (opt.temperature >= 0.0) cfg.decode_params["temperature"] = opt.temperature;
  if (opt.top_p >= 0.0) cfg.decode_params["top_p"] = opt.top_p;
  if (opt.num_beams > 0) cfg.decode_params["num_beams"] = opt.num_beams;
  cfg.world.k = opt.sim_k;
  cfg.world.concept_concentration = opt.sim_alpha;
  cfg.world.config_noise = opt.sim_tau;
  cfg.world.base_accuracy = opt.sim_base_accuracy;
  cfg.world.seed = opt.seed;
  cfg.sim_instances = opt.sim_instances;
  cfg.sim_ood_alpha = opt.sim_ood_alpha;

  eval::ExperimentRunner runner;
  runner.cfg = cfg;

  std::shared_ptr<gateway::GenerationSource> source;
  if (opt.source == "simulator") {
    runner.cfg.source = eval::SourceKind::simulator;
    runner.trace_fingerprint = gateway::sha256_hex(
        "simulator:" + std::to_string(cfg.world.k) + "," +
        format_double(cfg.world.concept_concentration) + "," +
        format_double(cfg.world.config_noise) + "," + format_double(cfg.world.base_accuracy) +
        "," + std::to_string(cfg.world.seed));
  } else {
    gateway::EndpointConfig endpoint;
    endpoint.base_url = opt.endpoint;
    endpoint.api_key = opt.api_key;
    endpoint.model = opt.model;
    endpoint.chat = opt.chat;
    if (opt.source == "live") {
      runner.cfg.source = eval::SourceKind::live;
      auto live = std::make_shared<gateway::LiveSource>(endpoint);
      if (!opt.trace.empty()) {
        std::ofstream touch(opt.trace, std::ios::app);  // ensure the file exists
        source = std::make_shared<gateway::ReplaySource>(
            opt.trace, gateway::ReplayMode::record_on_miss, live);
      } else {
        source = live;
      }
      runner.trace_fingerprint = gateway::sha256_hex("live:" + endpoint.base_url + ":" + opt.model);
    } else {
      runner.cfg.source = eval::SourceKind::replay;
      ICLUQ_REQUIRE(!opt.trace.empty(), ErrorCode::InvalidConfig, "replay needs --trace");
      if (opt.record_on_miss) {
        auto live = std::make_shared<gateway::LiveSource>(endpoint);
        source = std::make_shared<gateway::ReplaySource>(
            opt.trace, gateway::ReplayMode::record_on_miss, live);
      } else {
        source = std::make_shared<gateway::ReplaySource>(opt.trace, gateway::ReplayMode::strict);
      }
      runner.trace_fingerprint = sha256_file(opt.trace);
    }
    runner.source = source.get();
  }
  runner.cfg.parallel =
      opt.parallel > 0 ? opt.parallel : (runner.cfg.source == eval::SourceKind::live ? 4 : 1);

  // Dataset mode inputs.
  std::optional<prompting::Dataset> test, demo, ood_demo;
  prompting::PromptTemplate tmpl;
  if (runner.cfg.source != eval::SourceKind::simulator) {
    ICLUQ_REQUIRE(!opt.dataset.empty() && !opt.labels.empty(), ErrorCode::InvalidConfig,
                  "dataset mode needs --dataset and --labels");
    ICLUQ_REQUIRE(!opt.template_path.empty(), ErrorCode::InvalidConfig,
                  "dataset mode needs --template");
    const auto space = prompting::load_label_space(opt.labels);
    test = prompting::load_dataset(opt.dataset, format_for(opt.dataset), space,
                                   prompting::Split::test);
    const std::string demo_path = opt.demo_dataset.empty() ? opt.dataset : opt.demo_dataset;
    const auto demo_space =
        opt.demo_labels.empty() ? space : prompting::load_label_space(opt.demo_labels);
    demo = prompting::load_dataset(demo_path, format_for(demo_path), demo_space,
                                   prompting::Split::train);
    if (!opt.ood_demo_dataset.empty()) {
      const auto ood_space = opt.ood_demo_labels.empty()
                                 ? space
                                 : prompting::load_label_space(opt.ood_demo_labels);
      ood_demo = prompting::load_dataset(opt.ood_demo_dataset, format_for(opt.ood_demo_dataset),
                                         ood_space, prompting::Split::train);
    }
    tmpl = prompting::load_template(opt.template_path);
    runner.test = &*test;
    runner.demo_source = &*demo;
    if (ood_demo) runner.ood_demo_source = &*ood_demo;
    runner.tmpl = &tmpl;

    // Demo-set sizes: explicit flags win, then the bundled per-task table.
    runner.cfg.demo_sizes.n_random = opt.n_demos;
    runner.cfg.demo_sizes.per_class = opt.per_class;
    const bool needs_random = cfg.strategy == prompting::Strategy::random && opt.n_demos == 0;
    const bool needs_class =
        cfg.strategy == prompting::Strategy::class_balanced && opt.per_class == 0;
    if (needs_random || needs_class) {
      ICLUQ_REQUIRE(!opt.demo_counts_path.empty(), ErrorCode::InvalidConfig,
                    "no demo size given: pass --n-demos/--per-class or --demo-counts");
      const auto counts = prompting::load_demo_counts(opt.demo_counts_path);
      const std::string task = opt.task.empty() ? test->name : opt.task;
      const auto it = counts.find(task);
      ICLUQ_REQUIRE(it != counts.end(), ErrorCode::InvalidConfig,
                    "task '" + task + "' not in " + opt.demo_counts_path +
                        "; pass --task or explicit sizes");
      if (needs_random) runner.cfg.demo_sizes.n_random = it->second.random;
      if (needs_class) runner.cfg.demo_sizes.per_class = it->second.class_per_class;
    }
  }

  eval::EvalReport report;
  const auto protocol = eval::protocol_from_string(opt.protocol);
  switch (protocol) {
    case eval::Protocol::misclassification:
      report = runner.run_misclassification();
      break;
    case eval::Protocol::ood_demo:
      report = runner.run_ood_demo_detection();
      break;
    case eval::Protocol::semantic_ood:
      report = runner.run_semantic_ood();
      break;
  }
  eval::save_report(report, opt.out_dir, opt.emit_points);
  std::cout << eval::markdown_report(report);
  if (report.partial()) {
    std::cerr << "error: " << report.failures.size()
              << " instance(s) failed upstream (first: " << report.failures.front().error
              << "); partial results and failures.csv written to " << opt.out_dir << "\n";
    return 2;
  }
  return 0;
}

int decompose_command(const std::string& trace_path, const std::string& labels_path,
                      std::size_t k, const std::string& method) {
  LabelSpace space;
  if (!labels_path.empty()) {
    space = prompting::load_label_space(labels_path);
  } else {
    ICLUQ_REQUIRE(k >= 2, ErrorCode::InvalidConfig, "pass --labels or --k");
    for (std::size_t i = 0; i < k; ++i)
      space.labels.push_back({static_cast<int>(i), ""});
  }

  // Group trace records by instance; demo_set_id orders the columns.
  std::ifstream in(trace_path);
  ICLUQ_REQUIRE(in.good(), ErrorCode::StorageFailure, "cannot open trace " + trace_path);
  std::map<std::string, std::map<int, gateway::TraceRecord>> by_instance;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto rec = gateway::trace_record_from_json(nlohmann::json::parse(line));
    const std::string instance = rec.instance_id;
    by_instance[instance].emplace(rec.demo_set_id, std::move(rec));
  }

  const bool want_variance = method == "variance" || method == "both";
  const bool want_entropy = method == "entropy" || method == "both";
  std::string header = "instance_id,l_sets";
  if (want_entropy) header += ",total,epistemic,aleatoric";
  if (want_variance) header += ",var_total,var_epistemic,var_aleatoric";
  std::cout << header << "\n";

  for (const auto& [instance, records] : by_instance) {
    std::vector<AnswerDistribution> columns;
    std::vector<std::vector<int>> labels_by_config;  // [config][demo set]
    bool rectangular = true;
    for (const auto& [demo_id, rec] : records) {
      columns.push_back(answer::aggregate(rec.sequences, space).dist);
      if (labels_by_config.empty()) labels_by_config.resize(rec.sequences.size());
      if (rec.sequences.size() != labels_by_config.size()) rectangular = false;
      for (std::size_t m = 0; m < rec.sequences.size() && rectangular; ++m) {
        const auto ans = answer::try_extract_label(rec.sequences[m], space);
        labels_by_config[m].push_back(ans ? ans->label_id : -1);
      }
    }
    std::cout << instance << "," << columns.size();
    if (want_entropy) {
      const auto rep = uq::decompose_entropy(answer::build_matrix(std::move(columns)));
      std::cout << "," << format_double(rep.total) << "," << format_double(rep.epistemic) << ","
                << format_double(rep.aleatoric);
    }
    if (want_variance) {
      if (rectangular && labels_by_config.size() * records.size() >= 2) {
        const auto rep = uq::decompose_variance(uq::label_grid(labels_by_config));
        std::cout << "," << format_double(rep.total) << "," << format_double(rep.epistemic) << ","
                  << format_double(rep.aleatoric);
      } else {
        std::cout << ",undefined,undefined,undefined";
      }
    }
    std::cout << "\n";
  }
  return 0;
}

int simulate_command(const std::vector<double>& alphas, const std::vector<double>& taus,
                     std::size_t k, double base_accuracy, std::size_t l_sets,
                     std::size_t m_sequences, std::size_t replicates, std::uint64_t seed,
                     std::uint64_t instance_id) {
  std::cout << "alpha,tau,pipeline_total,pipeline_eu,pipeline_au,oracle_total,oracle_eu,"
               "oracle_au,sd_total,sd_eu,sd_au,replicates\n";
  for (double alpha : alphas) {
    for (double tau : taus) {
      sim::SimWorld world;
      world.k = k;
      world.concept_concentration = alpha;
      world.config_noise = tau;
      world.base_accuracy = base_accuracy;
      world.seed = seed;
      const auto inst = sim::make_instance(world, instance_id);
      const auto pipe = sim::pipeline_decomposition(world, inst, l_sets, m_sequences);
      const auto gt = sim::ground_truth_decomposition(world, inst, l_sets, m_sequences,
                                                      replicates * l_sets * m_sequences);
      std::cout << format_double(alpha) << "," << format_double(tau) << ","
                << format_double(pipe.total) << "," << format_double(pipe.epistemic) << ","
                << format_double(pipe.aleatoric) << "," << format_double(gt.mean.total) << ","
                << format_double(gt.mean.epistemic) << "," << format_double(gt.mean.aleatoric)
                << "," << format_double(gt.sd_total) << "," << format_double(gt.sd_epistemic)
                << "," << format_double(gt.sd_aleatoric) << "," << gt.replicates << "\n";
    }
  }
  return 0;
}

int metrics_command(const std::string& scores_path) {
  std::ifstream in(scores_path);
  ICLUQ_REQUIRE(in.good(), ErrorCode::StorageFailure, "cannot open " + scores_path);
  std::string line;
  ICLUQ_REQUIRE(std::getline(in, line), ErrorCode::MalformedRecord, "empty scores file");
  std::vector<double> scores;
  std::vector<int> labels;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    ICLUQ_REQUIRE(comma != std::string::npos, ErrorCode::MalformedRecord,
                  scores_path + " line " + std::to_string(line_no) + ": expected score,label");
    try {
      scores.push_back(std::stod(line.substr(0, comma)));
      labels.push_back(std::stoi(line.substr(comma + 1)));
    } catch (const std::exception&) {
      raise(ErrorCode::MalformedRecord,
            scores_path + " line " + std::to_string(line_no) + ": expected score,label");
    }
  }
  try {
    std::cout << "aupr " << format_double(metrics::aupr(scores, labels)) << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoPositives && e.code() != ErrorCode::SingleClass) throw;
    std::cout << "aupr undefined\n";
  }
  try {
    std::cout << "auroc " << format_double(metrics::auroc(scores, labels)) << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingleClass) throw;
    std::cout << "auroc undefined\n";
  }
  return 0;
}

int render_command(const std::string& dataset_path, const std::string& labels_path,
                   const std::string& template_path, const std::string& demo_dataset_path,
                   const std::string& strategy, std::size_t n_demos, std::size_t per_class,
                   std::uint64_t seed, std::size_t index, const std::vector<int>& mask) {
  const auto space = prompting::load_label_space(labels_path);
  const auto test = prompting::load_dataset(dataset_path, format_for(dataset_path), space,
                                            prompting::Split::test);
  ICLUQ_REQUIRE(index < test.size(), ErrorCode::InvalidArgument, "instance index out of range");
  const std::string demo_path = demo_dataset_path.empty() ? dataset_path : demo_dataset_path;
  auto demos = prompting::load_dataset(demo_path, format_for(demo_path), space);
  LabelSpace advertised = space;
  if (!mask.empty()) {
    advertised = space.without(mask);
    ICLUQ_REQUIRE(!advertised.labels.empty(), ErrorCode::AllLabelsMasked, "all classes masked");
    demos = prompting::restrict_to_labels(demos, advertised);
  }
  const auto tmpl = prompting::load_template(template_path);
  prompting::DemoSet set;
  if (prompting::strategy_from_string(strategy) == prompting::Strategy::random)
    set = prompting::sample_random(demos, n_demos, seed);
  else
    set = prompting::sample_class(demos, per_class, seed);
  std::cout << prompting::render_prompt(tmpl, set, test.instances[index].text, advertised);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty decomposition for in-context classification"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file mirroring the flags; flags override it");

  RunOptions run_opt;
  auto* run = app.add_subcommand("run", "execute an experiment protocol");
  add_run_options(run, run_opt);

  std::string dec_trace, dec_labels, dec_method = "entropy";
  std::size_t dec_k = 0;
  auto* dec = app.add_subcommand("decompose", "per-instance reports from a trace");
  dec->add_option("--trace", dec_trace)->required();
  dec->add_option("--labels", dec_labels, "label-space JSON");
  dec->add_option("--k", dec_k, "label count when no --labels file is given");
  dec->add_option("--method", dec_method)->check(CLI::IsMember({"entropy", "variance", "both"}));

  std::vector<double> sim_alphas{0.5, 2.0, 8.0};
  std::vector<double> sim_taus{0.0, 0.5, 2.0};
  std::size_t sim_k = 6, sim_l = 32, sim_m = 32, sim_reps = 30, sim_inst = 0;
  double sim_base = 0.6;
  std::uint64_t sim_seed = 7;
  auto* simulate = app.add_subcommand("simulate", "pipeline vs oracle sweeps over the grid");
  simulate->add_option("--alpha", sim_alphas, "concept concentrations")->delimiter(',');
  simulate->add_option("--tau", sim_taus, "config-noise scales")->delimiter(',');
  simulate->add_option("--k", sim_k);
  simulate->add_option("--base-accuracy", sim_base);
  simulate->add_option("--l-sets", sim_l);
  simulate->add_option("--m-sequences", sim_m);
  simulate->add_option("--replicates", sim_reps);
  simulate->add_option("--seed", sim_seed);
  simulate->add_option("--instance", sim_inst);

  std::string metrics_scores;
  auto* met = app.add_subcommand("metrics", "AUPR/AUROC from a score,label CSV");
  met->add_option("--scores", metrics_scores)->required();

  std::string r_dataset, r_labels, r_template, r_demo_dataset, r_strategy = "random";
  std::size_t r_n = 4, r_per_class = 1, r_index = 0;
  std::uint64_t r_seed = 7;
  std::vector<int> r_mask;
  auto* render = app.add_subcommand("render", "print one rendered prompt");
  render->add_option("--dataset", r_dataset)->required();
  render->add_option("--labels", r_labels)->required();
  render->add_option("--template", r_template)->required();
  render->add_option("--demo-dataset", r_demo_dataset);
  render->add_option("--strategy", r_strategy)->check(CLI::IsMember({"random", "class"}));
  render->add_option("--n-demos", r_n);
  render->add_option("--per-class", r_per_class);
  render->add_option("--seed", r_seed);
  render->add_option("--index", r_index);
  render->add_option("--mask-labels", r_mask)->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (run->parsed()) return run_command(run_opt);
    if (dec->parsed()) return decompose_command(dec_trace, dec_labels, dec_k, dec_method);
    if (simulate->parsed())
      return simulate_command(sim_alphas, sim_taus, sim_k, sim_base, sim_l, sim_m, sim_reps,
                              sim_seed, sim_inst);
    if (met->parsed()) return metrics_command(metrics_scores);
    if (render->parsed())
      return render_command(r_dataset, r_labels, r_template, r_demo_dataset, r_strategy, r_n,
                            r_per_class, r_seed, r_index, r_mask);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
