// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared test scaffolding: fixture paths, a deterministic prompt-keyed
// generation source, and a stub OpenAI-compatible HTTP server built on it.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "icluq/gateway.hpp"
#include "icluq/simulator.hpp"

namespace icluq::testsupport {

inline std::string data_path(const std::string& rel) {
  return std::string(ICLUQ_SOURCE_DIR) + "/data/" + rel;
}

inline std::string fresh_temp_dir(const std::string& name) {
  const std::string path = "/tmp/icluq_" + name;
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path;
}

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Deterministic stand-in for a live model: every prompt hashes to a
/// synthetic instance and demo-set key of a fixed simulator world, so equal
/// prompts always produce equal beams and different prompts diverge.
class PromptHashSource : public gateway::GenerationSource {
 public:
  explicit PromptHashSource(std::size_t k, std::uint64_t seed = 99) {
    world_.k = k;
    world_.seed = seed;
  }

  std::vector<GeneratedSequence> generate(const gateway::GenerationRequest& req) override {
    const std::string fp = gateway::fingerprint(req);
    const std::uint64_t h = std::stoull(fp.substr(0, 15), nullptr, 16);
    const sim::SimInstance inst{h, static_cast<int>(h % world_.k)};
    std::vector<GeneratedSequence> seqs;
    seqs.reserve(req.num_sequences);
    for (std::size_t m = 0; m < req.num_sequences; ++m)
      seqs.push_back(sim::sim_generate(world_, inst, h >> 32, m));
    std::stable_sort(seqs.begin(), seqs.end(), [](const auto& a, const auto& b) {
      return a.sequence_logprob > b.sequence_logprob;
    });
    return seqs;
  }

  std::string describe() const override { return "prompt-hash-stub"; }
  std::string model() const override { return "stub-model"; }

 private:
  sim::SimWorld world_;
};

/// Completions payload mirroring what an OpenAI-compatible server returns
/// for a list of scored sequences.
inline nlohmann::json completion_payload(const std::vector<GeneratedSequence>& seqs) {
  nlohmann::json choices = nlohmann::json::array();
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    nlohmann::json tokens = nlohmann::json::array();
    nlohmann::json logprobs = nlohmann::json::array();
    nlohmann::json tops = nlohmann::json::array();
    for (const auto& tok : seqs[i].tokens) {
      tokens.push_back(tok.token);
      logprobs.push_back(tok.logprob);
      nlohmann::json top = nlohmann::json::object();
      for (const auto& [text, lp] : tok.top_alternatives) top[text] = lp;
      tops.push_back(top);
    }
    choices.push_back({{"text", seqs[i].text},
                       {"index", i},
                       {"logprobs",
                        {{"tokens", tokens}, {"token_logprobs", logprobs}, {"top_logprobs", tops}}},
                       {"finish_reason", "stop"}});
  }
  return {{"choices", choices}, {"object", "text_completion"}};
}

/// In-process OpenAI-compatible endpoint backed by PromptHashSource.
class StubOpenAiServer {
 public:
  explicit StubOpenAiServer(std::size_t k) : source_(k) {
    server_.Post("/v1/completions", [this](const httplib::Request& http_req,
                                           httplib::Response& res) {
      const auto body = nlohmann::json::parse(http_req.body);
      gateway::GenerationRequest req;
      req.prompt = body.at("prompt").get<std::string>();
      req.num_sequences = body.value("n", std::size_t{1});
      req.max_new_tokens = body.value("max_tokens", std::size_t{16});
      req.logprob_top_k = body.value("logprobs", std::size_t{0});
      for (const auto& key : {"temperature", "top_p"})
        if (body.contains(key)) req.decode_params[key] = body.at(key).get<double>();
      res.set_content(completion_payload(source_.generate(req)).dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubOpenAiServer() {
    server_.stop();
    thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  PromptHashSource source_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace icluq::testsupport
