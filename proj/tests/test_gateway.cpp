// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

#include "icluq/gateway.hpp"
#include "icluq/rng.hpp"

using namespace icluq;
using nlohmann::json;

namespace {

std::string temp_path(const std::string& name) {
  const std::string path = "/tmp/icluq_gw_" + name;
  std::remove(path.c_str());
  return path;
}

gateway::GenerationRequest make_request(std::string prompt = "Sentence: {x} Category: ") {
  gateway::GenerationRequest req;
  req.prompt = std::move(prompt);
  req.num_sequences = 10;
  req.max_new_tokens = 16;
  req.logprob_top_k = 3;
  req.decode_params = {{"temperature", 1.0}};
  return req;
}

GeneratedSequence digit_sequence(int label, double logprob) {
  GeneratedSequence seq;
  seq.text = std::to_string(label);
  seq.tokens.push_back({seq.text, logprob, {{seq.text, logprob}}});
  seq.sequence_logprob = logprob;
  return seq;
}

/// Minimal OpenAI-compatible completions server scripted per test.
class StubServer {
 public:
  explicit StubServer(httplib::Server::Handler handler) {
    server_.Post("/v1/completions", handler);
    server_.Post("/v1/chat/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

/// Fixed-beam completion payload: n choices with ascending logprobs so the
/// client's descending sort is observable.
json fixed_beams_response(const json& request, bool with_logprobs = true) {
  const std::size_t n = request.value("n", 1);
  json choices = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = -0.1 * static_cast<double>(n - i);  // ascending
    json choice;
    choice["text"] = std::to_string(i % 6);
    choice["index"] = i;
    if (with_logprobs) {
      choice["logprobs"] = {
          {"tokens", {std::to_string(i % 6)}},
          {"token_logprobs", {lp}},
          {"top_logprobs", {{{std::to_string(i % 6), lp}, {"9", lp - 2.0}}}},
      };
    } else {
      choice["logprobs"] = nullptr;
    }
    choices.push_back(choice);
  }
  return {{"choices", choices}};
}

}  // namespace

TEST_CASE("fingerprints are stable and sensitive") {
  const auto req = make_request();
  CHECK(gateway::fingerprint(req) == gateway::fingerprint(req));
  CHECK(gateway::fingerprint(req).size() == 64);

  auto one_byte = req;
  one_byte.prompt.back() = 'X';
  CHECK(gateway::fingerprint(one_byte) != gateway::fingerprint(req));

  auto other_params = req;
  other_params.decode_params["temperature"] = 0.9;
  CHECK(gateway::fingerprint(other_params) != gateway::fingerprint(req));

  auto other_n = req;
  other_n.num_sequences = 11;
  CHECK(gateway::fingerprint(other_n) != gateway::fingerprint(req));

  // Trace metadata does not participate.
  auto metadata = req;
  metadata.instance_id = "foo";
  metadata.demo_set_id = 3;
  CHECK(gateway::fingerprint(metadata) == gateway::fingerprint(req));
}

TEST_CASE("endpoint config reads the environment") {
  setenv("ICLUQ_ENDPOINT", "http://example.test:1234/v1", 1);
  setenv("ICLUQ_API_KEY", "sk-test", 1);
  setenv("ICLUQ_MODEL", "m7b", 1);
  const auto cfg = gateway::EndpointConfig::from_environment();
  CHECK(cfg.base_url == "http://example.test:1234/v1");
  CHECK(cfg.api_key == "sk-test");
  CHECK(cfg.model == "m7b");
  unsetenv("ICLUQ_ENDPOINT");
  unsetenv("ICLUQ_API_KEY");
  unsetenv("ICLUQ_MODEL");
}

TEST_CASE("trace records round-trip byte-identically") {
  gateway::TraceRecord rec;
  rec.fingerprint = "abc123";
  rec.instance_id = "emotion#4";
  rec.demo_set_id = 2;
  rec.endpoint = "http://127.0.0.1:1/v1";
  rec.model = "test-model";
  rec.decode_mode = "n_sample";
  rec.timestamp = "1970-01-01T00:00:00Z";
  rec.request = make_request();
  rec.sequences = {digit_sequence(3, -0.105), digit_sequence(1, -1.5)};

  const std::string line = gateway::trace_record_to_json(rec).dump();
  const auto parsed = gateway::trace_record_from_json(json::parse(line));
  CHECK(gateway::trace_record_to_json(parsed).dump() == line);
  CHECK(parsed.sequences.size() == 2);
  CHECK(parsed.sequences[0].tokens[0].logprob == -0.105);

  const auto path = temp_path("roundtrip.jsonl");
  CHECK(gateway::record(path, rec) == 0);
  CHECK(gateway::record(path, rec) == 1);

  std::ifstream in(path);
  std::string first_line;
  std::getline(in, first_line);
  CHECK(first_line == line);
}

TEST_CASE("full-precision logprobs survive the trace") {
  gateway::TraceRecord rec;
  rec.fingerprint = "fp";
  rec.request = make_request();
  rng::Stream stream(rng::derive_key({20260809, 41}));
  for (int i = 0; i < 50; ++i)
    rec.sequences.push_back(digit_sequence(static_cast<int>(stream.next_below(6)),
                                           -3.0 * stream.next_open_double()));
  const auto parsed =
      gateway::trace_record_from_json(json::parse(gateway::trace_record_to_json(rec).dump()));
  for (std::size_t i = 0; i < rec.sequences.size(); ++i) {
    CHECK(parsed.sequences[i].sequence_logprob == rec.sequences[i].sequence_logprob);
    CHECK(parsed.sequences[i].tokens[0].logprob == rec.sequences[i].tokens[0].logprob);
  }
}

TEST_CASE("replay serves recorded fingerprints and misses loudly") {
  const auto path = temp_path("replay.jsonl");
  const auto req = make_request();
  gateway::TraceRecord rec;
  rec.fingerprint = gateway::fingerprint(req);
  rec.request = req;
  rec.sequences = {digit_sequence(5, -0.2)};
  gateway::record(path, rec);

  const auto seqs = gateway::replay(path, gateway::fingerprint(req));
  REQUIRE(seqs.size() == 1);
  CHECK(seqs[0].text == "5");

  CHECK_THROWS_MATCHES(gateway::replay(path, "deadbeef"), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::TraceMiss; }));
}

TEST_CASE("strict replay source never reaches the network") {
  const auto path = temp_path("strict.jsonl");
  const auto req = make_request();
  gateway::TraceRecord rec;
  rec.fingerprint = gateway::fingerprint(req);
  rec.request = req;
  rec.sequences = {digit_sequence(2, -0.4)};
  gateway::record(path, rec);

  gateway::ReplaySource source(path, gateway::ReplayMode::strict);
  CHECK(source.generate(req)[0].text == "2");
  auto missing = make_request("another prompt");
  CHECK_THROWS_MATCHES(source.generate(missing), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::TraceMiss; }));
}

TEST_CASE("unknown trace schema versions are rejected") {
  const auto path = temp_path("schema.jsonl");
  gateway::TraceRecord rec;
  rec.schema_version = "2.0";
  rec.fingerprint = "fp";
  rec.request = make_request();
  {
    std::ofstream out(path);
    out << gateway::trace_record_to_json(rec).dump() << "\n";
  }
  CHECK_THROWS_MATCHES(gateway::TraceStore(path), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::SchemaVersionMismatch;
                       }));
}

TEST_CASE("live source returns sequences in descending likelihood order") {
  StubServer stub([](const httplib::Request& http_req, httplib::Response& res) {
    res.set_content(fixed_beams_response(json::parse(http_req.body)).dump(), "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  cfg.model = "stub-model";
  gateway::LiveSource source(cfg);

  const auto seqs = source.generate(make_request());
  REQUIRE(seqs.size() == 10);
  for (std::size_t i = 1; i < seqs.size(); ++i)
    CHECK(seqs[i - 1].sequence_logprob >= seqs[i].sequence_logprob);
  CHECK(seqs.front().sequence_logprob == Catch::Approx(-0.1).margin(1e-12));
  REQUIRE(seqs.front().tokens.size() == 1);
  CHECK(seqs.front().tokens[0].top_alternatives.size() == 2);
  CHECK(seqs.front().tokens[0].top_alternatives[0].second >
        seqs.front().tokens[0].top_alternatives[1].second);
  for (const auto& s : seqs) validate_sequence(s);
}

TEST_CASE("single-sequence requests stay trivially ordered") {
  StubServer stub([](const httplib::Request& http_req, httplib::Response& res) {
    res.set_content(fixed_beams_response(json::parse(http_req.body)).dump(), "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  gateway::LiveSource source(cfg);
  auto req = make_request();
  req.num_sequences = 1;
  CHECK(source.generate(req).size() == 1);
}

TEST_CASE("logprob-free endpoints are refused") {
  StubServer stub([](const httplib::Request& http_req, httplib::Response& res) {
    res.set_content(fixed_beams_response(json::parse(http_req.body), false).dump(),
                    "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  gateway::LiveSource source(cfg);
  CHECK_THROWS_MATCHES(source.generate(make_request()), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::LogprobsUnsupported;
                       }));
}

TEST_CASE("malformed payloads surface as truncated responses") {
  StubServer stub([](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"choices\": [", "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  gateway::LiveSource source(cfg);
  CHECK_THROWS_MATCHES(source.generate(make_request()), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::TruncatedResponse;
                       }));
}

TEST_CASE("unreachable endpoints retry then fail") {
  gateway::EndpointConfig cfg;
  cfg.base_url = "http://127.0.0.1:9/v1";  // discard port, nothing listens
  cfg.retry_base_ms = 1;
  cfg.connect_timeout_s = 1;
  gateway::LiveSource source(cfg);
  CHECK_THROWS_MATCHES(source.generate(make_request()), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::EndpointUnreachable;
                       }));
}

TEST_CASE("transient server errors are retried") {
  auto failures = std::make_shared<std::atomic<int>>(2);
  StubServer stub([failures](const httplib::Request& http_req, httplib::Response& res) {
    if (failures->fetch_sub(1) > 0) {
      res.status = 503;
      return;
    }
    res.set_content(fixed_beams_response(json::parse(http_req.body)).dump(), "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  cfg.retry_base_ms = 1;
  gateway::LiveSource source(cfg);
  CHECK(source.generate(make_request()).size() == 10);
}

TEST_CASE("chat endpoints adapt the prompt as one user message") {
  StubServer stub([](const httplib::Request& http_req, httplib::Response& res) {
    const json body = json::parse(http_req.body);
    REQUIRE(body.contains("messages"));
    CHECK(body["messages"][0]["role"] == "user");
    const std::size_t n = body.value("n", 1);
    json choices = json::array();
    for (std::size_t i = 0; i < n; ++i) {
      choices.push_back(
          {{"message", {{"role", "assistant"}, {"content", std::to_string(i % 6)}}},
           {"logprobs",
            {{"content",
              {{{"token", std::to_string(i % 6)},
                {"logprob", -0.2 * static_cast<double>(i + 1)},
                {"top_logprobs",
                 {{{"token", std::to_string(i % 6)}, {"logprob", -0.2 * (i + 1)}}}}}}}}}});
    }
    res.set_content(json{{"choices", choices}}.dump(), "application/json");
  });
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  cfg.chat = true;
  gateway::LiveSource source(cfg);
  auto req = make_request();
  req.num_sequences = 3;
  const auto seqs = source.generate(req);
  REQUIRE(seqs.size() == 3);
  CHECK(seqs[0].text == "0");
  CHECK(seqs[0].sequence_logprob == Catch::Approx(-0.2).margin(1e-12));
}

TEST_CASE("record-on-miss fills the trace once and replays after") {
  auto calls = std::make_shared<std::atomic<int>>(0);
  StubServer stub([calls](const httplib::Request& http_req, httplib::Response& res) {
    calls->fetch_add(1);
    res.set_content(fixed_beams_response(json::parse(http_req.body)).dump(), "application/json");
  });
  const auto path = temp_path("record_on_miss.jsonl");
  {
    std::ofstream touch(path);  // start from an empty trace
  }
  gateway::EndpointConfig cfg;
  cfg.base_url = stub.base_url();
  auto live = std::make_shared<gateway::LiveSource>(cfg);
  gateway::ReplaySource source(path, gateway::ReplayMode::record_on_miss, live);

  const auto req = make_request();
  const auto first = source.generate(req);
  const auto second = source.generate(req);
  CHECK(*calls == 1);
  CHECK(first.size() == second.size());

  // A fresh strict replayer sees the recorded call.
  gateway::ReplaySource strict(path, gateway::ReplayMode::strict);
  CHECK(strict.generate(req).size() == first.size());
}
