// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file gateway.hpp
 * @brief OpenAI-compatible completion client with trace record/replay.
 *
 * The gateway obtains M decoded sequences with token logprobs per request,
 * persists every call as one JSONL trace line keyed by a request fingerprint,
 * and can replay a recorded trace so that the whole pipeline runs offline and
 * deterministically. Endpoints lacking true beam search serve `n` parallel
 * samples instead; the decode mode is recorded in the trace.
 */

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <unordered_map>
#include <vector>

#include <openssl/evp.h>

#include "httplib.h"
#include "json.hpp"

#include "icluq/error.hpp"
#include "icluq/format.hpp"
#include "icluq/types.hpp"

namespace icluq::gateway {

inline constexpr std::string_view kTraceSchemaVersion = "1.0";

// ---------------------------------------------------------------------------
// Requests and fingerprints
// ---------------------------------------------------------------------------

struct GenerationRequest {
  std::string prompt;
  std::size_t num_sequences = 10;  // beam width / sample count
  std::size_t max_new_tokens = 16;
  std::size_t logprob_top_k = 5;
  std::map<std::string, double> decode_params;  // temperature, top_p, ...

  // Trace metadata; not part of the fingerprint.
  std::string instance_id;
  int demo_set_id = 0;
};

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

/// Collision-resistant fingerprint of everything that determines a
/// generation call's output distribution. Byte-identical requests fingerprint
/// identically; any single-byte prompt change changes it.
inline std::string fingerprint(const GenerationRequest& req) {
  std::string canon = "icluq-request-v1\n";
  canon += "n=" + std::to_string(req.num_sequences) + "\n";
  canon += "max_new_tokens=" + std::to_string(req.max_new_tokens) + "\n";
  canon += "logprob_top_k=" + std::to_string(req.logprob_top_k) + "\n";
  for (const auto& [key, value] : req.decode_params)
    canon += "param:" + key + "=" + format_double(value) + "\n";
  canon += "prompt:";
  canon += req.prompt;
  return sha256_hex(canon);
}

// ---------------------------------------------------------------------------
// JSON encoding of sequences and trace records
// ---------------------------------------------------------------------------

inline nlohmann::json sequence_to_json(const GeneratedSequence& seq) {
  nlohmann::json tokens = nlohmann::json::array();
  for (const auto& tok : seq.tokens) {
    nlohmann::json alts = nlohmann::json::array();
    for (const auto& [text, lp] : tok.top_alternatives) alts.push_back({text, lp});
    tokens.push_back({{"token", tok.token}, {"logprob", tok.logprob}, {"top_alternatives", alts}});
  }
  return {{"text", seq.text}, {"sequence_logprob", seq.sequence_logprob}, {"tokens", tokens}};
}

inline GeneratedSequence sequence_from_json(const nlohmann::json& j) {
  GeneratedSequence seq;
  seq.text = j.at("text").get<std::string>();
  seq.sequence_logprob = j.at("sequence_logprob").get<double>();
  for (const auto& t : j.at("tokens")) {
    TokenScore tok;
    tok.token = t.at("token").get<std::string>();
    tok.logprob = t.at("logprob").get<double>();
    for (const auto& alt : t.at("top_alternatives"))
      tok.top_alternatives.emplace_back(alt.at(0).get<std::string>(), alt.at(1).get<double>());
    seq.tokens.push_back(std::move(tok));
  }
  return seq;
}

/// Full provenance of one (instance, demo-set) generation call.
struct TraceRecord {
  std::string schema_version{kTraceSchemaVersion};
  std::string fingerprint;
  std::string instance_id;
  int demo_set_id = 0;
  std::string endpoint;
  std::string model;
  std::string decode_mode;
  std::string timestamp;
  GenerationRequest request;
  std::vector<GeneratedSequence> sequences;
};

inline nlohmann::json trace_record_to_json(const TraceRecord& rec) {
  nlohmann::json seqs = nlohmann::json::array();
  for (const auto& s : rec.sequences) seqs.push_back(sequence_to_json(s));
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [key, value] : rec.request.decode_params) params[key] = value;
  return {{"schema_version", rec.schema_version},
          {"fingerprint", rec.fingerprint},
          {"instance_id", rec.instance_id},
          {"demo_set_id", rec.demo_set_id},
          {"endpoint", rec.endpoint},
          {"model", rec.model},
          {"decode_mode", rec.decode_mode},
          {"timestamp", rec.timestamp},
          {"request",
           {{"prompt", rec.request.prompt},
            {"num_sequences", rec.request.num_sequences},
            {"max_new_tokens", rec.request.max_new_tokens},
            {"logprob_top_k", rec.request.logprob_top_k},
            {"decode_params", params}}},
          {"sequences", seqs}};
}

inline TraceRecord trace_record_from_json(const nlohmann::json& j) {
  TraceRecord rec;
  rec.schema_version = j.at("schema_version").get<std::string>();
  const auto dot = rec.schema_version.find('.');
  const std::string major = rec.schema_version.substr(0, dot);
  const std::string supported_major{kTraceSchemaVersion.substr(0, kTraceSchemaVersion.find('.'))};
  ICLUQ_REQUIRE(major == supported_major, ErrorCode::SchemaVersionMismatch,
                "trace schema " + rec.schema_version + ", reader supports major " + supported_major);
  rec.fingerprint = j.at("fingerprint").get<std::string>();
  rec.instance_id = j.at("instance_id").get<std::string>();
  rec.demo_set_id = j.at("demo_set_id").get<int>();
  rec.endpoint = j.at("endpoint").get<std::string>();
  rec.model = j.at("model").get<std::string>();
  rec.decode_mode = j.at("decode_mode").get<std::string>();
  rec.timestamp = j.at("timestamp").get<std::string>();
  const auto& req = j.at("request");
  rec.request.prompt = req.at("prompt").get<std::string>();
  rec.request.num_sequences = req.at("num_sequences").get<std::size_t>();
  rec.request.max_new_tokens = req.at("max_new_tokens").get<std::size_t>();
  rec.request.logprob_top_k = req.at("logprob_top_k").get<std::size_t>();
  for (const auto& [key, value] : req.at("decode_params").items())
    rec.request.decode_params[key] = value.get<double>();
  rec.request.instance_id = rec.instance_id;
  rec.request.demo_set_id = rec.demo_set_id;
  for (const auto& s : j.at("sequences")) rec.sequences.push_back(sequence_from_json(s));
  return rec;
}

// ---------------------------------------------------------------------------
// Trace writing and replay
// ---------------------------------------------------------------------------

/// Append-only JSONL trace writer; single writer, whole-line appends, flushed
/// before returning. Safe to call from multiple threads of the one writer.
class TraceWriter {
 public:
  explicit TraceWriter(std::string path) : path_(std::move(path)) {
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ++count_;
    out_.open(path_, std::ios::app);
    ICLUQ_REQUIRE(out_.good(), ErrorCode::StorageFailure, "cannot open " + path_ + " for append");
  }

  /// Appends one record and returns its position in the file.
  std::size_t append(const TraceRecord& rec) {
    const std::string line = trace_record_to_json(rec).dump();
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << line << '\n';
    out_.flush();
    ICLUQ_REQUIRE(out_.good(), ErrorCode::StorageFailure, "write failed on " + path_);
    return count_++;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::mutex mutex_;
  std::size_t count_ = 0;
};

/// One-shot append; returns the record's position.
inline std::size_t record(const std::string& trace_path, const TraceRecord& rec) {
  TraceWriter writer(trace_path);
  return writer.append(rec);
}

/// In-memory view of a trace file keyed by fingerprint. Loading validates the
/// schema version of every record; lookups are lock-free afterwards.
class TraceStore {
 public:
  explicit TraceStore(const std::string& path) : path_(path) {
    std::ifstream in(path);
    ICLUQ_REQUIRE(in.good(), ErrorCode::StorageFailure, "cannot open trace " + path);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedRecord, path + " line " + std::to_string(line_no) + ": " + e.what());
      }
      TraceRecord rec = trace_record_from_json(j);
      std::string key = rec.fingerprint;
      records_.insert_or_assign(std::move(key), std::move(rec));
    }
  }

  const TraceRecord* find(const std::string& fingerprint) const {
    const auto it = records_.find(fingerprint);
    return it == records_.end() ? nullptr : &it->second;
  }

  std::size_t size() const { return records_.size(); }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::unordered_map<std::string, TraceRecord> records_;
};

/// Replays recorded sequences for a fingerprint; throws TraceMiss when the
/// fingerprint is absent.
inline std::vector<GeneratedSequence> replay(const TraceStore& store,
                                             const std::string& fingerprint) {
  const TraceRecord* rec = store.find(fingerprint);
  ICLUQ_REQUIRE(rec != nullptr, ErrorCode::TraceMiss,
                "fingerprint " + fingerprint + " not in " + store.path());
  return rec->sequences;
}

inline std::vector<GeneratedSequence> replay(const std::string& trace_path,
                                             const std::string& fingerprint) {
  return replay(TraceStore(trace_path), fingerprint);
}

// ---------------------------------------------------------------------------
// Generation sources
// ---------------------------------------------------------------------------

/// Anything that turns a request into M scored sequences: a live endpoint, a
/// trace replay, or the simulator. Implementations are safe for concurrent
/// generate() calls.
class GenerationSource {
 public:
  virtual ~GenerationSource() = default;
  virtual std::vector<GeneratedSequence> generate(const GenerationRequest& req) = 0;
  virtual std::string describe() const = 0;
  virtual std::string model() const { return ""; }
};

struct EndpointConfig {
  std::string base_url;  // e.g. http://127.0.0.1:8080/v1
  std::string api_key;
  std::string model;
  bool chat = false;  // use /chat/completions with the prompt as one user message
  int max_attempts = 3;
  int retry_base_ms = 500;
  int connect_timeout_s = 10;
  int read_timeout_s = 600;

  static EndpointConfig from_environment() {
    EndpointConfig cfg;
    if (const char* v = std::getenv("ICLUQ_ENDPOINT")) cfg.base_url = v;
    if (const char* v = std::getenv("ICLUQ_API_KEY")) cfg.api_key = v;
    if (const char* v = std::getenv("ICLUQ_MODEL")) cfg.model = v;
    return cfg;
  }
};

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace detail {

struct SplitUrl {
  std::string origin;  // scheme://host:port
  std::string prefix;  // path prefix, possibly empty
};

inline SplitUrl split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  ICLUQ_REQUIRE(scheme_end != std::string::npos, ErrorCode::InvalidConfig,
                "endpoint URL needs a scheme: " + base_url);
  const auto path_start = base_url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {base_url, ""};
  std::string prefix = base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {base_url.substr(0, path_start), prefix};
}

inline void sort_by_sequence_logprob(std::vector<GeneratedSequence>& seqs) {
  std::stable_sort(seqs.begin(), seqs.end(), [](const auto& a, const auto& b) {
    return a.sequence_logprob > b.sequence_logprob;
  });
}

/// Parses one completions-style choice (text + parallel logprob arrays).
inline GeneratedSequence parse_completion_choice(const nlohmann::json& choice) {
  ICLUQ_REQUIRE(choice.contains("logprobs") && !choice.at("logprobs").is_null(),
                ErrorCode::LogprobsUnsupported, "endpoint returned no logprobs");
  const auto& lp = choice.at("logprobs");
  ICLUQ_REQUIRE(lp.contains("tokens") && lp.contains("token_logprobs"),
                ErrorCode::LogprobsUnsupported, "logprobs block lacks token arrays");
  const auto& tokens = lp.at("tokens");
  const auto& token_logprobs = lp.at("token_logprobs");
  ICLUQ_REQUIRE(tokens.size() == token_logprobs.size(), ErrorCode::TruncatedResponse,
                "token/logprob arrays differ in length");

  GeneratedSequence seq;
  seq.text = choice.value("text", "");
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    ICLUQ_REQUIRE(!token_logprobs[i].is_null(), ErrorCode::LogprobsUnsupported,
                  "null token logprob");
    TokenScore tok;
    tok.token = tokens[i].get<std::string>();
    tok.logprob = token_logprobs[i].get<double>();
    if (lp.contains("top_logprobs") && lp.at("top_logprobs").is_array() &&
        i < lp.at("top_logprobs").size() && lp.at("top_logprobs")[i].is_object()) {
      for (const auto& [text, value] : lp.at("top_logprobs")[i].items())
        tok.top_alternatives.emplace_back(text, value.get<double>());
      std::stable_sort(tok.top_alternatives.begin(), tok.top_alternatives.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
    }
    seq.sequence_logprob += tok.logprob;
    seq.tokens.push_back(std::move(tok));
  }
  return seq;
}

/// Parses one chat-style choice ({message, logprobs.content[]}).
inline GeneratedSequence parse_chat_choice(const nlohmann::json& choice) {
  ICLUQ_REQUIRE(choice.contains("logprobs") && !choice.at("logprobs").is_null() &&
                    choice.at("logprobs").contains("content"),
                ErrorCode::LogprobsUnsupported, "endpoint returned no logprobs");
  GeneratedSequence seq;
  seq.text = choice.at("message").value("content", "");
  for (const auto& entry : choice.at("logprobs").at("content")) {
    TokenScore tok;
    tok.token = entry.at("token").get<std::string>();
    tok.logprob = entry.at("logprob").get<double>();
    if (entry.contains("top_logprobs"))
      for (const auto& alt : entry.at("top_logprobs"))
        tok.top_alternatives.emplace_back(alt.at("token").get<std::string>(),
                                          alt.at("logprob").get<double>());
    std::stable_sort(tok.top_alternatives.begin(), tok.top_alternatives.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    seq.sequence_logprob += tok.logprob;
    seq.tokens.push_back(std::move(tok));
  }
  return seq;
}

}  // namespace detail

/// Talks to an OpenAI-compatible endpoint. Transient failures (connect
/// errors, 5xx) retry with exponential backoff up to max_attempts before
/// surfacing EndpointUnreachable.
class LiveSource : public GenerationSource {
 public:
  explicit LiveSource(EndpointConfig config) : config_(std::move(config)) {
    ICLUQ_REQUIRE(!config_.base_url.empty(), ErrorCode::InvalidConfig,
                  "no endpoint configured (set ICLUQ_ENDPOINT or --endpoint)");
  }

  std::vector<GeneratedSequence> generate(const GenerationRequest& req) override {
    const auto url = detail::split_url(config_.base_url);
    const std::string path = url.prefix + (config_.chat ? "/chat/completions" : "/completions");

    nlohmann::json body;
    body["model"] = config_.model;
    body["n"] = req.num_sequences;
    body["max_tokens"] = req.max_new_tokens;
    if (config_.chat) {
      body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", req.prompt}}});
      body["logprobs"] = true;
      body["top_logprobs"] = req.logprob_top_k;
    } else {
      body["prompt"] = req.prompt;
      body["logprobs"] = req.logprob_top_k;
      body["echo"] = false;
    }
    for (const auto& [key, value] : req.decode_params) body[key] = value;

    const std::string payload = body.dump();
    std::string response_body;
    int status = 0;
    std::string transport_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.retry_base_ms * (1 << (attempt - 1))));
      httplib::Client client(url.origin);
      client.set_connection_timeout(config_.connect_timeout_s, 0);
      client.set_read_timeout(config_.read_timeout_s, 0);
      httplib::Headers headers;
      if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
      auto res = client.Post(path, headers, payload, "application/json");
      if (!res) {
        transport_error = httplib::to_string(res.error());
        continue;
      }
      status = res->status;
      response_body = res->body;
      if (status >= 500) continue;  // transient server error, retry
      break;
    }
    if (status == 0)
      raise(ErrorCode::EndpointUnreachable,
            config_.base_url + " after " + std::to_string(config_.max_attempts) +
                " attempts: " + transport_error);
    if (status >= 500)
      raise(ErrorCode::EndpointUnreachable,
            config_.base_url + " kept returning HTTP " + std::to_string(status));
    if (status != 200)
      raise(ErrorCode::InvalidConfig,
            "endpoint returned HTTP " + std::to_string(status) + ": " + response_body);

    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(response_body);
    } catch (const nlohmann::json::exception& e) {
      raise(ErrorCode::TruncatedResponse, std::string("response is not JSON: ") + e.what());
    }
    ICLUQ_REQUIRE(doc.contains("choices") && doc.at("choices").is_array() &&
                      !doc.at("choices").empty(),
                  ErrorCode::TruncatedResponse, "response has no choices");

    std::vector<GeneratedSequence> seqs;
    for (const auto& choice : doc.at("choices"))
      seqs.push_back(config_.chat ? detail::parse_chat_choice(choice)
                                  : detail::parse_completion_choice(choice));
    detail::sort_by_sequence_logprob(seqs);
    return seqs;
  }

  std::string describe() const override { return config_.base_url; }
  std::string model() const override { return config_.model; }

  const EndpointConfig& config() const { return config_; }

 private:
  EndpointConfig config_;
};

enum class ReplayMode { strict, record_on_miss };

/// Serves recorded sequences by fingerprint. In strict mode a miss throws
/// TraceMiss and no network is ever touched; in record-on-miss mode the
/// inner live source fills the gap and the result is appended to the trace.
class ReplaySource : public GenerationSource {
 public:
  ReplaySource(const std::string& trace_path, ReplayMode mode,
               std::shared_ptr<GenerationSource> fallback = nullptr)
      : store_(trace_path), mode_(mode), fallback_(std::move(fallback)) {
    if (mode_ == ReplayMode::record_on_miss) {
      ICLUQ_REQUIRE(fallback_ != nullptr, ErrorCode::InvalidConfig,
                    "record-on-miss needs a live source");
      writer_ = std::make_unique<TraceWriter>(trace_path);
    }
  }

  std::vector<GeneratedSequence> generate(const GenerationRequest& req) override {
    const std::string fp = fingerprint(req);
    if (const TraceRecord* rec = store_.find(fp)) return rec->sequences;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      const auto it = appended_.find(fp);
      if (it != appended_.end()) return it->second;
    }
    ICLUQ_REQUIRE(mode_ == ReplayMode::record_on_miss, ErrorCode::TraceMiss,
                  "fingerprint " + fp + " not in " + store_.path());

    auto seqs = fallback_->generate(req);
    TraceRecord rec;
    rec.fingerprint = fp;
    rec.instance_id = req.instance_id;
    rec.demo_set_id = req.demo_set_id;
    rec.endpoint = fallback_->describe();
    rec.model = fallback_->model();
    rec.decode_mode = req.decode_params.count("num_beams") ? "beam_search" : "n_sample";
    rec.timestamp = utc_timestamp();
    rec.request = req;
    rec.sequences = seqs;
    writer_->append(rec);
    std::lock_guard<std::mutex> lock(mutex_);
    appended_.emplace(fp, seqs);
    return seqs;
  }

  std::string describe() const override { return "replay:" + store_.path(); }
  const TraceStore& store() const { return store_; }

 private:
  TraceStore store_;
  ReplayMode mode_;
  std::shared_ptr<GenerationSource> fallback_;
  std::unique_ptr<TraceWriter> writer_;
  std::mutex mutex_;
  std::map<std::string, std::vector<GeneratedSequence>> appended_;
};

}  // namespace icluq::gateway
