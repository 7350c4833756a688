// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file prompting.hpp
 * @brief Dataset ingestion, demonstration-set sampling, and prompt rendering.
 *
 * Prompts follow a four-part template (system prompt, task description with
 * the label legend, numbered demonstration blocks, test query) that is shared
 * across tasks; only the legend, demonstration count, and demonstration
 * content vary. The test query ends with "Category: " so the model's next
 * tokens are the answer.
 */

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "icluq/error.hpp"
#include "icluq/rng.hpp"
#include "icluq/types.hpp"

namespace icluq::prompting {

enum class Split { train, test };
enum class Strategy { random, class_balanced };

inline std::string_view to_string(Strategy s) {
  return s == Strategy::random ? "random" : "class";
}

inline Strategy strategy_from_string(std::string_view s) {
  if (s == "random") return Strategy::random;
  if (s == "class") return Strategy::class_balanced;
  raise(ErrorCode::InvalidArgument, "unknown strategy: " + std::string(s));
}

struct Instance {
  std::string text;
  int label_id = 0;
  std::string id;
};

struct Dataset {
  std::string name;
  std::vector<Instance> instances;
  LabelSpace label_space;
  Split split = Split::train;

  std::size_t size() const { return instances.size(); }
};

/// One sampled demonstration; the name travels with the demo so that
/// out-of-domain demonstrations keep their source task's wording.
struct Demo {
  std::string text;
  int label_id = 0;
  std::string label_name;
};

struct DemoSet {
  std::vector<Demo> demos;
  std::vector<std::size_t> source_ids;  // indices into the source split
  Strategy strategy = Strategy::random;
};

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  ICLUQ_REQUIRE(in.good(), ErrorCode::StorageFailure, "cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline std::string file_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

/// Splits CSV content into records of fields, honoring quoted fields with
/// embedded commas, quotes, and newlines.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      record.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      if (!field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
      }
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

}  // namespace detail

/// Loads an ordered label space from a JSON array of {id, name} objects.
inline LabelSpace load_label_space(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::MalformedRecord, path + ": " + e.what());
  }
  ICLUQ_REQUIRE(doc.is_array(), ErrorCode::MalformedRecord, path + ": expected a JSON array");
  LabelSpace space;
  for (const auto& item : doc)
    space.labels.push_back({item.at("id").get<int>(), item.at("name").get<std::string>()});
  space.validate();
  return space;
}

enum class FileFormat { jsonl, csv };

/// Loads a dataset and validates every label against the declared space.
/// JSONL records carry `text` and integer `label` (optional `id`); CSV wants
/// a header naming `text` and `label` columns.
inline Dataset load_dataset(const std::string& path, FileFormat format, LabelSpace space,
                            Split split = Split::train, std::string name = "") {
  space.validate();
  Dataset ds;
  ds.name = name.empty() ? detail::file_stem(path) : std::move(name);
  ds.label_space = std::move(space);
  ds.split = split;

  const std::string content = detail::read_file(path);
  if (format == FileFormat::jsonl) {
    std::istringstream lines(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      if (line.empty() || line.find_first_not_of(" \t\r") == std::string::npos) continue;
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        raise(ErrorCode::MalformedRecord, path + " line " + std::to_string(line_no) + ": " + e.what());
      }
      ICLUQ_REQUIRE(rec.contains("text") && rec.contains("label") && rec["label"].is_number_integer(),
                    ErrorCode::MalformedRecord,
                    path + " line " + std::to_string(line_no) + ": needs `text` and integer `label`");
      Instance inst;
      inst.text = rec["text"].get<std::string>();
      inst.label_id = rec["label"].get<int>();
      inst.id = rec.contains("id") ? rec["id"].get<std::string>()
                                   : ds.name + "#" + std::to_string(ds.instances.size());
      ICLUQ_REQUIRE(ds.label_space.contains(inst.label_id), ErrorCode::UnknownLabel,
                    path + " line " + std::to_string(line_no) + ": label " +
                        std::to_string(inst.label_id));
      ds.instances.push_back(std::move(inst));
    }
  } else {
    const auto records = detail::parse_csv(content);
    ICLUQ_REQUIRE(!records.empty(), ErrorCode::MalformedRecord, path + ": empty CSV");
    const auto& header = records.front();
    std::size_t text_col = header.size(), label_col = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == "text") text_col = i;
      if (header[i] == "label") label_col = i;
    }
    ICLUQ_REQUIRE(text_col < header.size() && label_col < header.size(), ErrorCode::MalformedRecord,
                  path + ": header must name `text` and `label` columns");
    for (std::size_t r = 1; r < records.size(); ++r) {
      const auto& rec = records[r];
      ICLUQ_REQUIRE(rec.size() == header.size(), ErrorCode::MalformedRecord,
                    path + " record " + std::to_string(r + 1) + ": wrong field count");
      Instance inst;
      inst.text = rec[text_col];
      try {
        inst.label_id = std::stoi(rec[label_col]);
      } catch (const std::exception&) {
        raise(ErrorCode::MalformedRecord,
              path + " record " + std::to_string(r + 1) + ": label is not an integer");
      }
      inst.id = ds.name + "#" + std::to_string(ds.instances.size());
      ICLUQ_REQUIRE(ds.label_space.contains(inst.label_id), ErrorCode::UnknownLabel,
                    path + " record " + std::to_string(r + 1) + ": label " +
                        std::to_string(inst.label_id));
      ds.instances.push_back(std::move(inst));
    }
  }
  ICLUQ_REQUIRE(!ds.instances.empty(), ErrorCode::MalformedRecord, path + ": no instances");
  return ds;
}

/// The subset of a dataset whose labels fall in `space` (used when
/// demonstrations must avoid masked classes).
inline Dataset restrict_to_labels(const Dataset& ds, const LabelSpace& space) {
  Dataset out;
  out.name = ds.name;
  out.label_space = space;
  out.split = ds.split;
  for (const auto& inst : ds.instances)
    if (space.contains(inst.label_id)) out.instances.push_back(inst);
  return out;
}

// ---------------------------------------------------------------------------
// Demonstration sampling
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr std::uint64_t kRandomTag = 0x52414e44;  // "RAND"
inline constexpr std::uint64_t kClassTag = 0x434c4153;   // "CLAS"
inline constexpr std::uint64_t kBatchTag = 0x42415443;   // "BATC"

/// First n entries of a seeded partial Fisher-Yates shuffle of `indices`.
inline void partial_shuffle(std::vector<std::size_t>& indices, std::size_t n, rng::Stream& stream) {
  for (std::size_t i = 0; i < n && i + 1 < indices.size(); ++i) {
    const std::size_t j = i + stream.next_below(indices.size() - i);
    std::swap(indices[i], indices[j]);
  }
}

inline Demo demo_from(const Dataset& ds, std::size_t index) {
  const auto& inst = ds.instances[index];
  std::string name = ds.label_space.contains(inst.label_id)
                         ? std::string(ds.label_space.name_of(inst.label_id))
                         : "";
  return {inst.text, inst.label_id, std::move(name)};
}

}  // namespace detail

/// n distinct training instances, uniform without replacement, reproducible
/// from the seed regardless of platform.
inline DemoSet sample_random(const Dataset& train, std::size_t n, std::uint64_t seed) {
  ICLUQ_REQUIRE(n >= 1, ErrorCode::InvalidArgument, "need n >= 1");
  ICLUQ_REQUIRE(n <= train.size(), ErrorCode::NotEnoughInstances,
                "requested " + std::to_string(n) + " demos from " +
                    std::to_string(train.size()) + " instances");
  std::vector<std::size_t> indices(train.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  rng::Stream stream(rng::derive_key({seed, detail::kRandomTag}));
  detail::partial_shuffle(indices, n, stream);

  DemoSet set;
  set.strategy = Strategy::random;
  for (std::size_t i = 0; i < n; ++i) {
    set.source_ids.push_back(indices[i]);
    set.demos.push_back(detail::demo_from(train, indices[i]));
  }
  return set;
}

/// Exactly per_class demos from every class of the training split, shuffled
/// into an interleaved order by the seed.
inline DemoSet sample_class(const Dataset& train, std::size_t per_class, std::uint64_t seed) {
  ICLUQ_REQUIRE(per_class >= 1, ErrorCode::InvalidArgument, "need per_class >= 1");
  DemoSet set;
  set.strategy = Strategy::class_balanced;
  for (const auto& entry : train.label_space.labels) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < train.size(); ++i)
      if (train.instances[i].label_id == entry.id) members.push_back(i);
    ICLUQ_REQUIRE(members.size() >= per_class, ErrorCode::ClassUnderrepresented,
                  "class " + std::to_string(entry.id) + " (" + entry.name + ") has " +
                      std::to_string(members.size()) + " instances, need " +
                      std::to_string(per_class));
    rng::Stream stream(rng::derive_key({seed, detail::kClassTag,
                                        static_cast<std::uint64_t>(entry.id)}));
    detail::partial_shuffle(members, per_class, stream);
    for (std::size_t i = 0; i < per_class; ++i) set.source_ids.push_back(members[i]);
  }
  rng::Stream order(rng::derive_key({seed, detail::kClassTag, 0xffffULL}));
  detail::partial_shuffle(set.source_ids, set.source_ids.size(), order);
  for (std::size_t idx : set.source_ids) set.demos.push_back(detail::demo_from(train, idx));
  return set;
}

/// Demo-count knob: the whole-set size for Random, the per-class count for
/// Class.
struct SizeParams {
  std::size_t n_random = 4;
  std::size_t per_class = 1;
};

/// L independent demonstration sets from split sub-seeds; batch k does not
/// depend on how many batches are requested.
inline std::vector<DemoSet> sample_demo_batches(const Dataset& train, Strategy strategy,
                                                SizeParams sizes, std::size_t l_sets,
                                                std::uint64_t seed) {
  ICLUQ_REQUIRE(l_sets >= 1, ErrorCode::InvalidArgument, "need l_sets >= 1");
  std::vector<DemoSet> batches;
  batches.reserve(l_sets);
  for (std::size_t k = 0; k < l_sets; ++k) {
    const std::uint64_t sub_seed = rng::derive_key({seed, detail::kBatchTag, k});
    batches.push_back(strategy == Strategy::random
                          ? sample_random(train, sizes.n_random, sub_seed)
                          : sample_class(train, sizes.per_class, sub_seed));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Templates and rendering
// ---------------------------------------------------------------------------

/// Four-part prompt template. The demonstrations section consists of a
/// header line (emitted only when demos exist) and a per-demo block pattern.
/// Patterns use $(name) placeholders: $(labels) in the task description,
/// $(index) / $(text) / $(label_id) / $(label_name) in the demo block, and
/// $(text) in the test query.
struct PromptTemplate {
  std::string system_prompt;
  std::string task_description;
  std::string demo_header;
  std::string demo_block;
  std::string test_block;
};

namespace detail {

inline std::string substitute(std::string text, std::string_view key, std::string_view value) {
  const std::string pattern = "$(" + std::string(key) + ")";
  std::size_t pos = 0;
  while ((pos = text.find(pattern, pos)) != std::string::npos) {
    text.replace(pos, pattern.size(), value);
    pos += value.size();
  }
  return text;
}

inline std::string strip_trailing_newlines(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace detail

/// Parses a template file with [system_prompt], [task_description],
/// [demonstrations], and [test_query] sections. The demonstrations section's
/// first line is the header, the remainder the per-demo pattern.
inline PromptTemplate load_template(const std::string& path) {
  const std::string content = detail::read_file(path);
  std::map<std::string, std::string> sections;
  std::string current;
  std::istringstream lines(content);
  std::string line;
  while (std::getline(lines, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.size() >= 2 && line.front() == '[' && line.back() == ']') {
      current = line.substr(1, line.size() - 2);
      continue;
    }
    if (current.empty()) continue;
    auto& section = sections[current];
    if (!section.empty()) section += '\n';
    section += line;
  }
  for (const char* required : {"system_prompt", "task_description", "demonstrations", "test_query"})
    ICLUQ_REQUIRE(sections.count(required), ErrorCode::InvalidConfig,
                  path + ": missing [" + std::string(required) + "] section");

  PromptTemplate tmpl;
  tmpl.system_prompt = detail::strip_trailing_newlines(sections["system_prompt"]);
  tmpl.task_description = detail::strip_trailing_newlines(sections["task_description"]);
  const std::string demos = detail::strip_trailing_newlines(sections["demonstrations"]);
  const auto first_newline = demos.find('\n');
  ICLUQ_REQUIRE(first_newline != std::string::npos, ErrorCode::InvalidConfig,
                path + ": [demonstrations] needs a header line and a block pattern");
  tmpl.demo_header = demos.substr(0, first_newline);
  tmpl.demo_block = demos.substr(first_newline + 1);
  tmpl.test_block = sections["test_query"];  // keep trailing spacing intact
  while (!tmpl.test_block.empty() && tmpl.test_block.back() == '\n') tmpl.test_block.pop_back();
  return tmpl;
}

/// English word for small counts ("six categories"), digits beyond ten.
inline std::string count_word(std::size_t n) {
  static const char* words[] = {"zero", "one", "two",   "three", "four", "five",
                                "six",  "seven", "eight", "nine",  "ten"};
  return n <= 10 ? words[n] : std::to_string(n);
}

/// "[0: Sadness; 1: Joy; ...]" legend for the advertised labels.
inline std::string label_legend(const LabelSpace& space) {
  std::string legend = "[";
  for (std::size_t i = 0; i < space.labels.size(); ++i) {
    if (i > 0) legend += "; ";
    legend += std::to_string(space.labels[i].id) + ": " + space.labels[i].name;
  }
  legend += "]";
  return legend;
}

/// Renders the full prompt: system prompt, task description with the legend
/// of `space`, numbered demonstration blocks, and the test query ending at
/// "Category: " so the next generated tokens answer it.
inline std::string render_prompt(const PromptTemplate& tmpl, const DemoSet& demos,
                                 const std::string& test_text, const LabelSpace& space) {
  std::string prompt = tmpl.system_prompt;
  prompt += '\n';
  std::string task = detail::substitute(tmpl.task_description, "labels", label_legend(space));
  task = detail::substitute(task, "label_count", count_word(space.k()));
  prompt += task;
  prompt += '\n';
  if (!demos.demos.empty()) {
    prompt += tmpl.demo_header;
    prompt += '\n';
    for (std::size_t i = 0; i < demos.demos.size(); ++i) {
      const Demo& d = demos.demos[i];
      std::string block = detail::substitute(tmpl.demo_block, "index", std::to_string(i + 1));
      block = detail::substitute(block, "text", d.text);
      block = detail::substitute(block, "label_id", std::to_string(d.label_id));
      std::string name = d.label_name;
      if (name.empty() && space.contains(d.label_id)) name = space.name_of(d.label_id);
      block = detail::substitute(block, "label_name", name);
      prompt += block;
      prompt += '\n';
    }
  }
  prompt += detail::substitute(tmpl.test_block, "text", test_text);
  return prompt;
}

// ---------------------------------------------------------------------------
// Bundled demo-count defaults
// ---------------------------------------------------------------------------

struct DemoCounts {
  std::size_t random = 0;
  std::size_t class_per_class = 0;
};

/// Per-task default demonstration counts, keyed by task name.
inline std::map<std::string, DemoCounts> load_demo_counts(const std::string& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(detail::read_file(path));
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::InvalidConfig, path + ": " + e.what());
  }
  std::map<std::string, DemoCounts> counts;
  for (const auto& [task, entry] : doc.items())
    counts[task] = {entry.at("random").get<std::size_t>(),
                    entry.at("class_per_class").get<std::size_t>()};
  return counts;
}

}  // namespace icluq::prompting
