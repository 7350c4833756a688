// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file answer.hpp
 * @brief Answer-token selection and aggregation into probability matrices.
 *
 * Decoded sequences answer a classification prompt with a numeric label, so
 * extraction looks for a digit token first and falls back to matching a label
 * name in the text. The answering token's own probability (not the joint
 * sequence probability) carries the label's mass.
 */

#include <cctype>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "icluq/error.hpp"
#include "icluq/types.hpp"

namespace icluq::answer {

namespace detail {

inline bool all_digits(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
  return true;
}

/// Strips surrounding whitespace and punctuation, keeping the token core.
inline std::string_view trim_token(std::string_view s) {
  constexpr std::string_view kJunk = " \t\r\n.,:;!?()[]{}'\"";
  const auto begin = s.find_first_not_of(kJunk);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(kJunk);
  return s.substr(begin, end - begin + 1);
}

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

/// Maps a character offset in the decoded text to its covering token, when
/// the tokens concatenate exactly to the text; token 0 otherwise.
inline std::size_t token_at_offset(const GeneratedSequence& seq, std::size_t offset) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    pos += seq.tokens[i].token.size();
    if (offset < pos) return i;
  }
  return 0;
}

}  // namespace detail

/// Finds the answering token of a decoded sequence, or nullopt when neither
/// a label-id digit string nor a label name occurs.
///
/// Digit pass: the first token whose trimmed text is all digits starts a run;
/// immediately following all-digit tokens extend it (longest run wins). A run
/// parsing to a valid label id resolves to that label with the run's first
/// token probability. Name pass: the earliest case-insensitive occurrence of
/// any label name in the full text, scored with the covering token.
inline std::optional<ExtractedAnswer> try_extract_label(const GeneratedSequence& seq,
                                                        const LabelSpace& space) {
  ICLUQ_REQUIRE(!seq.tokens.empty(), ErrorCode::EmptySequence, "sequence has no tokens");

  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    const std::string_view core = detail::trim_token(seq.tokens[i].token);
    if (!detail::all_digits(core)) continue;
    std::string run(core);
    std::size_t j = i + 1;
    while (j < seq.tokens.size() && detail::all_digits(seq.tokens[j].token)) {
      run += seq.tokens[j].token;
      ++j;
    }
    if (run.size() <= 9) {
      const int id = std::stoi(run);
      if (space.contains(id))
        return ExtractedAnswer{id, std::exp(seq.tokens[i].logprob), i};
    }
    i = j - 1;
  }

  const std::string lower_text = detail::to_lower(seq.text);
  std::size_t best_pos = std::string::npos;
  int best_id = -1;
  for (const auto& entry : space.labels) {
    if (entry.name.empty()) continue;
    const auto pos = lower_text.find(detail::to_lower(entry.name));
    if (pos != std::string::npos && pos < best_pos) {
      best_pos = pos;
      best_id = entry.id;
    }
  }
  if (best_id >= 0) {
    const std::size_t tok = detail::token_at_offset(seq, best_pos);
    return ExtractedAnswer{best_id, std::exp(seq.tokens[tok].logprob), tok};
  }
  return std::nullopt;
}

/// Throwing variant of try_extract_label for callers without a fallback
/// policy of their own.
inline ExtractedAnswer extract_label(const GeneratedSequence& seq, const LabelSpace& space) {
  auto ans = try_extract_label(seq, space);
  ICLUQ_REQUIRE(ans.has_value(), ErrorCode::Unparseable,
                "no label token or name in: " + seq.text);
  return *ans;
}

/// Outcome of aggregating M sequences: the mass vector (indexed by position
/// in the label space), how many sequences failed to parse, and whether the
/// uniform fallback fired because every sequence failed.
struct AggregationResult {
  AnswerDistribution dist;
  std::size_t n_unparseable = 0;
  bool uniform_fallback = false;
};

/// Sums each sequence's extracted answer probability into its label's slot.
/// Unparseable sequences are skipped and counted; when all fail, the result
/// degrades to uniform mass 1/K with the fallback flag set.
inline AggregationResult aggregate(const std::vector<GeneratedSequence>& seqs,
                                   const LabelSpace& space) {
  ICLUQ_REQUIRE(!seqs.empty(), ErrorCode::InvalidArgument, "need at least one sequence");
  AggregationResult result;
  result.dist.mass.assign(space.k(), 0.0);
  for (const auto& seq : seqs) {
    const auto ans = try_extract_label(seq, space);
    if (!ans) {
      ++result.n_unparseable;
      continue;
    }
    result.dist.mass[space.index_of(ans->label_id)] += ans->probability;
  }
  if (result.n_unparseable == seqs.size()) {
    result.uniform_fallback = true;
    result.dist.mass.assign(space.k(), 1.0 / static_cast<double>(space.k()));
  }
  return result;
}

/// Assembles L answer distributions into a K x L matrix, preserving
/// demonstration-set order. Throws ShapeMismatch when K differs.
inline ProbabilityMatrix build_matrix(std::vector<AnswerDistribution> dists) {
  ICLUQ_REQUIRE(!dists.empty(), ErrorCode::InvalidArgument, "need at least one distribution");
  for (const auto& d : dists)
    ICLUQ_REQUIRE(d.k_labels() == dists.front().k_labels(), ErrorCode::ShapeMismatch,
                  "distributions must share the same label count");
  return ProbabilityMatrix{std::move(dists)};
}

}  // namespace icluq::answer
