// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icluq/baselines.hpp"
#include "icluq/rng.hpp"

using namespace icluq;

namespace {

LabelSpace three_space() { return {{{0, "alpha"}, {1, "beta"}, {2, "gamma"}}}; }

GeneratedSequence labeled_seq(int label, double seq_prob,
                              std::vector<std::pair<std::string, double>> alts = {}) {
  GeneratedSequence seq;
  TokenScore tok;
  tok.token = std::to_string(label);
  tok.logprob = std::log(seq_prob);
  tok.top_alternatives = std::move(alts);
  seq.text = tok.token;
  seq.sequence_logprob = tok.logprob;
  seq.tokens.push_back(std::move(tok));
  return seq;
}

GeneratedSequence seq_with_logprobs(const std::vector<double>& logprobs) {
  GeneratedSequence seq;
  double sum = 0.0;
  for (double lp : logprobs) {
    seq.tokens.push_back({"x", lp, {{"x", lp}}});
    seq.text += "x";
    sum += lp;
  }
  seq.sequence_logprob = sum;
  return seq;
}

}  // namespace

TEST_CASE("likelihood_uncertainty is the negated mean token logprob") {
  const auto one = baselines::likelihood_uncertainty({seq_with_logprobs({-0.1, -0.3})});
  CHECK(one.value == Catch::Approx(0.2).epsilon(0).margin(1e-12));
  CHECK(one.n_sequences_used == 1);

  CHECK(baselines::likelihood_uncertainty({seq_with_logprobs({0.0, 0.0, 0.0})}).value == 0.0);

  const auto two = baselines::likelihood_uncertainty(
      {seq_with_logprobs({-0.2, -0.2}), seq_with_logprobs({-0.4})});
  CHECK(two.value == Catch::Approx(0.3).epsilon(0).margin(1e-12));
}

TEST_CASE("likelihood_uncertainty rejects empty sequences") {
  GeneratedSequence empty;
  CHECK_THROWS_MATCHES(baselines::likelihood_uncertainty({empty}), Error,
                       Catch::Matchers::Predicate<Error>(
                           [](const Error& e) { return e.code() == ErrorCode::EmptySequence; }));
}

TEST_CASE("token_entropy_uncertainty averages per-token alternative entropy") {
  SECTION("point-mass alternatives give zero") {
    GeneratedSequence seq;
    seq.tokens.push_back({"a", -0.1, {{"a", -0.1}}});
    seq.sequence_logprob = -0.1;
    CHECK(baselines::token_entropy_uncertainty({seq}).value == 0.0);
  }
  SECTION("two alternatives renormalizing to (0.7, 0.3)") {
    GeneratedSequence seq;
    seq.tokens.push_back({"a", std::log(0.7), {{"a", std::log(0.7)}, {"b", std::log(0.3)}}});
    seq.sequence_logprob = std::log(0.7);
    CHECK(baselines::token_entropy_uncertainty({seq}).value ==
          Catch::Approx(0.6108643020548935).epsilon(0).margin(1e-12));
  }
  SECTION("mean rule across tokens") {
    // Entropies H1 and H2 computed through the same uq::entropy oracle the
    // implementation must reproduce via its renormalization path.
    GeneratedSequence seq;
    seq.tokens.push_back({"a", std::log(0.9), {{"a", std::log(0.9)}, {"b", std::log(0.1)}}});
    seq.tokens.push_back({"c", std::log(0.5), {{"c", std::log(0.5)}, {"d", std::log(0.5)}}});
    seq.sequence_logprob = std::log(0.9) + std::log(0.5);
    const double h1 = uq::entropy(std::vector<double>{0.9, 0.1});
    const double h2 = uq::entropy(std::vector<double>{0.5, 0.5});
    CHECK(baselines::token_entropy_uncertainty({seq}).value ==
          Catch::Approx((h1 + h2) / 2.0).epsilon(0).margin(1e-12));
  }
  SECTION("truncated top-k mass renormalizes before the entropy") {
    GeneratedSequence seq;
    // Alternatives cover only 0.5 of the mass; renormalized they are (0.6, 0.4).
    seq.tokens.push_back({"a", std::log(0.3), {{"a", std::log(0.3)}, {"b", std::log(0.2)}}});
    seq.sequence_logprob = std::log(0.3);
    CHECK(baselines::token_entropy_uncertainty({seq}).value ==
          Catch::Approx(uq::entropy(std::vector<double>{0.6, 0.4})).epsilon(0).margin(1e-12));
  }
}

TEST_CASE("token_entropy_uncertainty demands alternatives") {
  GeneratedSequence seq;
  seq.tokens.push_back({"a", -0.5, {}});
  seq.sequence_logprob = -0.5;
  CHECK_THROWS_MATCHES(baselines::token_entropy_uncertainty({seq}), Error,
                       Catch::Matchers::Predicate<Error>([](const Error& e) {
                         return e.code() == ErrorCode::MissingAlternatives;
                       }));
}

TEST_CASE("semantic_uncertainty clusters by extracted label") {
  const auto space = three_space();
  SECTION("one cluster means zero uncertainty") {
    const auto s = baselines::semantic_uncertainty(
        {labeled_seq(0, 0.5), labeled_seq(0, 0.4), labeled_seq(0, 0.1)}, space);
    CHECK(s.value == 0.0);
  }
  SECTION("cluster masses renormalize from sequence probabilities") {
    const auto s = baselines::semantic_uncertainty(
        {labeled_seq(0, 0.5), labeled_seq(0, 0.3), labeled_seq(1, 0.2)}, space);
    CHECK(s.value == Catch::Approx(0.500402).margin(1e-6));  // H(0.8, 0.2)
  }
  SECTION("uniform clusters reach ln(number of clusters)") {
    const auto s = baselines::semantic_uncertainty(
        {labeled_seq(0, 0.25), labeled_seq(1, 0.25), labeled_seq(2, 0.25)}, space);
    CHECK(s.value == Catch::Approx(std::log(3.0)).epsilon(0).margin(1e-12));
  }
  SECTION("unparseable outputs share one extra cluster") {
    GeneratedSequence junk;
    junk.text = "beats me";
    junk.tokens.push_back({"beats me", std::log(0.5), {}});
    junk.sequence_logprob = std::log(0.5);
    GeneratedSequence junk2 = junk;
    const auto s = baselines::semantic_uncertainty(
        {labeled_seq(0, 0.25), junk, junk2, labeled_seq(0, 0.25)}, space);
    // clusters: label 0 with 0.5, "other" with 1.0 -> (1/3, 2/3)
    CHECK(s.value ==
          Catch::Approx(uq::entropy(std::vector<double>{1.0 / 3.0, 2.0 / 3.0})).margin(1e-12));
  }
}

TEST_CASE("baseline scores are permutation-invariant and bounded") {
  const auto space = three_space();
  rng::Stream stream(rng::derive_key({20260809, 21}));
  std::vector<GeneratedSequence> seqs;
  for (int i = 0; i < 10; ++i) {
    const double p = 0.05 + 0.9 * stream.next_double();
    seqs.push_back(labeled_seq(static_cast<int>(stream.next_below(3)), p,
                               {{std::to_string(i % 3), std::log(p)}}));
  }
  const double lik = baselines::likelihood_uncertainty(seqs).value;
  const double ent = baselines::token_entropy_uncertainty(seqs).value;
  const double sem = baselines::semantic_uncertainty(seqs, space).value;
  CHECK(lik >= 0.0);
  CHECK(ent >= 0.0);
  CHECK(sem <= std::log(3.0 + 1.0) + 1e-12);  // distinct labels + "other"

  for (int shuffle = 0; shuffle < 5; ++shuffle) {
    for (std::size_t j = seqs.size(); j > 1; --j)
      std::swap(seqs[j - 1], seqs[stream.next_below(j)]);
    CHECK(baselines::likelihood_uncertainty(seqs).value == Catch::Approx(lik).margin(1e-12));
    CHECK(baselines::token_entropy_uncertainty(seqs).value == Catch::Approx(ent).margin(1e-12));
    CHECK(baselines::semantic_uncertainty(seqs, space).value == Catch::Approx(sem).margin(1e-12));
  }
}
