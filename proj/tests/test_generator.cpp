// Copyright 2026 The DAS Search Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "das/generator.hpp"

using namespace das;

namespace {

// ids: a=3, b=4 on top of the reserved three
constexpr TokenId A = 3, B = 4;
constexpr std::size_t kToyV = 5;

NGramCopyModel toy(int order, double kappa, double lambda, const std::vector<TokenSeq>& refs) {
  NGramCopyModel m(order, kappa, lambda, kToyV, 0);
  for (const auto& r : refs) m.add_sequence(r);
  return m;
}

std::vector<double> probs(const GeneratorModel& g, const TokenSeq& source, const TokenSeq& prefix) {
  auto lp = g.next_logprobs(source, prefix);
  for (double& v : lp) v = std::exp(v);
  return lp;
}

}  // namespace

TEST(Generator, BigramCountsFromSingleReference) {
  const auto m = toy(2, 1.0, 0.0, {{A, B}});
  EXPECT_EQ(m.count({kSos}, A), 1);
  EXPECT_EQ(m.count({A}, B), 1);
  EXPECT_EQ(m.count({B}, kEos), 1);
  EXPECT_EQ(m.count({A}, A), 0);
}

TEST(Generator, UnseenContextIsUniformOverPredictable) {
  const auto m = toy(2, 1.0, 0.0, {{A, B}});
  const auto p = probs(m, {A}, {kSos, kUnk});
  EXPECT_DOUBLE_EQ(p[kSos], 0.0);
  for (std::size_t w = 1; w < kToyV; ++w) EXPECT_NEAR(p[w], 0.25, 1e-12);
}

TEST(Generator, PureCopy) {
  const auto m = toy(2, 1.0, 1.0, {{A, B}});
  const auto p = probs(m, {A, A, B}, {kSos});
  EXPECT_NEAR(p[A], 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(p[B], 1.0 / 3.0, 1e-12);
  EXPECT_EQ(p[kEos], 0.0);
  EXPECT_EQ(m.next_logprobs(TokenSeq{A, A, B}, TokenSeq{kSos})[kEos], kNegInf);
}

TEST(Generator, HalfMixtureMatchesHandArithmetic) {
  // context (a): successors {b:1}, kappa 0.5, |V'| = 4 -> denominator 3
  // ngram: b 1.5/3, every other predictable id 0.5/3; copy of [a,a,b]: a 2/3, b 1/3
  const auto m = toy(2, 0.5, 0.5, {{A, B}});
  const auto p = probs(m, {A, A, B}, {kSos, A});
  EXPECT_NEAR(p[A], 5.0 / 12.0, 1e-12);
  EXPECT_NEAR(p[B], 5.0 / 12.0, 1e-12);
  EXPECT_NEAR(p[kEos], 1.0 / 12.0, 1e-12);
  EXPECT_NEAR(p[kUnk], 1.0 / 12.0, 1e-12);
  EXPECT_EQ(p[kSos], 0.0);
}

TEST(Generator, ZeroCopyWeightIsTheNgramDistribution) {
  const auto m = toy(3, 0.3, 0.0, {{A, B}, {A, A}});
  const auto ng = m.ngram_distribution(TokenSeq{kSos, A});
  const auto p = probs(m, {B, B}, {kSos, A});
  for (std::size_t w = 0; w < kToyV; ++w) EXPECT_NEAR(p[w], ng[w], 1e-15);
}

TEST(Generator, StupidBackoffHandArithmetic) {
  // (a) -> {a:1, b:1, EOS:1}, kappa 0.5: base = {EOS .3, UNK .1, a .3, b .3}
  // (SOS a) -> {a:1, b:1}: others * 0.4, a = b = 0.5; then renormalize by 1.16
  const auto m = toy(3, 0.5, 0.0, {{A, B}, {A, A}});
  const auto p = m.ngram_distribution(TokenSeq{kSos, A});
  EXPECT_NEAR(p[kEos], 0.12 / 1.16, 1e-12);
  EXPECT_NEAR(p[kUnk], 0.04 / 1.16, 1e-12);
  EXPECT_NEAR(p[A], 0.5 / 1.16, 1e-12);
  EXPECT_NEAR(p[B], 0.5 / 1.16, 1e-12);
}

TEST(Generator, NormalizesOverRandomContexts) {
  const Corpus c = generate_synthetic_corpus(5, 300);
  const auto m = train_generator(c, 3, 0.05, 0.3);
  Rng rng(17);
  for (int i = 0; i < 1000; ++i) {
    const auto& pair = c.pairs[rng.index(c.size())];
    TokenSeq prefix{kSos};
    const auto len = rng.index(8);
    for (std::size_t k = 0; k < len; ++k) prefix.push_back(static_cast<TokenId>(kNumReserved + rng.index(c.vocab->size() - kNumReserved)));
    const auto lp = m.next_logprobs(pair.source, prefix);
    double z = 0.0;
    for (double v : lp) z += std::exp(v);
    ASSERT_NEAR(z, 1.0, 1e-6);
  }
}

TEST(Generator, CopyEffectAtHighLambda) {
  const Corpus c = generate_synthetic_corpus(6, 300);
  const auto m = train_generator(c, 3, 0.05, 0.9);
  Rng rng(4);
  int in_source = 0;
  const int trials = 500;
  for (int i = 0; i < trials; ++i) {
    const auto& pair = c.pairs[rng.index(c.size())];
    TokenSeq prefix{kSos};
    for (std::size_t k = 0, n = rng.index(6); k < n; ++k) prefix.push_back(pair.reference[rng.index(pair.reference.size())]);
    const auto lp = m.next_logprobs(pair.source, prefix);
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    in_source += std::count(pair.source.begin(), pair.source.end(), best) > 0;
  }
  EXPECT_GE(in_source, trials * 9 / 10);
}

TEST(Generator, SequenceLogprobChainRule) {
  const Corpus c = generate_synthetic_corpus(8, 100);
  const auto m = train_generator(c, 3, 0.05, 0.2);
  const auto& p = c.pairs[3];
  EXPECT_DOUBLE_EQ(sequence_logprob(m, p.source, TokenSeq{kEos}), m.next_logprobs(p.source, TokenSeq{kSos})[kEos]);
  TokenSeq y = p.reference;
  y.push_back(kEos);
  // independent recomputation from the mixture pieces
  double oracle = 0.0;
  TokenSeq prefix{kSos};
  const auto copy = m.copy_distribution(p.source);
  for (TokenId t : y) {
    const auto ng = m.ngram_distribution(prefix);
    oracle += std::log(0.2 * copy[static_cast<std::size_t>(t)] + 0.8 * ng[static_cast<std::size_t>(t)]);
    prefix.push_back(t);
  }
  EXPECT_NEAR(sequence_logprob(m, p.source, y), oracle, 1e-9);
}

TEST(Generator, AppendingATokenLowersLogprob) {
  const Corpus c = generate_synthetic_corpus(9, 100);
  const auto m = train_generator(c, 3, 0.05, 0.2);
  const auto& p = c.pairs[0];
  TokenSeq y;
  double prev = 0.0;
  for (TokenId t : p.reference) {
    y.push_back(t);
    const auto lp_prefix = [&] {
      double s = 0.0;
      TokenSeq pre{kSos};
      for (TokenId u : y) {
        s += m.next_logprobs(p.source, pre)[static_cast<std::size_t>(u)];
        pre.push_back(u);
      }
      return s;
    }();
    EXPECT_LT(lp_prefix, prev);
    prev = lp_prefix;
  }
}

TEST(Generator, SerializeRoundTripAndDeterminism) {
  const Corpus c = generate_synthetic_corpus(10, 200);
  const auto a = train_generator(c, 3, 0.05, 0.2);
  const auto b = train_generator(c, 3, 0.05, 0.2);
  EXPECT_EQ(a.serialize(), b.serialize());
  const auto back = NGramCopyModel::parse(a.serialize());
  EXPECT_EQ(back.serialize(), a.serialize());
  const auto& p = c.pairs[1];
  EXPECT_EQ(back.next_logprobs(p.source, TokenSeq{kSos, p.reference[0]}),
            a.next_logprobs(p.source, TokenSeq{kSos, p.reference[0]}));
}

TEST(Generator, Errors) {
  const Corpus c = generate_synthetic_corpus(1, 5);
  EXPECT_THROW(train_generator(c, 0, 0.1, 0.1), Error);
  EXPECT_THROW(train_generator(c, 3, 0.0, 0.1), Error);
  EXPECT_THROW(train_generator(c, 3, 0.1, 1.5), Error);
  const auto m = train_generator(c, 3, 0.1, 0.1);
  EXPECT_THROW(m.next_logprobs(TokenSeq{}, TokenSeq{kSos}), Error);
  EXPECT_THROW(m.next_logprobs(TokenSeq{3}, TokenSeq{4}), Error);
  EXPECT_THROW(NGramCopyModel::parse("garbage"), Error);
}
