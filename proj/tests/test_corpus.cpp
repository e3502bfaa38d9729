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

#include <cstdio>
#include <filesystem>

#include "das/corpus.hpp"
#include "das/metrics.hpp"

using namespace das;

namespace {

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = (std::filesystem::temp_directory_path() / ("das_corpus_" + name)).string();
  write_file(path, content);
  return path;
}

std::string load_error(const std::string& content) {
  try {
    load_corpus(temp_file("bad.jsonl", content));
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsPunctuation) {
  EXPECT_EQ(tokenize("The cat sat."), (std::vector<std::string>{"the", "cat", "sat", "."}));
  EXPECT_EQ(tokenize("  a,b  "), (std::vector<std::string>{"a", ",", "b"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(LoadCorpus, TokenizesSourceAndKeepsOrder) {
  const auto path = temp_file("ok.jsonl",
                              "{\"id\":\"a\",\"source\":\"The cat sat.\",\"summary\":\"cat sat\"}\n"
                              "{\"id\":\"b\",\"source\":\"x y\",\"summary\":\"y\"}\n"
                              "{\"id\":\"c\",\"source\":\"z\",\"summary\":\"z z\"}\n");
  const Corpus c = load_corpus(path);
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.pairs[0].id, "a");
  EXPECT_EQ(c.pairs[2].id, "c");
  EXPECT_EQ(c.vocab->decode(c.pairs[0].source), (std::vector<std::string>{"the", "cat", "sat", "."}));
}

TEST(LoadCorpus, UnknownTokensMapToUnk) {
  Vocabulary v;
  v.add("cat");
  const auto path = temp_file("unk.jsonl", "{\"id\":\"a\",\"source\":\"cat dog\",\"summary\":\"cat\"}\n");
  const Corpus c = load_corpus(path, &v);
  EXPECT_EQ(c.pairs[0].source, (TokenSeq{v.id("cat"), kUnk}));
}

TEST(LoadCorpus, ErrorsNameTheLine) {
  EXPECT_EQ(load_error("{\"id\":\"a\",\"source\":\"x\",\"summary\":\"\"}\n"), "empty reference at line 1");
  EXPECT_EQ(load_error("{\"id\":\"a\",\"source\":\"x\",\"summary\":\"y\"}\nnot json\n"), "malformed record at line 2");
  EXPECT_EQ(load_error("{\"id\":\"a\",\"source\":\"x\"}\n"), "missing or non-string field 'summary' at line 1");
  EXPECT_NE(load_error("{\"id\":\"a\",\"source\":\"x\",\"summary\":\"y\"}\n{\"id\":\"a\",\"source\":\"x\",\"summary\":\"y\"}\n")
                .find("duplicate id"),
            std::string::npos);
  EXPECT_NE(load_error("").find("empty corpus"), std::string::npos);
}

TEST(Vocabulary, ReservedIdsAndRoundTrip) {
  Vocabulary v;
  EXPECT_EQ(v.token(kSos), "<s>");
  EXPECT_EQ(v.token(kEos), "$");
  EXPECT_EQ(v.token(kUnk), "<unk>");
  EXPECT_EQ(v.add("$"), kUnk);  // a literal "$" in text never becomes EOS
  for (auto w : {"alpha", "beta", "gamma"}) EXPECT_EQ(v.token(v.add(w)), w);
  const Vocabulary back = Vocabulary::parse(v.serialize());
  EXPECT_EQ(back, v);
  const std::vector<std::string> words = {"gamma", "alpha", "beta"};
  EXPECT_EQ(v.decode(v.encode(words)), words);
}

TEST(Vocabulary, ParseRejectsBadFiles) {
  EXPECT_THROW(Vocabulary::parse("<s>\n$\n"), Error);
  EXPECT_THROW(Vocabulary::parse("x\n$\n<unk>\n"), Error);
  EXPECT_THROW(Vocabulary::parse("<s>\n$\n<unk>\na\na\n"), Error);
}

TEST(BuildVocabulary, ThresholdAndOrder) {
  Corpus c;
  auto open = std::make_shared<Vocabulary>();
  auto enc = [&](const std::string& s) {
    TokenSeq ids;
    for (const auto& t : tokenize(s)) ids.push_back(open->add(t));
    return ids;
  };
  c.pairs.push_back({"1", enc("the the the zebra b a"), enc("the the a b")});
  c.vocab = open;
  const Vocabulary v2 = build_vocabulary(c, 2);
  EXPECT_TRUE(v2.find("the"));
  EXPECT_FALSE(v2.find("zebra"));
  const Vocabulary v1 = build_vocabulary(c, 1);
  EXPECT_TRUE(v1.find("zebra"));
  // frequency descending, then lexicographic: the(5) a(2) b(2) zebra(1)
  EXPECT_EQ(v1.token(3), "the");
  EXPECT_EQ(v1.token(4), "a");
  EXPECT_EQ(v1.token(5), "b");
  EXPECT_EQ(v1.token(6), "zebra");
  EXPECT_EQ(build_vocabulary(c, 1).serialize(), v1.serialize());
}

TEST(CorpusStatistics, HandComputedTwoPairs) {
  Corpus c;
  c.vocab = std::make_shared<Vocabulary>();
  // pair 1: source 4 tokens, reference 2 with 1 novel -> 50%
  // pair 2: source 2 tokens, reference 4 with 3 novel -> 75%
  c.pairs.push_back({"1", {10, 11, 12, 13}, {10, 20}});
  c.pairs.push_back({"2", {30, 31}, {30, 40, 41, 42}});
  const auto s = corpus_statistics(c);
  EXPECT_DOUBLE_EQ(s.mean_source_length, 3.0);
  EXPECT_DOUBLE_EQ(s.mean_reference_length, 3.0);
  EXPECT_DOUBLE_EQ(s.abstractiveness, 62.5);
}

TEST(Synthetic, DeterministicInSeed) {
  const Corpus a = generate_synthetic_corpus(7, 2), b = generate_synthetic_corpus(7, 2);
  ASSERT_EQ(a.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(a.pairs[i].id, b.pairs[i].id);
    EXPECT_EQ(a.pairs[i].source, b.pairs[i].source);
    EXPECT_EQ(a.pairs[i].reference, b.pairs[i].reference);
  }
  EXPECT_EQ(a.vocab->serialize(), b.vocab->serialize());
  EXPECT_NE(generate_synthetic_corpus(8, 2).pairs[0].source, a.pairs[0].source);
}

TEST(Synthetic, ReferencesHaveNoRepeatedTrigramAndSomeNovelty) {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    const Corpus c = generate_synthetic_corpus(seed, 200);
    for (const auto& p : c.pairs) {
      ASSERT_EQ(repetition_n(p.reference, 3).value_or(0.0), 0.0);
      ASSERT_GT(novelty_n(p.reference, p.source, 1).value(), 0.0);
      const auto n_clauses = std::count(p.source.begin(), p.source.end(), c.vocab->id("."));
      ASSERT_GE(n_clauses, 6);
      ASSERT_LE(n_clauses, 12);
    }
  }
}

TEST(Synthetic, ParaphraseRateNearAThird) {
  const auto s = corpus_statistics(generate_synthetic_corpus(11, 500));
  EXPECT_GT(s.abstractiveness, 20.0);
  EXPECT_LT(s.abstractiveness, 50.0);
}

TEST(Synthetic, ProfileValidation) {
  SynthProfile p;
  p.max_reference_clauses = 9;
  EXPECT_THROW(generate_synthetic_corpus(1, 1, p), ValidationError);
  EXPECT_THROW(generate_synthetic_corpus(1, 0), Error);
}

TEST(Split, PartsAreDisjointAndOrdered) {
  const Corpus c = generate_synthetic_corpus(3, 20);
  const auto [a, b] = split_corpus(c, 8, 99);
  EXPECT_EQ(a.size(), 8u);
  EXPECT_EQ(b.size(), 12u);
  std::set<std::string> ids;
  for (const auto& p : a.pairs) ids.insert(p.id);
  for (const auto& p : b.pairs) EXPECT_FALSE(ids.count(p.id));
  const Corpus s = sample_subset(c, 5, 1);
  EXPECT_EQ(s.size(), 5u);
  EXPECT_EQ(sample_subset(c, 5, 1).pairs[3].id, s.pairs[3].id);
}
