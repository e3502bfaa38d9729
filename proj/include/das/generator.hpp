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

// Conditional next-token models P(y_t | x, y_1:t-1).

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "das/common.hpp"
#include "das/corpus.hpp"

namespace das {

class GeneratorModel {
 public:
  virtual ~GeneratorModel() = default;

  virtual std::size_t vocab_size() const = 0;

  // Log-probability of every vocabulary id as the next token. `prefix` starts
  // with SOS. Ids with zero probability get -inf.
  virtual std::vector<double> next_logprobs(std::span<const TokenId> source,
                                            std::span<const TokenId> prefix) const = 0;
};

// Sum of next-token log-probabilities along y, which must end in EOS.
inline double sequence_logprob(const GeneratorModel& model, std::span<const TokenId> source,
                               std::span<const TokenId> y) {
  if (y.empty() || y.back() != kEos) throw Error("sequence_logprob: sequence must end with EOS");
  TokenSeq prefix{kSos};
  double total = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    if (y[t] == kSos || (y[t] == kEos && t + 1 != y.size()))
      throw Error("sequence_logprob: reserved token inside sequence");
    total += model.next_logprobs(source, prefix)[static_cast<std::size_t>(y[t])];
    prefix.push_back(y[t]);
  }
  return total;
}

struct TokenSeqHash {
  std::size_t operator()(const TokenSeq& s) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (TokenId t : s) h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
    return static_cast<std::size_t>(h);
  }
};

// Target-side n-gram model with stupid backoff, mixed with a bag-of-source
// copy distribution:
//
//   P(w) = lambda_copy * count(w in x) / |x| + (1 - lambda_copy) * Ngram(w | prefix)
//
// Ngram bottoms out at the previous-token context with additive smoothing
// (c(prev, w) + kappa) / (c(prev) + kappa |V'|), where V' is every id but SOS.
// Longer seen contexts override their observed successors and scale the rest
// by 0.4; unseen longer contexts fall back unchanged. The result is
// renormalized over V'. EOS never receives copy mass.
class NGramCopyModel : public GeneratorModel {
 public:
  static constexpr double kBackoff = 0.4;

  struct Successors {
    long total = 0;
    std::vector<std::pair<TokenId, long>> counts;  // sorted by token id
  };

  NGramCopyModel(int order, double kappa, double lambda_copy, std::size_t vocab_size,
                 std::uint64_t vocab_hash)
      : order_(order), kappa_(kappa), lambda_copy_(lambda_copy), vocab_size_(vocab_size),
        vocab_hash_(vocab_hash), tables_(static_cast<std::size_t>(std::max(order, 1))) {
    if (order < 1) throw Error("generator order must be >= 1");
    if (!(kappa > 0.0)) throw Error("generator kappa must be > 0");
    if (!(lambda_copy >= 0.0 && lambda_copy <= 1.0)) throw Error("generator lambda_copy must be in [0,1]");
    if (vocab_size <= static_cast<std::size_t>(kNumReserved)) throw Error("generator vocabulary too small");
  }

  int order() const { return order_; }
  double kappa() const { return kappa_; }
  double lambda_copy() const { return lambda_copy_; }
  std::uint64_t vocab_hash() const { return vocab_hash_; }
  std::size_t vocab_size() const override { return vocab_size_; }

  // Counts a framed sequence SOS y EOS. Contexts never extend past SOS.
  void add_sequence(std::span<const TokenId> y) {
    TokenSeq framed{kSos};
    framed.insert(framed.end(), y.begin(), y.end());
    framed.push_back(kEos);
    for (std::size_t i = 1; i < framed.size(); ++i) {
      check_id(framed[i]);
      for (int k = order_ == 1 ? 0 : 1; k < order_; ++k) {
        if (static_cast<std::size_t>(k) > i) break;
        TokenSeq ctx(framed.begin() + static_cast<std::ptrdiff_t>(i) - k, framed.begin() + static_cast<std::ptrdiff_t>(i));
        bump(tables_[static_cast<std::size_t>(k)][ctx], framed[i], 1);
      }
    }
  }

  void add_count(const TokenSeq& context, TokenId token, long count) {
    if (static_cast<int>(context.size()) >= order_) throw Error("n-gram context longer than order - 1");
    if (count <= 0) throw Error("n-gram count must be positive");
    check_id(token);
    for (TokenId t : context) check_id(t);
    bump(tables_[context.size()][context], token, count);
  }

  // Count of (context, token); 0 when unseen.
  long count(const TokenSeq& context, TokenId token) const {
    if (static_cast<int>(context.size()) >= order_) return 0;
    const auto& table = tables_[context.size()];
    auto it = table.find(context);
    if (it == table.end()) return 0;
    auto jt = std::lower_bound(it->second.counts.begin(), it->second.counts.end(),
                               std::make_pair(token, 0L),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    return (jt != it->second.counts.end() && jt->first == token) ? jt->second : 0;
  }

  // Normalized n-gram distribution over ids (SOS gets 0).
  std::vector<double> ngram_distribution(std::span<const TokenId> prefix) const {
    if (prefix.empty() || prefix.front() != kSos) throw Error("prefix must begin with SOS");
    const double n_pred = static_cast<double>(vocab_size_ - 1);
    std::vector<double> p(vocab_size_, 0.0);
    const Successors* base = lookup(order_ == 1 ? 0 : 1, prefix);
    const double denom = (base ? static_cast<double>(base->total) : 0.0) + kappa_ * n_pred;
    for (std::size_t w = 1; w < vocab_size_; ++w) p[w] = kappa_ / denom;
    if (base)
      for (auto [w, c] : base->counts) p[static_cast<std::size_t>(w)] = (static_cast<double>(c) + kappa_) / denom;

    const int max_k = std::min<int>(order_ - 1, static_cast<int>(prefix.size()));
    for (int k = 2; k <= max_k; ++k) {
      const Successors* s = lookup(k, prefix);
      if (!s) continue;
      for (std::size_t w = 1; w < vocab_size_; ++w) p[w] *= kBackoff;
      for (auto [w, c] : s->counts)
        p[static_cast<std::size_t>(w)] = static_cast<double>(c) / static_cast<double>(s->total);
    }
    double z = 0.0;
    for (double v : p) z += v;
    for (double& v : p) v /= z;
    return p;
  }

  // Bag-of-source distribution; EOS, SOS get 0.
  std::vector<double> copy_distribution(std::span<const TokenId> source) const {
    std::vector<double> p(vocab_size_, 0.0);
    double n = 0.0;
    for (TokenId t : source) {
      if (t == kSos || t == kEos) continue;
      check_id(t);
      p[static_cast<std::size_t>(t)] += 1.0;
      n += 1.0;
    }
    if (n == 0.0) throw Error("copy distribution: source has no ordinary tokens");
    for (double& v : p) v /= n;
    return p;
  }

  std::vector<double> next_logprobs(std::span<const TokenId> source,
                                    std::span<const TokenId> prefix) const override {
    if (source.empty()) throw Error("next_logprobs: empty source");
    std::vector<double> p = ngram_distribution(prefix);
    if (lambda_copy_ > 0.0) {
      const auto copy = copy_distribution(source);
      for (std::size_t w = 0; w < vocab_size_; ++w) p[w] = lambda_copy_ * copy[w] + (1.0 - lambda_copy_) * p[w];
    }
    for (double& v : p) v = v > 0.0 ? std::log(v) : kNegInf;
    return p;
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "ngram-copy-model 1\n"
       << "order " << order_ << "\n"
       << "kappa " << format_double(kappa_) << "\n"
       << "lambda_copy " << format_double(lambda_copy_) << "\n"
       << "vocab_size " << vocab_size_ << "\n"
       << "vocab_hash " << hex64(vocab_hash_) << "\n";
    for (std::size_t k = 0; k < tables_.size(); ++k) {
      std::map<TokenSeq, const Successors*> sorted;
      for (const auto& [ctx, s] : tables_[k]) sorted.emplace(ctx, &s);
      for (const auto& [ctx, s] : sorted)
        for (auto [w, c] : s->counts) {
          for (TokenId t : ctx) os << t << ' ';
          os << w << ' ' << c << '\n';
        }
    }
    return os.str();
  }

  static NGramCopyModel parse(const std::string& text) {
    std::istringstream in(text);
    std::string line, key;
    auto header = [&](const char* expect) {
      if (!std::getline(in, line)) throw Error("generator model truncated");
      std::istringstream ls(line);
      std::string value;
      ls >> key >> value;
      if (key != expect) throw Error(std::string("generator model: expected ") + expect);
      return value;
    };
    if (header("ngram-copy-model") != "1") throw Error("generator model: unsupported version");
    const int order = std::stoi(header("order"));
    const double kappa = std::stod(header("kappa"));
    const double lambda = std::stod(header("lambda_copy"));
    const auto vsize = static_cast<std::size_t>(std::stoull(header("vocab_size")));
    const auto vhash = std::stoull(header("vocab_hash"), nullptr, 16);
    NGramCopyModel m(order, kappa, lambda, vsize, vhash);
    std::size_t line_no = 6;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::vector<long> fields;
      long v;
      while (ls >> v) fields.push_back(v);
      if (fields.size() < 2 || !ls.eof())
        throw Error("generator model: malformed line " + std::to_string(line_no));
      TokenSeq ctx(fields.begin(), fields.end() - 2);
      m.add_count(ctx, static_cast<TokenId>(fields[fields.size() - 2]), fields.back());
    }
    return m;
  }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static NGramCopyModel load(const std::string& path) { return parse(read_file(path)); }

 private:
  void check_id(TokenId t) const {
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_)
      throw Error("token id out of range for generator: " + std::to_string(t));
  }

  static void bump(Successors& s, TokenId token, long c) {
    s.total += c;
    auto it = std::lower_bound(s.counts.begin(), s.counts.end(), std::make_pair(token, 0L),
                               [](const auto& a, const auto& b) { return a.first < b.first; });
    if (it != s.counts.end() && it->first == token)
      it->second += c;
    else
      s.counts.insert(it, {token, c});
  }

  // Successor table of the length-k suffix of prefix, or null when unseen.
  const Successors* lookup(int k, std::span<const TokenId> prefix) const {
    if (k > static_cast<int>(prefix.size()) || k >= order_) return nullptr;
    TokenSeq ctx(prefix.end() - k, prefix.end());
    const auto& table = tables_[static_cast<std::size_t>(k)];
    auto it = table.find(ctx);
    return it == table.end() ? nullptr : &it->second;
  }

  int order_;
  double kappa_;
  double lambda_copy_;
  std::size_t vocab_size_;
  std::uint64_t vocab_hash_;
  // tables_[k]: context of length k -> successor counts.
  std::vector<std::unordered_map<TokenSeq, Successors, TokenSeqHash>> tables_;
};

inline NGramCopyModel train_generator(const Corpus& corpus, int order, double kappa, double lambda_copy) {
  if (order < 1) throw Error("train_generator: order must be >= 1");
  if (corpus.empty()) throw Error("train_generator: empty corpus");
  NGramCopyModel model(order, kappa, lambda_copy, corpus.vocab->size(), corpus.vocab->hash());
  for (const auto& p : corpus.pairs) model.add_sequence(p.reference);
  return model;
}

}  // namespace das
