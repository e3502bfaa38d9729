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

// Sequential prefix discriminator: logistic regression over hashed prefix
// n-grams plus a few dense shape features, trained on every prefix of human
// and generated summaries with each set normalized by its own size.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "das/common.hpp"
#include "das/corpus.hpp"

namespace das {

enum class Label { kGenerated = 0, kHuman = 1 };

struct PrefixExample {
  std::shared_ptr<const TokenSeq> source;
  std::shared_ptr<const TokenSeq> sequence;  // full EOS-terminated summary, truncated at T_max
  int t = 0;                                 // prefix length
  Label label = Label::kHuman;

  std::span<const TokenId> prefix() const { return {sequence->data(), static_cast<std::size_t>(t)}; }
};

struct PrefixSets {
  std::vector<PrefixExample> human;
  std::vector<PrefixExample> generated;
};

namespace detail {
inline std::shared_ptr<const TokenSeq> framed_summary(const TokenSeq& tokens, int t_max) {
  auto seq = std::make_shared<TokenSeq>(strip_reserved(tokens));
  seq->push_back(kEos);
  if (static_cast<int>(seq->size()) > t_max) seq->resize(static_cast<std::size_t>(t_max));
  return seq;
}
}  // namespace detail

// One example per prefix length t = 1..min(|y|, T_max) of every human
// summary y (reference + EOS), and likewise of every generation.
inline PrefixSets build_prefix_sets(const Corpus& corpus, const std::map<std::string, TokenSeq>& generations,
                                    int t_max) {
  if (t_max < 1) throw Error("build_prefix_sets: T_max must be >= 1");
  PrefixSets sets;
  for (const auto& p : corpus.pairs) {
    auto it = generations.find(p.id);
    if (it == generations.end()) throw Error("build_prefix_sets: missing generation for id " + p.id);
    if (it->second.empty()) throw Error("build_prefix_sets: empty generation for id " + p.id);
    auto source = std::make_shared<const TokenSeq>(p.source);
    auto add = [&](std::vector<PrefixExample>& out, const TokenSeq& tokens, Label label) {
      auto seq = detail::framed_summary(tokens, t_max);
      for (int t = 1; t <= static_cast<int>(seq->size()); ++t) out.push_back({source, seq, t, label});
    };
    add(sets.human, p.reference, Label::kHuman);
    add(sets.generated, it->second, Label::kGenerated);
  }
  return sets;
}

// Subsamples whole summaries so that |G pairs| / |H pairs| ~= ratio. Ratio 1
// keeps everything (one human and one generated summary per document).
inline void rebalance(PrefixSets& sets, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) throw Error("rebalance: ratio must be positive");
  if (ratio == 1.0) return;
  auto thin = [&](std::vector<PrefixExample>& v, double keep) {
    Rng rng(seed);
    std::map<const TokenSeq*, bool> decision;
    std::vector<PrefixExample> out;
    for (auto& ex : v) {
      auto [it, fresh] = decision.emplace(ex.sequence.get(), false);
      if (fresh) it->second = rng.uniform() < keep;
      if (it->second) out.push_back(std::move(ex));
    }
    if (out.empty()) throw Error("rebalance: ratio leaves an empty set");
    v = std::move(out);
  };
  if (ratio < 1.0)
    thin(sets.generated, ratio);
  else
    thin(sets.human, 1.0 / ratio);
}

// Dense features, in file order.
enum DenseFeature : std::size_t {
  kLengthRatio = 0,     // t / T_max
  kSourceOverlap,       // fraction of prefix tokens found in the source
  kRep1,                // rep-n of the prefix as a fraction
  kRep2,
  kRep3,
  kBackgroundLogFreq,   // mean background log-frequency, scaled by 0.1
  kEndsWithEos,
  kNumDense
};

struct FeatureConfig {
  std::size_t d_hash = 1u << 16;
  bool use_source = true;
  int t_max = 140;
  // Natural-log relative frequency per token id over human summaries.
  std::vector<double> background;
  double background_default = 0.0;
};

struct FeatureVector {
  std::array<double, kNumDense> dense{};
  std::vector<std::pair<std::uint32_t, double>> sparse;  // sorted, unique indices
};

// Source-side lookup tables, built once per document.
class SourceContext {
 public:
  explicit SourceContext(std::span<const TokenId> source) {
    for (std::size_t i = 0; i < source.size(); ++i) {
      unigrams_.insert(source[i]);
      if (i + 1 < source.size()) bigrams_.insert(pack(source[i], source[i + 1]));
    }
  }
  bool has(TokenId t) const { return unigrams_.count(t) > 0; }
  bool has(TokenId a, TokenId b) const { return bigrams_.count(pack(a, b)) > 0; }

 private:
  static std::uint64_t pack(TokenId a, TokenId b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }
  std::unordered_set<TokenId> unigrams_;
  std::unordered_set<std::uint64_t> bigrams_;
};

inline std::uint32_t feature_index(std::uint64_t kind, TokenId a, TokenId b, bool bit, std::size_t d_hash) {
  std::uint64_t h = splitmix64(kind);
  h = splitmix64(h ^ static_cast<std::uint32_t>(a));
  h = splitmix64(h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(b)) << 1));
  h = splitmix64(h ^ (bit ? 0x5bd1e995ULL : 0ULL));
  return static_cast<std::uint32_t>(h % d_hash);
}

namespace detail {
inline double prefix_repetition(std::span<const TokenId> s, int n) {
  if (s.size() < static_cast<std::size_t>(n)) return 0.0;
  std::set<std::vector<TokenId>> types;
  const std::size_t count = s.size() - static_cast<std::size_t>(n) + 1;
  for (std::size_t i = 0; i < count; ++i) types.emplace(s.begin() + static_cast<std::ptrdiff_t>(i), s.begin() + static_cast<std::ptrdiff_t>(i) + n);
  return 1.0 - static_cast<double>(types.size()) / static_cast<double>(count);
}
}  // namespace detail

// Sparse n-gram values are 1/sqrt(t) per occurrence, so evidence grows with
// the prefix but the norm stays bounded.
inline FeatureVector extract_features(const SourceContext& source, std::span<const TokenId> prefix,
                                      const FeatureConfig& cfg) {
  if (prefix.empty()) throw Error("extract_features: empty prefix");
  FeatureVector f;
  const double t = static_cast<double>(prefix.size());
  f.dense[kLengthRatio] = t / static_cast<double>(cfg.t_max);
  f.dense[kRep1] = detail::prefix_repetition(prefix, 1);
  f.dense[kRep2] = detail::prefix_repetition(prefix, 2);
  f.dense[kRep3] = detail::prefix_repetition(prefix, 3);
  f.dense[kEndsWithEos] = prefix.back() == kEos ? 1.0 : 0.0;
  double overlap = 0.0, bg = 0.0;
  const double value = 1.0 / std::sqrt(t);
  std::vector<std::pair<std::uint32_t, double>> raw;
  raw.reserve(2 * prefix.size());
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    const TokenId w = prefix[i];
    const bool in_src = cfg.use_source && source.has(w);
    overlap += in_src ? 1.0 : 0.0;
    bg += (w >= 0 && static_cast<std::size_t>(w) < cfg.background.size()) ? cfg.background[static_cast<std::size_t>(w)]
                                                                         : cfg.background_default;
    raw.emplace_back(feature_index(1, w, 0, in_src, cfg.d_hash), value);
    if (i > 0) {
      const bool bi_src = cfg.use_source && source.has(prefix[i - 1], w);
      raw.emplace_back(feature_index(2, prefix[i - 1], w, bi_src, cfg.d_hash), value);
    }
  }
  f.dense[kSourceOverlap] = cfg.use_source ? overlap / t : 0.0;
  f.dense[kBackgroundLogFreq] = 0.1 * bg / t;
  std::sort(raw.begin(), raw.end());
  for (const auto& [idx, v] : raw) {
    if (!f.sparse.empty() && f.sparse.back().first == idx)
      f.sparse.back().second += v;
    else
      f.sparse.emplace_back(idx, v);
  }
  return f;
}

inline FeatureVector extract_features(std::span<const TokenId> source, std::span<const TokenId> prefix,
                                      const FeatureConfig& cfg) {
  return extract_features(SourceContext(source), prefix, cfg);
}

inline double sigmoid(double z) {
  z = std::clamp(z, -35.0, 35.0);
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^z) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

class DiscriminatorModel {
 public:
  DiscriminatorModel() = default;
  explicit DiscriminatorModel(FeatureConfig cfg)
      : config_(std::move(cfg)), dense_(kNumDense, 0.0), sparse_(config_.d_hash, 0.0) {
    if (config_.d_hash == 0) throw Error("discriminator d_hash must be > 0");
    if (config_.t_max < 1) throw Error("discriminator T_max must be >= 1");
  }

  const FeatureConfig& config() const { return config_; }
  double bias() const { return bias_; }
  double& bias() { return bias_; }
  std::span<const double> dense_weights() const { return dense_; }
  std::span<double> dense_weights() { return dense_; }
  std::span<const double> sparse_weights() const { return sparse_; }
  std::span<double> sparse_weights() { return sparse_; }
  double final_objective() const { return final_objective_; }
  void set_final_objective(double v) { final_objective_ = v; }

  double logit(const FeatureVector& f) const {
    double z = bias_;
    for (std::size_t i = 0; i < kNumDense; ++i) z += dense_[i] * f.dense[i];
    for (const auto& [idx, v] : f.sparse) z += sparse_[idx] * v;
    return z;
  }

  double score(const FeatureVector& f) const { return sigmoid(logit(f)); }

  // D(x, prefix): probability that the prefix is human-written.
  double score_prefix(const SourceContext& source, std::span<const TokenId> prefix) const {
    return score(extract_features(source, prefix, config_));
  }
  double score_prefix(std::span<const TokenId> source, std::span<const TokenId> prefix) const {
    return score_prefix(SourceContext(source), prefix);
  }

  std::string serialize() const {
    std::ostringstream os;
    os << "discriminator-model 1\n"
       << "d_hash " << config_.d_hash << "\n"
       << "use_source " << (config_.use_source ? 1 : 0) << "\n"
       << "t_max " << config_.t_max << "\n"
       << "final_objective " << format_double(final_objective_) << "\n"
       << "background_default " << format_double(config_.background_default) << "\n"
       << "background " << config_.background.size() << "\n";
    for (double v : config_.background) os << format_double(v) << "\n";
    os << "bias " << format_double(bias_) << "\n";
    os << "dense " << dense_.size() << "\n";
    for (double v : dense_) os << format_double(v) << "\n";
    os << "sparse\n";
    for (std::size_t i = 0; i < sparse_.size(); ++i)
      if (sparse_[i] != 0.0) os << i << ' ' << format_double(sparse_[i]) << "\n";
    return os.str();
  }

  static DiscriminatorModel parse(const std::string& text) {
    std::istringstream in(text);
    std::string key;
    auto expect = [&](const char* k) {
      if (!(in >> key) || key != k) throw Error(std::string("discriminator model: expected ") + k);
    };
    std::string version;
    expect("discriminator-model");
    in >> version;
    if (version != "1") throw Error("discriminator model: unsupported version");
    FeatureConfig cfg;
    int use_source = 1;
    double final_obj = 0;
    std::size_t n_bg = 0, n_dense = 0;
    expect("d_hash");
    in >> cfg.d_hash;
    expect("use_source");
    in >> use_source;
    cfg.use_source = use_source != 0;
    expect("t_max");
    in >> cfg.t_max;
    expect("final_objective");
    final_obj = read_double(in);
    expect("background_default");
    cfg.background_default = read_double(in);
    expect("background");
    in >> n_bg;
    cfg.background.resize(n_bg);
    for (auto& v : cfg.background) v = read_double(in);
    if (!in) throw Error("discriminator model: truncated header");
    DiscriminatorModel m(std::move(cfg));
    m.final_objective_ = final_obj;
    expect("bias");
    m.bias_ = read_double(in);
    expect("dense");
    in >> n_dense;
    if (n_dense != kNumDense) throw Error("discriminator model: dense size mismatch");
    for (auto& v : m.dense_) v = read_double(in);
    expect("sparse");
    std::size_t idx;
    while (in >> idx) {
      if (idx >= m.sparse_.size()) throw Error("discriminator model: sparse index out of range");
      m.sparse_[idx] = read_double(in);
    }
    if (!in.eof()) throw Error("discriminator model: malformed sparse section");
    return m;
  }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static DiscriminatorModel load(const std::string& path) { return parse(read_file(path)); }

 private:
  static double read_double(std::istream& in) {
    std::string tok;
    if (!(in >> tok)) throw Error("discriminator model: truncated");
    return std::stod(tok);
  }

  FeatureConfig config_;
  std::vector<double> dense_;
  std::vector<double> sparse_;
  double bias_ = 0.0;
  double final_objective_ = 0.0;
};

// Background log-frequencies from the distinct human sequences in H.
inline void fit_background(FeatureConfig& cfg, const std::vector<PrefixExample>& human, std::size_t vocab_size) {
  std::set<const TokenSeq*> seen;
  std::vector<double> counts(vocab_size, 0.0);
  double total = 0.0;
  for (const auto& ex : human) {
    if (!seen.insert(ex.sequence.get()).second) continue;
    for (TokenId t : *ex.sequence)
      if (t >= 0 && static_cast<std::size_t>(t) < vocab_size) counts[static_cast<std::size_t>(t)] += 1.0, total += 1.0;
  }
  const double denom = total + static_cast<double>(vocab_size);
  cfg.background.resize(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) cfg.background[i] = std::log((counts[i] + 1.0) / denom);
  cfg.background_default = std::log(1.0 / denom);
}

struct DiscHyper {
  int epochs = 5;
  double learning_rate = 0.5;
  std::uint64_t seed = 1;
};

// Features cached per example, labels aligned.
struct FeatureSet {
  std::vector<FeatureVector> human;
  std::vector<FeatureVector> generated;
};

inline std::vector<FeatureVector> featurize(const std::vector<PrefixExample>& examples, const FeatureConfig& cfg) {
  std::vector<FeatureVector> out;
  out.reserve(examples.size());
  const TokenSeq* last_src = nullptr;
  std::optional<SourceContext> ctx;
  for (const auto& ex : examples) {
    if (ex.source.get() != last_src) {
      ctx.emplace(*ex.source);
      last_src = ex.source.get();
    }
    out.push_back(extract_features(*ctx, ex.prefix(), cfg));
  }
  return out;
}

// (1/|H|) sum_H log D + (1/|G|) sum_G log(1 - D).
inline double objective(const DiscriminatorModel& m, const FeatureSet& fs) {
  if (fs.human.empty() || fs.generated.empty()) throw Error("objective: empty example set");
  double h = 0.0, g = 0.0;
  for (const auto& f : fs.human) h -= softplus(-m.logit(f));
  for (const auto& f : fs.generated) g -= softplus(m.logit(f));
  return h / static_cast<double>(fs.human.size()) + g / static_cast<double>(fs.generated.size());
}

struct Gradient {
  double bias = 0.0;
  std::vector<double> dense;
  std::vector<double> sparse;
};

inline Gradient objective_gradient(const DiscriminatorModel& m, const FeatureSet& fs) {
  Gradient grad{0.0, std::vector<double>(kNumDense, 0.0), std::vector<double>(m.config().d_hash, 0.0)};
  auto accumulate = [&](const std::vector<FeatureVector>& set, bool human) {
    const double w = 1.0 / static_cast<double>(set.size());
    for (const auto& f : set) {
      const double z = m.logit(f);
      // d/dz log sigma(z) = sigma(-z); d/dz log(1 - sigma(z)) = -sigma(z)
      const double g = w * (human ? 1.0 / (1.0 + std::exp(z)) : -1.0 / (1.0 + std::exp(-z)));
      grad.bias += g;
      for (std::size_t i = 0; i < kNumDense; ++i) grad.dense[i] += g * f.dense[i];
      for (const auto& [idx, v] : f.sparse) grad.sparse[idx] += g * v;
    }
  };
  accumulate(fs.human, true);
  accumulate(fs.generated, false);
  return grad;
}

struct TrainingTrace {
  std::vector<double> objective_per_epoch;
};

// Stochastic gradient ascent on the objective. Each step draws one example
// from the shuffled union and scales its term by N/|H| or N/|G| (N = |H|+|G|),
// an unbiased estimate of the full gradient. Step size lr / sqrt(epoch).
inline DiscriminatorModel train_discriminator(const FeatureSet& fs, FeatureConfig cfg, const DiscHyper& hp,
                                              const DiscriminatorModel* warm_start = nullptr,
                                              TrainingTrace* trace = nullptr) {
  if (fs.human.empty() || fs.generated.empty()) throw Error("train_discriminator: H and G must be non-empty");
  if (hp.epochs < 1) throw Error("train_discriminator: epochs must be >= 1");
  if (!(hp.learning_rate > 0)) throw Error("train_discriminator: learning rate must be > 0");
  DiscriminatorModel m(cfg);
  if (warm_start) {
    if (warm_start->config().d_hash != cfg.d_hash) throw Error("warm start: d_hash mismatch");
    std::copy(warm_start->dense_weights().begin(), warm_start->dense_weights().end(), m.dense_weights().begin());
    std::copy(warm_start->sparse_weights().begin(), warm_start->sparse_weights().end(), m.sparse_weights().begin());
    m.bias() = warm_start->bias();
  }
  const double nh = static_cast<double>(fs.human.size());
  const double ng = static_cast<double>(fs.generated.size());
  const double n = nh + ng;
  std::vector<std::uint32_t> order(fs.human.size() + fs.generated.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<std::uint32_t>(i);
  Rng rng(hp.seed);
  auto dense = m.dense_weights();
  auto sparse = m.sparse_weights();
  for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
    const double lr = hp.learning_rate / std::sqrt(static_cast<double>(epoch));
    rng.shuffle(order);
    for (std::uint32_t i : order) {
      const bool human = i < fs.human.size();
      const FeatureVector& f = human ? fs.human[i] : fs.generated[i - fs.human.size()];
      const double d = sigmoid(m.logit(f));
      const double step = lr * (human ? n / nh * (1.0 - d) : -n / ng * d);
      m.bias() += step;
      for (std::size_t k = 0; k < kNumDense; ++k) dense[k] += step * f.dense[k];
      for (const auto& [idx, v] : f.sparse) sparse[idx] += step * v;
    }
    if (trace) trace->objective_per_epoch.push_back(objective(m, fs));
  }
  m.set_final_objective(trace && !trace->objective_per_epoch.empty() ? trace->objective_per_epoch.back()
                                                                      : objective(m, fs));
  return m;
}

// Convenience: fit the background on H, featurize, train.
inline DiscriminatorModel train_discriminator(const PrefixSets& sets, FeatureConfig cfg, std::size_t vocab_size,
                                              const DiscHyper& hp, const DiscriminatorModel* warm_start = nullptr,
                                              TrainingTrace* trace = nullptr) {
  if (sets.human.empty() || sets.generated.empty()) throw Error("train_discriminator: H and G must be non-empty");
  if (cfg.background.empty()) fit_background(cfg, sets.human, vocab_size);
  FeatureSet fs{featurize(sets.human, cfg), featurize(sets.generated, cfg)};
  return train_discriminator(fs, std::move(cfg), hp, warm_start, trace);
}

struct BucketAccuracy {
  int t = 0;                        // upper edge of the bucket
  std::optional<double> accuracy;   // absent for an empty bucket
  long n_examples = 0;
};

// Accuracy at threshold 0.5 (human = positive) per bucket; bucket i holds
// prefix lengths in (edge[i-1], edge[i]], the first bucket [1, edge[0]].
inline std::vector<BucketAccuracy> accuracy_by_length(const DiscriminatorModel& m, const std::vector<PrefixExample>& human,
                                                      const std::vector<PrefixExample>& generated,
                                                      std::vector<int> buckets) {
  if (buckets.empty()) throw Error("accuracy_by_length: no buckets");
  std::sort(buckets.begin(), buckets.end());
  buckets.erase(std::unique(buckets.begin(), buckets.end()), buckets.end());
  std::vector<long> correct(buckets.size(), 0), total(buckets.size(), 0);
  auto run = [&](const std::vector<PrefixExample>& set, bool is_human) {
    const auto feats = featurize(set, m.config());
    for (std::size_t i = 0; i < set.size(); ++i) {
      auto it = std::lower_bound(buckets.begin(), buckets.end(), set[i].t);
      if (it == buckets.end()) continue;
      const auto b = static_cast<std::size_t>(it - buckets.begin());
      const bool says_human = m.score(feats[i]) >= 0.5;
      ++total[b];
      correct[b] += says_human == is_human ? 1 : 0;
    }
  };
  run(human, true);
  run(generated, false);
  std::vector<BucketAccuracy> out;
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    BucketAccuracy r{buckets[b], std::nullopt, total[b]};
    if (total[b] > 0) r.accuracy = static_cast<double>(correct[b]) / static_cast<double>(total[b]);
    out.push_back(r);
  }
  return out;
}

inline double overall_accuracy(const DiscriminatorModel& m, const std::vector<PrefixExample>& human,
                               const std::vector<PrefixExample>& generated) {
  long correct = 0, total = 0;
  for (const auto& f : featurize(human, m.config())) correct += m.score(f) >= 0.5, ++total;
  for (const auto& f : featurize(generated, m.config())) correct += m.score(f) < 0.5, ++total;
  if (total == 0) throw Error("overall_accuracy: no examples");
  return static_cast<double>(correct) / static_cast<double>(total);
}

inline std::string accuracy_csv(const std::vector<BucketAccuracy>& rows) {
  std::ostringstream os;
  os << "t,accuracy,n_examples\n";
  for (const auto& r : rows) {
    os << r.t << ',';
    if (r.accuracy)
      os << std::fixed << std::setprecision(6) << *r.accuracy;
    else
      os << "NA";
    os << ',' << r.n_examples << '\n';
  }
  return os.str();
}

}  // namespace das
