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

// Summary measures: length, novelty, repetition, BLEU-1, ROUGE-1/L and the
// distribution reports (top-k frequencies, repetition positions).
//
// Conventions:
//   nov-n = 100 * (summary n-gram instances absent from the source) / instances
//   rep-n = 100 * (1 - distinct n-gram types / n-gram instances)
// Both count instances, so they share a denominator. Undefined when the
// summary is shorter than n.

#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "das/common.hpp"
#include "das/corpus.hpp"
#include "json.hpp"

namespace das {

using Ngram = std::vector<TokenId>;

inline std::vector<Ngram> ngrams(std::span<const TokenId> seq, int n) {
  std::vector<Ngram> out;
  if (n < 1 || seq.size() < static_cast<std::size_t>(n)) return out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= seq.size(); ++i)
    out.emplace_back(seq.begin() + static_cast<std::ptrdiff_t>(i),
                     seq.begin() + static_cast<std::ptrdiff_t>(i) + n);
  return out;
}

inline std::optional<double> novelty_n(std::span<const TokenId> summary, std::span<const TokenId> source, int n) {
  const auto grams = ngrams(summary, n);
  if (grams.empty()) return std::nullopt;
  const auto src = ngrams(source, n);
  const std::set<Ngram> src_set(src.begin(), src.end());
  const auto novel = std::count_if(grams.begin(), grams.end(), [&](const Ngram& g) { return !src_set.count(g); });
  return 100.0 * static_cast<double>(novel) / static_cast<double>(grams.size());
}

inline std::optional<double> repetition_n(std::span<const TokenId> summary, int n) {
  const auto grams = ngrams(summary, n);
  if (grams.empty()) return std::nullopt;
  const std::set<Ngram> types(grams.begin(), grams.end());
  return 100.0 * (1.0 - static_cast<double>(types.size()) / static_cast<double>(grams.size()));
}

// Human-minus-model difference; negative dlen means the model is longer.
inline double delta(double m_human, double m_model) {
  if (!std::isfinite(m_human) || !std::isfinite(m_model)) throw Error("delta: non-finite input");
  return m_human - m_model;
}

namespace detail {
inline std::map<TokenId, long> bag(std::span<const TokenId> s) {
  std::map<TokenId, long> b;
  for (TokenId t : s) ++b[t];
  return b;
}
inline long clipped_overlap(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  const auto h = bag(hyp);
  const auto r = bag(ref);
  long overlap = 0;
  for (const auto& [t, c] : h) {
    auto it = r.find(t);
    if (it != r.end()) overlap += std::min(c, it->second);
  }
  return overlap;
}
}  // namespace detail

// Clipped unigram precision times exp(min(0, 1 - |ref|/|hyp|)), in [0,1].
inline double bleu1(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (hyp.empty() || ref.empty()) throw Error("bleu1: empty input");
  const double precision = static_cast<double>(detail::clipped_overlap(hyp, ref)) / static_cast<double>(hyp.size());
  const double bp = std::exp(std::min(0.0, 1.0 - static_cast<double>(ref.size()) / static_cast<double>(hyp.size())));
  return precision * bp;
}

struct Prf {
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

inline Prf make_prf(double overlap, std::size_t hyp_len, std::size_t ref_len) {
  Prf s;
  s.recall = overlap / static_cast<double>(ref_len);
  s.precision = overlap / static_cast<double>(hyp_len);
  s.f1 = (s.recall + s.precision) > 0 ? 2 * s.recall * s.precision / (s.recall + s.precision) : 0.0;
  return s;
}

inline Prf rouge1(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (hyp.empty() || ref.empty()) throw Error("rouge1: empty input");
  return make_prf(static_cast<double>(detail::clipped_overlap(hyp, ref)), hyp.size(), ref.size());
}

inline std::size_t lcs_length(std::span<const TokenId> a, std::span<const TokenId> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline Prf rougeL(std::span<const TokenId> hyp, std::span<const TokenId> ref) {
  if (hyp.empty() || ref.empty()) throw Error("rougeL: empty input");
  return make_prf(static_cast<double>(lcs_length(hyp, ref)), hyp.size(), ref.size());
}

struct ZipfEntry {
  int rank;
  TokenId token;
  long frequency;
};

// Top-k tokens by frequency; ties go to the smaller id.
inline std::vector<ZipfEntry> zipf_report(const std::vector<TokenSeq>& generations, std::size_t k) {
  if (generations.empty()) throw Error("zipf_report: no generations");
  std::map<TokenId, long> freq;
  for (const auto& g : generations)
    for (TokenId t : g) ++freq[t];
  std::vector<std::pair<TokenId, long>> items(freq.begin(), freq.end());
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<ZipfEntry> out;
  for (std::size_t i = 0; i < items.size() && i < k; ++i)
    out.push_back({static_cast<int>(i + 1), items[i].first, items[i].second});
  return out;
}

struct PositionHistogram {
  std::vector<long> counts;
  std::vector<double> density;  // sums to 1 when any repetition exists
  long total = 0;
};

// Relative start position start/(|y|-n+1) of every repeated n-gram instance
// (second or later occurrence of its type within one summary).
inline PositionHistogram repetition_position_hist(const std::vector<TokenSeq>& generations, int n,
                                                  std::size_t buckets) {
  if (generations.empty()) throw Error("repetition_position_hist: no generations");
  if (buckets == 0) throw Error("repetition_position_hist: zero buckets");
  PositionHistogram h;
  h.counts.assign(buckets, 0);
  for (const auto& g : generations) {
    const auto grams = ngrams(g, n);
    std::set<Ngram> seen;
    for (std::size_t i = 0; i < grams.size(); ++i) {
      if (seen.insert(grams[i]).second) continue;
      const double rel = static_cast<double>(i) / static_cast<double>(grams.size());
      auto b = static_cast<std::size_t>(rel * static_cast<double>(buckets));
      ++h.counts[std::min(b, buckets - 1)];
      ++h.total;
    }
  }
  h.density.assign(buckets, 0.0);
  if (h.total > 0)
    for (std::size_t b = 0; b < buckets; ++b)
      h.density[b] = static_cast<double>(h.counts[b]) / static_cast<double>(h.total);
  return h;
}

// Distribution measures of one set of summaries.
struct Measures {
  double len = 0;
  std::optional<double> nov1, nov3;  // absent when not source-aware
  std::optional<double> rep1, rep3;
};

struct MetricReport {
  std::string system;
  Measures model;
  std::optional<Measures> human;
  // Overlap with references, x100.
  double bleu1 = 0;
  double rouge1 = 0;
  double rouge1_recall = 0;
  double rougeL = 0;
  double rougeL_recall = 0;

  std::optional<double> d_len() const { return human ? std::optional(delta(human->len, model.len)) : std::nullopt; }
  static std::optional<double> diff(const std::optional<double>& h, const std::optional<double>& m) {
    if (!h || !m) return std::nullopt;
    return delta(*h, *m);
  }
  std::optional<double> d_nov1() const { return human ? diff(human->nov1, model.nov1) : std::nullopt; }
  std::optional<double> d_nov3() const { return human ? diff(human->nov3, model.nov3) : std::nullopt; }
  std::optional<double> d_rep1() const { return human ? diff(human->rep1, model.rep1) : std::nullopt; }
  std::optional<double> d_rep3() const { return human ? diff(human->rep3, model.rep3) : std::nullopt; }
};

struct EvalOptions {
  bool source_aware = true;
  bool pooled = false;      // pool nov/rep counts over the corpus instead of averaging per summary
  bool micro_bleu = false;  // corpus-level BLEU-1 from summed counts
};

inline Measures summary_measures(const std::vector<TokenSeq>& summaries, const std::vector<const TokenSeq*>& sources,
                                 const EvalOptions& opt) {
  Measures m;
  if (summaries.empty()) throw Error("summary_measures: empty input");
  struct Acc {
    double sum = 0;
    long n = 0;
    double num = 0, den = 0;  // pooled
    void add_macro(std::optional<double> v) {
      if (v) sum += *v, ++n;
    }
    std::optional<double> get(bool pooled) const {
      if (pooled) return den > 0 ? std::optional(100.0 * num / den) : std::nullopt;
      return n > 0 ? std::optional(sum / static_cast<double>(n)) : std::nullopt;
    }
  };
  Acc nov[2], rep[2];
  const int ns[2] = {1, 3};
  for (std::size_t i = 0; i < summaries.size(); ++i) {
    const auto& s = summaries[i];
    m.len += static_cast<double>(s.size());
    for (int k = 0; k < 2; ++k) {
      const int n = ns[k];
      const auto grams = ngrams(s, n);
      rep[k].add_macro(repetition_n(s, n));
      const std::set<Ngram> types(grams.begin(), grams.end());
      rep[k].num += static_cast<double>(grams.size() - types.size());
      rep[k].den += static_cast<double>(grams.size());
      if (opt.source_aware) {
        const auto& src = *sources.at(i);
        nov[k].add_macro(novelty_n(s, src, n));
        const auto sg = ngrams(src, n);
        const std::set<Ngram> sset(sg.begin(), sg.end());
        for (const auto& g : grams) nov[k].num += sset.count(g) ? 0.0 : 1.0;
        nov[k].den += static_cast<double>(grams.size());
      }
    }
  }
  m.len /= static_cast<double>(summaries.size());
  m.rep1 = rep[0].get(opt.pooled);
  m.rep3 = rep[1].get(opt.pooled);
  if (opt.source_aware) {
    m.nov1 = nov[0].get(opt.pooled);
    m.nov3 = nov[1].get(opt.pooled);
  }
  return m;
}

// Scores generations (id -> tokens) against the corpus references.
inline MetricReport evaluate_system(const std::string& system, const std::map<std::string, TokenSeq>& generations,
                                    const Corpus& corpus, const EvalOptions& opt = {}) {
  if (corpus.empty()) throw Error("evaluate_system: empty corpus");
  std::string missing;
  for (const auto& p : corpus.pairs)
    if (!generations.count(p.id)) missing += (missing.empty() ? "" : ", ") + p.id;
  if (!missing.empty()) throw Error("evaluate_system: missing generations for ids: " + missing);

  std::vector<TokenSeq> hyps, refs;
  std::vector<const TokenSeq*> sources;
  for (const auto& p : corpus.pairs) {
    hyps.push_back(strip_reserved(generations.at(p.id)));
    refs.push_back(p.reference);
    sources.push_back(&p.source);
  }
  MetricReport r;
  r.system = system;
  r.model = summary_measures(hyps, sources, opt);
  r.human = summary_measures(refs, sources, opt);

  double clipped = 0, hyp_len = 0, ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const auto& h = hyps[i];
    const auto& ref = refs[i];
    if (h.empty()) continue;  // empty output scores 0 on every overlap measure
    r.bleu1 += bleu1(h, ref);
    const auto r1 = rouge1(h, ref);
    const auto rl = rougeL(h, ref);
    r.rouge1 += r1.f1;
    r.rouge1_recall += r1.recall;
    r.rougeL += rl.f1;
    r.rougeL_recall += rl.recall;
    clipped += static_cast<double>(detail::clipped_overlap(h, ref));
    hyp_len += static_cast<double>(h.size());
    ref_len += static_cast<double>(ref.size());
  }
  const double n = static_cast<double>(hyps.size());
  r.bleu1 = 100.0 * r.bleu1 / n;
  if (opt.micro_bleu)
    r.bleu1 = hyp_len > 0 ? 100.0 * clipped / hyp_len * std::exp(std::min(0.0, 1.0 - ref_len / hyp_len)) : 0.0;
  r.rouge1 = 100.0 * r.rouge1 / n;
  r.rouge1_recall = 100.0 * r.rouge1_recall / n;
  r.rougeL = 100.0 * r.rougeL / n;
  r.rougeL_recall = 100.0 * r.rougeL_recall / n;
  return r;
}

namespace detail {
inline std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << *v;
  return os.str();
}
inline nlohmann::json json_opt(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}
}  // namespace detail

inline std::string report_csv(const std::vector<MetricReport>& reports) {
  using detail::fmt_opt;
  std::string out =
      "system,len,nov1,nov3,rep1,rep3,bleu1,rouge1,rouge1_recall,rougeL,rougeL_recall,d_len,d_nov1,d_nov3,d_rep1,"
      "d_rep3\n";
  auto row = [&](const std::string& name, const Measures& m, const MetricReport* r) {
    out += name + "," + fmt_opt(m.len) + "," + fmt_opt(m.nov1) + "," + fmt_opt(m.nov3) + "," + fmt_opt(m.rep1) +
           "," + fmt_opt(m.rep3);
    if (r) {
      out += "," + fmt_opt(r->bleu1) + "," + fmt_opt(r->rouge1) + "," + fmt_opt(r->rouge1_recall) + "," +
             fmt_opt(r->rougeL) + "," + fmt_opt(r->rougeL_recall) + "," + fmt_opt(r->d_len()) + "," +
             fmt_opt(r->d_nov1()) + "," + fmt_opt(r->d_nov3()) + "," + fmt_opt(r->d_rep1()) + "," +
             fmt_opt(r->d_rep3());
    } else {
      out += ",NA,NA,NA,NA,NA,0.000000,0.000000,0.000000,0.000000,0.000000";
    }
    out += "\n";
  };
  if (!reports.empty() && reports.front().human) row("human", *reports.front().human, nullptr);
  for (const auto& r : reports) row(r.system, r.model, &r);
  return out;
}

inline nlohmann::json report_json(const std::vector<MetricReport>& reports) {
  using detail::json_opt;
  auto measures = [](const Measures& m) {
    return nlohmann::json{{"len", m.len},
                          {"nov1", json_opt(m.nov1)},
                          {"nov3", json_opt(m.nov3)},
                          {"rep1", json_opt(m.rep1)},
                          {"rep3", json_opt(m.rep3)}};
  };
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : reports) {
    nlohmann::json j = {{"system", r.system},
                        {"model", measures(r.model)},
                        {"bleu1", r.bleu1},
                        {"rouge1", r.rouge1},
                        {"rouge1_recall", r.rouge1_recall},
                        {"rougeL", r.rougeL},
                        {"rougeL_recall", r.rougeL_recall}};
    if (r.human) {
      j["human"] = measures(*r.human);
      j["delta"] = {{"len", json_opt(r.d_len())},   {"nov1", json_opt(r.d_nov1())}, {"nov3", json_opt(r.d_nov3())},
                    {"rep1", json_opt(r.d_rep1())}, {"rep3", json_opt(r.d_rep3())}};
    }
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace das
