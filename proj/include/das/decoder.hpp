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

// Beam search with discriminator re-ranking.
//
// Each step expands every unfinished hypothesis by every token, carries ended
// hypotheses unchanged, keeps the k_rerank best by S_gen, scores those with the
// discriminator, and keeps the beam best by S_DAS = S_gen + alpha * log D.
// Ended hypotheses compete in both filters with their frozen scores.
//
// Ordering everywhere: primary score descending, then higher S_gen, then
// lexicographically smaller token ids.

#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "das/common.hpp"
#include "das/corpus.hpp"
#include "das/discriminator.hpp"
#include "das/generator.hpp"
#include "json.hpp"

namespace das {

struct Hypothesis {
  TokenSeq tokens{kSos};
  double s_gen = 0.0;
  std::optional<double> s_dis;
  std::optional<double> s_das;
  bool ended = false;
  bool truncated = false;    // EOS was forced at the length limit
  bool dis_floored = false;  // discriminator returned 0 and was clamped

  // Summary ids without SOS and EOS.
  TokenSeq content() const { return strip_reserved(tokens); }
};

struct SearchRules {
  std::optional<double> length_penalty;  // beta; final ranking uses S / lp
  bool block_repeated_trigrams = false;
};

enum class FinalPick { kBestDas, kBestGen };

struct SearchConfig {
  int beam = 5;
  int k_rerank = 10;
  double alpha = 1.0;
  int t_max = 140;  // maximum number of summary tokens before EOS
  SearchRules rules;
  FinalPick pick = FinalPick::kBestDas;
  double dis_floor = 1e-9;
};

inline void validate_search_config(const SearchConfig& c, std::size_t vocab_size) {
  if (c.beam < 1) throw ValidationError("search: beam must be >= 1");
  if (c.k_rerank < c.beam) throw ValidationError("search: k_rerank must be >= beam");
  if (static_cast<std::size_t>(c.k_rerank) > vocab_size * static_cast<std::size_t>(c.beam))
    throw ValidationError("search: k_rerank must be <= |V| * beam");
  if (!(c.alpha >= 0.0) || !std::isfinite(c.alpha)) throw ValidationError("search: alpha must be finite and >= 0");
  if (c.t_max < 1) throw ValidationError("search: t_max must be >= 1");
  if (!(c.dis_floor > 0.0 && c.dis_floor < 1.0)) throw ValidationError("search: dis_floor must be in (0,1)");
  if (c.rules.length_penalty && !std::isfinite(*c.rules.length_penalty))
    throw ValidationError("search: length penalty must be finite");
}

// S_gen(y_1:t) = S_gen(y_1:t-1) + log P(y_t | x, y_1:t-1).
inline Hypothesis s_gen_extend(const Hypothesis& h, TokenId token, double logp) {
  if (h.ended) throw Error("cannot extend an ended hypothesis");
  Hypothesis out;
  out.tokens = h.tokens;
  out.tokens.push_back(token);
  out.s_gen = h.s_gen + logp;
  out.ended = token == kEos;
  return out;
}

// Sets S_dis = log(dis_prob) and S_DAS = S_gen + alpha * S_dis. A zero
// probability is clamped to `floor` and flagged.
inline Hypothesis with_das_score(Hypothesis h, double alpha, double dis_prob, double floor = 1e-9) {
  if (!(dis_prob >= 0.0 && dis_prob <= 1.0)) throw Error("discriminator probability outside [0,1]");
  if (dis_prob < floor) {
    h.dis_floored = dis_prob == 0.0 || h.dis_floored;
    dis_prob = floor;
  }
  h.s_dis = std::log(dis_prob);
  h.s_das = h.s_gen + alpha * *h.s_dis;
  return h;
}

// False iff appending `candidate` recreates a trigram already in h.tokens.
inline bool apply_trigram_block(std::span<const TokenId> tokens, TokenId candidate) {
  const std::size_t n = tokens.size();
  if (n < 2) return true;
  const TokenId a = tokens[n - 2], b = tokens[n - 1];
  for (std::size_t i = 0; i + 2 < n; ++i)
    if (tokens[i] == a && tokens[i + 1] == b && tokens[i + 2] == candidate) return false;
  return true;
}
inline bool apply_trigram_block(const Hypothesis& h, TokenId candidate) { return apply_trigram_block(h.tokens, candidate); }

// ((5 + length)^beta) / (6^beta).
inline double length_penalty(int length, double beta) {
  if (length < 1) throw Error("length_penalty: length must be >= 1");
  return std::pow(5.0 + length, beta) / std::pow(6.0, beta);
}

struct StepTrace {
  std::vector<TokenSeq> candidates;
  std::vector<TokenSeq> pool;       // after the k_rerank S_gen filter
  std::vector<TokenSeq> survivors;  // after the beam S_DAS filter
};

struct SearchTrace {
  std::vector<StepTrace> steps;
};

struct SearchResult {
  std::vector<Hypothesis> ranked;  // best first
  int steps = 0;
  int floored_scores = 0;

  const Hypothesis& best() const { return ranked.front(); }
};

namespace detail {

inline bool lex_less(const TokenSeq& a, const TokenSeq& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

inline double final_key(const Hypothesis& h, const SearchConfig& cfg) {
  double s = cfg.pick == FinalPick::kBestDas ? h.s_das.value_or(h.s_gen) : h.s_gen;
  if (cfg.rules.length_penalty) {
    const int len = std::max<int>(1, static_cast<int>(h.content().size()));
    s /= length_penalty(len, *cfg.rules.length_penalty);
  }
  return s;
}

// Candidate before materialization: parent index into the beam plus token.
struct Candidate {
  int parent;
  TokenId token;  // -1 for a carried ended hypothesis
  double s_gen;
};

}  // namespace detail

// Runs the search. `discriminator` may be null only when alpha == 0; with
// alpha == 0 the discriminator is not consulted at all.
inline SearchResult das_beam_search(const GeneratorModel& generator, const DiscriminatorModel* discriminator,
                                    std::span<const TokenId> source, const SearchConfig& cfg,
                                    SearchTrace* trace = nullptr) {
  if (source.empty()) throw Error("das_beam_search: empty source");
  const std::size_t vsize = generator.vocab_size();
  validate_search_config(cfg, vsize);
  const bool use_dis = cfg.alpha > 0.0;
  if (use_dis && !discriminator) throw Error("das_beam_search: discriminator required when alpha > 0");
  std::optional<SourceContext> src_ctx;
  if (use_dis) src_ctx.emplace(source);

  SearchResult result;
  std::vector<Hypothesis> beam(1);
  beam[0].s_das = 0.0;

  for (int t = 1; t <= cfg.t_max + 1; ++t) {
    const bool forced = t == cfg.t_max + 1;
    std::vector<detail::Candidate> cands;
    for (int i = 0; i < static_cast<int>(beam.size()); ++i) {
      const Hypothesis& h = beam[static_cast<std::size_t>(i)];
      if (h.ended) {
        cands.push_back({i, -1, h.s_gen});
        continue;
      }
      const auto logp = generator.next_logprobs(source, h.tokens);
      for (std::size_t v = 0; v < vsize; ++v) {
        const auto tok = static_cast<TokenId>(v);
        if (tok == kSos || tok == kUnk) continue;
        if (forced && tok != kEos) continue;
        if (cfg.rules.block_repeated_trigrams && !apply_trigram_block(h.tokens, tok)) continue;
        cands.push_back({i, tok, h.s_gen + logp[v]});
      }
    }
    if (cands.empty()) throw Error("das_beam_search: no admissible candidates");

    // Lexicographic comparison of the sequences the candidates denote.
    auto seq_less = [&](const detail::Candidate& a, const detail::Candidate& b) {
      const TokenSeq& pa = beam[static_cast<std::size_t>(a.parent)].tokens;
      const TokenSeq& pb = beam[static_cast<std::size_t>(b.parent)].tokens;
      const std::size_t la = pa.size() + (a.token >= 0), lb = pb.size() + (b.token >= 0);
      auto at = [](const TokenSeq& p, const detail::Candidate& c, std::size_t k) {
        return k < p.size() ? p[k] : c.token;
      };
      for (std::size_t k = 0; k < std::min(la, lb); ++k) {
        const TokenId x = at(pa, a, k), y = at(pb, b, k);
        if (x != y) return x < y;
      }
      return la < lb;
    };
    auto gen_order = [&](const detail::Candidate& a, const detail::Candidate& b) {
      if (a.s_gen != b.s_gen) return a.s_gen > b.s_gen;
      return seq_less(a, b);
    };
    const std::size_t k = std::min(cands.size(), static_cast<std::size_t>(cfg.k_rerank));
    if (trace) {
      trace->steps.emplace_back();
      for (const auto& c : cands) {
        TokenSeq s = beam[static_cast<std::size_t>(c.parent)].tokens;
        if (c.token >= 0) s.push_back(c.token);
        trace->steps.back().candidates.push_back(std::move(s));
      }
    }
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(k), cands.end(), gen_order);
    cands.resize(k);

    std::vector<Hypothesis> pool;
    pool.reserve(k);
    for (const auto& c : cands) {
      const Hypothesis& parent = beam[static_cast<std::size_t>(c.parent)];
      if (c.token < 0) {
        pool.push_back(parent);
        continue;
      }
      Hypothesis h = s_gen_extend(parent, c.token, c.s_gen - parent.s_gen);
      h.s_gen = c.s_gen;
      h.truncated = forced;
      if (use_dis) {
        const double d = discriminator->score_prefix(*src_ctx, std::span<const TokenId>(h.tokens).subspan(1));
        h = with_das_score(std::move(h), cfg.alpha, d, cfg.dis_floor);
        if (h.dis_floored) ++result.floored_scores;
      } else {
        h.s_das = h.s_gen;
      }
      pool.push_back(std::move(h));
    }
    if (trace)
      for (const auto& h : pool) trace->steps.back().pool.push_back(h.tokens);

    auto das_order = [](const Hypothesis& a, const Hypothesis& b) {
      if (*a.s_das != *b.s_das) return *a.s_das > *b.s_das;
      if (a.s_gen != b.s_gen) return a.s_gen > b.s_gen;
      return detail::lex_less(a.tokens, b.tokens);
    };
    const std::size_t b = std::min(pool.size(), static_cast<std::size_t>(cfg.beam));
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(b), pool.end(), das_order);
    pool.resize(b);
    beam = std::move(pool);
    if (trace)
      for (const auto& h : beam) trace->steps.back().survivors.push_back(h.tokens);
    result.steps = t;
    if (std::all_of(beam.begin(), beam.end(), [](const Hypothesis& h) { return h.ended; })) break;
  }

  std::vector<std::pair<double, std::size_t>> keyed;
  for (std::size_t i = 0; i < beam.size(); ++i) keyed.emplace_back(detail::final_key(beam[i], cfg), i);
  std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    const auto& ha = beam[a.second];
    const auto& hb = beam[b.second];
    if (ha.s_gen != hb.s_gen) return ha.s_gen > hb.s_gen;
    return detail::lex_less(ha.tokens, hb.tokens);
  });
  for (const auto& [key, i] : keyed) result.ranked.push_back(beam[i]);
  return result;
}

// The same search without the discriminator filter; best S_gen wins.
inline SearchResult plain_beam_search(const GeneratorModel& generator, std::span<const TokenId> source,
                                      SearchConfig cfg, SearchTrace* trace = nullptr) {
  cfg.alpha = 0.0;
  cfg.k_rerank = std::max(cfg.k_rerank, cfg.beam);
  return das_beam_search(generator, nullptr, source, cfg, trace);
}

struct OracleResult {
  Hypothesis best;
  std::size_t evaluated = 0;
};

// Enumerates every EOS-terminated sequence with at most t_max tokens from
// `vocab_subset` and returns the argmax of S_DAS (ties: higher S_gen, then
// lexicographic ids).
inline OracleResult exhaustive_oracle(const GeneratorModel& generator, const DiscriminatorModel* discriminator,
                                      std::span<const TokenId> source, double alpha, int t_max,
                                      const std::vector<TokenId>& vocab_subset, double dis_floor = 1e-9) {
  if (source.empty()) throw Error("exhaustive_oracle: empty source");
  if (alpha > 0.0 && !discriminator) throw Error("exhaustive_oracle: discriminator required when alpha > 0");
  double budget = std::pow(static_cast<double>(vocab_subset.size()), t_max);
  if (budget > 1e6) throw Error("exhaustive_oracle: enumeration budget exceeded");
  for (TokenId v : vocab_subset)
    if (v == kSos || v == kEos) throw Error("exhaustive_oracle: reserved id in vocabulary subset");
  std::optional<SourceContext> ctx;
  if (alpha > 0.0) ctx.emplace(source);

  OracleResult out;
  bool have = false;
  auto consider = [&](Hypothesis h) {
    if (alpha > 0.0) {
      const double d = discriminator->score_prefix(*ctx, std::span<const TokenId>(h.tokens).subspan(1));
      h = with_das_score(std::move(h), alpha, d, dis_floor);
    } else {
      h.s_das = h.s_gen;
    }
    ++out.evaluated;
    const auto& b = out.best;
    const bool better = !have || *h.s_das > *b.s_das ||
                        (*h.s_das == *b.s_das && (h.s_gen > b.s_gen || (h.s_gen == b.s_gen && detail::lex_less(h.tokens, b.tokens))));
    if (better) out.best = std::move(h), have = true;
  };
  std::function<void(const Hypothesis&, int)> walk = [&](const Hypothesis& h, int depth) {
    const auto logp = generator.next_logprobs(source, h.tokens);
    consider(s_gen_extend(h, kEos, logp[static_cast<std::size_t>(kEos)]));
    if (depth == t_max) return;
    for (TokenId v : vocab_subset) walk(s_gen_extend(h, v, logp[static_cast<std::size_t>(v)]), depth + 1);
  };
  walk(Hypothesis{}, 0);
  return out;
}

// ---------------------------------------------------------------------------
// Corpus decoding and the generations file.

struct DecodeRecord {
  std::string id;
  TokenSeq tokens;  // summary ids, no SOS/EOS
  std::string text;
  double s_gen = 0;
  std::optional<double> s_dis;
  double s_das = 0;
  int steps = 0;
  bool truncated = false;
};

inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto workers = static_cast<std::size_t>(std::max(1, jobs));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// Decodes every pair in corpus order. A null discriminator (or alpha == 0)
// gives plain beam search.
inline std::vector<DecodeRecord> decode_corpus(const GeneratorModel& generator, const DiscriminatorModel* discriminator,
                                               const Corpus& corpus, const SearchConfig& cfg, int jobs = 1) {
  std::vector<DecodeRecord> out(corpus.size());
  parallel_for(corpus.size(), jobs, [&](std::size_t i) {
    const auto& p = corpus.pairs[i];
    const SearchResult r = discriminator && cfg.alpha > 0.0
                               ? das_beam_search(generator, discriminator, p.source, cfg)
                               : plain_beam_search(generator, p.source, cfg);
    const Hypothesis& h = r.best();
    DecodeRecord rec;
    rec.id = p.id;
    rec.tokens = h.content();
    rec.text = corpus.vocab->to_text(rec.tokens);
    rec.s_gen = h.s_gen;
    rec.s_dis = h.s_dis;
    rec.s_das = h.s_das.value_or(h.s_gen);
    rec.steps = r.steps;
    rec.truncated = h.truncated;
    out[i] = std::move(rec);
  });
  return out;
}

inline std::map<std::string, TokenSeq> generations_map(const std::vector<DecodeRecord>& records) {
  std::map<std::string, TokenSeq> m;
  for (const auto& r : records) m[r.id] = r.tokens;
  return m;
}

inline std::string generations_jsonl(const std::vector<DecodeRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["tokens"] = r.tokens;
    j["text"] = r.text;
    j["s_gen"] = r.s_gen;
    j["s_dis"] = r.s_dis ? nlohmann::ordered_json(*r.s_dis) : nlohmann::ordered_json(nullptr);
    j["s_das"] = r.s_das;
    j["steps"] = r.steps;
    j["truncated"] = r.truncated;
    out += j.dump();
    out.push_back('\n');
  }
  return out;
}

inline std::vector<DecodeRecord> read_generations(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<DecodeRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      DecodeRecord r;
      r.id = j.at("id").get<std::string>();
      r.tokens = j.at("tokens").get<TokenSeq>();
      r.text = j.value("text", "");
      r.s_gen = j.value("s_gen", 0.0);
      if (j.contains("s_dis") && !j["s_dis"].is_null()) r.s_dis = j["s_dis"].get<double>();
      r.s_das = j.value("s_das", r.s_gen);
      r.steps = j.value("steps", 0);
      r.truncated = j.value("truncated", false);
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error("malformed generation record at line " + std::to_string(line_no) + " of " + path);
    }
  }
  return out;
}

}  // namespace das
