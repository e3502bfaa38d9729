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

// Discriminator self-retraining: decode with the current discriminator,
// rebuild the generated prefix set from those outputs, train the next
// discriminator. The generator is only ever read.

#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "das/corpus.hpp"
#include "das/decoder.hpp"
#include "das/discriminator.hpp"
#include "das/generator.hpp"
#include "das/metrics.hpp"

namespace das {

struct DiscSettings {
  std::size_t d_hash = 1u << 16;
  bool use_source = true;
  DiscHyper hyper;
  double generated_ratio = 1.0;
};

struct SelfTrainConfig {
  int max_iters = 3;
  double tau_acc = 0.55;
  std::optional<double> tau_delta;  // default 0.01 * T_max
  bool warm_start = false;
  bool replay = false;
  int jobs = 1;
};

struct IterationRecord {
  int iteration = 0;
  // Accuracy of discriminator k on validation references vs. the validation
  // generations it was trained to reject (those of discriminator k-1).
  double val_accuracy = 0.0;
  // DAS decoding with discriminator k on the validation split.
  MetricReport report;

  double summed_abs_delta() const {
    return std::abs(report.d_len().value_or(0.0)) + std::abs(report.d_nov1().value_or(0.0)) +
           std::abs(report.d_rep3().value_or(0.0));
  }
};

enum class StopReason { kNone, kAccuracy, kDelta, kMaxIters };

inline std::string_view stop_reason_name(StopReason r) {
  switch (r) {
    case StopReason::kNone: return "none";
    case StopReason::kAccuracy: return "accuracy";
    case StopReason::kDelta: return "delta";
    case StopReason::kMaxIters: return "max_iters";
  }
  return "none";
}

struct SelfTrainState {
  int iteration = 0;
  DiscriminatorModel discriminator;
  std::vector<DecodeRecord> last_records;                         // training split, produced by discriminator k-1
  std::vector<DecodeRecord> val_records;                          // validation split, produced by discriminator k
  std::vector<std::map<std::string, TokenSeq>> past_generations;  // for replay
  std::vector<IterationRecord> history;
  StopReason stop_reason = StopReason::kNone;
  // Retrained discriminator (k >= 1) with the smallest validation summed |delta|.
  int best_iteration = 0;
  std::optional<DiscriminatorModel> best_discriminator;
};

// The discriminator-training split and a held-out split for fresh
// generations. Both must be distinct from the generator's training data.
struct SelfTrainData {
  const Corpus& train;
  const Corpus& validation;
};

// Called after bootstrap and after every step, e.g. to persist iter_k/.
using IterationHook = std::function<void(const SelfTrainState&)>;

namespace detail {

inline FeatureConfig feature_config(const DiscSettings& s, int t_max) {
  FeatureConfig cfg;
  cfg.d_hash = s.d_hash;
  cfg.use_source = s.use_source;
  cfg.t_max = t_max;
  return cfg;
}

inline DiscriminatorModel fit(const Corpus& corpus, const std::vector<std::map<std::string, TokenSeq>>& gsets,
                              const DiscSettings& s, int t_max, const DiscriminatorModel* warm) {
  PrefixSets sets;
  for (std::size_t i = 0; i < gsets.size(); ++i) {
    PrefixSets part = build_prefix_sets(corpus, gsets[i], t_max);
    if (i == 0) sets.human = std::move(part.human);
    for (auto& ex : part.generated) sets.generated.push_back(std::move(ex));
  }
  rebalance(sets, s.generated_ratio, derive_seed(s.hyper.seed, "rebalance"));
  return train_discriminator(sets, feature_config(s, t_max), corpus.vocab->size(), s.hyper, warm);
}

// Scores discriminator k and decodes the validation split with it.
inline void close_iteration(SelfTrainState& state, const std::vector<DecodeRecord>& rejected,
                            const SelfTrainData& data, const GeneratorModel& generator, const SearchConfig& search,
                            int jobs) {
  IterationRecord rec;
  rec.iteration = state.iteration;
  const PrefixSets sets = build_prefix_sets(data.validation, generations_map(rejected), search.t_max);
  rec.val_accuracy = overall_accuracy(state.discriminator, sets.human, sets.generated);
  state.val_records = decode_corpus(generator, &state.discriminator, data.validation, search, jobs);
  rec.report = evaluate_system("iter_" + std::to_string(state.iteration), generations_map(state.val_records),
                               data.validation);
  state.history.push_back(std::move(rec));
  if (state.iteration >= 1 &&
      (state.best_iteration == 0 ||
       state.history.back().summed_abs_delta() <
           state.history[static_cast<std::size_t>(state.best_iteration)].summed_abs_delta())) {
    state.best_iteration = state.iteration;
    state.best_discriminator = state.discriminator;
  }
}

}  // namespace detail

// Iteration 0: plain beam search outputs (alpha = 0) form G_0.
inline SelfTrainState bootstrap(const SelfTrainData& data, const GeneratorModel& generator, const SearchConfig& search,
                                const DiscSettings& settings, int jobs = 1) {
  SearchConfig plain = search;
  plain.alpha = 0.0;
  SelfTrainState state;
  state.last_records = decode_corpus(generator, nullptr, data.train, plain, jobs);
  const auto gens = generations_map(state.last_records);
  state.discriminator = detail::fit(data.train, {gens}, settings, search.t_max, nullptr);
  state.past_generations.push_back(gens);
  const auto val_plain = decode_corpus(generator, nullptr, data.validation, plain, jobs);
  detail::close_iteration(state, val_plain, data, generator, search, jobs);
  return state;
}

inline SelfTrainState self_train_step(SelfTrainState state, const SelfTrainData& data, const GeneratorModel& generator,
                                      const SearchConfig& search, const DiscSettings& settings,
                                      const SelfTrainConfig& cfg) {
  if (search.alpha <= 0.0) throw Error("self_train_step: alpha must be > 0");
  state.last_records = decode_corpus(generator, &state.discriminator, data.train, search, cfg.jobs);
  auto gens = generations_map(state.last_records);
  std::vector<std::map<std::string, TokenSeq>> gsets;
  if (cfg.replay) gsets = state.past_generations;
  gsets.push_back(gens);
  state.discriminator = detail::fit(data.train, gsets, settings, search.t_max,
                                    cfg.warm_start ? &state.discriminator : nullptr);
  state.past_generations.push_back(std::move(gens));
  state.iteration += 1;
  const auto rejected = std::move(state.val_records);
  detail::close_iteration(state, rejected, data, generator, search, cfg.jobs);
  return state;
}

// Steps until the new discriminator is fooled (accuracy below tau_acc), the
// validation summed |dlen| + |dnov-1| + |drep-3| improves by less than
// tau_delta, or max_iters steps ran.
inline SelfTrainState run_until_convergence(SelfTrainState state, const SelfTrainData& data,
                                            const GeneratorModel& generator, const SearchConfig& search,
                                            const DiscSettings& settings, const SelfTrainConfig& cfg,
                                            const IterationHook& hook = {}) {
  if (cfg.max_iters < 1) throw Error("run_until_convergence: max_iters must be >= 1");
  const double tau_delta = cfg.tau_delta.value_or(0.01 * search.t_max);
  for (int k = 0; k < cfg.max_iters; ++k) {
    state = self_train_step(std::move(state), data, generator, search, settings, cfg);
    if (hook) hook(state);
    const auto& cur = state.history.back();
    const auto& prev = state.history[state.history.size() - 2];
    if (cur.val_accuracy < cfg.tau_acc) {
      state.stop_reason = StopReason::kAccuracy;
      return state;
    }
    if (prev.summed_abs_delta() - cur.summed_abs_delta() < tau_delta) {
      state.stop_reason = StopReason::kDelta;
      return state;
    }
  }
  state.stop_reason = StopReason::kMaxIters;
  return state;
}

inline std::string history_csv(const std::vector<IterationRecord>& history) {
  using detail::fmt_opt;
  std::string out = "iteration,val_accuracy,d_len,d_nov1,d_nov3,d_rep1,d_rep3,bleu1,rouge1,rougeL\n";
  for (const auto& h : history) {
    const auto& r = h.report;
    out += std::to_string(h.iteration) + "," + fmt_opt(h.val_accuracy) + "," + fmt_opt(r.d_len()) + "," +
           fmt_opt(r.d_nov1()) + "," + fmt_opt(r.d_nov3()) + "," + fmt_opt(r.d_rep1()) + "," + fmt_opt(r.d_rep3()) +
           "," + fmt_opt(r.bleu1) + "," + fmt_opt(r.rouge1) + "," + fmt_opt(r.rougeL) + "\n";
  }
  return out;
}

// Writes iter_k/{generations.jsonl, discriminator.model, history.csv}.
inline void write_iteration(const SelfTrainState& state, const std::filesystem::path& run_dir) {
  const auto dir = run_dir / ("iter_" + std::to_string(state.iteration));
  std::filesystem::create_directories(dir);
  write_file((dir / "generations.jsonl").string(), generations_jsonl(state.last_records));
  state.discriminator.save((dir / "discriminator.model").string());
  write_file((dir / "history.csv").string(), history_csv(state.history));
}

}  // namespace das
