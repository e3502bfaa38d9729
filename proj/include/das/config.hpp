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

// Run configuration: an INI file with sections, overridable from flags.

#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "das/common.hpp"
#include "das/corpus.hpp"
#include "das/decoder.hpp"
#include "das/metrics.hpp"
#include "das/selftrain.hpp"

namespace das {

struct PathsConfig {
  std::string train;
  std::string validation;
  std::string test;
  std::string vocab;
  std::string generator;
  std::string discriminator;
  std::string out_dir = "runs";
};

struct GeneratorConfig {
  int order = 3;
  double kappa = 0.01;
  double lambda_copy = 0.2;
  int min_count = 1;
};

struct DiscriminatorConfig {
  std::size_t d_hash = 1u << 16;
  int epochs = 5;
  double learning_rate = 0.1;
  bool use_source = true;
  double generated_ratio = 1.0;
  std::optional<std::uint64_t> seed;  // derived from the master seed when unset
  std::vector<int> buckets = {1, 2, 5, 10, 20, 40, 60, 80, 100, 120, 140};
};

struct SweepConfig {
  std::vector<int> k_rerank = {1, 5, 10};
  std::vector<double> alpha = {0.0, 0.5, 1.0, 5.0};
  int subset_size = 1000;
  int repetitions = 3;
};

struct SynthConfig {
  int n_train = 2000;
  int n_validation = 500;
  int n_test = 500;
  SynthProfile profile;
};

struct RunConfig {
  std::uint64_t seed = 1;
  PathsConfig paths;
  GeneratorConfig generator;
  DiscriminatorConfig discriminator;
  SearchConfig search;
  SelfTrainConfig selftrain;
  EvalOptions metrics;
  SweepConfig sweep;
  SynthConfig synth;
  int jobs = 1;

  std::uint64_t component_seed(std::string_view component) const { return derive_seed(seed, component); }

  DiscSettings disc_settings() const {
    DiscSettings s;
    s.d_hash = discriminator.d_hash;
    s.use_source = discriminator.use_source;
    s.generated_ratio = discriminator.generated_ratio;
    s.hyper.epochs = discriminator.epochs;
    s.hyper.learning_rate = discriminator.learning_rate;
    s.hyper.seed = discriminator.seed.value_or(component_seed("discriminator"));
    return s;
  }
};

namespace config_detail {

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

template <class T>
std::vector<T> split_list(const std::string& text, const std::string& key) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::istringstream is(item);
    T v;
    if (!(is >> v) || !(is >> std::ws).eof()) throw ValidationError("config: bad list value for " + key + ": " + item);
    out.push_back(v);
  }
  return out;
}

inline std::string fmt(double v) { return format_double(v); }
inline std::string fmt(bool v) { return v ? "true" : "false"; }

inline bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValidationError("config: " + key + " must be a boolean, got '" + v + "'");
}

template <class T>
T parse_num(const std::string& v, const std::string& key) {
  std::istringstream is(v);
  T out;
  if (!(is >> out) || !(is >> std::ws).eof()) throw ValidationError("config: bad value for " + key + ": '" + v + "'");
  return out;
}

}  // namespace config_detail

// Sets one "section.key" value. Used by the file parser and by --set.
inline void set_config_value(RunConfig& c, const std::string& key, const std::string& v) {
  using namespace config_detail;
  auto num_i = [&] { return parse_num<long long>(v, key); };
  auto num_d = [&] { return parse_num<double>(v, key); };
  auto flag = [&] { return parse_bool(v, key); };
  if (key == "seed") c.seed = parse_num<std::uint64_t>(v, key);
  else if (key == "jobs") c.jobs = static_cast<int>(num_i());
  else if (key == "paths.train") c.paths.train = v;
  else if (key == "paths.validation") c.paths.validation = v;
  else if (key == "paths.test") c.paths.test = v;
  else if (key == "paths.vocab") c.paths.vocab = v;
  else if (key == "paths.generator") c.paths.generator = v;
  else if (key == "paths.discriminator") c.paths.discriminator = v;
  else if (key == "paths.out_dir") c.paths.out_dir = v;
  else if (key == "generator.order") c.generator.order = static_cast<int>(num_i());
  else if (key == "generator.kappa") c.generator.kappa = num_d();
  else if (key == "generator.lambda_copy") c.generator.lambda_copy = num_d();
  else if (key == "generator.min_count") c.generator.min_count = static_cast<int>(num_i());
  else if (key == "discriminator.d_hash") c.discriminator.d_hash = static_cast<std::size_t>(num_i());
  else if (key == "discriminator.epochs") c.discriminator.epochs = static_cast<int>(num_i());
  else if (key == "discriminator.learning_rate") c.discriminator.learning_rate = num_d();
  else if (key == "discriminator.use_source") c.discriminator.use_source = flag();
  else if (key == "discriminator.generated_ratio") c.discriminator.generated_ratio = num_d();
  else if (key == "discriminator.seed") {
    if (v == "auto") c.discriminator.seed.reset();
    else c.discriminator.seed = parse_num<std::uint64_t>(v, key);
  } else if (key == "discriminator.buckets") c.discriminator.buckets = split_list<int>(v, key);
  else if (key == "search.beam") c.search.beam = static_cast<int>(num_i());
  else if (key == "search.k_rerank") c.search.k_rerank = static_cast<int>(num_i());
  else if (key == "search.alpha") c.search.alpha = num_d();
  else if (key == "search.t_max") c.search.t_max = static_cast<int>(num_i());
  else if (key == "search.length_penalty") {
    if (v == "off") c.search.rules.length_penalty.reset();
    else c.search.rules.length_penalty = num_d();
  } else if (key == "search.block_repeated_trigrams") c.search.rules.block_repeated_trigrams = flag();
  else if (key == "search.final_pick") {
    if (v == "das") c.search.pick = FinalPick::kBestDas;
    else if (v == "gen") c.search.pick = FinalPick::kBestGen;
    else throw ValidationError("config: search.final_pick must be das or gen");
  } else if (key == "search.dis_floor") c.search.dis_floor = num_d();
  else if (key == "selftrain.max_iters") c.selftrain.max_iters = static_cast<int>(num_i());
  else if (key == "selftrain.tau_acc") c.selftrain.tau_acc = num_d();
  else if (key == "selftrain.tau_delta") {
    if (v == "auto") c.selftrain.tau_delta.reset();
    else c.selftrain.tau_delta = num_d();
  } else if (key == "selftrain.warm_start") c.selftrain.warm_start = flag();
  else if (key == "selftrain.replay") c.selftrain.replay = flag();
  else if (key == "metrics.source_aware") c.metrics.source_aware = flag();
  else if (key == "metrics.pooled") c.metrics.pooled = flag();
  else if (key == "metrics.micro_bleu") c.metrics.micro_bleu = flag();
  else if (key == "sweep.k_rerank") c.sweep.k_rerank = split_list<int>(v, key);
  else if (key == "sweep.alpha") c.sweep.alpha = split_list<double>(v, key);
  else if (key == "sweep.subset_size") c.sweep.subset_size = static_cast<int>(num_i());
  else if (key == "sweep.repetitions") c.sweep.repetitions = static_cast<int>(num_i());
  else if (key == "synth.n_train") c.synth.n_train = static_cast<int>(num_i());
  else if (key == "synth.n_validation") c.synth.n_validation = static_cast<int>(num_i());
  else if (key == "synth.n_test") c.synth.n_test = static_cast<int>(num_i());
  else if (key == "synth.min_source_clauses") c.synth.profile.min_source_clauses = static_cast<int>(num_i());
  else if (key == "synth.max_source_clauses") c.synth.profile.max_source_clauses = static_cast<int>(num_i());
  else if (key == "synth.min_reference_clauses") c.synth.profile.min_reference_clauses = static_cast<int>(num_i());
  else if (key == "synth.max_reference_clauses") c.synth.profile.max_reference_clauses = static_cast<int>(num_i());
  else if (key == "synth.extra_focus_clauses") c.synth.profile.extra_focus_clauses = static_cast<int>(num_i());
  else if (key == "synth.n_people") c.synth.profile.n_people = static_cast<int>(num_i());
  else if (key == "synth.n_orgs") c.synth.profile.n_orgs = static_cast<int>(num_i());
  else if (key == "synth.n_cities") c.synth.profile.n_cities = static_cast<int>(num_i());
  else if (key == "synth.n_products") c.synth.profile.n_products = static_cast<int>(num_i());
  else if (key == "synth.n_years") c.synth.profile.n_years = static_cast<int>(num_i());
  else throw ValidationError("config: unknown key '" + key + "'");
}

inline void validate_config(const RunConfig& c) {
  if (c.jobs < 1) throw ValidationError("config: jobs must be >= 1");
  if (c.generator.order < 1) throw ValidationError("config: generator.order must be >= 1");
  if (!(c.generator.kappa > 0.0)) throw ValidationError("config: generator.kappa must be > 0");
  if (!(c.generator.lambda_copy >= 0.0 && c.generator.lambda_copy <= 1.0))
    throw ValidationError("config: generator.lambda_copy must be in [0,1]");
  if (c.generator.min_count < 1) throw ValidationError("config: generator.min_count must be >= 1");
  if (c.discriminator.d_hash < 1) throw ValidationError("config: discriminator.d_hash must be >= 1");
  if (c.discriminator.epochs < 1) throw ValidationError("config: discriminator.epochs must be >= 1");
  if (!(c.discriminator.learning_rate > 0.0)) throw ValidationError("config: discriminator.learning_rate must be > 0");
  if (!(c.discriminator.generated_ratio > 0.0)) throw ValidationError("config: discriminator.generated_ratio must be > 0");
  if (c.discriminator.buckets.empty()) throw ValidationError("config: discriminator.buckets is empty");
  for (int b : c.discriminator.buckets)
    if (b < 1) throw ValidationError("config: discriminator.buckets must be >= 1");
  // |V| is only known once a vocabulary is loaded; commands re-check k_rerank.
  validate_search_config(c.search, static_cast<std::size_t>(c.search.k_rerank) * static_cast<std::size_t>(c.search.beam));
  if (c.selftrain.max_iters < 1) throw ValidationError("config: selftrain.max_iters must be >= 1");
  if (!(c.selftrain.tau_acc >= 0.0 && c.selftrain.tau_acc <= 1.0))
    throw ValidationError("config: selftrain.tau_acc must be in [0,1]");
  if (c.sweep.k_rerank.empty() || c.sweep.alpha.empty()) throw ValidationError("config: empty sweep grid");
  for (int k : c.sweep.k_rerank)
    if (k < 1) throw ValidationError("config: sweep.k_rerank values must be >= 1");
  for (double a : c.sweep.alpha)
    if (!(a >= 0.0)) throw ValidationError("config: sweep.alpha values must be >= 0");
  if (c.sweep.subset_size < 1 || c.sweep.repetitions < 1)
    throw ValidationError("config: sweep subset_size and repetitions must be >= 1");
  if (c.synth.n_train < 1 || c.synth.n_validation < 1 || c.synth.n_test < 1)
    throw ValidationError("config: synth split sizes must be >= 1");
  validate_profile(c.synth.profile);
}

inline RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.message() + " at line " + std::to_string(e.line()));
  }
  RunConfig c;
  for (const auto& [name, node] : tree) {
    if (node.empty()) {
      set_config_value(c, name, node.data());
      continue;
    }
    for (const auto& [key, leaf] : node) set_config_value(c, name + "." + key, leaf.data());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

inline std::string serialize_config(const RunConfig& c) {
  using namespace config_detail;
  std::ostringstream os;
  os << "seed = " << c.seed << "\njobs = " << c.jobs << "\n\n";
  os << "[paths]\ntrain = " << c.paths.train << "\nvalidation = " << c.paths.validation << "\ntest = " << c.paths.test
     << "\nvocab = " << c.paths.vocab << "\ngenerator = " << c.paths.generator
     << "\ndiscriminator = " << c.paths.discriminator << "\nout_dir = " << c.paths.out_dir << "\n\n";
  os << "[generator]\norder = " << c.generator.order << "\nkappa = " << fmt(c.generator.kappa)
     << "\nlambda_copy = " << fmt(c.generator.lambda_copy) << "\nmin_count = " << c.generator.min_count << "\n\n";
  const auto& d = c.discriminator;
  os << "[discriminator]\nd_hash = " << d.d_hash << "\nepochs = " << d.epochs
     << "\nlearning_rate = " << fmt(d.learning_rate) << "\nuse_source = " << fmt(d.use_source)
     << "\ngenerated_ratio = " << fmt(d.generated_ratio)
     << "\nseed = " << (d.seed ? std::to_string(*d.seed) : std::string("auto")) << "\nbuckets = " << join(d.buckets)
     << "\n\n";
  const auto& s = c.search;
  os << "[search]\nbeam = " << s.beam << "\nk_rerank = " << s.k_rerank << "\nalpha = " << fmt(s.alpha)
     << "\nt_max = " << s.t_max
     << "\nlength_penalty = " << (s.rules.length_penalty ? fmt(*s.rules.length_penalty) : std::string("off"))
     << "\nblock_repeated_trigrams = " << fmt(s.rules.block_repeated_trigrams)
     << "\nfinal_pick = " << (s.pick == FinalPick::kBestDas ? "das" : "gen") << "\ndis_floor = " << fmt(s.dis_floor)
     << "\n\n";
  const auto& st = c.selftrain;
  os << "[selftrain]\nmax_iters = " << st.max_iters << "\ntau_acc = " << fmt(st.tau_acc)
     << "\ntau_delta = " << (st.tau_delta ? fmt(*st.tau_delta) : std::string("auto"))
     << "\nwarm_start = " << fmt(st.warm_start) << "\nreplay = " << fmt(st.replay) << "\n\n";
  os << "[metrics]\nsource_aware = " << fmt(c.metrics.source_aware) << "\npooled = " << fmt(c.metrics.pooled)
     << "\nmicro_bleu = " << fmt(c.metrics.micro_bleu) << "\n\n";
  os << "[sweep]\nk_rerank = " << join(c.sweep.k_rerank) << "\nalpha = " << join(c.sweep.alpha)
     << "\nsubset_size = " << c.sweep.subset_size << "\nrepetitions = " << c.sweep.repetitions << "\n\n";
  const auto& p = c.synth.profile;
  os << "[synth]\nn_train = " << c.synth.n_train << "\nn_validation = " << c.synth.n_validation
     << "\nn_test = " << c.synth.n_test << "\nmin_source_clauses = " << p.min_source_clauses
     << "\nmax_source_clauses = " << p.max_source_clauses << "\nmin_reference_clauses = " << p.min_reference_clauses
     << "\nmax_reference_clauses = " << p.max_reference_clauses << "\nextra_focus_clauses = " << p.extra_focus_clauses
     << "\nn_people = " << p.n_people << "\nn_orgs = " << p.n_orgs << "\nn_cities = " << p.n_cities
     << "\nn_products = " << p.n_products << "\nn_years = " << p.n_years << "\n";
  return os.str();
}

// DAS_OUT_DIR and DAS_JOBS override file values; flags applied later win.
inline void apply_env_overrides(RunConfig& c) {
  if (const char* v = std::getenv("DAS_OUT_DIR"); v && *v) c.paths.out_dir = v;
  if (const char* v = std::getenv("DAS_JOBS"); v && *v) set_config_value(c, "jobs", v);
}

}  // namespace das
