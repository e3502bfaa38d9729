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

// das: command-line front end.

#include <chrono>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "das/config.hpp"
#include "das/corpus.hpp"
#include "das/decoder.hpp"
#include "das/discriminator.hpp"
#include "das/generator.hpp"
#include "das/metrics.hpp"
#include "das/selftrain.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace das;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  int jobs = 0;
  std::optional<std::uint64_t> seed;
};

struct Run {
  std::string command;
  std::string tag;  // distinguishes manifests of repeated commands
  RunConfig cfg;
  fs::path out;
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  std::map<std::string, std::string> inputs;   // path -> hash, recorded before work
  std::map<std::string, std::string> outputs;  // filled by emit()

  void input(const std::string& path) { inputs[path] = file_hash(path); }

  void emit(const fs::path& path, std::string_view content) {
    write_file(path.string(), content);
    outputs[path.string()] = hex64(fnv1a(content));
  }

  void manifest() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["seed"] = cfg.seed;
    j["config"] = serialize_config(cfg);
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_file((out / ("manifest_" + command + (tag.empty() ? "" : "_" + tag) + ".json")).string(), j.dump(2) + "\n");
  }
};

Run make_run(const std::string& command, const Common& c,
             const std::function<void(RunConfig&)>& flags = {}) {
  Run run;
  run.command = command;
  if (!c.config_path.empty()) run.cfg = load_config(c.config_path);
  apply_env_overrides(run.cfg);
  for (const auto& kv : c.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + kv + "'");
    set_config_value(run.cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (!c.out_dir.empty()) run.cfg.paths.out_dir = c.out_dir;
  if (c.jobs > 0) run.cfg.jobs = c.jobs;
  if (c.seed) run.cfg.seed = *c.seed;
  if (flags) flags(run.cfg);
  run.cfg.selftrain.jobs = run.cfg.jobs;
  validate_config(run.cfg);
  run.out = run.cfg.paths.out_dir;
  // Unset paths fall back to files already in the output directory.
  auto& p = run.cfg.paths;
  for (auto [field, name] : {std::pair{&p.train, "train.jsonl"}, {&p.validation, "validation.jsonl"},
                             {&p.test, "test.jsonl"}, {&p.vocab, "vocab.txt"},
                             {&p.generator, "generator.model"}, {&p.discriminator, "discriminator.model"}})
    if (field->empty() && fs::exists(run.out / name)) *field = (run.out / name).string();
  fs::create_directories(run.out);
  return run;
}

void require(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is not set");
  if (!fs::exists(path)) throw ValidationError(what + " not found: " + path);
}

Vocabulary load_vocab(Run& run) {
  require(run.cfg.paths.vocab, "vocabulary");
  run.input(run.cfg.paths.vocab);
  return Vocabulary::load(run.cfg.paths.vocab);
}

Corpus load_split(Run& run, const std::string& path, const std::string& what, const Vocabulary& vocab, Split split) {
  require(path, what);
  run.input(path);
  return load_corpus(path, &vocab, split);
}

NGramCopyModel load_generator(Run& run, const Vocabulary& vocab) {
  require(run.cfg.paths.generator, "generator model");
  run.input(run.cfg.paths.generator);
  auto g = NGramCopyModel::load(run.cfg.paths.generator);
  if (g.vocab_hash() != vocab.hash() || g.vocab_size() != vocab.size())
    throw ValidationError("generator model was trained with a different vocabulary");
  return g;
}

DiscriminatorModel load_discriminator(Run& run) {
  require(run.cfg.paths.discriminator, "discriminator model");
  run.input(run.cfg.paths.discriminator);
  return DiscriminatorModel::load(run.cfg.paths.discriminator);
}

// Discriminator data comes from the validation split: one part to train on,
// one held out for accuracy.
std::pair<Corpus, Corpus> discriminator_halves(const RunConfig& cfg, const Corpus& validation) {
  if (validation.size() < 2) throw ValidationError("validation split needs at least 2 pairs");
  return split_corpus(validation, validation.size() / 2, cfg.component_seed("discriminator-split"));
}

Corpus load_named_split(Run& run, const std::string& name, const Vocabulary& vocab) {
  const auto& p = run.cfg.paths;
  if (name == "train") return load_split(run, p.train, "train split", vocab, Split::kTrain);
  if (name == "validation") return load_split(run, p.validation, "validation split", vocab, Split::kValidation);
  if (name == "test") return load_split(run, p.test, "test split", vocab, Split::kTest);
  throw ValidationError("unknown split '" + name + "'");
}

// ---------------------------------------------------------------------------

int cmd_synth(const Common& c) {
  Run run = make_run("synth", c);
  const auto& s = run.cfg.synth;
  const Corpus all = generate_synthetic_corpus(run.cfg.component_seed("synth"), s.n_train + s.n_validation + s.n_test,
                                               s.profile);
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  auto part = [&](std::size_t lo, std::size_t n, Split split) {
    Corpus out = subset(all, std::vector<std::size_t>(idx.begin() + static_cast<std::ptrdiff_t>(lo),
                                                      idx.begin() + static_cast<std::ptrdiff_t>(lo + n)));
    out.split = split;
    return out;
  };
  const auto n_tr = static_cast<std::size_t>(s.n_train), n_va = static_cast<std::size_t>(s.n_validation);
  const std::pair<const char*, Corpus> splits[] = {
      {"train.jsonl", part(0, n_tr, Split::kTrain)},
      {"validation.jsonl", part(n_tr, n_va, Split::kValidation)},
      {"test.jsonl", part(n_tr + n_va, static_cast<std::size_t>(s.n_test), Split::kTest)}};
  for (const auto& [name, corpus] : splits) {
    write_corpus(corpus, (run.out / name).string());
    run.outputs[(run.out / name).string()] = file_hash((run.out / name).string());
  }
  run.emit(run.out / "vocab.txt", all.vocab->serialize());
  const auto st = corpus_statistics(all);
  std::cout << "wrote " << all.size() << " pairs to " << run.out.string() << " (abstractiveness "
            << st.abstractiveness << "%)\n";
  run.manifest();
  return 0;
}

int cmd_train_generator(const Common& c) {
  Run run = make_run("train-generator", c);
  Vocabulary vocab;
  if (run.cfg.paths.vocab.empty()) {
    require(run.cfg.paths.train, "train split");
    run.input(run.cfg.paths.train);
    vocab = build_vocabulary(load_corpus(run.cfg.paths.train), run.cfg.generator.min_count);
    run.emit(run.out / "vocab.txt", vocab.serialize());
  } else {
    vocab = load_vocab(run);
  }
  const Corpus train = load_split(run, run.cfg.paths.train, "train split", vocab, Split::kTrain);
  const auto& g = run.cfg.generator;
  const auto model = train_generator(train, g.order, g.kappa, g.lambda_copy);
  run.emit(run.out / "generator.model", model.serialize());
  std::cout << "generator trained on " << train.size() << " pairs, |V| = " << vocab.size() << "\n";
  run.manifest();
  return 0;
}

int cmd_train_discriminator(const Common& c) {
  Run run = make_run("train-discriminator", c);
  const Vocabulary vocab = load_vocab(run);
  const auto generator = load_generator(run, vocab);
  const Corpus validation = load_named_split(run, "validation", vocab);
  const auto [fit_part, held] = discriminator_halves(run.cfg, validation);
  SearchConfig plain = run.cfg.search;
  plain.alpha = 0.0;
  validate_search_config(plain, vocab.size());
  const auto gens_fit = generations_map(decode_corpus(generator, nullptr, fit_part, plain, run.cfg.jobs));
  const auto gens_held = generations_map(decode_corpus(generator, nullptr, held, plain, run.cfg.jobs));
  const auto settings = run.cfg.disc_settings();
  const auto model = detail::fit(fit_part, {gens_fit}, settings, plain.t_max, nullptr);
  run.emit(run.out / "discriminator.model", model.serialize());
  const PrefixSets eval = build_prefix_sets(held, gens_held, plain.t_max);
  const auto rows = accuracy_by_length(model, eval.human, eval.generated, run.cfg.discriminator.buckets);
  run.emit(run.out / "accuracy.csv", accuracy_csv(rows));
  std::cout << "held-out accuracy " << overall_accuracy(model, eval.human, eval.generated) << "\n";
  run.manifest();
  return 0;
}

int cmd_decode(const Common& c, const std::string& mode, const std::string& split, std::string output,
               const std::function<void(RunConfig&)>& flags) {
  Run run = make_run("decode", c, flags);
  if (mode != "plain" && mode != "das") throw ValidationError("--mode must be plain or das");
  const Vocabulary vocab = load_vocab(run);
  const auto generator = load_generator(run, vocab);
  const Corpus corpus = load_named_split(run, split, vocab);
  SearchConfig search = run.cfg.search;
  if (mode == "plain") search.alpha = 0.0;
  validate_search_config(search, vocab.size());
  std::optional<DiscriminatorModel> disc;
  if (search.alpha > 0.0) disc = load_discriminator(run);
  const auto records = decode_corpus(generator, disc ? &*disc : nullptr, corpus, search, run.cfg.jobs);
  if (output.empty()) output = "generations_" + mode + ".jsonl";
  run.tag = fs::path(output).stem().string();
  run.emit(run.out / output, generations_jsonl(records));
  int truncated = 0;
  for (const auto& r : records) truncated += r.truncated ? 1 : 0;
  std::cout << "decoded " << records.size() << " pairs (" << truncated << " truncated) -> "
            << (run.out / output).string() << "\n";
  run.manifest();
  return 0;
}

int cmd_self_train(const Common& c) {
  Run run = make_run("self-train", c);
  const Vocabulary vocab = load_vocab(run);
  const auto generator = load_generator(run, vocab);
  const std::string generator_hash = file_hash(run.cfg.paths.generator);
  const Corpus validation = load_named_split(run, "validation", vocab);
  const auto [fit_part, held] = discriminator_halves(run.cfg, validation);
  validate_search_config(run.cfg.search, vocab.size());
  if (run.cfg.search.alpha <= 0.0) throw ValidationError("self-train needs search.alpha > 0");
  const SelfTrainData data{fit_part, held};
  const auto settings = run.cfg.disc_settings();
  const fs::path dir = run.out / "selftrain";
  auto persist = [&](const SelfTrainState& s) {
    write_iteration(s, dir);
    std::cout << "iteration " << s.iteration << ": val accuracy " << s.history.back().val_accuracy
              << ", summed |delta| " << s.history.back().summed_abs_delta() << "\n";
  };
  SelfTrainState state = bootstrap(data, generator, run.cfg.search, settings, run.cfg.jobs);
  persist(state);
  state = run_until_convergence(std::move(state), data, generator, run.cfg.search, settings, run.cfg.selftrain, persist);
  if (file_hash(run.cfg.paths.generator) != generator_hash) throw Error("generator file changed during self-training");
  run.emit(dir / "discriminator.model", state.best_discriminator->serialize());
  run.emit(dir / "history.csv", history_csv(state.history));
  nlohmann::ordered_json summary;
  summary["iterations"] = state.iteration;
  summary["stop_reason"] = stop_reason_name(state.stop_reason);
  summary["best_iteration"] = state.best_iteration;
  summary["generator_hash"] = generator_hash;
  run.emit(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "stopped after " << state.iteration << " iterations (" << stop_reason_name(state.stop_reason)
            << "); kept discriminator " << state.best_iteration << "\n";
  run.manifest();
  return 0;
}

int cmd_evaluate(const Common& c, const std::vector<std::string>& systems, const std::string& split, int zipf_k,
                 int hist_buckets) {
  Run run = make_run("evaluate", c);
  if (systems.empty()) throw ValidationError("evaluate needs at least one --system name=path");
  const Vocabulary vocab = load_vocab(run);
  const Corpus corpus = load_named_split(run, split, vocab);
  std::vector<MetricReport> reports;
  for (const auto& spec : systems) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--system expects name=path, got '" + spec + "'");
    const std::string name = spec.substr(0, eq);
    std::string path = spec.substr(eq + 1);
    // Relative names not found here are looked up in the output directory.
    if (fs::path(path).is_relative() && !fs::exists(path) && fs::exists(run.out / path))
      path = (run.out / path).string();
    require(path, "generations file");
    run.input(path);
    const auto gens = generations_map(read_generations(path));
    reports.push_back(evaluate_system(name, gens, corpus, run.cfg.metrics));
    std::vector<TokenSeq> seqs;
    for (const auto& p : corpus.pairs) seqs.push_back(gens.at(p.id));
    std::string zipf = "rank,token,text,frequency\n";
    for (const auto& e : zipf_report(seqs, static_cast<std::size_t>(zipf_k)))
      zipf += std::to_string(e.rank) + "," + std::to_string(e.token) + ",\"" + vocab.token(e.token) + "\"," +
              std::to_string(e.frequency) + "\n";
    run.emit(run.out / ("zipf_" + name + ".csv"), zipf);
    const auto hist = repetition_position_hist(seqs, 3, static_cast<std::size_t>(hist_buckets));
    std::string pos = "bucket_lo,bucket_hi,count,density\n";
    for (int b = 0; b < hist_buckets; ++b)
      pos += format_double(static_cast<double>(b) / hist_buckets) + "," +
             format_double(static_cast<double>(b + 1) / hist_buckets) + "," +
             std::to_string(hist.counts[static_cast<std::size_t>(b)]) + "," +
             format_double(hist.density[static_cast<std::size_t>(b)]) + "\n";
    run.emit(run.out / ("positions_" + name + ".csv"), pos);
  }
  run.emit(run.out / "report.csv", report_csv(reports));
  run.emit(run.out / "report.json", report_json(reports).dump(2) + "\n");
  std::cout << report_csv(reports);
  run.manifest();
  return 0;
}

int cmd_sweep(const Common& c) {
  Run run = make_run("sweep", c);
  const Vocabulary vocab = load_vocab(run);
  const auto generator = load_generator(run, vocab);
  const Corpus test = load_named_split(run, "test", vocab);
  const auto& sw = run.cfg.sweep;
  bool needs_disc = false;
  for (double a : sw.alpha) needs_disc |= a > 0.0;
  std::optional<DiscriminatorModel> disc;
  if (needs_disc) disc = load_discriminator(run);
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(sw.subset_size), test.size());
  std::string csv =
      "repetition,subset_size,k_rerank,alpha,beam,len,nov1,nov3,rep1,rep3,bleu1,rouge1,rougeL,d_len,d_nov1,d_nov3,"
      "d_rep1,d_rep3\n";
  using detail::fmt_opt;
  for (int r = 0; r < sw.repetitions; ++r) {
    const Corpus sub = sample_subset(test, n, run.cfg.component_seed("sweep-subset-" + std::to_string(r)));
    for (int k : sw.k_rerank) {
      for (double a : sw.alpha) {
        SearchConfig s = run.cfg.search;
        s.k_rerank = k;
        s.beam = std::min(s.beam, k);
        s.alpha = a;
        validate_search_config(s, vocab.size());
        const auto recs = decode_corpus(generator, disc ? &*disc : nullptr, sub, s, run.cfg.jobs);
        const auto rep = evaluate_system("sweep", generations_map(recs), sub, run.cfg.metrics);
        const auto& m = rep.model;
        csv += std::to_string(r) + "," + std::to_string(n) + "," + std::to_string(k) + "," + format_double(a) + "," +
               std::to_string(s.beam) + "," + fmt_opt(m.len) + "," + fmt_opt(m.nov1) + "," + fmt_opt(m.nov3) + "," +
               fmt_opt(m.rep1) + "," + fmt_opt(m.rep3) + "," + fmt_opt(rep.bleu1) + "," + fmt_opt(rep.rouge1) + "," +
               fmt_opt(rep.rougeL) + "," + fmt_opt(rep.d_len()) + "," + fmt_opt(rep.d_nov1()) + "," +
               fmt_opt(rep.d_nov3()) + "," + fmt_opt(rep.d_rep1()) + "," + fmt_opt(rep.d_rep3()) + "\n";
      }
    }
  }
  run.emit(run.out / "sweep.csv", csv);
  std::cout << "sweep: " << sw.repetitions * sw.k_rerank.size() * sw.alpha.size() << " rows -> "
            << (run.out / "sweep.csv").string() << "\n";
  run.manifest();
  return 0;
}

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "INI config file")->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override a config value, key=value (e.g. search.alpha=0.5)");
  app->add_option("-o,--out-dir", c.out_dir, "output directory (env DAS_OUT_DIR)");
  app->add_option("-j,--jobs", c.jobs, "worker threads (env DAS_JOBS)")->check(CLI::PositiveNumber);
  app->add_option("--seed", c.seed, "master seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Discriminative adversarial search: decoding, discriminator self-training, evaluation"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "write a synthetic corpus (train/validation/test + vocab)");
  auto* tgen = app.add_subcommand("train-generator", "train the n-gram + copy generator");
  auto* tdis = app.add_subcommand("train-discriminator", "train a discriminator on plain beam outputs");
  auto* dec = app.add_subcommand("decode", "decode a split with plain or DAS beam search");
  auto* self = app.add_subcommand("self-train", "iterate discriminator retraining on DAS outputs");
  auto* eval = app.add_subcommand("evaluate", "score generation files against references");
  auto* sweep = app.add_subcommand("sweep", "K_rerank x alpha grid over random test subsets");
  for (auto* sub : {synth, tgen, tdis, dec, self, eval, sweep}) add_common(sub, common);

  std::string mode = "das", split = "test", output;
  std::optional<double> alpha;
  std::optional<int> k_rerank, beam, t_max;
  dec->add_option("--mode", mode, "plain | das")->check(CLI::IsMember({"plain", "das"}));
  dec->add_option("--split", split, "train | validation | test");
  dec->add_option("--output", output, "file name inside the output directory");
  dec->add_option("--alpha", alpha, "discriminator weight");
  dec->add_option("--k-rerank", k_rerank, "rerank pool size");
  dec->add_option("--beam", beam, "beam size");
  dec->add_option("--t-max", t_max, "maximum summary length");

  std::vector<std::string> systems;
  int zipf_k = 20, buckets = 10;
  eval->add_option("--system", systems, "name=generations.jsonl (repeatable)")->required();
  eval->add_option("--split", split, "split holding the references");
  eval->add_option("--zipf-k", zipf_k, "top-k tokens in the Zipf report")->check(CLI::PositiveNumber);
  eval->add_option("--buckets", buckets, "repetition position buckets")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(common);
    if (tgen->parsed()) return cmd_train_generator(common);
    if (tdis->parsed()) return cmd_train_discriminator(common);
    if (dec->parsed())
      return cmd_decode(common, mode, split, output, [&](RunConfig& cfg) {
        if (alpha) cfg.search.alpha = *alpha;
        if (k_rerank) cfg.search.k_rerank = *k_rerank;
        if (beam) cfg.search.beam = *beam;
        if (t_max) cfg.search.t_max = *t_max;
      });
    if (self->parsed()) return cmd_self_train(common);
    if (eval->parsed()) return cmd_evaluate(common, systems, split, zipf_k, buckets);
    if (sweep->parsed()) return cmd_sweep(common);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
