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

// Dataset ingestion, vocabulary and the synthetic summarization corpus.

#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "das/common.hpp"
#include "json.hpp"

namespace das {

// Lowercases ASCII and splits on whitespace; every ASCII punctuation
// character becomes its own token.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : text) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else if (c < 0x80 && std::ispunct(c)) {
      flush();
      out.emplace_back(1, ch);
    } else {
      cur.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    }
  }
  flush();
  return out;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (auto t : {kSosToken, kEosToken, kUnkToken}) {
      index_.emplace(std::string(t), static_cast<TokenId>(tokens_.size()));
      tokens_.emplace_back(t);
    }
  }

  // Appends a token if new. Reserved strings are never added as ordinary
  // tokens; they map to UNK.
  TokenId add(std::string_view tok) {
    if (is_reserved_string(tok)) return kUnk;
    auto [it, inserted] = index_.emplace(std::string(tok), static_cast<TokenId>(tokens_.size()));
    if (inserted) tokens_.emplace_back(tok);
    return it->second;
  }

  std::optional<TokenId> find(std::string_view tok) const {
    if (is_reserved_string(tok)) return std::nullopt;
    auto it = index_.find(std::string(tok));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id(std::string_view tok) const { return find(tok).value_or(kUnk); }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw Error("token id out of range: " + std::to_string(id));
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::size_t size() const { return tokens_.size(); }

  TokenSeq encode(const std::vector<std::string>& toks) const {
    TokenSeq ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(id(t));
    return ids;
  }

  std::vector<std::string> decode(const TokenSeq& ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId i : ids) out.push_back(token(i));
    return out;
  }

  std::string to_text(const TokenSeq& ids) const {
    std::string out;
    for (TokenId i : ids) {
      if (i == kSos || i == kEos) continue;
      if (!out.empty()) out.push_back(' ');
      out += token(i);
    }
    return out;
  }

  // File form: one token per line, line number (from 0) = id.
  std::string serialize() const {
    std::string out;
    for (const auto& t : tokens_) {
      out += t;
      out.push_back('\n');
    }
    return out;
  }

  static Vocabulary parse(std::string_view text) {
    Vocabulary v;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) nl = text.size();
      std::string_view line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line_no < static_cast<std::size_t>(kNumReserved)) {
        if (line != v.tokens_[line_no])
          throw Error("vocabulary line " + std::to_string(line_no + 1) + ": expected reserved token " +
                      v.tokens_[line_no]);
      } else {
        if (line.empty() || is_reserved_string(line) || v.find(line))
          throw Error("vocabulary line " + std::to_string(line_no + 1) + ": invalid or duplicate token");
        v.add(line);
      }
      ++line_no;
    }
    if (line_no < static_cast<std::size_t>(kNumReserved)) throw Error("vocabulary file truncated");
    return v;
  }

  void save(const std::string& path) const { write_file(path, serialize()); }
  static Vocabulary load(const std::string& path) { return parse(read_file(path)); }

  std::uint64_t hash() const { return fnv1a(serialize()); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  static bool is_reserved_string(std::string_view t) {
    return t == kSosToken || t == kEosToken || t == kUnkToken;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

enum class Split { kTrain, kValidation, kTest };

inline std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

struct DocumentPair {
  std::string id;
  TokenSeq source;
  TokenSeq reference;  // no SOS/EOS; consumers append EOS
};

struct Corpus {
  std::vector<DocumentPair> pairs;
  Split split = Split::kTrain;
  std::shared_ptr<const Vocabulary> vocab;

  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }

  const DocumentPair* find(const std::string& id) const {
    for (const auto& p : pairs)
      if (p.id == id) return &p;
    return nullptr;
  }
};

inline void validate_corpus(const Corpus& corpus) {
  std::set<std::string> seen;
  for (const auto& p : corpus.pairs) {
    if (!seen.insert(p.id).second) throw Error("duplicate id in corpus: " + p.id);
    if (p.source.empty()) throw Error("empty source for id " + p.id);
    if (p.reference.empty()) throw Error("empty reference for id " + p.id);
    for (TokenId t : p.reference)
      if (t == kSos || t == kEos) throw Error("reserved token inside reference for id " + p.id);
  }
}

// Each line: {"id": str, "source": str, "summary": str}. Without a vocabulary
// the corpus gets an open vocabulary in first-seen order.
inline Corpus load_corpus(const std::string& path, const Vocabulary* vocab = nullptr,
                          Split split = Split::kTrain) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open corpus " + path);
  auto open_vocab = vocab ? nullptr : std::make_shared<Vocabulary>();
  auto encode = [&](const std::string& text) {
    auto toks = tokenize(text);
    TokenSeq ids;
    ids.reserve(toks.size());
    for (const auto& t : toks) ids.push_back(vocab ? vocab->id(t) : open_vocab->add(t));
    return ids;
  };

  Corpus corpus;
  corpus.split = split;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = " at line " + std::to_string(line_no);
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error("malformed record" + where);
    }
    for (const char* field : {"id", "source", "summary"})
      if (!rec.is_object() || !rec.contains(field) || !rec[field].is_string())
        throw Error(std::string("missing or non-string field '") + field + "'" + where);
    DocumentPair pair;
    pair.id = rec["id"].get<std::string>();
    pair.source = encode(rec["source"].get<std::string>());
    pair.reference = encode(rec["summary"].get<std::string>());
    if (pair.source.empty()) throw Error("empty source" + where);
    if (pair.reference.empty()) throw Error("empty reference" + where);
    if (!ids.insert(pair.id).second) throw Error("duplicate id '" + pair.id + "'" + where);
    corpus.pairs.push_back(std::move(pair));
  }
  if (corpus.pairs.empty()) throw Error("empty corpus file " + path);
  if (vocab)
    corpus.vocab = std::make_shared<const Vocabulary>(*vocab);
  else
    corpus.vocab = std::move(open_vocab);
  return corpus;
}

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  std::string out;
  for (const auto& p : corpus.pairs) {
    nlohmann::json rec = {{"id", p.id},
                          {"source", corpus.vocab->to_text(p.source)},
                          {"summary", corpus.vocab->to_text(p.reference)}};
    out += rec.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

// Pairs at the given positions, sharing the vocabulary.
inline Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& positions) {
  Corpus out;
  out.split = corpus.split;
  out.vocab = corpus.vocab;
  for (std::size_t i : positions) out.pairs.push_back(corpus.pairs.at(i));
  return out;
}

// Random sample of n pairs without replacement, kept in corpus order.
inline Corpus sample_subset(const Corpus& corpus, std::size_t n, std::uint64_t seed) {
  if (n > corpus.size()) throw Error("sample_subset: subset larger than corpus");
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(n);
  std::sort(idx.begin(), idx.end());
  return subset(corpus, idx);
}

// Deterministic two-way split: the first `first` pairs of a seeded shuffle
// and the rest, each kept in corpus order.
inline std::pair<Corpus, Corpus> split_corpus(const Corpus& corpus, std::size_t first, std::uint64_t seed) {
  if (first == 0 || first >= corpus.size()) throw Error("split_corpus: both parts must be non-empty");
  std::vector<std::size_t> idx(corpus.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  std::vector<std::size_t> a(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(first));
  std::vector<std::size_t> b(idx.begin() + static_cast<std::ptrdiff_t>(first), idx.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return {subset(corpus, a), subset(corpus, b)};
}

// Tokens with count >= min_count over sources and references. Ids follow
// descending frequency, ties broken lexicographically.
inline Vocabulary build_vocabulary(const Corpus& corpus, int min_count) {
  if (corpus.empty()) throw Error("build_vocabulary: empty corpus");
  if (min_count < 1) throw Error("build_vocabulary: min_count must be >= 1");
  std::unordered_map<TokenId, long> counts;
  for (const auto& p : corpus.pairs) {
    for (TokenId t : p.source) ++counts[t];
    for (TokenId t : p.reference) ++counts[t];
  }
  std::vector<std::pair<std::string, long>> items;
  for (auto [id, c] : counts)
    if (!is_reserved(id) && c >= min_count) items.emplace_back(corpus.vocab->token(id), c);
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (const auto& [tok, c] : items) v.add(tok);
  return v;
}

// Re-expresses a corpus under another vocabulary (by token string).
inline Corpus remap_corpus(const Corpus& corpus, const Vocabulary& target) {
  Corpus out;
  out.split = corpus.split;
  out.vocab = std::make_shared<const Vocabulary>(target);
  out.pairs.reserve(corpus.size());
  auto map = [&](const TokenSeq& seq) {
    TokenSeq r;
    r.reserve(seq.size());
    for (TokenId t : seq) r.push_back(is_reserved(t) ? t : target.id(corpus.vocab->token(t)));
    return r;
  };
  for (const auto& p : corpus.pairs) out.pairs.push_back({p.id, map(p.source), map(p.reference)});
  return out;
}

struct CorpusStatistics {
  double mean_source_length = 0;
  double mean_reference_length = 0;
  // Mean over pairs of the percentage of reference tokens absent from the source.
  double abstractiveness = 0;
};

inline CorpusStatistics corpus_statistics(const Corpus& corpus) {
  if (corpus.empty()) throw Error("corpus_statistics: empty corpus");
  CorpusStatistics s;
  for (const auto& p : corpus.pairs) {
    s.mean_source_length += static_cast<double>(p.source.size());
    s.mean_reference_length += static_cast<double>(p.reference.size());
    std::set<TokenId> src(p.source.begin(), p.source.end());
    auto novel = std::count_if(p.reference.begin(), p.reference.end(),
                               [&](TokenId t) { return !src.count(t); });
    s.abstractiveness += 100.0 * static_cast<double>(novel) / static_cast<double>(p.reference.size());
  }
  const auto n = static_cast<double>(corpus.size());
  s.mean_source_length /= n;
  s.mean_reference_length /= n;
  s.abstractiveness /= n;
  return s;
}

// ---------------------------------------------------------------------------
// Synthetic corpus.
//
// A source is a shuffled list of templated fact clauses about a handful of
// people; one person is the focus. The reference restates the earliest focus
// clauses (lead position = salience) in a fixed reference-side phrasing that
// never occurs in sources, joined as "<name> c1 , c2 and c3 .".

struct SynthProfile {
  int min_source_clauses = 6;
  int max_source_clauses = 12;
  int min_reference_clauses = 2;
  int max_reference_clauses = 4;
  int n_people = 24;
  int n_orgs = 16;
  int n_cities = 16;
  int n_products = 10;
  int n_years = 20;
  // Extra focus clauses beyond the reference count, drawn from [0, extra].
  int extra_focus_clauses = 2;
};

namespace synth_detail {

enum class Slot { kOrg, kCity, kPerson, kProduct, kYear };

struct Relation {
  // Phrase pieces; "#" marks an object slot, filled in order from `slots`.
  std::vector<std::string> source_phrase;
  std::vector<std::string> reference_phrase;
  std::vector<Slot> slots;
};

inline const std::vector<Relation>& relations() {
  static const std::vector<Relation> table = {
      {{"works", "for", "#"}, {"employed", "by", "#"}, {Slot::kOrg}},
      {{"lives", "in", "#"}, {"resides", "in", "#"}, {Slot::kCity}},
      {{"founded", "#", "in", "#"}, {"created", "#", "in", "#"}, {Slot::kOrg, Slot::kYear}},
      {{"was", "born", "in", "#"}, {"native", "of", "#"}, {Slot::kCity}},
      {{"studied", "at", "#"}, {"graduated", "from", "#"}, {Slot::kOrg}},
      {{"invests", "in", "#"}, {"backs", "#"}, {Slot::kOrg}},
      {{"visited", "#", "in", "#"}, {"toured", "#", "in", "#"}, {Slot::kCity, Slot::kYear}},
      {{"married", "#"}, {"wed", "#"}, {Slot::kPerson}},
      {{"sold", "#", "to", "#"}, {"supplied", "#", "to", "#"}, {Slot::kProduct, Slot::kOrg}},
      {{"manages", "#"}, {"runs", "#"}, {Slot::kOrg}},
  };
  return table;
}

inline const std::vector<std::string>& people() {
  static const std::vector<std::string> v = {
      "alice", "bruno", "carla", "dmitri", "elena", "farid", "greta", "hiro",  "ines",  "jonas",
      "kofi",  "lena",  "marco", "nadia",  "omar",  "priya", "quinn", "rosa",  "sven",  "tara",
      "umar",  "vera",  "wale",  "xenia",  "yusuf", "zoe",   "aaron", "bella", "cyril", "dana"};
  return v;
}
inline const std::vector<std::string>& orgs() {
  static const std::vector<std::string> v = {
      "acme",  "globex", "initech", "umbrella", "hooli",   "vandelay", "tyrell",  "cyberdyne",
      "wonka", "soylent", "oscorp", "aperture", "massive", "gringotts", "monarch", "dunder",
      "stark", "wayne",  "nakatomi", "virtucon"};
  return v;
}
inline const std::vector<std::string>& cities() {
  static const std::vector<std::string> v = {
      "paris", "lagos",  "lima",   "oslo",   "quito",  "tokyo", "accra", "berlin", "cairo", "delhi",
      "hanoi", "kyiv",   "madrid", "nairobi", "porto", "riga",  "seoul", "tunis",  "vienna", "zagreb"};
  return v;
}
inline const std::vector<std::string>& products() {
  static const std::vector<std::string> v = {"robots",  "coffee", "software", "bicycles", "lamps",
                                             "engines", "tiles",  "glasses",  "drones",   "pianos",
                                             "helmets", "boats"};
  return v;
}

inline bool has_repeated_trigram(const std::vector<std::string>& toks) {
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t i = 0; i + 2 < toks.size(); ++i)
    if (!seen.emplace(toks[i], toks[i + 1], toks[i + 2]).second) return true;
  return false;
}

struct Clause {
  int subject;  // index into people()
  int relation;
  std::vector<std::string> objects;
};

inline std::vector<std::string> render(const std::vector<std::string>& phrase,
                                       const std::vector<std::string>& objects) {
  std::vector<std::string> out;
  std::size_t k = 0;
  for (const auto& w : phrase) out.push_back(w == "#" ? objects.at(k++) : w);
  return out;
}

}  // namespace synth_detail

inline void validate_profile(const SynthProfile& p) {
  const int n_rel = static_cast<int>(synth_detail::relations().size());
  if (p.min_source_clauses < 1 || p.max_source_clauses < p.min_source_clauses)
    throw ValidationError("synth profile: bad source clause range");
  if (p.min_reference_clauses < 1 || p.max_reference_clauses < p.min_reference_clauses)
    throw ValidationError("synth profile: bad reference clause range");
  if (p.max_reference_clauses + p.extra_focus_clauses > n_rel ||
      p.max_reference_clauses > p.min_source_clauses)
    throw ValidationError("synth profile: reference clauses exceed available facts");
  auto in = [](int v, std::size_t hi) { return v >= 2 && static_cast<std::size_t>(v) <= hi; };
  if (!in(p.n_people, synth_detail::people().size()) || !in(p.n_orgs, synth_detail::orgs().size()) ||
      !in(p.n_cities, synth_detail::cities().size()) ||
      !in(p.n_products, synth_detail::products().size()) || p.n_years < 2 || p.n_years > 60)
    throw ValidationError("synth profile: entity pool size out of range");
  if (p.extra_focus_clauses < 0) throw ValidationError("synth profile: extra_focus_clauses < 0");
}

inline Corpus generate_synthetic_corpus(std::uint64_t seed, int n_pairs, const SynthProfile& profile = {},
                                        Split split = Split::kTrain) {
  using namespace synth_detail;
  if (n_pairs < 1) throw Error("generate_synthetic_corpus: n_pairs must be >= 1");
  validate_profile(profile);
  Rng rng(seed);
  auto vocab = std::make_shared<Vocabulary>();
  Corpus corpus;
  corpus.split = split;
  const auto& rels = relations();

  auto draw_object = [&](Slot s, int subject) -> std::string {
    switch (s) {
      case Slot::kOrg: return orgs()[rng.index(static_cast<std::size_t>(profile.n_orgs))];
      case Slot::kCity: return cities()[rng.index(static_cast<std::size_t>(profile.n_cities))];
      case Slot::kProduct: return products()[rng.index(static_cast<std::size_t>(profile.n_products))];
      case Slot::kYear: return std::to_string(1990 + static_cast<int>(rng.index(static_cast<std::size_t>(profile.n_years))));
      case Slot::kPerson: {
        std::size_t p;
        do p = rng.index(static_cast<std::size_t>(profile.n_people));
        while (static_cast<int>(p) == subject);
        return people()[p];
      }
    }
    return {};
  };
  auto make_clause = [&](int subject, int relation) {
    Clause c{subject, relation, {}};
    for (Slot s : rels[static_cast<std::size_t>(relation)].slots) c.objects.push_back(draw_object(s, subject));
    return c;
  };

  for (int i = 0; i < n_pairs; ++i) {
    std::vector<std::string> source, reference;
    do {
      source.clear();
      reference.clear();
      const int n_ref = profile.min_reference_clauses +
                        static_cast<int>(rng.index(static_cast<std::size_t>(
                            profile.max_reference_clauses - profile.min_reference_clauses + 1)));
      const int n_src = std::max(n_ref, rng.range(profile.min_source_clauses, profile.max_source_clauses));
      int n_focus = std::min(n_src, n_ref + static_cast<int>(rng.index(static_cast<std::size_t>(profile.extra_focus_clauses + 1))));
      n_focus = std::min(n_focus, static_cast<int>(rels.size()));
      const int focus = static_cast<int>(rng.index(static_cast<std::size_t>(profile.n_people)));

      std::vector<int> rel_order(rels.size());
      for (std::size_t r = 0; r < rels.size(); ++r) rel_order[r] = static_cast<int>(r);
      rng.shuffle(rel_order);

      std::vector<Clause> clauses;
      for (int k = 0; k < n_focus; ++k) clauses.push_back(make_clause(focus, rel_order[static_cast<std::size_t>(k)]));
      while (static_cast<int>(clauses.size()) < n_src) {
        int subj;
        do subj = static_cast<int>(rng.index(static_cast<std::size_t>(profile.n_people)));
        while (subj == focus);
        clauses.push_back(make_clause(subj, static_cast<int>(rng.index(rels.size()))));
      }
      rng.shuffle(clauses);

      std::vector<const Clause*> salient;
      for (const auto& c : clauses) {
        const auto& rel = rels[static_cast<std::size_t>(c.relation)];
        source.push_back(people()[static_cast<std::size_t>(c.subject)]);
        for (auto& w : render(rel.source_phrase, c.objects)) source.push_back(std::move(w));
        source.push_back(".");
        if (c.subject == focus && static_cast<int>(salient.size()) < n_ref) salient.push_back(&c);
      }
      reference.push_back(people()[static_cast<std::size_t>(focus)]);
      for (std::size_t k = 0; k < salient.size(); ++k) {
        if (k > 0) reference.push_back(k + 1 == salient.size() ? "and" : ",");
        const auto& rel = rels[static_cast<std::size_t>(salient[k]->relation)];
        for (auto& w : render(rel.reference_phrase, salient[k]->objects)) reference.push_back(std::move(w));
      }
      reference.push_back(".");
    } while (has_repeated_trigram(reference));

    DocumentPair pair;
    pair.id = "syn-" + std::to_string(seed) + "-" + std::to_string(i);
    for (const auto& w : source) pair.source.push_back(vocab->add(w));
    for (const auto& w : reference) pair.reference.push_back(vocab->add(w));
    corpus.pairs.push_back(std::move(pair));
  }
  corpus.vocab = std::move(vocab);
  return corpus;
}

}  // namespace das
