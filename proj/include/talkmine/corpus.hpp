#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "talkmine/error.hpp"
#include "talkmine/text.hpp"

namespace talkmine {

inline constexpr std::string_view kNoEntity = "O";

struct Token {
  std::string surface;
  std::string lemma;
  std::string upos;
  std::string dep_rel;
  int head = 0;  // index within the sentence; the root points at itself
  std::string ner{kNoEntity};

  bool operator==(const Token&) const = default;
};

// Dependency label without subtype, lowercased ("nsubj:pass" -> "nsubj").
inline std::string dep_base(std::string_view label) {
  auto l = to_lower(label);
  if (auto p = l.find(':'); p != std::string::npos) l.resize(p);
  return l;
}

inline bool is_punct(const Token& t) { return t.upos == "PUNCT"; }
inline bool has_entity(const Token& t) { return !t.ner.empty() && t.ner != kNoEntity; }

struct Sentence {
  int index = 0;
  std::string text;
  std::vector<Token> tokens;

  bool annotated() const { return !tokens.empty() || is_blank(text); }
  bool operator==(const Sentence&) const = default;
};

struct Transcript {
  std::string id;
  std::vector<Sentence> sentences;

  bool annotated() const {
    return std::all_of(sentences.begin(), sentences.end(),
                       [](const Sentence& s) { return s.annotated(); });
  }
  bool operator==(const Transcript&) const = default;
};

// A named-entity mention: a maximal run of tokens carrying the same label.
struct EntitySpan {
  std::string label;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

inline std::vector<EntitySpan> entity_spans(const Sentence& s) {
  std::vector<EntitySpan> spans;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    const auto& t = s.tokens[i];
    if (!has_entity(t)) continue;
    if (!spans.empty() && spans.back().end == i && spans.back().label == t.ner) {
      spans.back().end = i + 1;
    } else {
      spans.push_back({t.ner, i, i + 1});
    }
  }
  return spans;
}

// ---------------------------------------------------------------------------
// Transcript file: one JSON object per line, {"id": ..., "sentences": [...]}.

inline std::vector<Transcript> parse_transcripts(std::istream& in,
                                                 const std::string& source = "<stream>") {
  std::vector<Transcript> out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    const auto where = source + ":" + std::to_string(lineno) + ": ";
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(where + "malformed record (" + e.what() + ")");
    }
    if (!rec.is_object()) throw InputError(where + "record is not an object");
    if (!rec.contains("id") || !rec["id"].is_string() || rec["id"].get<std::string>().empty())
      throw InputError(where + "record missing string id");
    if (!rec.contains("sentences") || !rec["sentences"].is_array())
      throw InputError(where + "record missing sentences array");
    Transcript t;
    t.id = rec["id"].get<std::string>();
    if (!seen.insert(t.id).second) throw InputError(where + "duplicate transcript id " + t.id);
    int idx = 0;
    for (const auto& s : rec["sentences"]) {
      if (!s.is_string()) throw InputError(where + "sentence is not a string");
      t.sentences.push_back({idx++, s.get<std::string>(), {}});
    }
    if (t.sentences.empty()) throw InputError(where + "transcript " + t.id + " has no sentences");
    out.push_back(std::move(t));
  }
  return out;
}

inline std::vector<Transcript> parse_transcripts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open transcript file: " + path);
  return parse_transcripts(in, path);
}

inline void write_transcripts(std::ostream& out, const std::vector<Transcript>& corpus) {
  for (const auto& t : corpus) {
    nlohmann::ordered_json rec;
    rec["id"] = t.id;
    rec["sentences"] = nlohmann::ordered_json::array();
    for (const auto& s : t.sentences) rec["sentences"].push_back(s.text);
    out << rec.dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// Annotation sidecar. Per token: index, surface, lemma, upos, head, dep_rel, ner
// separated by tabs; "# transcript = <id>" and "# sent = <index>" headers; a
// blank line closes each sentence.

namespace detail {

inline std::string strip_ws(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out += c;
  return out;
}

inline void validate_sentence(const std::string& tid, const Sentence& s) {
  const auto where = "transcript " + tid + " sentence " + std::to_string(s.index) + ": ";
  if (s.tokens.empty()) {
    if (!is_blank(s.text)) throw InputError(where + "no token rows for non-empty sentence");
    return;
  }
  int roots = 0;
  const int n = static_cast<int>(s.tokens.size());
  std::string joined;
  for (int i = 0; i < n; ++i) {
    const auto& t = s.tokens[static_cast<std::size_t>(i)];
    if (t.head < 0 || t.head >= n)
      throw InputError(where + "token " + std::to_string(i) + " head " + std::to_string(t.head) +
                       " out of range [0," + std::to_string(n) + ")");
    if (dep_base(t.dep_rel) == "root") {
      ++roots;
      if (t.head != i) throw InputError(where + "root token must head itself");
    }
    joined += t.surface;
  }
  if (roots != 1)
    throw InputError(where + "expected exactly one root, found " + std::to_string(roots));
  if (strip_ws(joined) != strip_ws(s.text))
    throw InputError(where + "token surfaces do not match sentence text");
}

}  // namespace detail

// Attaches annotations to `corpus` in place. Every transcript must be covered.
inline void parse_annotations(std::istream& in, std::vector<Transcript>& corpus,
                              const std::string& source = "<stream>") {
  std::map<std::string, std::vector<Sentence>> blocks;
  std::string current_tid;
  std::optional<Sentence> current;
  std::string line;
  std::size_t lineno = 0;

  auto where = [&] { return source + ":" + std::to_string(lineno) + ": "; };
  auto close = [&] {
    if (!current) return;
    blocks[current_tid].push_back(std::move(*current));
    current.reset();
  };

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) {
      close();
      continue;
    }
    if (line.rfind("# transcript = ", 0) == 0) {
      close();
      current_tid = line.substr(15);
      if (blocks.count(current_tid)) throw InputError(where() + "duplicate transcript block " + current_tid);
      blocks[current_tid];
      continue;
    }
    if (line.rfind("# sent = ", 0) == 0) {
      close();
      if (current_tid.empty()) throw InputError(where() + "sentence header before transcript header");
      Sentence s;
      try {
        std::size_t used = 0;
        s.index = std::stoi(line.substr(9), &used);
        if (used != line.size() - 9) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw InputError(where() + "bad sentence index");
      }
      if (static_cast<std::size_t>(s.index) != blocks[current_tid].size())
        throw InputError(where() + "transcript " + current_tid + ": sentence index " +
                         std::to_string(s.index) + " out of order");
      current = std::move(s);
      continue;
    }
    if (line.front() == '#') continue;
    if (!current) throw InputError(where() + "token row outside a sentence block");
    auto cols = split(line, '\t');
    if (cols.size() != 7) throw InputError(where() + "expected 7 tab-separated columns");
    Token t;
    int idx = 0;
    try {
      std::size_t used = 0;
      idx = std::stoi(cols[0], &used);
      if (used != cols[0].size()) throw std::invalid_argument("idx");
      t.head = std::stoi(cols[4], &used);
      if (used != cols[4].size()) throw std::invalid_argument("head");
    } catch (const std::exception&) {
      throw InputError(where() + "non-integer index or head");
    }
    if (static_cast<std::size_t>(idx) != current->tokens.size())
      throw InputError(where() + "token index " + std::to_string(idx) + " out of order");
    t.surface = cols[1];
    t.lemma = cols[2];
    t.upos = cols[3];
    t.dep_rel = cols[5];
    t.ner = cols[6];
    current->tokens.push_back(std::move(t));
  }
  close();

  for (auto& tr : corpus) {
    auto it = blocks.find(tr.id);
    if (it == blocks.end()) throw InputError(source + ": no annotations for transcript " + tr.id);
    auto& sents = it->second;
    if (sents.size() != tr.sentences.size())
      throw InputError(source + ": transcript " + tr.id + " has " +
                       std::to_string(tr.sentences.size()) + " sentences but " +
                       std::to_string(sents.size()) + " annotated");
    for (std::size_t i = 0; i < sents.size(); ++i) {
      sents[i].text = tr.sentences[i].text;
      detail::validate_sentence(tr.id, sents[i]);
    }
    for (std::size_t i = 0; i < sents.size(); ++i) tr.sentences[i].tokens = std::move(sents[i].tokens);
  }
}

inline void parse_annotations(const std::string& path, std::vector<Transcript>& corpus) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open annotation file: " + path);
  parse_annotations(in, corpus, path);
}

inline void write_annotations(std::ostream& out, const std::vector<Transcript>& corpus) {
  for (const auto& tr : corpus) {
    out << "# transcript = " << tr.id << '\n';
    for (const auto& s : tr.sentences) {
      out << "# sent = " << s.index << '\n';
      for (std::size_t i = 0; i < s.tokens.size(); ++i) {
        const auto& t = s.tokens[i];
        out << i << '\t' << t.surface << '\t' << t.lemma << '\t' << t.upos << '\t' << t.head
            << '\t' << t.dep_rel << '\t' << t.ner << '\n';
      }
      out << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Embeddings: `key<TAB>v1 v2 ... vd`, keys lowercased.

using Vector = std::vector<double>;

class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  static EmbeddingTable parse(std::istream& in, const std::string& source = "<stream>") {
    EmbeddingTable table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (is_blank(line)) continue;
      const auto where = source + ":" + std::to_string(lineno) + ": ";
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) throw InputError(where + "expected key<TAB>values");
      auto key = to_lower(line.substr(0, tab));
      Vector v;
      std::istringstream vals(line.substr(tab + 1));
      std::string tok;
      while (vals >> tok) {
        double x = 0;
        try {
          std::size_t used = 0;
          x = std::stod(tok, &used);
          if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
          throw InputError(where + "non-numeric component '" + tok + "'");
        }
        if (!std::isfinite(x)) throw InputError(where + "non-finite component");
        v.push_back(x);
      }
      if (v.empty()) throw InputError(where + "empty vector");
      if (table.dim_ == 0) table.dim_ = v.size();
      if (v.size() != table.dim_)
        throw InputError(where + "dimension " + std::to_string(v.size()) + " differs from " +
                         std::to_string(table.dim_));
      if (!table.entries_.emplace(std::move(key), std::move(v)).second)
        throw InputError(where + "duplicate key after lowercasing");
    }
    return table;
  }

  static EmbeddingTable load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open embedding file: " + path);
    return parse(in, path);
  }

  void insert(const std::string& key, Vector v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) throw InputError("embedding dimension mismatch for " + key);
    entries_[to_lower(key)] = std::move(v);
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return entries_.size(); }

  const Vector* find(std::string_view key) const {
    auto it = entries_.find(to_lower(key));
    return it == entries_.end() ? nullptr : &it->second;
  }

  // Exact entry for the space-joined phrase, else the mean of the known token
  // vectors, else nothing.
  std::optional<Vector> lookup(const std::vector<std::string>& tokens) const {
    if (tokens.empty() || dim_ == 0) return std::nullopt;
    if (const auto* v = find(join(tokens))) return *v;
    Vector sum(dim_, 0.0);
    std::size_t known = 0;
    for (const auto& t : tokens) {
      if (const auto* v = find(t)) {
        for (std::size_t i = 0; i < dim_; ++i) sum[i] += (*v)[i];
        ++known;
      }
    }
    if (known == 0) return std::nullopt;
    for (auto& x : sum) x /= static_cast<double>(known);
    return sum;
  }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, Vector> entries_;
};

// ---------------------------------------------------------------------------
// Golden set and expert labels (JSON objects keyed by transcript id).

struct GoldEntry {
  std::vector<std::string> concepts;
  std::set<int> intent_sentences;
  std::string category;
};

using GoldenSet = std::map<std::string, GoldEntry>;

inline GoldenSet parse_golden(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open golden set: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw InputError(path + ": expected an object keyed by transcript id");
  GoldenSet gs;
  try {
    for (const auto& [id, rec] : doc.items()) {
      GoldEntry g;
      if (rec.contains("concepts")) g.concepts = rec["concepts"].get<std::vector<std::string>>();
      if (rec.contains("intent_sentences"))
        for (int i : rec["intent_sentences"].get<std::vector<int>>()) g.intent_sentences.insert(i);
      if (rec.contains("category")) g.category = rec["category"].get<std::string>();
      gs.emplace(id, std::move(g));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return gs;
}

// Checks referenced sentences and categories exist.
inline void validate_golden(const GoldenSet& gs, const std::vector<Transcript>& corpus,
                            const std::set<std::string>& categories) {
  std::unordered_map<std::string, const Transcript*> by_id;
  for (const auto& t : corpus) by_id[t.id] = &t;
  for (const auto& [id, g] : gs) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InputError("golden set references unknown transcript " + id);
    const auto n = static_cast<int>(it->second->sentences.size());
    for (int i : g.intent_sentences)
      if (i < 0 || i >= n)
        throw InputError("golden set: transcript " + id + " has no sentence " + std::to_string(i));
    if (!categories.empty() && !g.category.empty() && !categories.count(g.category))
      throw InputError("golden set: transcript " + id + " has unknown category " + g.category);
  }
}

enum class ExpertLabel { kUseful, kNoisy };

struct TranscriptLabels {
  std::map<std::string, ExpertLabel> concepts;  // keyed by concept phrase
  std::map<std::string, ExpertLabel> intents;   // keyed by segment id "start-end"
};

using ExpertLabels = std::map<std::string, TranscriptLabels>;

inline ExpertLabels parse_expert_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open expert labels: " + path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw InputError(path + ": expected an object keyed by transcript id");
  auto label = [&](const nlohmann::json& v) {
    const auto s = v.is_string() ? v.get<std::string>() : std::string{};
    if (s == "useful") return ExpertLabel::kUseful;
    if (s == "noisy") return ExpertLabel::kNoisy;
    throw InputError(path + ": label must be \"useful\" or \"noisy\"");
  };
  ExpertLabels out;
  for (const auto& [id, rec] : doc.items()) {
    TranscriptLabels tl;
    if (rec.contains("concepts"))
      for (const auto& [k, v] : rec["concepts"].items()) tl.concepts.emplace(k, label(v));
    if (rec.contains("intents"))
      for (const auto& [k, v] : rec["intents"].items()) tl.intents.emplace(k, label(v));
    out.emplace(id, std::move(tl));
  }
  return out;
}

}  // namespace talkmine
