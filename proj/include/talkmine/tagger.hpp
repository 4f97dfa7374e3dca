#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "talkmine/config.hpp"
#include "talkmine/corpus.hpp"
#include "talkmine/text.hpp"
#include "talkmine/vectors.hpp"

namespace talkmine::tagger {

// category id -> raw document texts
using CategoryDocs = std::map<std::string, std::vector<std::string>>;

// One sub-directory per category; every regular file inside is a document.
inline CategoryDocs load_category_docs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InputError("category directory not found: " + dir);
  CategoryDocs out;
  std::vector<fs::path> cats;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) cats.push_back(e.path());
  std::sort(cats.begin(), cats.end());
  for (const auto& c : cats) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(c))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    auto& docs = out[c.filename().string()];
    for (const auto& f : files) {
      std::ifstream in(f);
      if (!in) throw InputError("cannot read category document: " + f.string());
      std::ostringstream ss;
      ss << in.rdbuf();
      docs.push_back(ss.str());
    }
  }
  return out;
}

// Keeps only lines under markdown-style headings ("# Title") whose lowercased
// title is whitelisted. An empty whitelist keeps the whole text.
inline std::string select_sections(const std::string& text, const std::vector<std::string>& sections) {
  if (sections.empty()) return text;
  std::set<std::string> allowed;
  for (const auto& s : sections) allowed.insert(to_lower(trim(s)));
  std::istringstream in(text);
  std::string line, out;
  bool keep = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.front() == '#') {
      keep = allowed.count(to_lower(trim(line.substr(line.find_first_not_of('#'))))) > 0;
      continue;
    }
    if (keep) out += line + '\n';
  }
  return out;
}

struct CategoryCounts {
  std::string id;
  std::map<std::string, int> counts;              // token -> count over all documents
  std::vector<std::set<std::string>> documents;  // token presence per document
};

using Vocabulary = std::vector<CategoryCounts>;  // sorted by id

inline Vocabulary build_vocabulary(const CategoryDocs& docs, const Lexicon& lex,
                                   const std::vector<std::string>& sections = {}) {
  if (docs.size() < 2) throw InputError("tagging needs at least 2 categories");
  Vocabulary v;
  for (const auto& [id, texts] : docs) {
    if (texts.empty()) throw InputError("category " + id + " has no documents");
    CategoryCounts cc{id, {}, {}};
    for (const auto& text : texts) {
      std::set<std::string> present;
      for (auto& tok : lex.normalize(select_sections(text, sections))) {
        ++cc.counts[tok];
        present.insert(std::move(tok));
      }
      cc.documents.push_back(std::move(present));
    }
    v.push_back(std::move(cc));
  }
  return v;
}

// 2x2 document contingency table for a (token, category) pair:
//   a: in category, has token     b: outside, has token
//   c: in category, lacks token   d: outside, lacks token
struct Contingency {
  double a = 0, b = 0, c = 0, d = 0;
  double n() const { return a + b + c + d; }
};

// N(ad - bc)^2 / ((a+b)(c+d)(a+c)(b+d)); 0 when a marginal is empty.
inline double chi_square(const Contingency& t) {
  const double denom = (t.a + t.b) * (t.c + t.d) * (t.a + t.c) * (t.b + t.d);
  if (denom == 0) return 0;
  const double x = t.a * t.d - t.b * t.c;
  return t.n() * x * x / denom;
}

// Mutual information (nats) between token presence and category membership.
inline double mutual_information(const Contingency& t) {
  const double n = t.n();
  if (n == 0) return 0;
  const double row_t = t.a + t.b, row_f = t.c + t.d;  // token present / absent
  const double col_in = t.a + t.c, col_out = t.b + t.d;
  if (row_t == 0 || row_f == 0 || col_in == 0 || col_out == 0) return 0;
  auto cell = [n](double nij, double ri, double cj) {
    return nij == 0 ? 0.0 : (nij / n) * std::log(n * nij / (ri * cj));
  };
  const double mi = cell(t.a, row_t, col_in) + cell(t.b, row_t, col_out) +
                    cell(t.c, row_f, col_in) + cell(t.d, row_f, col_out);
  return std::max(0.0, mi);
}

struct FeatureSelection {
  std::vector<std::string> categories;
  std::map<std::string, std::vector<double>> chi2;  // token -> per category
  std::map<std::string, std::vector<double>> mi;
  std::vector<std::string> selected;  // sorted
};

inline Contingency contingency(const Vocabulary& v, std::size_t cat, const std::string& token) {
  Contingency t;
  for (std::size_t c = 0; c < v.size(); ++c)
    for (const auto& doc : v[c].documents) {
      const bool has = doc.count(token) > 0;
      if (c == cat) (has ? t.a : t.c) += 1;
      else (has ? t.b : t.d) += 1;
    }
  return t;
}

// A token is kept if it ranks in the top_m by chi-square or by MI for any
// category. Rank ties break on the token text.
inline FeatureSelection select_features(const Vocabulary& v, int top_m = 500) {
  if (v.size() < 2) throw InputError("feature selection needs at least 2 categories");
  FeatureSelection fs;
  std::set<std::string> tokens;
  for (const auto& c : v) {
    fs.categories.push_back(c.id);
    for (const auto& [tok, _] : c.counts) tokens.insert(tok);
  }
  for (const auto& tok : tokens) {
    auto& x2 = fs.chi2[tok];
    auto& mi = fs.mi[tok];
    for (std::size_t c = 0; c < v.size(); ++c) {
      const auto t = contingency(v, c, tok);
      x2.push_back(chi_square(t));
      mi.push_back(mutual_information(t));
    }
  }
  std::set<std::string> keep;
  const std::vector<std::string> all(tokens.begin(), tokens.end());
  const auto m = std::min<std::size_t>(static_cast<std::size_t>(top_m), all.size());
  for (const auto* stat : {&fs.chi2, &fs.mi}) {
    for (std::size_t c = 0; c < v.size(); ++c) {
      std::vector<std::string> order = all;
      std::stable_sort(order.begin(), order.end(), [&](const auto& x, const auto& y) {
        return stat->at(x)[c] > stat->at(y)[c];
      });
      keep.insert(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));
    }
  }
  fs.selected.assign(keep.begin(), keep.end());
  return fs;
}

struct CategoryModel {
  std::string id;
  Vector weights;  // over Models::features
};

struct Models {
  VectorMode mode = VectorMode::kTfidf;
  std::vector<std::string> features;  // sorted global feature index
  Vector idf;                         // ln(C / cf) per feature
  std::vector<CategoryModel> categories;

  std::ptrdiff_t feature_index(const std::string& tok) const {
    auto it = std::lower_bound(features.begin(), features.end(), tok);
    if (it == features.end() || *it != tok) return -1;
    return it - features.begin();
  }

  // Raw term counts over the feature index -> weights in this mode.
  Vector weigh(const Vector& counts) const {
    Vector w(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      switch (mode) {
        case VectorMode::kTfidf: w[i] = counts[i] * idf[i]; break;
        case VectorMode::kBow: w[i] = counts[i]; break;
        case VectorMode::kBinary: w[i] = counts[i] > 0 ? 1.0 : 0.0; break;
      }
    }
    return w;
  }
};

inline Models vectorize(const Vocabulary& v, const FeatureSelection& sel, VectorMode mode) {
  Models m;
  m.mode = mode;
  m.features = sel.selected;
  const double cats = static_cast<double>(v.size());
  for (const auto& f : m.features) {
    int cf = 0;
    for (const auto& c : v) cf += c.counts.count(f) ? 1 : 0;
    m.idf.push_back(std::log(cats / std::max(cf, 1)));
  }
  for (const auto& c : v) {
    Vector counts(m.features.size(), 0.0);
    for (std::size_t i = 0; i < m.features.size(); ++i) {
      auto it = c.counts.find(m.features[i]);
      if (it != c.counts.end()) counts[i] = it->second;
    }
    m.categories.push_back({c.id, m.weigh(counts)});
  }
  return m;
}

struct TagResult {
  std::string transcript;
  std::vector<std::pair<std::string, double>> ranked;  // (category, cosine), descending
  bool low_confidence = false;
};

// Lowercased, stopword-free lemmas of the transcript's alphabetic tokens. The
// lexicon lemma wins; the annotation lemma covers words it does not know.
inline std::vector<std::string> transcript_terms(const Transcript& t, const Lexicon& lex) {
  std::vector<std::string> out;
  for (const auto& s : t.sentences)
    for (const auto& tok : s.tokens) {
      if (is_punct(tok) || !is_alpha_word(tok.surface) || lex.is_stopword(tok.surface)) continue;
      const auto surface = to_lower(tok.surface);
      auto lemma = lex.lemma(surface);
      if (lemma == surface && !tok.lemma.empty()) lemma = to_lower(tok.lemma);
      if (lex.is_stopword(lemma)) continue;
      out.push_back(std::move(lemma));
    }
  return out;
}

inline std::vector<std::pair<std::string, double>> rank_categories(const Vector& doc,
                                                                   const Models& m) {
  std::vector<std::pair<std::string, double>> out;
  for (const auto& c : m.categories) out.emplace_back(c.id, cosine(doc, c.weights));
  // Similarities equal to 12 decimals count as ties so that rounding noise from
  // rescaling a category vector cannot reorder them.
  const auto key = [](double s) { return std::llround(s * 1e12); };
  std::sort(out.begin(), out.end(), [&](const auto& x, const auto& y) {
    if (key(x.second) != key(y.second)) return key(x.second) > key(y.second);
    return x.first < y.first;
  });
  return out;
}

inline TagResult tag_terms(const std::string& id, const std::vector<std::string>& terms,
                           const Models& m, int k = 2) {
  Vector counts(m.features.size(), 0.0);
  for (const auto& term : terms)
    if (auto i = m.feature_index(term); i >= 0) counts[static_cast<std::size_t>(i)] += 1;
  const auto doc = m.weigh(counts);
  TagResult r;
  r.transcript = id;
  r.low_confidence = std::all_of(doc.begin(), doc.end(), [](double x) { return x == 0; });
  r.ranked = rank_categories(doc, m);
  r.ranked.resize(std::min(r.ranked.size(), static_cast<std::size_t>(k)));
  return r;
}

inline TagResult tag(const Transcript& t, const Models& m, const Lexicon& lex, int k = 2) {
  return tag_terms(t.id, transcript_terms(t, lex), m, k);
}

inline Models build_models(const CategoryDocs& docs, const Lexicon& lex, const TaggerConfig& cfg) {
  const auto vocab = build_vocabulary(docs, lex, cfg.sections);
  return vectorize(vocab, select_features(vocab, cfg.top_m), cfg.mode);
}

}  // namespace talkmine::tagger
