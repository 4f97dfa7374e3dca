#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "talkmine/error.hpp"

namespace talkmine {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// True when every byte is an ASCII letter. Empty strings are not words.
inline bool is_alpha_word(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
  });
}

inline std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

inline bool is_blank(std::string_view s) { return trim(s).empty(); }

inline std::string join(const std::vector<std::string>& parts, std::string_view sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline std::vector<std::string> split(std::string_view s, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    out.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

// Lowercased maximal runs of ASCII letters. Used for plain text that carries
// no annotation layer (category documents, gold phrases).
inline std::vector<std::string> word_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// 64-bit FNV-1a. Stable across platforms, unlike std::hash.
inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Word lists shared by the funnel, the tagger and the evaluator: a general
// stopword list, an optional English vocabulary and a surface→lemma table.
class Lexicon {
 public:
  Lexicon() = default;
  Lexicon(std::unordered_set<std::string> stopwords,
          std::unordered_set<std::string> vocabulary,
          std::unordered_map<std::string, std::string> lemmas)
      : stopwords_(std::move(stopwords)),
        vocabulary_(std::move(vocabulary)),
        lemmas_(std::move(lemmas)) {}

  static std::unordered_set<std::string> load_word_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open word list: " + path);
    std::unordered_set<std::string> words;
    std::string line;
    while (std::getline(in, line)) {
      auto w = trim(line);
      if (w.empty() || w.front() == '#') continue;
      words.insert(to_lower(w));
    }
    return words;
  }

  static std::unordered_map<std::string, std::string> load_lemmas(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open lemma table: " + path);
    std::unordered_map<std::string, std::string> lemmas;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (is_blank(line) || line.front() == '#') continue;
      auto cols = split(line, '\t');
      if (cols.size() != 2 || trim(cols[0]).empty() || trim(cols[1]).empty())
        throw InputError(path + ":" + std::to_string(lineno) + ": expected surface<TAB>lemma");
      lemmas.emplace(to_lower(trim(cols[0])), to_lower(trim(cols[1])));
    }
    return lemmas;
  }

  // Empty paths leave the corresponding list empty (vocabulary check disabled).
  static Lexicon load(const std::string& stopwords_path, const std::string& vocab_path,
                      const std::string& lemmas_path) {
    return Lexicon(stopwords_path.empty() ? std::unordered_set<std::string>{}
                                          : load_word_list(stopwords_path),
                   vocab_path.empty() ? std::unordered_set<std::string>{}
                                      : load_word_list(vocab_path),
                   lemmas_path.empty() ? std::unordered_map<std::string, std::string>{}
                                       : load_lemmas(lemmas_path));
  }

  bool is_stopword(std::string_view w) const { return stopwords_.count(to_lower(w)) > 0; }

  bool has_vocabulary() const { return !vocabulary_.empty(); }
  bool in_vocabulary(std::string_view w) const {
    return !has_vocabulary() || vocabulary_.count(to_lower(w)) > 0;
  }

  std::string lemma(std::string_view w) const {
    auto key = to_lower(w);
    auto it = lemmas_.find(key);
    return it == lemmas_.end() ? key : it->second;
  }

  // Lowercase, drop stopwords, lemmatize.
  std::vector<std::string> normalize(std::string_view text) const {
    std::vector<std::string> out;
    for (auto& w : word_tokens(text)) {
      if (is_stopword(w)) continue;
      auto l = lemma(w);
      if (is_stopword(l)) continue;
      out.push_back(std::move(l));
    }
    return out;
  }

  const std::unordered_set<std::string>& stopwords() const { return stopwords_; }

 private:
  std::unordered_set<std::string> stopwords_;
  std::unordered_set<std::string> vocabulary_;
  std::unordered_map<std::string, std::string> lemmas_;
};

}  // namespace talkmine
