#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "talkmine/corpus.hpp"
#include "talkmine/text.hpp"

namespace talkmine::metrics {

// Outcome tallies for one transcript.
//   A: unmatched predictions an expert labelled noisy
//   B: unmatched predictions labelled useful or not labelled
//   C: predictions matching ground truth
//   D: ground-truth items nothing matched
struct MatchCounts {
  int a = 0;
  int b = 0;
  int c = 0;
  int d = 0;

  int predicted() const { return a + b + c; }
  int gold() const { return c + d; }
  double precision() const { return predicted() ? double(c) / double(predicted()) : 0.0; }
  double recall() const { return gold() ? double(c) / double(gold()) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }
};

// Base-form token set of a phrase with general stopwords removed.
inline std::set<std::string> phrase_tokens(const std::string& phrase, const Lexicon& lex) {
  const auto toks = lex.normalize(phrase);
  return {toks.begin(), toks.end()};
}

inline std::size_t shared(const std::set<std::string>& x, const std::set<std::string>& y) {
  std::size_t n = 0;
  for (const auto& t : x) n += y.count(t);
  return n;
}

// Partial (token-level) matching: a prediction matches a gold phrase when their
// normalized token sets share at least `min_shared` tokens.
inline MatchCounts concept_pr(const std::vector<std::string>& predicted,
                              const std::vector<std::string>& gold, const Lexicon& lex,
                              const std::map<std::string, ExpertLabel>* labels = nullptr,
                              int min_shared = 1) {
  std::vector<std::set<std::string>> p, g;
  for (const auto& x : predicted) p.push_back(phrase_tokens(x, lex));
  for (const auto& x : gold) g.push_back(phrase_tokens(x, lex));
  const auto need = static_cast<std::size_t>(std::max(1, min_shared));
  std::vector<bool> gold_hit(g.size(), false);
  MatchCounts m;
  for (std::size_t i = 0; i < p.size(); ++i) {
    bool hit = false;
    for (std::size_t j = 0; j < g.size(); ++j)
      if (shared(p[i], g[j]) >= need) {
        hit = true;
        gold_hit[j] = true;
      }
    if (hit) {
      ++m.c;
    } else if (labels) {
      auto it = labels->find(predicted[i]);
      (it != labels->end() && it->second == ExpertLabel::kNoisy ? m.a : m.b) += 1;
    } else {
      ++m.b;
    }
  }
  m.d = static_cast<int>(std::count(gold_hit.begin(), gold_hit.end(), false));
  return m;
}

struct Span {
  int start = 0;
  int end = 0;  // inclusive
  std::string id() const { return std::to_string(start) + "-" + std::to_string(end); }
};

// Exact sentence matching over the de-duplicated set of predicted sentences.
// An unmatched sentence counts toward A when its segment is labelled noisy.
inline MatchCounts intent_pr(const std::vector<Span>& predicted, const std::set<int>& gold,
                             const std::map<std::string, ExpertLabel>* labels = nullptr) {
  std::map<int, bool> sentences;  // sentence -> belongs to a noisy-labelled segment
  for (const auto& s : predicted) {
    bool noisy = false;
    if (labels) {
      auto it = labels->find(s.id());
      noisy = it != labels->end() && it->second == ExpertLabel::kNoisy;
    }
    for (int i = s.start; i <= s.end; ++i) {
      auto [it, fresh] = sentences.emplace(i, noisy);
      if (!fresh) it->second = it->second && noisy;
    }
  }
  MatchCounts m;
  for (const auto& [i, noisy] : sentences) {
    if (gold.count(i)) ++m.c;
    else (noisy ? m.a : m.b) += 1;
  }
  m.d = static_cast<int>(gold.size()) - m.c;
  return m;
}

// 1 if the single gold category is among the first k predictions.
inline double recall_at_k(const std::vector<std::string>& ranked, const std::string& gold, int k) {
  const auto n = std::min(ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
  return std::find(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(n), gold) !=
                 ranked.begin() + static_cast<std::ptrdiff_t>(n)
             ? 1.0
             : 0.0;
}

// Percentage of labelled items marked useful; absent when nothing is labelled.
template <typename Range>
std::optional<double> useful_percentage(const Range& labels) {
  std::size_t total = 0, useful = 0;
  for (const auto& l : labels) {
    ++total;
    if (l == ExpertLabel::kUseful) ++useful;
  }
  if (total == 0) return std::nullopt;
  return 100.0 * double(useful) / double(total);
}

struct ValueShares {
  std::optional<double> vcp;  // valuable concept percentage
  std::optional<double> vip;  // valuable intent percentage
};

inline ValueShares vcp_vip(const ExpertLabels& labels) {
  std::vector<ExpertLabel> c, i;
  for (const auto& [_, tl] : labels) {
    for (const auto& [k, l] : tl.concepts) c.push_back(l);
    for (const auto& [k, l] : tl.intents) i.push_back(l);
  }
  return {useful_percentage(c), useful_percentage(i)};
}

}  // namespace talkmine::metrics
