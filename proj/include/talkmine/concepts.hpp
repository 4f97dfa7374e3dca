#pragma once

// Key-concept funnel. Every within-sentence n-gram starts as a candidate; noise
// rules prune it; lemma merging and embedding similarity fold near-duplicates
// into groups; groups are scored from four explainable signals.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "talkmine/config.hpp"
#include "talkmine/corpus.hpp"
#include "talkmine/text.hpp"
#include "talkmine/vectors.hpp"

namespace talkmine::concepts {

struct Occurrence {
  int sentence = 0;
  int offset = 0;  // token index of the first token
  bool casual = false;

  auto operator<=>(const Occurrence&) const = default;
};

struct PhraseCandidate {
  std::vector<std::string> tokens;  // lowercased surfaces
  std::vector<Occurrence> occurrences;
  std::string lemma_key;
  std::vector<std::string> pos_pattern;

  std::string text() const { return join(tokens); }
  int n() const { return static_cast<int>(tokens.size()); }

  // Occurrences in business sentences. Casual occurrences are kept (flagged)
  // only so the casual-only noise rule can see them.
  int frequency() const {
    return static_cast<int>(std::count_if(occurrences.begin(), occurrences.end(),
                                          [](const Occurrence& o) { return !o.casual; }));
  }
  bool casual_only() const { return frequency() == 0; }
};

// A token can take part in a phrase only if it is not punctuation and is purely
// alphabetic.
inline bool phrase_token(const Token& t) { return !is_punct(t) && is_alpha_word(t.surface); }

inline std::vector<PhraseCandidate> extract_phrases(const Transcript& t,
                                                    const std::vector<bool>& casual,
                                                    int ngram_max = 5) {
  std::map<std::string, PhraseCandidate> by_text;
  for (const auto& s : t.sentences) {
    const bool is_casual = static_cast<std::size_t>(s.index) < casual.size() &&
                           casual[static_cast<std::size_t>(s.index)];
    const auto& toks = s.tokens;
    for (std::size_t i = 0; i < toks.size(); ++i) {
      std::vector<std::string> words, lemmas, pos;
      for (std::size_t n = 1; n <= static_cast<std::size_t>(ngram_max) && i + n <= toks.size(); ++n) {
        const auto& tok = toks[i + n - 1];
        if (!phrase_token(tok)) break;
        words.push_back(to_lower(tok.surface));
        lemmas.push_back(to_lower(tok.lemma));
        pos.push_back(tok.upos);
        auto& c = by_text[join(words)];
        if (c.tokens.empty()) {
          c.tokens = words;
          c.lemma_key = join(lemmas);
          c.pos_pattern = pos;
        }
        c.occurrences.push_back({s.index, static_cast<int>(i), is_casual});
      }
    }
  }
  std::vector<PhraseCandidate> out;
  out.reserve(by_text.size());
  for (auto& [_, c] : by_text) out.push_back(std::move(c));
  return out;
}

// Corpus-wide document frequencies (one document per transcript, all
// sentences) plus the discovered conversational stopwords.
struct CorpusStats {
  std::size_t documents = 0;
  std::unordered_map<std::string, int> phrase_df;
  std::unordered_map<std::string, int> token_df;
  std::unordered_set<std::string> conversational_stopwords;

  static double idf(std::size_t n, int df) {
    return std::log(static_cast<double>(n) / static_cast<double>(std::max(df, 1)));
  }
  double phrase_idf(const std::string& phrase) const {
    auto it = phrase_df.find(phrase);
    return idf(documents, it == phrase_df.end() ? 0 : it->second);
  }
  double token_idf(const std::string& token) const {
    auto it = token_df.find(token);
    return idf(documents, it == token_df.end() ? 0 : it->second);
  }

  static CorpusStats build(const std::vector<Transcript>& corpus, int ngram_max = 5) {
    CorpusStats st;
    st.documents = corpus.size();
    for (const auto& t : corpus) {
      std::unordered_set<std::string> phrases, tokens;
      for (const auto& s : t.sentences) {
        for (std::size_t i = 0; i < s.tokens.size(); ++i) {
          std::string key;
          for (std::size_t n = 0; n < static_cast<std::size_t>(ngram_max) && i + n < s.tokens.size(); ++n) {
            const auto& tok = s.tokens[i + n];
            if (!phrase_token(tok)) break;
            const auto w = to_lower(tok.surface);
            if (n == 0) tokens.insert(w);
            key += (n ? " " : "") + w;
            phrases.insert(key);
          }
        }
      }
      for (const auto& p : phrases) ++st.phrase_df[p];
      for (const auto& w : tokens) ++st.token_df[w];
    }
    return st;
  }
};

// Tokens whose relative frequency in casual sentences is at least
// `ratio_threshold` times their relative frequency in business sentences and
// which occur at least `min_count` times in casual sentences. Tokens absent
// from business sentences have an infinite ratio.
inline std::set<std::string> detect_conversational_stopwords(
    const std::vector<Transcript>& corpus, const std::vector<std::vector<bool>>& casual,
    double ratio_threshold = 3.0, int min_count = 10) {
  std::map<std::string, long> casual_counts, business_counts;
  long casual_total = 0, business_total = 0;
  for (std::size_t ti = 0; ti < corpus.size(); ++ti) {
    for (const auto& s : corpus[ti].sentences) {
      const bool c = ti < casual.size() && static_cast<std::size_t>(s.index) < casual[ti].size() &&
                     casual[ti][static_cast<std::size_t>(s.index)];
      for (const auto& tok : s.tokens) {
        if (!phrase_token(tok)) continue;
        const auto w = to_lower(tok.surface);
        if (c) {
          ++casual_counts[w];
          ++casual_total;
        } else {
          ++business_counts[w];
          ++business_total;
        }
      }
    }
  }
  std::set<std::string> out;
  if (casual_total == 0) return out;
  for (const auto& [w, cc] : casual_counts) {
    if (cc < min_count) continue;
    auto it = business_counts.find(w);
    if (it == business_counts.end()) {
      out.insert(w);
      continue;
    }
    const double rc = double(cc) / double(casual_total);
    const double rb = double(it->second) / double(business_total);
    if (rc / rb >= ratio_threshold) out.insert(w);
  }
  return out;
}

// Lowercased entity mentions whose label is in `labels`, sorted and unique.
inline std::vector<std::string> collect_entity_strings(const std::vector<Transcript>& corpus,
                                                       const std::vector<std::string>& labels) {
  std::set<std::string> out;
  const std::set<std::string> wanted(labels.begin(), labels.end());
  for (const auto& t : corpus)
    for (const auto& s : t.sentences)
      for (const auto& span : entity_spans(s)) {
        if (!wanted.count(span.label)) continue;
        std::vector<std::string> words;
        for (auto i = span.begin; i < span.end; ++i) words.push_back(to_lower(s.tokens[i].surface));
        out.insert(join(words));
      }
  return {out.begin(), out.end()};
}

enum class NoiseReason {
  kStopwordBoundary,
  kOutOfVocabulary,
  kCasualOnly,
  kConversationalStopword,
  kEntityLike,
  kLowPhraseIdf,
  kLowTokenIdf,
};

inline const char* to_string(NoiseReason r) {
  switch (r) {
    case NoiseReason::kStopwordBoundary: return "stopword_boundary";
    case NoiseReason::kOutOfVocabulary: return "out_of_vocabulary";
    case NoiseReason::kCasualOnly: return "casual_only";
    case NoiseReason::kConversationalStopword: return "conversational_stopword";
    case NoiseReason::kEntityLike: return "entity_like";
    case NoiseReason::kLowPhraseIdf: return "low_phrase_idf";
    case NoiseReason::kLowTokenIdf: return "low_token_idf";
  }
  return "?";
}

class NoiseFilter {
 public:
  NoiseFilter(const CorpusStats& stats, const Lexicon& lex, const EmbeddingTable& emb,
              const std::vector<std::string>& entity_strings, const ConceptConfig& cfg)
      : stats_(stats), lex_(lex), emb_(emb), cfg_(cfg) {
    for (const auto& e : entity_strings)
      if (auto v = emb.lookup(split(e, ' '))) entity_vectors_.push_back(std::move(*v));
  }

  // First rule the candidate violates, or nothing if it survives.
  std::optional<NoiseReason> reason(const PhraseCandidate& c) const {
    if (lex_.is_stopword(c.tokens.front()) || lex_.is_stopword(c.tokens.back()))
      return NoiseReason::kStopwordBoundary;
    for (const auto& w : c.tokens)
      if (!lex_.in_vocabulary(w)) return NoiseReason::kOutOfVocabulary;
    if (c.casual_only()) return NoiseReason::kCasualOnly;
    for (const auto& w : c.tokens)
      if (stats_.conversational_stopwords.count(w)) return NoiseReason::kConversationalStopword;
    if (!entity_vectors_.empty()) {
      if (auto v = emb_.lookup(c.tokens)) {
        for (const auto& e : entity_vectors_)
          if (cosine(*v, e) >= cfg_.ner_sim_threshold) return NoiseReason::kEntityLike;
      }
    }
    if (stats_.phrase_idf(c.text()) < cfg_.idf_phrase_min) return NoiseReason::kLowPhraseIdf;
    double sum = 0;
    for (const auto& w : c.tokens) sum += stats_.token_idf(w);
    if (sum / static_cast<double>(c.tokens.size()) < cfg_.idf_token_min)
      return NoiseReason::kLowTokenIdf;
    return std::nullopt;
  }

  std::vector<PhraseCandidate> apply(std::vector<PhraseCandidate> candidates) const {
    std::vector<PhraseCandidate> out;
    for (auto& c : candidates)
      if (!reason(c)) out.push_back(std::move(c));
    return out;
  }

 private:
  const CorpusStats& stats_;
  const Lexicon& lex_;
  const EmbeddingTable& emb_;
  const ConceptConfig& cfg_;
  std::vector<Vector> entity_vectors_;
};

inline std::vector<PhraseCandidate> remove_noise(std::vector<PhraseCandidate> candidates,
                                                 const CorpusStats& stats, const Lexicon& lex,
                                                 const std::vector<std::string>& entity_strings,
                                                 const EmbeddingTable& emb,
                                                 const ConceptConfig& cfg) {
  return NoiseFilter(stats, lex, emb, entity_strings, cfg).apply(std::move(candidates));
}

// Candidates sharing a lemma key collapse into one: occurrences pooled, the
// most frequent surface form (then lexicographically smallest) kept for display.
inline std::vector<PhraseCandidate> merge_by_lemma(std::vector<PhraseCandidate> candidates) {
  std::map<std::string, std::vector<PhraseCandidate>> by_key;
  for (auto& c : candidates) by_key[c.lemma_key].push_back(std::move(c));
  std::vector<PhraseCandidate> out;
  for (auto& [key, list] : by_key) {
    auto best = std::min_element(list.begin(), list.end(), [](const auto& a, const auto& b) {
      if (a.frequency() != b.frequency()) return a.frequency() > b.frequency();
      return a.text() < b.text();
    });
    PhraseCandidate merged = *best;
    merged.occurrences.clear();
    for (const auto& c : list)
      merged.occurrences.insert(merged.occurrences.end(), c.occurrences.begin(), c.occurrences.end());
    std::sort(merged.occurrences.begin(), merged.occurrences.end());
    out.push_back(std::move(merged));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.text() < b.text(); });
  return out;
}

struct PhraseGroup {
  PhraseCandidate head;
  std::vector<PhraseCandidate> members;  // includes the head, first
  int aggregate_frequency = 0;
};

// Head preference: bigrams and trigrams first, then frequency, then text.
inline bool head_preferred(const PhraseCandidate& a, const PhraseCandidate& b) {
  auto tier = [](const PhraseCandidate& c) { return (c.n() == 2 || c.n() == 3) ? 0 : 1; };
  if (tier(a) != tier(b)) return tier(a) < tier(b);
  if (a.frequency() != b.frequency()) return a.frequency() > b.frequency();
  return a.text() < b.text();
}

// Greedy pass in preference order: each phrase joins the first existing head
// with cosine >= threshold, otherwise becomes a head. Phrases without any
// known vector always form their own group.
inline std::vector<PhraseGroup> group_by_similarity(std::vector<PhraseCandidate> candidates,
                                                    const EmbeddingTable& emb,
                                                    double threshold) {
  std::sort(candidates.begin(), candidates.end(), head_preferred);
  std::vector<PhraseGroup> groups;
  std::vector<std::optional<Vector>> head_vecs;
  for (auto& c : candidates) {
    auto v = emb.lookup(c.tokens);
    std::size_t target = groups.size();
    if (v) {
      for (std::size_t g = 0; g < groups.size(); ++g) {
        if (head_vecs[g] && cosine(*v, *head_vecs[g]) >= threshold) {
          target = g;
          break;
        }
      }
    }
    if (target == groups.size()) {
      groups.push_back({c, {}, 0});
      head_vecs.push_back(std::move(v));
    }
    groups[target].aggregate_frequency += c.frequency();
    groups[target].members.push_back(std::move(c));
  }
  return groups;
}

inline std::vector<PhraseGroup> normalize(std::vector<PhraseCandidate> candidates,
                                          const EmbeddingTable& emb, double sim_threshold) {
  return group_by_similarity(merge_by_lemma(std::move(candidates)), emb, sim_threshold);
}

struct Signals {
  double frequency = 0;
  double pos = 0;
  double location = 0;
  double similarity = 0;

  double sum() const { return frequency + pos + location + similarity; }
};

struct RankedConcept {
  std::string phrase;
  double score = 0;
  Signals values;         // normalized signal values in [0,1]
  Signals contributions;  // weight * value; they add up to score
  std::vector<std::string> members;
  int aggregate_frequency = 0;
  int first_sentence = 0;
  std::vector<int> occurrences;  // business sentence index of every member occurrence
};

inline bool is_nominal(const std::string& upos) { return upos == "NOUN" || upos == "PROPN"; }

inline std::vector<RankedConcept> rank(const std::vector<PhraseGroup>& groups,
                                       const Transcript& transcript, const ConceptWeights& w,
                                       int top_k = 10, bool earlier_is_higher = true) {
  if (groups.empty()) return {};
  const auto n = groups.size();
  std::vector<double> freq(n), sim(n);
  std::vector<RankedConcept> out(n);
  const auto sentences = transcript.sentences.size();
  for (std::size_t g = 0; g < n; ++g) {
    const auto& grp = groups[g];
    auto& rc = out[g];
    rc.phrase = grp.head.text();
    rc.aggregate_frequency = grp.aggregate_frequency;
    freq[g] = std::log1p(static_cast<double>(grp.aggregate_frequency));
    sim[g] = static_cast<double>(grp.members.size());
    for (const auto& m : grp.members) {
      rc.members.push_back(m.text());
      for (const auto& o : m.occurrences)
        if (!o.casual) rc.occurrences.push_back(o.sentence);
    }
    std::sort(rc.occurrences.begin(), rc.occurrences.end());
    if (rc.occurrences.empty()) {
      for (const auto& m : grp.members)
        for (const auto& o : m.occurrences) rc.occurrences.push_back(o.sentence);
      std::sort(rc.occurrences.begin(), rc.occurrences.end());
      rc.first_sentence = rc.occurrences.empty() ? 0 : rc.occurrences.front();
      rc.occurrences.clear();
    } else {
      rc.first_sentence = rc.occurrences.front();
    }

    const auto& pp = grp.head.pos_pattern;
    rc.values.pos = pp.empty() ? 0.0
                               : double(std::count_if(pp.begin(), pp.end(), is_nominal)) / double(pp.size());
    const double rel = sentences > 1 ? double(rc.first_sentence) / double(sentences - 1) : 0.0;
    rc.values.location = earlier_is_higher ? 1.0 - rel : rel;
  }

  auto minmax_scale = [](const std::vector<double>& xs, std::size_t i) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    if (*hi == *lo) return 1.0;
    return (xs[i] - *lo) / (*hi - *lo);
  };
  for (std::size_t g = 0; g < n; ++g) {
    auto& rc = out[g];
    rc.values.frequency = minmax_scale(freq, g);
    rc.values.similarity = minmax_scale(sim, g);
    rc.contributions = {w.frequency * rc.values.frequency, w.pos * rc.values.pos,
                        w.location * rc.values.location, w.similarity * rc.values.similarity};
    rc.score = rc.contributions.sum();
  }
  std::sort(out.begin(), out.end(), [](const RankedConcept& a, const RankedConcept& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.phrase < b.phrase;
  });
  if (out.size() > static_cast<std::size_t>(top_k)) out.resize(static_cast<std::size_t>(top_k));
  return out;
}

struct FunnelCounts {
  std::size_t extracted = 0;
  std::size_t after_noise = 0;
  std::size_t after_lemma_merge = 0;
  std::size_t groups = 0;
};

struct FunnelResult {
  std::vector<RankedConcept> concepts;
  FunnelCounts counts;
  std::vector<PhraseGroup> groups;
};

inline FunnelResult run_funnel(const Transcript& t, const std::vector<bool>& casual,
                               const NoiseFilter& noise, const EmbeddingTable& emb,
                               const ConceptConfig& cfg) {
  FunnelResult r;
  auto cands = extract_phrases(t, casual, cfg.ngram_max);
  r.counts.extracted = cands.size();
  auto clean = noise.apply(std::move(cands));
  r.counts.after_noise = clean.size();
  auto merged = merge_by_lemma(std::move(clean));
  r.counts.after_lemma_merge = merged.size();
  r.groups = group_by_similarity(std::move(merged), emb, cfg.group_sim_threshold);
  r.counts.groups = r.groups.size();
  r.concepts = rank(r.groups, t, cfg.weights, cfg.top_k, cfg.location_earlier_is_higher);
  return r;
}

}  // namespace talkmine::concepts
