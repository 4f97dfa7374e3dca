#pragma once

// Open intent segments. Sentences are triggered by question rules or intent
// rules, conjunction-initial followers are attached, consecutive triggered
// sentences form segments, and segments are boosted by concept mentions,
// questions and summary membership before a largest-gap cutoff picks how many
// to emit.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "talkmine/config.hpp"
#include "talkmine/corpus.hpp"
#include "talkmine/vectors.hpp"

namespace talkmine::intents {

enum class Trigger {
  kQuestionRule1,       // auxiliary inversion: "can you ..."
  kQuestionRule2,       // fronted 5W-1H word
  kQuestionRule3,       // copular inversion: "is the room ..."
  kQuestionRule4,       // terminal question mark
  kQuestionClassifier,  // optional plug-in scorer
  kIntentNsubjAuxRoot,
  kIntentPronounTo,
  kConjunctionAttach,
};

inline const char* to_string(Trigger t) {
  switch (t) {
    case Trigger::kQuestionRule1: return "question_rule_1";
    case Trigger::kQuestionRule2: return "question_rule_2";
    case Trigger::kQuestionRule3: return "question_rule_3";
    case Trigger::kQuestionRule4: return "question_rule_4";
    case Trigger::kQuestionClassifier: return "question_classifier";
    case Trigger::kIntentNsubjAuxRoot: return "intent_nsubj_aux_root";
    case Trigger::kIntentPronounTo: return "intent_pron_to";
    case Trigger::kConjunctionAttach: return "conjunction_attach";
  }
  return "?";
}

inline bool is_question_trigger(Trigger t) {
  return t == Trigger::kQuestionRule1 || t == Trigger::kQuestionRule2 ||
         t == Trigger::kQuestionRule3 || t == Trigger::kQuestionRule4 ||
         t == Trigger::kQuestionClassifier;
}

using TriggerSet = std::set<Trigger>;

struct QuestionRules {
  bool rule1 = true;
  bool rule2 = true;
  bool rule3 = true;
  bool rule4 = true;

  static QuestionRules from(const IntentConfig& c) {
    return {c.question_rule_1, c.question_rule_2, c.question_rule_3, c.question_rule_4};
  }
};

// Extension point for a learned question detector; OR-ed with the rules.
using QuestionClassifier = std::function<bool(const Sentence&)>;

struct QuestionMatch {
  TriggerSet rules;
  int interrogative_start = 0;
};

namespace detail {

inline void require_annotated(const Sentence& s) {
  if (!s.annotated())
    throw InputError("sentence " + std::to_string(s.index) + " is not annotated");
}

inline bool skippable_opener(const Token& t) {
  const auto d = dep_base(t.dep_rel);
  return t.upos == "PUNCT" || t.upos == "INTJ" || t.upos == "CCONJ" || d == "discourse" ||
         d == "cc";
}

// Index of the first token after leading punctuation, interjections and
// coordinators; -1 if there is none.
inline int first_content(const std::vector<Token>& toks, std::size_t from = 0) {
  for (std::size_t i = from; i < toks.size(); ++i)
    if (!skippable_opener(toks[i])) return static_cast<int>(i);
  return -1;
}

// Sentence start plus every position following punctuation or a
// coordinating/subordinating connective.
inline std::vector<int> clause_starts(const std::vector<Token>& toks) {
  std::vector<int> out;
  if (int f = first_content(toks); f >= 0) out.push_back(f);
  for (std::size_t i = 0; i + 1 < toks.size(); ++i) {
    const auto d = dep_base(toks[i].dep_rel);
    if (toks[i].upos == "PUNCT" || toks[i].upos == "CCONJ" || d == "cc") {
      if (int f = first_content(toks, i + 1); f >= 0 && (out.empty() || f > out.back()))
        out.push_back(f);
    }
  }
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline bool is_subject(const Token& t) {
  const auto d = dep_base(t.dep_rel);
  return d == "nsubj" || d == "expl";
}

inline bool is_wh_word(const std::string& lower) {
  static const std::set<std::string> kWh{"who",  "what",  "when", "where", "why",
                                         "how",  "which", "whom", "whose"};
  return kWh.count(lower) > 0;
}

inline bool is_root(const Token& t) { return dep_base(t.dep_rel) == "root"; }

inline bool rule1(const std::vector<Token>& toks, int s) {
  const auto& t = toks[static_cast<std::size_t>(s)];
  if (dep_base(t.dep_rel) != "aux") return false;
  for (std::size_t j = static_cast<std::size_t>(s) + 1; j < toks.size(); ++j)
    if (is_subject(toks[j]) && toks[j].head == t.head) return true;
  return false;
}

inline bool rule3(const std::vector<Token>& toks, int s) {
  const auto& t = toks[static_cast<std::size_t>(s)];
  if (to_lower(t.lemma) != "be") return false;
  const auto d = dep_base(t.dep_rel);
  int governor = -1;
  if (d == "cop") governor = t.head;
  else if (d == "root") governor = s;
  else return false;
  for (std::size_t j = static_cast<std::size_t>(s) + 1; j < toks.size(); ++j)
    if (is_subject(toks[j]) && toks[j].head == governor) return true;
  return false;
}

// The wh-word fills an interrogative role in the main clause: it is the root,
// hangs off the root, or determines a noun hanging off the root.
inline bool rule2_at(const std::vector<Token>& toks, int i) {
  const auto& t = toks[static_cast<std::size_t>(i)];
  if (!is_wh_word(to_lower(t.surface))) return false;
  static const std::set<std::string> kRoles{"advmod", "obj", "dobj", "nsubj", "attr",
                                            "det",    "obl", "root", "pobj"};
  const auto d = dep_base(t.dep_rel);
  if (!kRoles.count(d)) return false;
  if (d == "root") return true;
  const auto& head = toks[static_cast<std::size_t>(t.head)];
  if (is_root(head)) return true;
  return d == "det" && is_root(toks[static_cast<std::size_t>(head.head)]);
}

}  // namespace detail

// Fires when any enabled rule matches; interrogative_start is the earliest
// matching position.
inline std::optional<QuestionMatch> detect_question(const Sentence& s,
                                                    const QuestionRules& rules = {},
                                                    const QuestionClassifier& classifier = {}) {
  detail::require_annotated(s);
  const auto& toks = s.tokens;
  const int first = detail::first_content(toks);
  if (first < 0) return std::nullopt;
  QuestionMatch m;
  int start = static_cast<int>(toks.size());
  auto fire = [&](Trigger t, int at) {
    m.rules.insert(t);
    start = std::min(start, at);
  };
  if (rules.rule1 && detail::rule1(toks, first)) fire(Trigger::kQuestionRule1, first);
  const auto starts = detail::clause_starts(toks);
  if (rules.rule2) {
    for (int c : starts)
      if (detail::rule2_at(toks, c)) {
        fire(Trigger::kQuestionRule2, c);
        break;
      }
  }
  if (rules.rule3 && detail::rule3(toks, first)) fire(Trigger::kQuestionRule3, first);
  if (rules.rule4 && toks.back().surface == "?") {
    int last_clause = first;
    for (int c : starts)
      if (c < static_cast<int>(toks.size()) - 1) last_clause = c;
    fire(Trigger::kQuestionRule4, last_clause);
  }
  if (classifier && classifier(s)) fire(Trigger::kQuestionClassifier, first);
  if (m.rules.empty()) return std::nullopt;
  m.interrogative_start = start;
  return m;
}

inline const std::set<std::string>& intent_pronouns() {
  static const std::set<std::string> k{"i", "we", "you", "my", "our", "your"};
  return k;
}

// R1: nsubj ... aux ... root in surface order with arbitrary gaps.
// R2: subject pronoun or possessive followed within 3 tokens by an infinitival
//     "to" whose head is a verb.
inline TriggerSet detect_intent_sentence(const Sentence& s) {
  detail::require_annotated(s);
  const auto& toks = s.tokens;
  TriggerSet out;
  int stage = 0;
  static const char* kPattern[] = {"nsubj", "aux", "root"};
  for (const auto& t : toks) {
    if (dep_base(t.dep_rel) == kPattern[stage] && ++stage == 3) {
      out.insert(Trigger::kIntentNsubjAuxRoot);
      break;
    }
  }
  for (std::size_t i = 0; i < toks.size() && !out.count(Trigger::kIntentPronounTo); ++i) {
    if (!intent_pronouns().count(to_lower(toks[i].surface))) continue;
    for (std::size_t p = i + 1; p <= i + 3 && p < toks.size(); ++p) {
      if (to_lower(toks[p].surface) != "to") continue;
      const auto& head = toks[static_cast<std::size_t>(toks[p].head)];
      if (toks[p].head != static_cast<int>(p) && (head.upos == "VERB" || head.upos == "AUX")) {
        out.insert(Trigger::kIntentPronounTo);
        break;
      }
    }
  }
  return out;
}

struct SentenceTrigger {
  int sentence = 0;
  TriggerSet triggers;
  std::optional<int> interrogative_start;

  bool triggered() const { return !triggers.empty(); }
  bool question() const {
    return std::any_of(triggers.begin(), triggers.end(), is_question_trigger);
  }
};

// One entry per sentence; casual sentences are never triggered.
inline std::vector<SentenceTrigger> detect_triggers(const Transcript& t,
                                                    const std::vector<bool>& casual,
                                                    const QuestionRules& rules = {},
                                                    const QuestionClassifier& classifier = {}) {
  std::vector<SentenceTrigger> out;
  for (const auto& s : t.sentences) {
    SentenceTrigger st{s.index, {}, std::nullopt};
    const auto i = static_cast<std::size_t>(s.index);
    if (!(i < casual.size() && casual[i]) && !s.tokens.empty()) {
      if (auto q = detect_question(s, rules, classifier)) {
        st.triggers.insert(q->rules.begin(), q->rules.end());
        st.interrogative_start = q->interrogative_start;
      }
      const auto r = detect_intent_sentence(s);
      st.triggers.insert(r.begin(), r.end());
    }
    out.push_back(std::move(st));
  }
  return out;
}

inline const std::set<std::string>& attaching_conjunctions() {
  static const std::set<std::string> k{"and", "but", "so", "also", "plus", "because"};
  return k;
}

// A business sentence opening with a connective joins a triggered predecessor.
// Applied left to right, so chains attach transitively.
inline void attach_conjunctions(std::vector<SentenceTrigger>& triggers, const Transcript& t,
                                const std::vector<bool>& casual) {
  for (std::size_t i = 1; i < triggers.size() && i < t.sentences.size(); ++i) {
    const auto& toks = t.sentences[i].tokens;
    if (toks.empty() || (i < casual.size() && casual[i])) continue;
    if (!attaching_conjunctions().count(to_lower(toks.front().surface))) continue;
    if (triggers[i - 1].triggered()) triggers[i].triggers.insert(Trigger::kConjunctionAttach);
  }
}

struct Boosts {
  double concepts = 0;
  double questions = 0;
  double summary = 0;

  double sum() const { return concepts + questions + summary; }
};

struct IntentSegment {
  int start = 0;
  int end = 0;  // inclusive
  std::vector<TriggerSet> triggers;  // per sentence in the span
  double base_score = 0;
  Boosts boosts;
  double final_score = 0;

  int length() const { return end - start + 1; }
  std::string id() const { return std::to_string(start) + "-" + std::to_string(end); }
};

// Maximal runs of triggered sentences, split left to right into pieces of at
// most max_len. base_score = distinct trigger kinds / length.
inline std::vector<IntentSegment> form_segments(const std::vector<SentenceTrigger>& triggers,
                                                int max_len = 6) {
  std::vector<IntentSegment> out;
  std::size_t i = 0;
  while (i < triggers.size()) {
    if (!triggers[i].triggered()) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < triggers.size() && triggers[j].triggered() &&
           (j == i || triggers[j].sentence == triggers[j - 1].sentence + 1) &&
           j - i < static_cast<std::size_t>(max_len))
      ++j;
    IntentSegment seg;
    seg.start = triggers[i].sentence;
    seg.end = triggers[j - 1].sentence;
    TriggerSet distinct;
    for (std::size_t k = i; k < j; ++k) {
      seg.triggers.push_back(triggers[k].triggers);
      distinct.insert(triggers[k].triggers.begin(), triggers[k].triggers.end());
    }
    seg.base_score = double(distinct.size()) / double(seg.length());
    seg.final_score = seg.base_score;
    out.push_back(std::move(seg));
    i = j;
  }
  return out;
}

// Business-sentence vector: exact entry for the lowercased token sequence, else
// the mean of known token vectors.
inline std::optional<Vector> sentence_vector(const Sentence& s, const EmbeddingTable& emb) {
  std::vector<std::string> words;
  for (const auto& t : s.tokens)
    if (!is_punct(t)) words.push_back(to_lower(t.surface));
  return emb.lookup(words);
}

inline std::size_t summary_size(std::size_t business_sentences, double ratio = 0.15,
                                int cap = 10) {
  const auto k = static_cast<std::size_t>(std::ceil(ratio * double(business_sentences)));
  return std::min<std::size_t>(std::max<std::size_t>(1, k), static_cast<std::size_t>(cap));
}

// Extractive summary: k-means over business-sentence vectors, one
// representative sentence per cluster.
inline std::set<int> summarize(const Transcript& t, const std::vector<bool>& casual,
                               const EmbeddingTable& emb, double ratio, int cap,
                               std::uint64_t seed) {
  std::vector<Vector> points;
  std::vector<int> index;
  std::size_t business = 0;
  for (const auto& s : t.sentences) {
    const auto i = static_cast<std::size_t>(s.index);
    if (i < casual.size() && casual[i]) continue;
    ++business;
    if (auto v = sentence_vector(s, emb)) {
      points.push_back(std::move(*v));
      index.push_back(s.index);
    }
  }
  if (points.empty()) return {};
  const auto k = std::min(summary_size(business, ratio, cap), points.size());
  const auto res = kmeans(points, k, seed ^ fnv1a(t.id));
  std::set<int> out;
  for (auto r : res.representatives) out.insert(index[r]);
  return out;
}

// Number of leading entries to keep from descending scores: cut at the largest
// gap between consecutive scores among the first max_intents + 1 entries.
// Without any positive gap the cap applies.
inline std::size_t differential_cutoff(const std::vector<double>& sorted_scores, int max_intents) {
  const auto n = sorted_scores.size();
  if (n == 0) return 0;
  const auto cap = static_cast<std::size_t>(max_intents);
  const auto window = std::min(n, cap + 1);
  double best_gap = 0;
  std::size_t cut = 0;
  for (std::size_t i = 0; i + 1 < window; ++i) {
    const double g = sorted_scores[i] - sorted_scores[i + 1];
    if (g > best_gap) {
      best_gap = g;
      cut = i + 1;
    }
  }
  if (cut == 0) cut = std::min(n, cap);
  return std::max<std::size_t>(1, cut);
}

// `concept_sentences` holds the sentence index of every occurrence of every top
// concept (with multiplicity).
inline std::vector<IntentSegment> rank_and_cutoff(std::vector<IntentSegment> segments,
                                                  const std::vector<int>& concept_sentences,
                                                  const std::set<int>& summary,
                                                  const IntentConfig& cfg) {
  for (auto& seg : segments) {
    const auto in_span = [&](int i) { return i >= seg.start && i <= seg.end; };
    const auto concepts = std::count_if(concept_sentences.begin(), concept_sentences.end(), in_span);
    const auto questions = std::count_if(seg.triggers.begin(), seg.triggers.end(), [](const TriggerSet& ts) {
      return std::any_of(ts.begin(), ts.end(), is_question_trigger);
    });
    const auto summ = std::count_if(summary.begin(), summary.end(), in_span);
    seg.boosts = {cfg.boost_concepts * double(concepts), cfg.boost_questions * double(questions),
                  cfg.boost_summary * double(summ)};
    seg.final_score = seg.base_score + seg.boosts.sum();
  }
  std::sort(segments.begin(), segments.end(), [](const IntentSegment& a, const IntentSegment& b) {
    if (a.final_score != b.final_score) return a.final_score > b.final_score;
    return a.start < b.start;
  });
  std::vector<double> scores;
  for (const auto& s : segments) scores.push_back(s.final_score);
  segments.resize(differential_cutoff(scores, cfg.max_intents));
  return segments;
}

struct IntentResult {
  std::vector<IntentSegment> intents;
  std::vector<SentenceTrigger> triggers;
  std::set<int> summary;
  std::size_t segments_formed = 0;
};

inline IntentResult extract_intents(const Transcript& t, const std::vector<bool>& casual,
                                    const std::vector<int>& concept_sentences,
                                    const EmbeddingTable& emb, const IntentConfig& cfg,
                                    std::uint64_t seed,
                                    const QuestionClassifier& classifier = {}) {
  IntentResult r;
  r.triggers = detect_triggers(t, casual, QuestionRules::from(cfg), classifier);
  attach_conjunctions(r.triggers, t, casual);
  auto segments = form_segments(r.triggers, cfg.max_segment_len);
  r.segments_formed = segments.size();
  r.summary = summarize(t, casual, emb, cfg.summary_ratio, cfg.summary_cap, seed);
  r.intents = rank_and_cutoff(std::move(segments), concept_sentences, r.summary, cfg);
  return r;
}

}  // namespace talkmine::intents
