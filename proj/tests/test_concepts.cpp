#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace talkmine;
using namespace talkmine::concepts;
using testing_support::make_transcript;
using testing_support::parse_sentence;

namespace {

PhraseCandidate cand(const std::string& text, int freq = 1, bool casual = false,
                     std::vector<std::string> pos = {}, std::string lemma_key = "") {
  PhraseCandidate c;
  c.tokens = split(text, ' ');
  c.lemma_key = lemma_key.empty() ? text : lemma_key;
  c.pos_pattern = pos.empty() ? std::vector<std::string>(c.tokens.size(), "NOUN") : pos;
  for (int i = 0; i < freq; ++i) c.occurrences.push_back({i, 0, casual});
  return c;
}

const PhraseCandidate* find_text(const std::vector<PhraseCandidate>& cs, const std::string& text) {
  for (const auto& c : cs)
    if (c.text() == text) return &c;
  return nullptr;
}

// Small world for the noise rules: ten documents, a handful of words.
struct NoiseWorld {
  CorpusStats stats;
  Lexicon lex{{"the", "a", "to"},
              {"the", "a", "to", "hotel", "booking", "room", "service", "paris", "parisian", "gon",
               "na", "weather", "nice"},
              {}};
  EmbeddingTable emb;
  ConceptConfig cfg;
  std::vector<std::string> entities{"paris"};

  NoiseWorld() {
    stats.documents = 10;
    stats.phrase_df = {{"hotel booking", 1}, {"room", 10}, {"room service", 2}, {"hotel", 1},
                       {"booking", 2},       {"paris", 1}, {"parisian", 1},     {"gon na", 1}};
    stats.token_df = {{"hotel", 1}, {"booking", 2}, {"room", 10}, {"service", 9},
                      {"paris", 1}, {"parisian", 1}, {"gon", 1},  {"na", 1}};
    stats.conversational_stopwords = {"gon"};
    emb.insert("paris", {1, 0, 0});
    emb.insert("parisian", {0.95, 0.1, 0});
    emb.insert("hotel", {0, 1, 0});
    emb.insert("booking", {0, 0, 1});
  }

  std::optional<NoiseReason> reason(const PhraseCandidate& c) const {
    return NoiseFilter(stats, lex, emb, entities, cfg).reason(c);
  }
};

}  // namespace

TEST(ExtractPhrases, SixTokenSentenceGivesTwentyCandidates) {
  auto t = make_transcript(
      "t", {"I=i/PRON/1/nsubj want/VERB/1/root to/PART/3/mark cancel/VERB/1/xcomp a/DET/5/det "
            "reservation/NOUN/3/obj"});
  auto cs = extract_phrases(t, {false});
  EXPECT_EQ(cs.size(), 20u);
  for (const auto& c : cs) {
    EXPECT_GE(c.n(), 1);
    EXPECT_LE(c.n(), 5);
    EXPECT_EQ(c.frequency(), 1);
  }
  EXPECT_NE(find_text(cs, "i want to cancel a"), nullptr);
  EXPECT_EQ(find_text(cs, "i want to cancel a reservation"), nullptr);
  const auto* r = find_text(cs, "cancel a reservation");
  ASSERT_NE(r, nullptr);
  EXPECT_EQ(r->occurrences, (std::vector<Occurrence>{{0, 3, false}}));
  EXPECT_EQ(r->pos_pattern, (std::vector<std::string>{"VERB", "DET", "NOUN"}));
}

TEST(ExtractPhrases, NonAlphabeticTokensAndPunctuationBreakPhrases) {
  auto t = make_transcript("t", {"I/PRON/1/nsubj can't/AUX/1/root stay/VERB/1/xcomp ,/PUNCT/1/punct "
                                 "sorry/ADJ/1/discourse"});
  auto cs = extract_phrases(t, {false});
  for (const auto& c : cs) {
    for (const auto& w : c.tokens) {
      EXPECT_NE(w, "can't");
      EXPECT_NE(w, ",");
    }
    EXPECT_FALSE(c.text() == "stay sorry");
  }
  EXPECT_EQ(cs.size(), 3u);  // i, stay, sorry
}

TEST(ExtractPhrases, NoCandidateSpansSentences) {
  auto t = make_transcript("t", {"hotel/NOUN/0/root booking/NOUN/0/compound",
                                 "room/NOUN/0/root service/NOUN/0/compound"});
  auto cs = extract_phrases(t, {false, true});
  EXPECT_EQ(cs.size(), 6u);
  EXPECT_EQ(find_text(cs, "booking room"), nullptr);
  const auto* room = find_text(cs, "room");
  ASSERT_NE(room, nullptr);
  EXPECT_TRUE(room->occurrences.front().casual);
  EXPECT_TRUE(room->casual_only());
  for (const auto& c : cs)
    for (const auto& o : c.occurrences) EXPECT_LE(o.offset + c.n(), 2);
}

TEST(ExtractPhrases, LemmaKeyFromAnnotation) {
  auto t = make_transcript("t", {"Reservations=reservation/NOUN/1/nsubj cancelled=cancel/VERB/1/root"});
  auto cs = extract_phrases(t, {false});
  const auto* c = find_text(cs, "reservations cancelled");
  ASSERT_NE(c, nullptr);
  EXPECT_EQ(c->lemma_key, "reservation cancel");
}

TEST(ConversationalStopwords, RatioAndCountRules) {
  std::vector<Transcript> corpus;
  std::vector<std::vector<bool>> casual;
  // 30 casual sentences "gon na rain" and 30 business sentences of three
  // tokens, two of which contain "gon": normalized ratio 15 for gon.
  Transcript t;
  t.id = "t";
  std::vector<bool> flags;
  for (int i = 0; i < 30; ++i) {
    t.sentences.push_back(parse_sentence("gon/VERB/0/root na/PART/0/aux rain/VERB/0/xcomp", i));
    flags.push_back(true);
  }
  for (int i = 0; i < 30; ++i) {
    const auto ann = i < 2 ? "gon/VERB/0/root check/VERB/0/xcomp bill/NOUN/1/obj"
                            : "please/INTJ/1/discourse check/VERB/1/root bill/NOUN/1/obj";
    t.sentences.push_back(parse_sentence(ann, 30 + i));
    flags.push_back(false);
  }
  // "hello" only 5 times in casual sentences: below min_count.
  for (int i = 0; i < 5; ++i) {
    t.sentences.push_back(parse_sentence("hello/INTJ/0/root", 60 + i));
    flags.push_back(true);
  }
  corpus.push_back(t);
  casual.push_back(flags);
  auto conv = detect_conversational_stopwords(corpus, casual, 3.0, 10);
  EXPECT_TRUE(conv.count("gon"));
  EXPECT_TRUE(conv.count("na"));
  EXPECT_TRUE(conv.count("rain"));
  EXPECT_FALSE(conv.count("check"));
  EXPECT_FALSE(conv.count("bill"));
  EXPECT_FALSE(conv.count("hello"));
  // Raising the ratio past 15 keeps only tokens absent from business talk.
  auto strict = detect_conversational_stopwords(corpus, casual, 16.0, 10);
  EXPECT_FALSE(strict.count("gon"));
  EXPECT_TRUE(strict.count("na"));
}

TEST(ConversationalStopwords, FixtureFindsGon) {
  const auto& run = testing_support::fixture_run();
  EXPECT_TRUE(run.concepts.stats.conversational_stopwords.count("gon"));
}

TEST(NoiseRules, EachRuleFires) {
  NoiseWorld w;
  EXPECT_EQ(w.reason(cand("the booking")), NoiseReason::kStopwordBoundary);
  EXPECT_EQ(w.reason(cand("hotel to")), NoiseReason::kStopwordBoundary);
  EXPECT_EQ(w.reason(cand("hotel xyzzy")), NoiseReason::kOutOfVocabulary);
  EXPECT_EQ(w.reason(cand("hotel booking", 2, true)), NoiseReason::kCasualOnly);
  EXPECT_EQ(w.reason(cand("gon na")), NoiseReason::kConversationalStopword);
  EXPECT_EQ(w.reason(cand("paris")), NoiseReason::kEntityLike);
  EXPECT_EQ(w.reason(cand("parisian")), NoiseReason::kEntityLike);
  EXPECT_EQ(w.reason(cand("room")), NoiseReason::kLowPhraseIdf);
  EXPECT_EQ(w.reason(cand("room service")), NoiseReason::kLowTokenIdf);
  EXPECT_EQ(w.reason(cand("hotel booking")), std::nullopt);
  EXPECT_EQ(w.reason(cand("hotel")), std::nullopt);
}

TEST(NoiseRules, NegativeCasesAndOrder) {
  NoiseWorld w;
  // A mixed casual/business phrase is not casual-only.
  auto mixed = cand("hotel booking", 2, true);
  mixed.occurrences.push_back({5, 0, false});
  EXPECT_EQ(w.reason(mixed), std::nullopt);
  // Stopword in the middle is fine.
  w.stats.phrase_df["hotel to booking"] = 1;
  EXPECT_EQ(w.reason(cand("hotel to booking")), std::nullopt);
  // Rule order: boundary is reported before entity similarity.
  EXPECT_EQ(w.reason(cand("the paris")), NoiseReason::kStopwordBoundary);
  // Raising the threshold above the similarity keeps "parisian".
  w.cfg.ner_sim_threshold = 0.999;
  EXPECT_EQ(w.reason(cand("parisian")), std::nullopt);
  // Without a vocabulary the out-of-vocabulary rule is disabled.
  Lexicon no_vocab({"the"}, {}, {});
  w.stats.phrase_df["xyzzy"] = 1;
  w.stats.token_df["xyzzy"] = 1;
  EXPECT_EQ(NoiseFilter(w.stats, no_vocab, w.emb, w.entities, w.cfg).reason(cand("xyzzy")), std::nullopt);
}

TEST(NoiseRules, PhraseInEveryDocumentDropped) {
  std::vector<Transcript> corpus;
  for (int i = 0; i < 4; ++i)
    corpus.push_back(make_transcript("d" + std::to_string(i), {"account/NOUN/0/root"}));
  auto st = CorpusStats::build(corpus);
  EXPECT_EQ(st.phrase_idf("account"), 0.0);
  ConceptConfig cfg;
  Lexicon lex;
  EmbeddingTable emb;
  EXPECT_EQ(NoiseFilter(st, lex, emb, {}, cfg).reason(cand("account")), NoiseReason::kLowPhraseIdf);
  for (const auto& [_, df] : st.phrase_df) EXPECT_LE(static_cast<std::size_t>(df), st.documents);
}

TEST(Normalize, LemmaMergeSumsFrequency) {
  auto merged = merge_by_lemma({cand("reservation cancelled", 2, false, {}, "reservation cancel"),
                                cand("reservations cancel", 1, false, {}, "reservation cancel"),
                                cand("hotel", 1)});
  ASSERT_EQ(merged.size(), 2u);
  const auto* m = find_text(merged, "reservation cancelled");
  ASSERT_NE(m, nullptr);
  EXPECT_EQ(m->frequency(), 3);
  EXPECT_EQ(find_text(merged, "reservations cancel"), nullptr);
}

TEST(Normalize, BigramPreferredAsHead) {
  EmbeddingTable emb;
  emb.insert("hotel reservation", {1, 0});
  emb.insert("reservation", {0.9, std::sqrt(1 - 0.81)});
  auto groups = group_by_similarity({cand("reservation", 7), cand("hotel reservation", 5)}, emb, 0.75);
  ASSERT_EQ(groups.size(), 1u);
  EXPECT_EQ(groups[0].head.text(), "hotel reservation");
  EXPECT_EQ(groups[0].members.size(), 2u);
  EXPECT_EQ(groups[0].aggregate_frequency, 12);
  // Below threshold: separate groups.
  auto apart = group_by_similarity({cand("reservation", 7), cand("hotel reservation", 5)}, emb, 0.95);
  EXPECT_EQ(apart.size(), 2u);
}

TEST(Normalize, NoSimilarPairsEveryPhraseOwnGroup) {
  EmbeddingTable emb;
  emb.insert("hotel", {1, 0, 0});
  emb.insert("booking", {0, 1, 0});
  emb.insert("invoice", {0, 0, 1});
  auto groups = normalize({cand("hotel"), cand("booking"), cand("invoice"), cand("unknownword")}, emb, 0.75);
  EXPECT_EQ(groups.size(), 4u);
  for (const auto& g : groups) {
    ASSERT_EQ(g.members.size(), 1u);
    EXPECT_EQ(g.members[0].text(), g.head.text());
  }
}

TEST(Normalize, PreferenceOrder) {
  EXPECT_TRUE(head_preferred(cand("a b"), cand("c", 9)));
  EXPECT_TRUE(head_preferred(cand("a b c"), cand("a b c d", 9)));
  EXPECT_TRUE(head_preferred(cand("x y", 3), cand("a b", 2)));
  EXPECT_TRUE(head_preferred(cand("a b", 2), cand("x y", 2)));
}

TEST(Rank, SingleGroupScoresOne) {
  auto t = make_transcript("t", {"hotel/NOUN/1/compound booking/NOUN/1/root", "ok/INTJ/0/root"});
  PhraseGroup g{cand("hotel booking"), {cand("hotel booking")}, 1};
  auto r = rank({g}, t, ConceptWeights{});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].values.frequency, 1.0);
  EXPECT_EQ(r[0].values.similarity, 1.0);
  EXPECT_EQ(r[0].values.pos, 1.0);
  EXPECT_EQ(r[0].values.location, 1.0);
  EXPECT_NEAR(r[0].score, 1.0, 1e-12);
  EXPECT_TRUE(rank({}, t, ConceptWeights{}).empty());
}

TEST(Rank, TwelveGroupsMatchBruteForce) {
  const int sentences = 20;
  std::vector<std::string> specs(sentences, "ok/INTJ/0/root");
  auto t = make_transcript("t", specs);
  std::mt19937_64 rng(12);
  std::vector<PhraseGroup> groups;
  const char* words[] = {"alpha", "bravo", "charlie", "delta", "echo", "foxtrot"};
  for (int g = 0; g < 12; ++g) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 3));
    std::string text;
    std::vector<std::string> pos;
    for (int i = 0; i < n; ++i) {
      text += (i ? " " : "") + std::string(words[(g + i) % 6]) + std::to_string(g);
      pos.push_back(uniform01(rng) < 0.6 ? "NOUN" : "VERB");
    }
    PhraseGroup grp;
    grp.head = cand(text, 0, false, pos);
    const int members = 1 + static_cast<int>(uniform_index(rng, 4));
    const int first = static_cast<int>(uniform_index(rng, sentences));
    for (int m = 0; m < members; ++m) {
      auto c = m == 0 ? grp.head : cand(text + " m" + std::to_string(m), 0);
      const int f = 1 + static_cast<int>(uniform_index(rng, 5));
      for (int k = 0; k < f; ++k) c.occurrences.push_back({first + static_cast<int>(uniform_index(rng, sentences - first)), 0, false});
      c.occurrences.push_back({first, 0, false});
      grp.aggregate_frequency += c.frequency();
      grp.members.push_back(c);
    }
    grp.head = grp.members[0];
    groups.push_back(grp);
  }
  // A tie on every signal: duplicate group 3 under a lexicographically smaller name.
  auto twin = groups[3];
  twin.head.tokens = {"aaa"};
  twin.members[0].tokens = {"aaa"};
  groups[11] = twin;

  // Oracle recomputation, spreadsheet style.
  const ConceptWeights w;
  std::vector<double> lf, sz;
  for (const auto& g : groups) {
    lf.push_back(std::log(1.0 + g.aggregate_frequency));
    sz.push_back(static_cast<double>(g.members.size()));
  }
  const double lf_lo = *std::min_element(lf.begin(), lf.end()), lf_hi = *std::max_element(lf.begin(), lf.end());
  const double sz_lo = *std::min_element(sz.begin(), sz.end()), sz_hi = *std::max_element(sz.begin(), sz.end());
  std::vector<std::pair<double, std::string>> expected;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    int first = sentences;
    for (const auto& m : groups[g].members)
      for (const auto& o : m.occurrences) first = std::min(first, o.sentence);
    int nouns = 0;
    for (const auto& p : groups[g].head.pos_pattern) nouns += p == "NOUN";
    const double pos = double(nouns) / double(groups[g].head.pos_pattern.size());
    const double loc = 1.0 - double(first) / double(sentences - 1);
    const double f = (lf[g] - lf_lo) / (lf_hi - lf_lo);
    const double s = (sz[g] - sz_lo) / (sz_hi - sz_lo);
    expected.push_back({0.5 * f + 0.2 * pos + 0.15 * loc + 0.15 * s, groups[g].head.text()});
  }
  std::sort(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
    if (std::abs(a.first - b.first) > 1e-12) return a.first > b.first;
    return a.second < b.second;
  });

  auto ranked = rank(groups, t, w, 12);
  ASSERT_EQ(ranked.size(), 12u);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(ranked[i].phrase, expected[i].second) << "position " << i;
    EXPECT_NEAR(ranked[i].score, expected[i].first, 1e-12);
    EXPECT_NEAR(ranked[i].score - ranked[i].contributions.sum(), 0.0, 1e-9);
  }
  auto top5 = rank(groups, t, w, 5);
  ASSERT_EQ(top5.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(top5[i].phrase, ranked[i].phrase);
}

TEST(Rank, LocationDirectionInvertible) {
  auto t = make_transcript("t", {"ok/INTJ/0/root", "ok/INTJ/0/root", "ok/INTJ/0/root"});
  auto early = cand("early");
  auto late = cand("late");
  late.occurrences = {{2, 0, false}};
  std::vector<PhraseGroup> gs{{early, {early}, 1}, {late, {late}, 1}};
  auto a = rank(gs, t, ConceptWeights{}, 10, true);
  EXPECT_EQ(a[0].phrase, "early");
  auto b = rank(gs, t, ConceptWeights{}, 10, false);
  EXPECT_EQ(b[0].phrase, "late");
}

TEST(Funnel, FixtureMonotonicPartitionAndExplainable) {
  const auto& run = testing_support::fixture_run();
  std::size_t extracted = 0, survived = 0;
  for (std::size_t i = 0; i < run.corpus.size(); ++i) {
    const auto& r = run.concepts.results[i];
    extracted += r.counts.extracted;
    survived += r.counts.after_noise;
    EXPECT_GE(r.counts.extracted, r.counts.after_noise);
    EXPECT_GE(r.counts.after_noise, r.counts.after_lemma_merge);
    EXPECT_GE(r.counts.after_lemma_merge, r.counts.groups);
    std::set<std::string> seen;
    std::size_t members = 0;
    for (const auto& g : r.groups) {
      ASSERT_FALSE(g.members.empty());
      EXPECT_EQ(g.members.front().text(), g.head.text());
      int agg = 0;
      for (const auto& m : g.members) {
        agg += m.frequency();
        seen.insert(m.text());
        ++members;
      }
      EXPECT_EQ(agg, g.aggregate_frequency);
    }
    EXPECT_EQ(members, r.counts.after_lemma_merge);
    EXPECT_EQ(seen.size(), members);
    for (const auto& c : r.concepts) EXPECT_NEAR(c.score - c.contributions.sum(), 0.0, 1e-9);
  }
  EXPECT_GE(run.corpus.size(), 20u);
  EXPECT_GE(extracted, 2000u);
  const double removed = 1.0 - double(survived) / double(extracted);
  EXPECT_GE(removed, 0.40);
  EXPECT_LE(removed, 0.60);
}

TEST(Funnel, SurvivorsAreExactlyTheCandidatesWithoutReason) {
  const auto& run = testing_support::fixture_run();
  const NoiseFilter noise(run.concepts.stats, run.lex, run.emb, run.concepts.entity_strings, run.cfg.concepts);
  for (std::size_t i = 0; i < 3; ++i) {
    auto all = extract_phrases(run.corpus[i], run.casual_flags[i]);
    auto kept = noise.apply(all);
    std::size_t n = 0;
    for (const auto& c : all) n += !noise.reason(c);
    EXPECT_EQ(kept.size(), n);
    for (const auto& k : kept) EXPECT_NE(find_text(all, k.text()), nullptr);
  }
}

TEST(Funnel, Deterministic) {
  const auto& run = testing_support::fixture_run();
  auto again = run_concepts(run.corpus, run.casual_flags, run.lex, run.emb, run.cfg);
  for (std::size_t i = 0; i < run.corpus.size(); ++i)
    EXPECT_EQ(concepts_record(run.corpus[i], run.casual_flags[i], again.results[i]).dump(),
              concepts_record(run.corpus[i], run.casual_flags[i], run.concepts.results[i]).dump());
}
