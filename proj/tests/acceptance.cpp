// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <iostream>
#include <random>

#include "metric_oracle.hpp"
#include "support.hpp"

using namespace talkmine;
using testing_support::parse_sentence;
using testing_support::read_file;

namespace {

int failures = 0;

void report(const std::string& name, const std::string& why) {
  if (why.empty()) {
    std::cout << "PASS " << name << '\n';
  } else {
    std::cout << "FAIL " << name << ": " << why << '\n';
    ++failures;
  }
}

template <class Fn>
void criterion(const std::string& name, Fn&& fn) {
  try {
    report(name, fn());
  } catch (const std::exception& e) {
    report(name, std::string("exception: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string metrics_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto why = metric_oracle::check_fixture(seed);
    if (!why.empty()) return "seed " + std::to_string(seed) + " " + why;
  }
  const double s = seconds_since(t0);
  if (s >= 5.0) return "took " + std::to_string(s) + " s";
  return {};
}

std::string funnel_invariants() {
  const auto& run = testing_support::fixture_run();
  std::size_t extracted = 0;
  for (std::size_t i = 0; i < run.corpus.size(); ++i) {
    const auto& r = run.concepts.results[i];
    const auto& c = r.counts;
    extracted += c.extracted;
    if (!(c.extracted >= c.after_noise && c.after_noise >= c.after_lemma_merge && c.after_lemma_merge >= c.groups))
      return run.corpus[i].id + " funnel not monotone";
    std::set<std::string> seen;
    std::size_t members = 0;
    for (const auto& g : r.groups)
      for (const auto& m : g.members) {
        seen.insert(m.text());
        ++members;
      }
    if (members != c.after_lemma_merge || seen.size() != members) return run.corpus[i].id + " groups not a partition";
    for (const auto& rc : r.concepts)
      if (std::abs(rc.score - rc.contributions.sum()) > 1e-9) return run.corpus[i].id + " score not decomposable";
  }
  if (run.corpus.size() < 20) return "only " + std::to_string(run.corpus.size()) + " transcripts";
  if (extracted < 2000) return "only " + std::to_string(extracted) + " candidates";
  return {};
}

casual::Sample sample(double pos, int tokens, int stop, int ents, bool y) {
  return {{pos, tokens, stop, ents, ents > 0 && y ? 1 : 0, 0}, y};
}

std::string casual_constraint() {
  for (double target : {0.9, 0.95, 1.0}) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::mt19937_64 rng(seed);
      std::vector<casual::Sample> s;
      for (int i = 0; i < 200; ++i) {
        const bool y = i % 2 == 0;
        const double pos = y ? uniform01(rng) * 0.6 : 0.3 + uniform01(rng) * 0.7;
        s.push_back(sample(pos, 3 + static_cast<int>(uniform_index(rng, 10)), static_cast<int>(uniform_index(rng, 4)),
                           static_cast<int>(uniform_index(rng, y ? 3 : 2)), y));
      }
      casual::TrainOptions o;
      o.precision_target = target;
      o.seed = seed;
      const auto r = casual::train(s, o);
      int tp = 0, fp = 0;
      for (auto i : r.validation)
        if (casual::classify(r.model, s[i].features).casual) (s[i].casual ? tp : fp)++;
      if (r.model.fail_safe) {
        if (tp + fp) return "fail-safe model flagged sentences";
      } else if (tp + fp == 0 || double(tp) / (tp + fp) < target) {
        return "validation precision below " + std::to_string(target) + " for seed " + std::to_string(seed);
      }
    }
  }
  std::vector<casual::Sample> flat;
  for (int i = 0; i < 100; ++i) flat.push_back(sample(0.5, 6, 2, 0, i % 2 == 0));
  const auto r = casual::train(flat, {});
  if (!r.model.fail_safe || r.model.threshold <= 1.0) return "inseparable data did not trigger the fail-safe";
  for (const auto& x : flat)
    if (casual::classify(r.model, x.features).casual) return "fail-safe model flagged a sentence";
  return {};
}

std::string intent_rules() {
  using namespace intents;
  struct Case {
    Trigger trigger;
    const char* ann;
    bool fires;
  };
  const Case cases[] = {
      {Trigger::kQuestionRule1,
       "Can/AUX/4/aux you/PRON/4/nsubj please/INTJ/4/discourse also/ADV/4/advmod tell/VERB/4/root "
       "me/PRON/4/iobj the/DET/8/det loyalty/NOUN/8/compound points/NOUN/4/obj I/PRON/10/nsubj "
       "have/VERB/8/acl:relcl in/ADP/13/case my/PRON/13/nmod:poss account/NOUN/10/obl ?/PUNCT/4/punct",
       true},
      {Trigger::kQuestionRule1, "Do/AUX/2/aux you/PRON/2/nsubj have/VERB/2/root a/DET/4/det room/NOUN/2/obj", true},
      {Trigger::kQuestionRule1, "You/PRON/2/nsubj can/AUX/2/aux check/VERB/2/root the/DET/4/det bill/NOUN/2/obj",
       false},
      {Trigger::kQuestionRule1, "Will/AUX/1/aux do/VERB/1/root", false},
      {Trigger::kQuestionRule2, "What/PRON/0/root is=be/AUX/0/cop my/PRON/3/nmod:poss balance/NOUN/0/nsubj", true},
      {Trigger::kQuestionRule2,
       "How/ADV/3/advmod do/AUX/3/aux I/PRON/3/nsubj change/VERB/3/root my/PRON/5/nmod:poss flight/NOUN/3/obj", true},
      {Trigger::kQuestionRule2,
       "I/PRON/1/nsubj know/VERB/1/root how/ADV/4/advmod to/PART/4/mark fix/VERB/1/xcomp it/PRON/4/obj", false},
      {Trigger::kQuestionRule2,
       "When/SCONJ/2/mark I/PRON/2/nsubj called/VERB/5/advcl ,/PUNCT/5/punct nobody/PRON/5/nsubj answered/VERB/5/root",
       false},
      {Trigger::kQuestionRule3, "Is=be/AUX/3/cop the/DET/2/det room/NOUN/3/nsubj available/ADJ/3/root", true},
      {Trigger::kQuestionRule3, "Is=be/VERB/0/root there/PRON/0/expl a/DET/3/det fee/NOUN/0/nsubj", true},
      {Trigger::kQuestionRule3, "The/DET/1/det room/NOUN/3/nsubj is=be/AUX/3/cop available/ADJ/3/root", false},
      {Trigger::kQuestionRule3, "Be=be/AUX/1/cop careful/ADJ/1/root", false},
      {Trigger::kQuestionRule4,
       "You/PRON/1/nsubj changed/VERB/1/root my/PRON/3/nmod:poss flight/NOUN/1/obj ?/PUNCT/1/punct", true},
      {Trigger::kQuestionRule4, "Really/ADV/0/root ?/PUNCT/0/punct", true},
      {Trigger::kQuestionRule4, "Can/AUX/2/aux you/PRON/2/nsubj help/VERB/2/root", false},
      {Trigger::kQuestionRule4, "What/PRON/0/root a/DET/2/det day/NOUN/0/nsubj !/PUNCT/0/punct", false},
      {Trigger::kIntentNsubjAuxRoot,
       "I/PRON/2/nsubj would/AUX/2/aux like/VERB/2/root to/PART/4/mark make/VERB/2/xcomp a/DET/8/det "
       "hotel/NOUN/8/compound room/NOUN/8/compound reservation/NOUN/4/obj ./PUNCT/2/punct",
       true},
      {Trigger::kIntentNsubjAuxRoot, "We/PRON/3/nsubj have/AUX/3/aux been/AUX/3/aux waiting/VERB/3/root", true},
      {Trigger::kIntentNsubjAuxRoot, "Can/AUX/2/aux you/PRON/2/nsubj help/VERB/2/root", false},
      {Trigger::kIntentNsubjAuxRoot, "I/PRON/1/nsubj paid/VERB/1/root the/DET/3/det bill/NOUN/1/obj", false},
      {Trigger::kIntentPronounTo,
       "I/PRON/1/nsubj want/VERB/1/root to/PART/3/mark cancel/VERB/1/xcomp a/DET/5/det reservation/NOUN/3/obj", true},
      {Trigger::kIntentPronounTo, "We/PRON/1/nsubj need/VERB/1/root to/PART/3/mark talk/VERB/1/xcomp", true},
      {Trigger::kIntentPronounTo, "I/PRON/1/nsubj went/VERB/1/root to/ADP/3/case Paris/PROPN/1/obl", false},
      {Trigger::kIntentPronounTo,
       "The/DET/1/det agent/NOUN/2/nsubj wants/VERB/2/root to/PART/4/mark help/VERB/2/xcomp", false},
  };
  for (const auto& c : cases) {
    const auto s = parse_sentence(c.ann);
    TriggerSet got = detect_intent_sentence(s);
    if (auto q = detect_question(s)) got.insert(q->rules.begin(), q->rules.end());
    if ((got.count(c.trigger) > 0) != c.fires)
      return std::string(to_string(c.trigger)) + (c.fires ? " missed: " : " fired on: ") + s.text;
  }
  // Conjunction attach: the follow-up request joins the hotel reservation.
  const auto t = testing_support::make_transcript(
      "t", {cases[16].ann,
            "And/CCONJ/6/cc also/ADV/6/advmod ,/PUNCT/6/punct if/SCONJ/4/mark available/ADJ/6/advcl "
            ",/PUNCT/6/punct make/VERB/6/root the/DET/8/det reservation/NOUN/6/obj for/ADP/12/case "
            "a/DET/12/det deluxe/ADJ/12/amod room/NOUN/6/obl",
            "the/DET/1/det weather/NOUN/3/nsubj is=be/AUX/3/cop nice/ADJ/3/root",
            "But/CCONJ/3/cc it/PRON/3/nsubj never/ADV/3/advmod arrived/VERB/3/root"});
  std::vector<bool> casual(4, false);
  auto tr = detect_triggers(t, casual);
  attach_conjunctions(tr, t, casual);
  if (tr[1].triggers != TriggerSet{Trigger::kConjunctionAttach}) return "conjunction attach missed";
  if (tr[2].triggered() || tr[3].triggered()) return "conjunction attach fired without a triggered predecessor";
  const auto segs = form_segments(tr);
  if (segs.size() != 1 || segs[0].start != 0 || segs[0].end != 1) return "unexpected segments";

  // Segments from random trigger patterns cover exactly the triggered sentences.
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(uniform_index(rng, 40));
    std::vector<SentenceTrigger> pattern;
    for (int i = 0; i < n; ++i) {
      SentenceTrigger st{i, {}, std::nullopt};
      if (uniform01(rng) < 0.5) st.triggers.insert(Trigger::kIntentPronounTo);
      pattern.push_back(st);
    }
    std::vector<int> covered(static_cast<std::size_t>(n), 0);
    for (const auto& s : form_segments(pattern)) {
      if (s.length() > 6 || s.length() < 1) return "segment length out of range";
      for (int k = s.start; k <= s.end; ++k) covered[static_cast<std::size_t>(k)]++;
    }
    for (int i = 0; i < n; ++i)
      if (covered[static_cast<std::size_t>(i)] != (pattern[static_cast<std::size_t>(i)].triggered() ? 1 : 0))
        return "segments do not partition the triggered sentences";
  }

  // Differential cutoff against a max-gap oracle.
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> s(1 + uniform_index(rng, 20));
    for (auto& x : s) x = std::round(uniform01(rng) * 20) / 10;
    std::sort(s.rbegin(), s.rend());
    const int max_intents = 1 + static_cast<int>(uniform_index(rng, 10));
    const std::size_t window = std::min<std::size_t>(s.size(), static_cast<std::size_t>(max_intents) + 1);
    double best = 0;
    std::size_t want = 0;
    for (std::size_t i = 1; i < window; ++i)
      if (s[i - 1] - s[i] > best) {
        best = s[i - 1] - s[i];
        want = i;
      }
    if (best <= 0) want = std::min<std::size_t>(s.size(), static_cast<std::size_t>(max_intents));
    if (differential_cutoff(s, max_intents) != want) return "cutoff disagrees with oracle";
  }
  return {};
}

std::string tagger_numerics() {
  using namespace tagger;
  if (chi_square({8, 2, 2, 8}) != 7.2) return "chi-square of the 20-document table is not 7.2";
  const auto v = build_vocabulary({{"billing", {"invoice invoice refund"}}, {"travel", {"flight refund"}}}, Lexicon{});
  const auto m = vectorize(v, select_features(v), VectorMode::kTfidf);
  const double ln2 = std::log(2.0);
  const Vector want[2] = {{0, 2 * ln2, 0}, {ln2, 0, 0}};
  if (m.features != std::vector<std::string>{"flight", "invoice", "refund"}) return "unexpected feature order";
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t i = 0; i < 3; ++i)
      if (std::abs(m.categories[c].weights[i] - want[c][i]) > 1e-9) return "tf-idf table mismatch";

  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 50; ++trial) {
    Models base;
    base.mode = VectorMode::kBow;
    const std::size_t dim = 3 + uniform_index(rng, 10), cats = 2 + uniform_index(rng, 5);
    for (std::size_t f = 0; f < dim; ++f) base.features.push_back("f" + std::to_string(100 + f));
    base.idf.assign(dim, 1.0);
    for (std::size_t c = 0; c < cats; ++c) {
      Vector w(dim);
      for (auto& x : w) x = uniform01(rng) < 0.4 ? 0.0 : uniform01(rng) * 5;
      base.categories.push_back({"c" + std::to_string(c), w});
    }
    auto scaled = base;
    const double factor = 1e-3 + uniform01(rng) * 1e3;
    for (auto& x : scaled.categories[uniform_index(rng, cats)].weights) x *= factor;
    for (int d = 0; d < 10; ++d) {
      Vector doc(dim);
      for (auto& x : doc) x = double(uniform_index(rng, 4));
      const auto a = rank_categories(doc, base), b = rank_categories(doc, scaled);
      for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].first != b[i].first || std::abs(a[i].second - b[i].second) > 1e-12)
          return "ranking changed under positive rescaling in trial " + std::to_string(trial);
    }
  }
  return {};
}

const char* kOutputs[] = {"casual_model.json", "concepts.jsonl", "intents.jsonl",
                          "tags.jsonl",        "report.json",    "report.txt"};

std::string end_to_end() {
  const auto dir = testing_support::temp_dir("acceptance_e2e");
  for (const char* run : {"/a", "/b"}) {
    const auto r = testing_support::run_cli(testing_support::fixture_pipeline_args(dir + run));
    if (r.status != 0) return "pipeline exited " + std::to_string(r.status) + ": " + r.output;
  }
  for (const char* f : kOutputs) {
    const auto a = read_file(dir + "/a/" + f);
    if (a != read_file(dir + "/b/" + f)) return std::string(f) + " differs between runs";
    if (a != read_file(testing_support::kGoldenDir + "/" + f)) return std::string(f) + " differs from golden output";
  }
  return {};
}

std::string calibrated_shape() {
  const auto& run = testing_support::fixture_run();
  std::size_t extracted = 0, survived = 0, total = 0, short_ones = 0;
  for (std::size_t i = 0; i < run.corpus.size(); ++i) {
    extracted += run.concepts.results[i].counts.extracted;
    survived += run.concepts.results[i].counts.after_noise;
    for (const auto& s : run.intents[i].intents) {
      ++total;
      short_ones += s.length() <= 3;
    }
  }
  const double removed = 1.0 - double(survived) / double(extracted);
  if (removed < 0.40 || removed > 0.60) return "noise removal " + std::to_string(removed);
  if (total == 0 || double(short_ones) / double(total) < 0.75) return "too few short intent segments";
  const auto dir = testing_support::temp_dir("acceptance_timing");
  const auto t0 = std::chrono::steady_clock::now();
  if (testing_support::run_cli(testing_support::fixture_pipeline_args(dir) + " --jobs 1").status != 0)
    return "pipeline failed";
  const double s = seconds_since(t0);
  if (s >= 30.0) return "pipeline took " + std::to_string(s) + " s";
  return {};
}

}  // namespace

int main() {
  criterion("metrics agree with brute-force oracles on 200 random fixtures", metrics_oracle);
  criterion("concept funnel is monotone, partitioned and decomposable", funnel_invariants);
  criterion("casual classifier honours precision targets and fails safe", casual_constraint);
  criterion("intent rules, segments and differential cutoff", intent_rules);
  criterion("tagger chi-square, tf-idf and scale invariance", tagger_numerics);
  criterion("pipeline is deterministic and matches golden outputs", end_to_end);
  criterion("fixture shape: noise removal, short segments, runtime", calibrated_shape);
  return failures == 0 ? 0 : 1;
}
