#pragma once

// Stage runners shared by the command-line tool and the integration tests.
// Every stage reads declared inputs and produces JSON-lines records (one per
// transcript, in corpus order), so stages can be re-run independently.

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "talkmine/casual.hpp"
#include "talkmine/concepts.hpp"
#include "talkmine/config.hpp"
#include "talkmine/corpus.hpp"
#include "talkmine/intents.hpp"
#include "talkmine/metrics.hpp"
#include "talkmine/tagger.hpp"

namespace talkmine {

using Json = nlohmann::ordered_json;

inline std::vector<Transcript> load_annotated_corpus(const std::string& corpus_path,
                                                     const std::string& annotations_path) {
  auto corpus = parse_transcripts(corpus_path);
  parse_annotations(annotations_path, corpus);
  return corpus;
}

inline Lexicon load_lexicon(const ResourceConfig& r) {
  return Lexicon::load(r.stopwords, r.english_vocab, r.lemmas);
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is
// rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const auto workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

inline void write_jsonl(const std::string& path, const std::vector<Json>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  for (const auto& r : records) out << r.dump() << '\n';
}

inline std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_blank(line)) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Casual filter

inline casual::TrainOptions train_options(const PipelineConfig& cfg) {
  return {cfg.casual.precision_target, cfg.casual.trees, cfg.casual.max_depth,
          cfg.casual.validation_fraction, cfg.seed};
}

inline std::vector<std::vector<bool>> classify_corpus(const casual::Model& model,
                                                      const std::vector<Transcript>& corpus,
                                                      const Lexicon& lex, int jobs = 1) {
  std::vector<std::vector<bool>> out(corpus.size());
  parallel_for(corpus.size(), jobs,
               [&](std::size_t i) { out[i] = casual::classify_transcript(model, corpus[i], lex); });
  return out;
}

inline std::vector<int> casual_indices(const std::vector<bool>& flags) {
  std::vector<int> out;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) out.push_back(static_cast<int>(i));
  return out;
}

// ---------------------------------------------------------------------------
// Concepts

struct ConceptStage {
  concepts::CorpusStats stats;
  std::vector<std::string> entity_strings;
  std::vector<concepts::FunnelResult> results;  // parallel to the corpus
};

inline ConceptStage run_concepts(const std::vector<Transcript>& corpus,
                                 const std::vector<std::vector<bool>>& casual, const Lexicon& lex,
                                 const EmbeddingTable& emb, const PipelineConfig& cfg) {
  const auto& cc = cfg.concepts;
  ConceptStage st;
  st.stats = concepts::CorpusStats::build(corpus, cc.ngram_max);
  const auto conv = concepts::detect_conversational_stopwords(corpus, casual, cc.conv_ratio_threshold,
                                                              cc.conv_min_count);
  st.stats.conversational_stopwords.insert(conv.begin(), conv.end());
  st.entity_strings = concepts::collect_entity_strings(corpus, cc.ner_labels);
  const concepts::NoiseFilter noise(st.stats, lex, emb, st.entity_strings, cc);
  st.results.resize(corpus.size());
  parallel_for(corpus.size(), cfg.jobs, [&](std::size_t i) {
    st.results[i] = concepts::run_funnel(corpus[i], casual[i], noise, emb, cc);
  });
  return st;
}

inline Json signals_json(const concepts::Signals& s) {
  return {{"frequency", s.frequency}, {"pos", s.pos}, {"location", s.location},
          {"similarity", s.similarity}};
}

inline Json concepts_record(const Transcript& t, const std::vector<bool>& casual,
                            const concepts::FunnelResult& r) {
  Json j;
  j["id"] = t.id;
  j["casual_sentences"] = casual_indices(casual);
  j["funnel"] = {{"extracted", r.counts.extracted},
                 {"after_noise", r.counts.after_noise},
                 {"after_lemma_merge", r.counts.after_lemma_merge},
                 {"groups", r.counts.groups}};
  j["concepts"] = Json::array();
  int rank = 0;
  for (const auto& c : r.concepts) {
    j["concepts"].push_back({{"rank", ++rank},
                             {"phrase", c.phrase},
                             {"score", c.score},
                             {"signals", signals_json(c.contributions)},
                             {"signal_values", signals_json(c.values)},
                             {"members", c.members},
                             {"aggregate_frequency", c.aggregate_frequency},
                             {"first_sentence", c.first_sentence},
                             {"occurrences", c.occurrences}});
  }
  return j;
}

// What the intent stage needs from a concepts file.
struct ConceptRecord {
  std::vector<std::string> phrases;
  std::vector<int> concept_sentences;
  std::vector<int> casual_sentences;
};

inline std::map<std::string, ConceptRecord> read_concepts(const std::string& path) {
  std::map<std::string, ConceptRecord> out;
  for (const auto& j : read_jsonl(path)) {
    try {
      ConceptRecord r;
      for (const auto& c : j.at("concepts")) {
        r.phrases.push_back(c.at("phrase").get<std::string>());
        for (int s : c.at("occurrences")) r.concept_sentences.push_back(s);
      }
      std::sort(r.concept_sentences.begin(), r.concept_sentences.end());
      r.casual_sentences = j.value("casual_sentences", std::vector<int>{});
      out[j.at("id").get<std::string>()] = std::move(r);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ": malformed concept record: " + e.what());
    }
  }
  return out;
}

inline std::vector<int> concept_sentences(const std::vector<concepts::RankedConcept>& cs) {
  std::vector<int> out;
  for (const auto& c : cs) out.insert(out.end(), c.occurrences.begin(), c.occurrences.end());
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Intents

inline std::vector<intents::IntentResult> run_intents(
    const std::vector<Transcript>& corpus, const std::vector<std::vector<bool>>& casual,
    const std::vector<std::vector<int>>& concept_occurrences, const EmbeddingTable& emb,
    const PipelineConfig& cfg, const intents::QuestionClassifier& classifier = {}) {
  std::vector<intents::IntentResult> out(corpus.size());
  parallel_for(corpus.size(), cfg.jobs, [&](std::size_t i) {
    out[i] = intents::extract_intents(corpus[i], casual[i], concept_occurrences[i], emb,
                                      cfg.intents, cfg.seed, classifier);
  });
  return out;
}

inline Json triggers_json(const intents::TriggerSet& ts) {
  Json a = Json::array();
  for (auto t : ts) a.push_back(intents::to_string(t));
  return a;
}

inline Json intents_record(const Transcript& t, const intents::IntentResult& r) {
  Json j;
  j["id"] = t.id;
  j["segments_formed"] = r.segments_formed;
  j["summary"] = std::vector<int>(r.summary.begin(), r.summary.end());
  j["intents"] = Json::array();
  int rank = 0;
  for (const auto& seg : r.intents) {
    Json sents = Json::array();
    for (int i = seg.start; i <= seg.end; ++i) {
      const auto& s = t.sentences[static_cast<std::size_t>(i)];
      Json js{{"index", i}, {"text", s.text}, {"triggers", triggers_json(seg.triggers[static_cast<std::size_t>(i - seg.start)])}};
      if (const auto& q = r.triggers[static_cast<std::size_t>(i)].interrogative_start)
        js["interrogative_start"] = *q;
      sents.push_back(std::move(js));
    }
    j["intents"].push_back({{"rank", ++rank},
                            {"id", seg.id()},
                            {"start", seg.start},
                            {"end", seg.end},
                            {"sentences", std::move(sents)},
                            {"base_score", seg.base_score},
                            {"boosts",
                             {{"concepts", seg.boosts.concepts},
                              {"questions", seg.boosts.questions},
                              {"summary", seg.boosts.summary}}},
                            {"final_score", seg.final_score}});
  }
  return j;
}

// ---------------------------------------------------------------------------
// Tagging

inline std::vector<tagger::TagResult> run_tags(const std::vector<Transcript>& corpus,
                                               const tagger::Models& models, const Lexicon& lex,
                                               int k, int jobs = 1) {
  std::vector<tagger::TagResult> out(corpus.size());
  parallel_for(corpus.size(), jobs,
               [&](std::size_t i) { out[i] = tagger::tag(corpus[i], models, lex, k); });
  return out;
}

inline Json tags_record(const tagger::TagResult& r) {
  Json j;
  j["id"] = r.transcript;
  j["tags"] = Json::array();
  for (const auto& [c, s] : r.ranked) j["tags"].push_back({{"category", c}, {"similarity", s}});
  j["low_confidence"] = r.low_confidence;
  return j;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Predictions {
  std::map<std::string, std::vector<std::string>> concepts;
  std::map<std::string, std::vector<metrics::Span>> intents;
  std::map<std::string, std::vector<std::string>> tags;
};

// Accepts any stage output file; the record shape tells which one it is.
inline void read_predictions(const std::string& path, Predictions& p) {
  for (const auto& j : read_jsonl(path)) {
    try {
      const auto id = j.at("id").get<std::string>();
      if (j.contains("concepts")) {
        auto& v = p.concepts[id];
        for (const auto& c : j["concepts"]) v.push_back(c.at("phrase").get<std::string>());
      } else if (j.contains("intents")) {
        auto& v = p.intents[id];
        for (const auto& s : j["intents"]) v.push_back({s.at("start").get<int>(), s.at("end").get<int>()});
      } else if (j.contains("tags")) {
        auto& v = p.tags[id];
        for (const auto& t : j["tags"]) v.push_back(t.at("category").get<std::string>());
      } else {
        throw InputError(path + ": record for " + id + " is not a concept, intent or tag record");
      }
    } catch (const nlohmann::json::exception& e) {
      throw InputError(path + ": malformed prediction record: " + e.what());
    }
  }
}

// Expert labels may only name items that were actually predicted.
inline void validate_labels(const ExpertLabels& labels, const Predictions& p) {
  for (const auto& [id, tl] : labels) {
    for (const auto& [phrase, _] : tl.concepts) {
      auto it = p.concepts.find(id);
      if (it == p.concepts.end() ||
          std::find(it->second.begin(), it->second.end(), phrase) == it->second.end())
        throw InputError("expert label for concept '" + phrase + "' in " + id + " was not predicted");
    }
    for (const auto& [seg, _] : tl.intents) {
      auto it = p.intents.find(id);
      if (it == p.intents.end() ||
          std::none_of(it->second.begin(), it->second.end(),
                       [&](const metrics::Span& s) { return s.id() == seg; }))
        throw InputError("expert label for intent segment " + seg + " in " + id + " was not predicted");
    }
  }
}

inline Json counts_json(const metrics::MatchCounts& m) {
  return {{"a", m.a},           {"b", m.b},         {"c", m.c},   {"d", m.d},
          {"precision", m.precision()}, {"recall", m.recall()}, {"f1", m.f1()}};
}

// Per-transcript and macro-averaged metrics for whatever predictions are
// present. Recall@j is reported for every j in 1..k.
inline Json evaluate(const Predictions& p, const GoldenSet& golden, const ExpertLabels* labels,
                     const Lexicon& lex, const MetricsConfig& mc, int k) {
  Json per = Json::object();
  struct Acc {
    double p = 0, r = 0, f = 0;
    int n = 0;
    void add(const metrics::MatchCounts& m) {
      p += m.precision();
      r += m.recall();
      f += m.f1();
      ++n;
    }
    Json json() const {
      if (n == 0) return nullptr;
      return {{"precision", p / n}, {"recall", r / n}, {"f1", f / n}, {"transcripts", n}};
    }
  } concept_acc, intent_acc;
  std::vector<double> rk(static_cast<std::size_t>(k), 0.0);
  int tagged = 0;

  for (const auto& [id, g] : golden) {
    Json row = Json::object();
    const TranscriptLabels* tl = nullptr;
    if (labels) {
      auto it = labels->find(id);
      if (it != labels->end()) tl = &it->second;
    }
    if (auto it = p.concepts.find(id); it != p.concepts.end()) {
      const auto m = metrics::concept_pr(it->second, g.concepts, lex, tl ? &tl->concepts : nullptr,
                                         mc.min_shared_tokens);
      concept_acc.add(m);
      row["concepts"] = counts_json(m);
    }
    if (auto it = p.intents.find(id); it != p.intents.end()) {
      const auto m = metrics::intent_pr(it->second, g.intent_sentences, tl ? &tl->intents : nullptr);
      intent_acc.add(m);
      row["intents"] = counts_json(m);
    }
    if (auto it = p.tags.find(id); it != p.tags.end() && !g.category.empty()) {
      Json r = Json::object();
      for (int j = 1; j <= k; ++j) {
        const double v = metrics::recall_at_k(it->second, g.category, j);
        rk[static_cast<std::size_t>(j - 1)] += v;
        r[std::to_string(j)] = v;
      }
      ++tagged;
      row["recall_at_k"] = std::move(r);
    }
    if (!row.empty()) per[id] = std::move(row);
  }

  Json report;
  report["transcripts"] = std::move(per);
  Json macro;
  macro["concepts"] = concept_acc.json();
  macro["intents"] = intent_acc.json();
  if (tagged) {
    Json r = Json::object();
    for (int j = 1; j <= k; ++j) r[std::to_string(j)] = rk[static_cast<std::size_t>(j - 1)] / tagged;
    macro["recall_at_k"] = std::move(r);
  } else {
    macro["recall_at_k"] = nullptr;
  }
  report["macro"] = std::move(macro);
  const auto shares = labels ? metrics::vcp_vip(*labels) : metrics::ValueShares{};
  report["vcp"] = shares.vcp ? Json(*shares.vcp) : Json(nullptr);
  report["vip"] = shares.vip ? Json(*shares.vip) : Json(nullptr);
  return report;
}

// Aligned plain-text rendering of an evaluate() report.
inline std::string report_table(const Json& report, int k) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  auto cell = [&](const Json& obj, const char* field) {
    std::ostringstream c;
    c << std::fixed << std::setprecision(4);
    if (obj.is_object() && obj.contains(field) && obj[field].is_number()) c << obj[field].get<double>();
    else c << "-";
    return c.str();
  };
  auto line = [&](const std::string& name, const Json& row) {
    const Json none;
    const Json& c = row.contains("concepts") ? row["concepts"] : none;
    const Json& i = row.contains("intents") ? row["intents"] : none;
    const Json& r = row.contains("recall_at_k") ? row["recall_at_k"] : none;
    os << std::left << std::setw(14) << name << std::right;
    for (const auto* f : {"precision", "recall", "f1"}) os << std::setw(12) << cell(c, f);
    for (const auto* f : {"precision", "recall", "f1"}) os << std::setw(12) << cell(i, f);
    os << std::setw(12) << cell(r, std::to_string(k).c_str()) << '\n';
  };
  os << std::left << std::setw(14) << "transcript" << std::right;
  for (const auto* h : {"concept_P", "concept_R", "concept_F1", "intent_P", "intent_R", "intent_F1"})
    os << std::setw(12) << h;
  os << std::setw(12) << ("R@" + std::to_string(k)) << '\n';
  for (const auto& [id, row] : report["transcripts"].items()) line(id, row);
  line("macro", report["macro"]);
  auto pct = [](const Json& v) {
    if (!v.is_number()) return std::string("n/a");
    std::ostringstream s;
    s << std::fixed << std::setprecision(1) << v.get<double>() << "%";
    return s.str();
  };
  os << "VCP " << pct(report["vcp"]) << "  VIP " << pct(report["vip"]) << '\n';
  return os.str();
}

}  // namespace talkmine
