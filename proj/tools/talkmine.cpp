// talkmine: command-line front end for the transcript extraction pipeline.
//
//   train-casual      fit the casual-talk filter and save it
//   extract-concepts  ranked key concepts per transcript
//   extract-intents   ranked intent segments per transcript
//   tag               category tags from description documents
//   evaluate          precision/recall, Recall@k, VCP/VIP against a golden set
//   pipeline          all of the above in order
//
// Exit status: 0 success, 1 input error, 2 configuration or usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "manifest.hpp"
#include "talkmine/pipeline.hpp"

namespace fs = std::filesystem;
using namespace talkmine;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
};

PipelineConfig resolve_config(const CommonOptions& o) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig{} : load_config(o.config);
  if (o.seed) cfg.seed = *o.seed;
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* app, CommonOptions& o) {
  app->add_option("--config", o.config, "INI configuration file");
  app->add_option("--seed", o.seed, "Random seed (overrides config)");
  app->add_option("--jobs", o.jobs, "Worker threads for per-transcript stages");
}

void record_inputs(cli::RunManifest& m, const PipelineConfig& cfg,
                   std::initializer_list<std::string> paths) {
  for (const auto& p : paths) m.input(p);
  m.input(cfg.resources.stopwords);
  m.input(cfg.resources.english_vocab);
  m.input(cfg.resources.lemmas);
}

casual::Model obtain_casual_model(const std::string& model_path,
                                  const std::vector<Transcript>& corpus, const Lexicon& lex,
                                  const PipelineConfig& cfg) {
  if (!model_path.empty()) {
    std::ifstream in(model_path);
    if (!in) throw InputError("cannot open casual model: " + model_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(model_path + ": " + e.what());
    }
    return casual::model_from_json(j);
  }
  std::vector<std::string> skipped;
  auto res = casual::train_on_corpus(corpus, lex, cfg.casual.head_n, train_options(cfg), &skipped);
  for (const auto& id : skipped)
    std::cerr << "warning: transcript " << id << " too short for casual auto-labelling; skipped\n";
  return std::move(res.model);
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string manifest_path(const std::string& out) { return out + ".manifest.json"; }

void finish(cli::RunManifest& m, const std::vector<std::string>& outputs, const std::string& where,
            const PipelineConfig& cfg) {
  for (const auto& o : outputs) m.output(o);
  m.write(where, cfg);
}

// ---------------------------------------------------------------------------

struct TrainCasualArgs {
  CommonOptions common;
  std::string corpus, annotations, out;
};

int cmd_train_casual(const TrainCasualArgs& a) {
  const auto cfg = resolve_config(a.common);
  cli::RunManifest m("train-casual");
  record_inputs(m, cfg, {a.corpus, a.annotations});
  const auto lex = load_lexicon(cfg.resources);
  const auto corpus = m.timed("load", [&] { return load_annotated_corpus(a.corpus, a.annotations); });
  std::vector<std::string> skipped;
  const auto res = m.timed("train", [&] {
    return casual::train_on_corpus(corpus, lex, cfg.casual.head_n, train_options(cfg), &skipped);
  });
  for (const auto& id : skipped)
    std::cerr << "warning: transcript " << id << " too short for casual auto-labelling; skipped\n";
  auto j = casual::to_json(res.model);
  j["validation"] = {{"samples", res.validation.size()},
                     {"precision", res.validation_precision},
                     {"recall", res.validation_recall}};
  write_json(a.out, j);
  finish(m, {a.out}, manifest_path(a.out), cfg);
  std::cerr << "casual model: threshold " << res.model.threshold
            << (res.model.fail_safe ? " (fail-safe)" : "") << ", validation precision "
            << res.validation_precision << ", recall " << res.validation_recall << '\n';
  return 0;
}

struct ConceptArgs {
  CommonOptions common;
  std::string corpus, annotations, embeddings, casual_model, out;
};

int cmd_extract_concepts(const ConceptArgs& a) {
  const auto cfg = resolve_config(a.common);
  cli::RunManifest m("extract-concepts");
  record_inputs(m, cfg, {a.corpus, a.annotations, a.embeddings, a.casual_model});
  const auto lex = load_lexicon(cfg.resources);
  const auto corpus = m.timed("load", [&] { return load_annotated_corpus(a.corpus, a.annotations); });
  const auto emb = EmbeddingTable::load(a.embeddings);
  const auto model = m.timed("casual", [&] { return obtain_casual_model(a.casual_model, corpus, lex, cfg); });
  const auto casual = classify_corpus(model, corpus, lex, cfg.jobs);
  const auto st = m.timed("concepts", [&] { return run_concepts(corpus, casual, lex, emb, cfg); });
  std::vector<Json> recs;
  for (std::size_t i = 0; i < corpus.size(); ++i)
    recs.push_back(concepts_record(corpus[i], casual[i], st.results[i]));
  write_jsonl(a.out, recs);
  finish(m, {a.out}, manifest_path(a.out), cfg);
  return 0;
}

struct IntentArgs {
  CommonOptions common;
  std::string corpus, annotations, embeddings, concepts, casual_model, out;
};

int cmd_extract_intents(const IntentArgs& a) {
  const auto cfg = resolve_config(a.common);
  cli::RunManifest m("extract-intents");
  record_inputs(m, cfg, {a.corpus, a.annotations, a.embeddings, a.concepts, a.casual_model});
  const auto lex = load_lexicon(cfg.resources);
  const auto corpus = m.timed("load", [&] { return load_annotated_corpus(a.corpus, a.annotations); });
  const auto emb = EmbeddingTable::load(a.embeddings);
  const auto records = read_concepts(a.concepts);

  // Casual flags come from the concepts file so both stages see the same split;
  // an explicit model overrides.
  std::vector<std::vector<bool>> casual(corpus.size());
  std::vector<std::vector<int>> occ(corpus.size());
  std::optional<casual::Model> model;
  if (!a.casual_model.empty()) model = obtain_casual_model(a.casual_model, corpus, lex, cfg);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    auto it = records.find(corpus[i].id);
    if (it == records.end())
      throw InputError(a.concepts + ": no concept record for transcript " + corpus[i].id);
    occ[i] = it->second.concept_sentences;
    if (model) {
      casual[i] = casual::classify_transcript(*model, corpus[i], lex);
    } else {
      casual[i].assign(corpus[i].sentences.size(), false);
      for (int s : it->second.casual_sentences)
        if (s >= 0 && static_cast<std::size_t>(s) < casual[i].size()) casual[i][static_cast<std::size_t>(s)] = true;
    }
  }
  const auto res = m.timed("intents", [&] { return run_intents(corpus, casual, occ, emb, cfg); });
  std::vector<Json> recs;
  for (std::size_t i = 0; i < corpus.size(); ++i) recs.push_back(intents_record(corpus[i], res[i]));
  write_jsonl(a.out, recs);
  finish(m, {a.out}, manifest_path(a.out), cfg);
  return 0;
}

struct TagArgs {
  CommonOptions common;
  std::string corpus, annotations, categories, mode, out;
  std::optional<int> k;
};

int cmd_tag(const TagArgs& a) {
  auto cfg = resolve_config(a.common);
  if (!a.mode.empty()) cfg.tagger.mode = parse_vector_mode(a.mode);
  if (a.k) cfg.tagger.k = *a.k;
  cfg.validate();
  cli::RunManifest m("tag");
  record_inputs(m, cfg, {a.corpus, a.annotations});
  const auto lex = load_lexicon(cfg.resources);
  const auto corpus = m.timed("load", [&] { return load_annotated_corpus(a.corpus, a.annotations); });
  const auto models = m.timed("models", [&] {
    return tagger::build_models(tagger::load_category_docs(a.categories), lex, cfg.tagger);
  });
  const auto res = m.timed("tag", [&] { return run_tags(corpus, models, lex, cfg.tagger.k, cfg.jobs); });
  std::vector<Json> recs;
  for (const auto& r : res) recs.push_back(tags_record(r));
  write_jsonl(a.out, recs);
  finish(m, {a.out}, manifest_path(a.out), cfg);
  return 0;
}

struct EvaluateArgs {
  CommonOptions common;
  std::vector<std::string> predictions;
  std::string golden, expert_labels, report;
  std::optional<int> k;
};

int cmd_evaluate(const EvaluateArgs& a) {
  auto cfg = resolve_config(a.common);
  if (a.k) cfg.metrics.k = *a.k;
  cfg.validate();
  cli::RunManifest m("evaluate");
  for (const auto& p : a.predictions) m.input(p);
  record_inputs(m, cfg, {a.golden, a.expert_labels});
  const auto lex = load_lexicon(cfg.resources);
  Predictions preds;
  for (const auto& p : a.predictions) read_predictions(p, preds);
  const auto golden = parse_golden(a.golden);
  std::optional<ExpertLabels> labels;
  if (!a.expert_labels.empty()) {
    labels = parse_expert_labels(a.expert_labels);
    validate_labels(*labels, preds);
  }
  const auto report = evaluate(preds, golden, labels ? &*labels : nullptr, lex, cfg.metrics, cfg.metrics.k);
  const auto table = report_table(report, cfg.metrics.k);
  write_json(a.report, report);
  {
    std::ofstream t(a.report + ".txt");
    if (!t) throw InputError("cannot write " + a.report + ".txt");
    t << table;
  }
  std::cout << table;
  finish(m, {a.report, a.report + ".txt"}, manifest_path(a.report), cfg);
  return 0;
}

struct PipelineArgs {
  CommonOptions common;
  std::string corpus, annotations, embeddings, categories, golden, expert_labels, out;
};

int cmd_pipeline(const PipelineArgs& a) {
  const auto cfg = resolve_config(a.common);
  cli::RunManifest m("pipeline");
  record_inputs(m, cfg, {a.corpus, a.annotations, a.embeddings, a.golden, a.expert_labels});
  fs::create_directories(a.out);
  const auto path = [&](const char* name) { return (fs::path(a.out) / name).string(); };
  std::vector<std::string> outputs;

  const auto lex = load_lexicon(cfg.resources);
  const auto corpus = m.timed("load", [&] { return load_annotated_corpus(a.corpus, a.annotations); });
  const auto emb = EmbeddingTable::load(a.embeddings);

  std::vector<std::string> skipped;
  const auto trained = m.timed("casual", [&] {
    return casual::train_on_corpus(corpus, lex, cfg.casual.head_n, train_options(cfg), &skipped);
  });
  for (const auto& id : skipped)
    std::cerr << "warning: transcript " << id << " too short for casual auto-labelling; skipped\n";
  write_json(path("casual_model.json"), casual::to_json(trained.model));
  outputs.push_back(path("casual_model.json"));
  const auto casual = classify_corpus(trained.model, corpus, lex, cfg.jobs);

  const auto st = m.timed("concepts", [&] { return run_concepts(corpus, casual, lex, emb, cfg); });
  std::vector<Json> crecs;
  std::vector<std::vector<int>> occ;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    crecs.push_back(concepts_record(corpus[i], casual[i], st.results[i]));
    occ.push_back(concept_sentences(st.results[i].concepts));
  }
  write_jsonl(path("concepts.jsonl"), crecs);
  outputs.push_back(path("concepts.jsonl"));

  const auto ir = m.timed("intents", [&] { return run_intents(corpus, casual, occ, emb, cfg); });
  std::vector<Json> irecs;
  for (std::size_t i = 0; i < corpus.size(); ++i) irecs.push_back(intents_record(corpus[i], ir[i]));
  write_jsonl(path("intents.jsonl"), irecs);
  outputs.push_back(path("intents.jsonl"));

  if (!a.categories.empty()) {
    const auto models = m.timed("tag-models", [&] {
      return tagger::build_models(tagger::load_category_docs(a.categories), lex, cfg.tagger);
    });
    const auto tr = m.timed("tag", [&] { return run_tags(corpus, models, lex, cfg.tagger.k, cfg.jobs); });
    std::vector<Json> trecs;
    for (const auto& r : tr) trecs.push_back(tags_record(r));
    write_jsonl(path("tags.jsonl"), trecs);
    outputs.push_back(path("tags.jsonl"));
  }

  if (!a.golden.empty()) {
    Predictions preds;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      const auto& id = corpus[i].id;
      for (const auto& c : st.results[i].concepts) preds.concepts[id].push_back(c.phrase);
      for (const auto& s : ir[i].intents) preds.intents[id].push_back({s.start, s.end});
    }
    if (!a.categories.empty()) read_predictions(path("tags.jsonl"), preds);
    const auto golden = parse_golden(a.golden);
    std::set<std::string> cats;
    if (!a.categories.empty())
      for (const auto& e : fs::directory_iterator(a.categories))
        if (e.is_directory()) cats.insert(e.path().filename().string());
    validate_golden(golden, corpus, cats);
    std::optional<ExpertLabels> labels;
    if (!a.expert_labels.empty()) {
      labels = parse_expert_labels(a.expert_labels);
      validate_labels(*labels, preds);
    }
    const auto report = evaluate(preds, golden, labels ? &*labels : nullptr, lex, cfg.metrics, cfg.metrics.k);
    write_json(path("report.json"), report);
    std::ofstream(path("report.txt")) << report_table(report, cfg.metrics.k);
    outputs.push_back(path("report.json"));
    outputs.push_back(path("report.txt"));
  }
  finish(m, outputs, path("manifest.json"), cfg);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unsupervised information extraction from conversation transcripts"};
  app.set_version_flag("--version", cli::kVersion);
  app.require_subcommand(1);

  TrainCasualArgs tc;
  auto* c_train = app.add_subcommand("train-casual", "Train the casual-talk filter");
  add_common(c_train, tc.common);
  c_train->add_option("--corpus", tc.corpus, "Transcript JSONL file")->required();
  c_train->add_option("--annotations", tc.annotations, "Annotation sidecar")->required();
  c_train->add_option("--out", tc.out, "Model output (JSON)")->required();

  ConceptArgs ca;
  auto* c_concepts = app.add_subcommand("extract-concepts", "Rank key concepts per transcript");
  add_common(c_concepts, ca.common);
  c_concepts->add_option("--corpus", ca.corpus)->required();
  c_concepts->add_option("--annotations", ca.annotations)->required();
  c_concepts->add_option("--embeddings", ca.embeddings)->required();
  c_concepts->add_option("--casual-model", ca.casual_model, "Trained casual model; trained on the fly if absent");
  c_concepts->add_option("--out", ca.out)->required();

  IntentArgs ia;
  auto* c_intents = app.add_subcommand("extract-intents", "Extract intent segments per transcript");
  add_common(c_intents, ia.common);
  c_intents->add_option("--corpus", ia.corpus)->required();
  c_intents->add_option("--annotations", ia.annotations)->required();
  c_intents->add_option("--embeddings", ia.embeddings)->required();
  c_intents->add_option("--concepts", ia.concepts, "Output of extract-concepts")->required();
  c_intents->add_option("--casual-model", ia.casual_model);
  c_intents->add_option("--out", ia.out)->required();

  TagArgs ta;
  auto* c_tag = app.add_subcommand("tag", "Tag transcripts with categories");
  add_common(c_tag, ta.common);
  c_tag->add_option("--corpus", ta.corpus)->required();
  c_tag->add_option("--annotations", ta.annotations)->required();
  c_tag->add_option("--categories", ta.categories, "Directory of per-category document folders")->required();
  c_tag->add_option("--mode", ta.mode, "tfidf | bow | binary");
  c_tag->add_option("--k", ta.k, "Tags per transcript");
  c_tag->add_option("--out", ta.out)->required();

  EvaluateArgs ea;
  auto* c_eval = app.add_subcommand("evaluate", "Score predictions against a golden set");
  add_common(c_eval, ea.common);
  c_eval->add_option("--predictions", ea.predictions, "Stage output files (repeatable)")->required();
  c_eval->add_option("--golden", ea.golden)->required();
  c_eval->add_option("--expert-labels", ea.expert_labels);
  c_eval->add_option("--k", ea.k, "Recall@k cutoff");
  c_eval->add_option("--report", ea.report, "Report path (JSON; table written to <report>.txt)")->required();

  PipelineArgs pa;
  auto* c_pipe = app.add_subcommand("pipeline", "Run every stage");
  add_common(c_pipe, pa.common);
  c_pipe->add_option("--corpus", pa.corpus)->required();
  c_pipe->add_option("--annotations", pa.annotations)->required();
  c_pipe->add_option("--embeddings", pa.embeddings)->required();
  c_pipe->add_option("--categories", pa.categories);
  c_pipe->add_option("--golden", pa.golden);
  c_pipe->add_option("--expert-labels", pa.expert_labels);
  c_pipe->add_option("--out", pa.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    const CLI::App* scope = &app;
    for (const auto* sub : app.get_subcommands()) scope = sub;
    std::cerr << "error: " << e.what() << "\n\n" << scope->help();
    return 2;
  }

  try {
    if (*c_train) return cmd_train_casual(tc);
    if (*c_concepts) return cmd_extract_concepts(ca);
    if (*c_intents) return cmd_extract_intents(ia);
    if (*c_tag) return cmd_tag(ta);
    if (*c_eval) return cmd_evaluate(ea);
    if (*c_pipe) return cmd_pipeline(pa);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
