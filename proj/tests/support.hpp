#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "talkmine/pipeline.hpp"

namespace testing_support {

using namespace talkmine;

inline const std::string kFixtureDir = TALKMINE_FIXTURE_DIR;
inline const std::string kCorpusDir = TALKMINE_FIXTURE_DIR "/corpus";
inline const std::string kGoldenDir = TALKMINE_GOLDEN_DIR;
inline const std::string kCli = TALKMINE_CLI;

// Hand-annotated sentence from "surface/UPOS/head/dep[/NER]" items separated by
// spaces. Lemma is the lowercased surface unless given as "surface=lemma".
inline Sentence parse_sentence(const std::string& ann, int index = 0) {
  Sentence s;
  s.index = index;
  std::istringstream in(ann);
  std::string item;
  while (in >> item) {
    auto parts = split(item, '/');
    if (parts.size() < 4) throw std::invalid_argument("bad token ann: " + item);
    Token t;
    auto eq = parts[0].find('=');
    t.surface = parts[0].substr(0, eq);
    t.lemma = eq == std::string::npos ? to_lower(t.surface) : parts[0].substr(eq + 1);
    t.upos = parts[1];
    t.head = std::stoi(parts[2]);
    t.dep_rel = parts[3];
    if (parts.size() > 4) t.ner = parts[4];
    if (!s.text.empty() && t.upos != "PUNCT") s.text += ' ';
    s.text += t.surface;
    s.tokens.push_back(std::move(t));
  }
  return s;
}

inline Transcript make_transcript(const std::string& id, const std::vector<std::string>& specs) {
  Transcript t;
  t.id = id;
  for (std::size_t i = 0; i < specs.size(); ++i)
    t.sentences.push_back(parse_sentence(specs[i], static_cast<int>(i)));
  return t;
}

inline Lexicon fixture_lexicon() {
  return Lexicon::load(kCorpusDir + "/stopwords.txt", kCorpusDir + "/english_vocab.txt",
                       kCorpusDir + "/lemmas.tsv");
}

inline std::vector<Transcript> fixture_corpus() {
  return load_annotated_corpus(kCorpusDir + "/transcripts.jsonl", kCorpusDir + "/annotations.tsv");
}

// The in-process pipeline on the fixture corpus with its config, computed once.
struct FixtureRun {
  PipelineConfig cfg;
  std::vector<Transcript> corpus;
  Lexicon lex;
  EmbeddingTable emb;
  casual::TrainResult casual_model;
  std::vector<std::vector<bool>> casual_flags;
  ConceptStage concepts;
  std::vector<intents::IntentResult> intents;
};

inline const FixtureRun& fixture_run() {
  static const FixtureRun run = [] {
    FixtureRun r;
    r.cfg = load_config(kCorpusDir + "/config.ini");
    r.corpus = fixture_corpus();
    r.lex = load_lexicon(r.cfg.resources);
    r.emb = EmbeddingTable::load(kCorpusDir + "/embeddings.vec");
    r.casual_model = casual::train_on_corpus(r.corpus, r.lex, r.cfg.casual.head_n, train_options(r.cfg));
    r.casual_flags = classify_corpus(r.casual_model.model, r.corpus, r.lex);
    r.concepts = run_concepts(r.corpus, r.casual_flags, r.lex, r.emb, r.cfg);
    std::vector<std::vector<int>> occ;
    for (const auto& f : r.concepts.results) occ.push_back(concept_sentences(f.concepts));
    r.intents = run_intents(r.corpus, r.casual_flags, occ, r.emb, r.cfg);
    return r;
  }();
  return run;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct RunResult {
  int status = -1;
  std::string output;  // stdout and stderr interleaved
};

inline RunResult run_cli(const std::string& args) {
  RunResult r;
  const std::string cmd = "\"" + kCli + "\" " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), p)) > 0) r.output.append(buf.data(), n);
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

inline std::string fixture_pipeline_args(const std::string& out) {
  const auto& c = kCorpusDir;
  return "pipeline --corpus " + c + "/transcripts.jsonl --annotations " + c +
         "/annotations.tsv --embeddings " + c + "/embeddings.vec --categories " + c +
         "/categories --golden " + c + "/golden.json --expert-labels " + c +
         "/expert_labels.json --config " + c + "/config.ini --out " + out;
}

inline std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("talkmine_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace testing_support
