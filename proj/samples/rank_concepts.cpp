// Prints the top concepts of each transcript.
//   sample_rank_concepts <config.ini> <transcripts.jsonl> <annotations.tsv> <embeddings.vec>

#include <iomanip>
#include <iostream>

#include "talkmine/pipeline.hpp"

using namespace talkmine;

int main(int argc, char** argv) {
  if (argc != 5) {
    std::cerr << "usage: " << argv[0] << " <config.ini> <transcripts.jsonl> <annotations.tsv> <embeddings.vec>\n";
    return 2;
  }
  try {
    const auto cfg = load_config(argv[1]);
    const auto corpus = load_annotated_corpus(argv[2], argv[3]);
    const auto lex = load_lexicon(cfg.resources);
    const auto emb = EmbeddingTable::load(argv[4]);
    const auto model = casual::train_on_corpus(corpus, lex, cfg.casual.head_n, train_options(cfg)).model;
    const auto flags = classify_corpus(model, corpus, lex, cfg.jobs);
    const auto st = run_concepts(corpus, flags, lex, emb, cfg);
    std::cout << std::fixed << std::setprecision(3);
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      std::cout << corpus[i].id << '\n';
      for (const auto& c : st.results[i].concepts) std::cout << "  " << c.score << "  " << c.phrase << '\n';
    }
  } catch (const ConfigError& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return 1;
  }
}
