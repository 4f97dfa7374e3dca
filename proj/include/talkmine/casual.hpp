#pragma once

// Casual-talk sentence filter. Training labels come for free: the opening
// sentences of every call are taken as casual, an equal number sampled from the
// rest as business. A bagged tree ensemble scores sentences and the decision
// threshold is tuned for precision on a held-out split, so that business
// sentences are almost never discarded.

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "talkmine/corpus.hpp"
#include "talkmine/text.hpp"
#include "talkmine/vectors.hpp"

namespace talkmine::casual {

struct Features {
  double position = 0;  // index / (sentence_count - 1), 0 for single-sentence transcripts
  int n_tokens = 0;
  int n_stopwords = 0;
  int n_entities = 0;
  int n_person = 0;
  int n_geo = 0;

  static constexpr std::size_t kCount = 6;
  std::array<double, kCount> values() const {
    return {position, double(n_tokens), double(n_stopwords), double(n_entities), double(n_person),
            double(n_geo)};
  }
  bool operator==(const Features&) const = default;
};

inline bool is_person_label(std::string_view l) { return l == "PERSON" || l == "PER"; }
inline bool is_geo_label(std::string_view l) {
  return l == "LOCATION" || l == "LOC" || l == "GPE";
}

// Punctuation tokens are not counted.
inline Features featurize(const Sentence& s, const Transcript& t, const Lexicon& lex) {
  if (!s.annotated())
    throw InputError("transcript " + t.id + " sentence " + std::to_string(s.index) +
                     " is not annotated");
  Features f;
  const auto n = t.sentences.size();
  f.position = n > 1 ? static_cast<double>(s.index) / static_cast<double>(n - 1) : 0.0;
  for (const auto& tok : s.tokens) {
    if (is_punct(tok)) continue;
    ++f.n_tokens;
    if (lex.is_stopword(tok.surface)) ++f.n_stopwords;
  }
  for (const auto& span : entity_spans(s)) {
    ++f.n_entities;
    if (is_person_label(span.label)) ++f.n_person;
    if (is_geo_label(span.label)) ++f.n_geo;
  }
  return f;
}

struct LabeledSentence {
  std::size_t transcript = 0;  // index into the corpus
  int sentence = 0;
  bool casual = false;
};

// First head_n sentences casual, head_n sampled from the remainder business.
// Transcripts with no more than head_n sentences are skipped; their ids are
// appended to `skipped`.
inline std::vector<LabeledSentence> auto_label(const std::vector<Transcript>& corpus, int head_n,
                                               std::uint64_t seed,
                                               std::vector<std::string>* skipped = nullptr) {
  if (head_n < 1) throw std::invalid_argument("auto_label: head_n must be >= 1");
  std::vector<LabeledSentence> out;
  const auto h = static_cast<std::size_t>(head_n);
  for (std::size_t ti = 0; ti < corpus.size(); ++ti) {
    const auto& t = corpus[ti];
    if (t.sentences.size() <= h) {
      if (skipped) skipped->push_back(t.id);
      continue;
    }
    for (std::size_t i = 0; i < h; ++i) out.push_back({ti, static_cast<int>(i), true});
    std::vector<int> rest(t.sentences.size() - h);
    std::iota(rest.begin(), rest.end(), head_n);
    std::mt19937_64 rng(seed ^ fnv1a(t.id));
    // Partial Fisher-Yates; only the first head_n slots are needed.
    const auto take = std::min(h, rest.size());
    for (std::size_t i = 0; i < take; ++i) {
      const auto j = i + uniform_index(rng, rest.size() - i);
      std::swap(rest[i], rest[j]);
    }
    std::sort(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(take));
    for (std::size_t i = 0; i < take; ++i) out.push_back({ti, rest[i], false});
  }
  return out;
}

struct Sample {
  Features features;
  bool casual = false;
};

// Depth-limited CART tree (Gini) stored as a flat node array; node 0 is the root.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0;
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  double value = 0;  // casual fraction at the leaf
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(const std::array<double, Features::kCount>& x) const {
    int i = 0;
    while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
      const auto& n = nodes[static_cast<std::size_t>(i)];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(i)].value;
  }
};

namespace detail {

inline double gini(std::size_t pos, std::size_t total) {
  if (total == 0) return 0;
  const double p = static_cast<double>(pos) / static_cast<double>(total);
  return 2 * p * (1 - p);
}

inline int grow(Tree& tree, const std::vector<std::array<double, Features::kCount>>& x,
                const std::vector<bool>& y, std::vector<std::size_t> idx, int depth,
                int max_depth) {
  const std::size_t pos = static_cast<std::size_t>(
      std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return y[i]; }));
  const int me = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().value = idx.empty() ? 0.0 : static_cast<double>(pos) / double(idx.size());
  if (depth >= max_depth || pos == 0 || pos == idx.size()) return me;

  const double parent = gini(pos, idx.size());
  double best_imp = parent;
  int best_f = -1;
  double best_thr = 0;
  for (std::size_t f = 0; f < Features::kCount; ++f) {
    std::vector<std::size_t> order = idx;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
    std::size_t left_pos = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      if (y[order[k]]) ++left_pos;
      const double v = x[order[k]][f], next = x[order[k + 1]][f];
      if (v == next) continue;
      const std::size_t nl = k + 1, nr = order.size() - nl;
      const double imp = (double(nl) * gini(left_pos, nl) + double(nr) * gini(pos - left_pos, nr)) /
                         double(order.size());
      if (imp < best_imp - 1e-12) {
        best_imp = imp;
        best_f = static_cast<int>(f);
        best_thr = (v + next) / 2;
      }
    }
  }
  if (best_f < 0) return me;

  std::vector<std::size_t> l, r;
  for (auto i : idx) (x[i][static_cast<std::size_t>(best_f)] <= best_thr ? l : r).push_back(i);
  const int li = grow(tree, x, y, std::move(l), depth + 1, max_depth);
  const int ri = grow(tree, x, y, std::move(r), depth + 1, max_depth);
  auto& node = tree.nodes[static_cast<std::size_t>(me)];
  node.feature = best_f;
  node.threshold = best_thr;
  node.left = li;
  node.right = ri;
  return me;
}

}  // namespace detail

struct Model {
  std::vector<Tree> trees;
  double threshold = 0.5;
  bool fail_safe = false;

  // Mean casual fraction over the ensemble, in [0, 1].
  double score(const Features& f) const {
    if (trees.empty()) return 0.0;
    const auto x = f.values();
    double s = 0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }
};

struct Classification {
  bool casual = false;
  double score = 0;
};

// Casual iff score >= threshold.
inline Classification classify(const Model& m, const Features& f) {
  const double s = m.score(f);
  return {s >= m.threshold, s};
}

inline Classification classify(const Model& m, const Sentence& s, const Transcript& t,
                               const Lexicon& lex) {
  return classify(m, featurize(s, t, lex));
}

// Per-sentence casual flags for a whole transcript.
inline std::vector<bool> classify_transcript(const Model& m, const Transcript& t,
                                             const Lexicon& lex) {
  std::vector<bool> out;
  out.reserve(t.sentences.size());
  for (const auto& s : t.sentences) out.push_back(classify(m, s, t, lex).casual);
  return out;
}

struct ThresholdChoice {
  bool attainable = false;
  double threshold = 0;
  double precision = 0;
  double recall = 0;
};

// Threshold maximising recall subject to precision >= target, over the distinct
// observed scores. Recall ties go to the higher threshold.
inline ThresholdChoice choose_threshold(std::span<const double> scores,
                                        const std::vector<bool>& casual, double target) {
  ThresholdChoice best;
  const auto positives = static_cast<std::size_t>(std::count(casual.begin(), casual.end(), true));
  if (positives == 0) return best;
  std::vector<double> cands(scores.begin(), scores.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
  for (double t : cands) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] < t) continue;
      (casual[i] ? tp : fp) += 1;
    }
    if (tp == 0) continue;
    const double p = double(tp) / double(tp + fp);
    const double r = double(tp) / double(positives);
    if (p + 1e-12 < target) continue;
    if (!best.attainable || r > best.recall || (r == best.recall && t > best.threshold)) {
      best = {true, t, p, r};
    }
  }
  return best;
}

struct TrainOptions {
  double precision_target = 0.95;
  int trees = 25;
  int max_depth = 4;
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;
};

struct TrainResult {
  Model model;
  std::vector<std::size_t> validation;  // indices into the training samples
  double validation_precision = 0;
  double validation_recall = 0;
};

// Stratified seeded split, bagged trees on the training part, threshold tuned
// on the validation part. When the target cannot be met the model is fail-safe:
// its threshold exceeds every attainable score so nothing is called casual.
inline TrainResult train(std::span<const Sample> samples, const TrainOptions& opts) {
  if (!(opts.precision_target > 0 && opts.precision_target <= 1))
    throw std::invalid_argument("train: precision_target must be in (0,1]");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < samples.size(); ++i) (samples[i].casual ? pos : neg).push_back(i);
  if (pos.empty() || neg.empty())
    throw InputError("casual training needs both casual and business samples");

  std::mt19937_64 rng(opts.seed);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
  };
  shuffle(pos);
  shuffle(neg);
  TrainResult res;
  std::vector<std::size_t> fit;
  for (auto* cls : {&pos, &neg}) {
    std::size_t nval = 0;
    if (cls->size() >= 2)
      nval = std::clamp<std::size_t>(
          static_cast<std::size_t>(std::lround(opts.validation_fraction * double(cls->size()))), 1,
          cls->size() - 1);
    res.validation.insert(res.validation.end(), cls->begin(), cls->begin() + std::ptrdiff_t(nval));
    fit.insert(fit.end(), cls->begin() + std::ptrdiff_t(nval), cls->end());
  }
  std::sort(res.validation.begin(), res.validation.end());
  std::sort(fit.begin(), fit.end());

  std::vector<std::array<double, Features::kCount>> x;
  std::vector<bool> y;
  for (const auto& s : samples) {
    x.push_back(s.features.values());
    y.push_back(s.casual);
  }
  for (int t = 0; t < opts.trees; ++t) {
    std::vector<std::size_t> boot(fit.size());
    for (auto& b : boot) b = fit[uniform_index(rng, fit.size())];
    Tree tree;
    detail::grow(tree, x, y, std::move(boot), 0, opts.max_depth);
    res.model.trees.push_back(std::move(tree));
  }

  std::vector<double> scores;
  std::vector<bool> labels;
  for (auto i : res.validation) {
    scores.push_back(res.model.score(samples[i].features));
    labels.push_back(samples[i].casual);
  }
  const auto choice = choose_threshold(scores, labels, opts.precision_target);
  if (choice.attainable) {
    res.model.threshold = choice.threshold;
    res.validation_precision = choice.precision;
    res.validation_recall = choice.recall;
  } else {
    res.model.threshold = std::nextafter(1.0, 2.0);
    res.model.fail_safe = true;
  }
  return res;
}

// Auto-labels the corpus, featurizes and trains.
inline TrainResult train_on_corpus(const std::vector<Transcript>& corpus, const Lexicon& lex,
                                   int head_n, const TrainOptions& opts,
                                   std::vector<std::string>* skipped = nullptr) {
  const auto labeled = auto_label(corpus, head_n, opts.seed, skipped);
  std::vector<Sample> samples;
  samples.reserve(labeled.size());
  for (const auto& l : labeled) {
    const auto& t = corpus[l.transcript];
    samples.push_back({featurize(t.sentences[static_cast<std::size_t>(l.sentence)], t, lex), l.casual});
  }
  return train(samples, opts);
}

inline nlohmann::ordered_json to_json(const Model& m) {
  nlohmann::ordered_json j;
  j["threshold"] = m.threshold;
  j["fail_safe"] = m.fail_safe;
  j["features"] = {"position", "n_tokens", "n_stopwords", "n_entities", "n_person", "n_geo"};
  j["trees"] = nlohmann::ordered_json::array();
  for (const auto& t : m.trees) {
    auto nodes = nlohmann::ordered_json::array();
    for (const auto& n : t.nodes)
      nodes.push_back(n.feature < 0 ? nlohmann::ordered_json{{"value", n.value}}
                                    : nlohmann::ordered_json{{"feature", n.feature},
                                                             {"threshold", n.threshold},
                                                             {"left", n.left},
                                                             {"right", n.right},
                                                             {"value", n.value}});
    j["trees"].push_back(std::move(nodes));
  }
  return j;
}

inline Model model_from_json(const nlohmann::json& j) {
  Model m;
  try {
    m.threshold = j.at("threshold").get<double>();
    m.fail_safe = j.value("fail_safe", false);
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode n;
        n.value = jn.at("value").get<double>();
        if (jn.contains("feature")) {
          n.feature = jn.at("feature").get<int>();
          n.threshold = jn.at("threshold").get<double>();
          n.left = jn.at("left").get<int>();
          n.right = jn.at("right").get<int>();
        }
        t.nodes.push_back(n);
      }
      const auto sz = static_cast<int>(t.nodes.size());
      if (sz == 0) throw InputError("casual model: empty tree");
      // Children must come after their parent, which also rules out cycles.
      for (int i = 0; i < sz; ++i) {
        const auto& n = t.nodes[static_cast<std::size_t>(i)];
        if (n.feature >= 0 && (n.feature >= int(Features::kCount) || n.left <= i ||
                               n.left >= sz || n.right <= i || n.right >= sz))
          throw InputError("casual model: malformed tree node");
      }
      m.trees.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("casual model: ") + e.what());
  }
  return m;
}

}  // namespace talkmine::casual
