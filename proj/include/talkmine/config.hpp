#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>

#include "talkmine/error.hpp"
#include "talkmine/text.hpp"

namespace talkmine {

enum class VectorMode { kTfidf, kBow, kBinary };

inline std::string to_string(VectorMode m) {
  switch (m) {
    case VectorMode::kTfidf: return "tfidf";
    case VectorMode::kBow: return "bow";
    case VectorMode::kBinary: return "binary";
  }
  return "tfidf";
}

inline VectorMode parse_vector_mode(const std::string& s) {
  if (s == "tfidf") return VectorMode::kTfidf;
  if (s == "bow") return VectorMode::kBow;
  if (s == "binary") return VectorMode::kBinary;
  throw ConfigError("unknown vectorization mode '" + s + "' (tfidf|bow|binary)");
}

struct ResourceConfig {
  std::string stopwords;
  std::string english_vocab;
  std::string lemmas;
};

struct CasualConfig {
  int head_n = 5;
  double precision_target = 0.95;
  int trees = 25;
  int max_depth = 4;
  double validation_fraction = 0.2;
};

struct ConceptWeights {
  double frequency = 0.5;
  double pos = 0.2;
  double location = 0.15;
  double similarity = 0.15;
};

struct ConceptConfig {
  int ngram_max = 5;
  double idf_phrase_min = 0.5;
  double idf_token_min = 0.3;
  double ner_sim_threshold = 0.80;
  double group_sim_threshold = 0.75;
  double conv_ratio_threshold = 3.0;
  int conv_min_count = 10;
  std::vector<std::string> ner_labels{"PERSON", "LOCATION", "QUANTITY", "TIME"};
  ConceptWeights weights;
  bool location_earlier_is_higher = true;
  int top_k = 10;
};

struct IntentConfig {
  int max_segment_len = 6;
  double boost_concepts = 0.2;
  double boost_questions = 0.3;
  double boost_summary = 0.2;
  double summary_ratio = 0.15;
  int summary_cap = 10;
  int max_intents = 5;
  bool question_rule_1 = true;
  bool question_rule_2 = true;
  bool question_rule_3 = true;
  bool question_rule_4 = true;
};

struct TaggerConfig {
  VectorMode mode = VectorMode::kTfidf;
  int top_m = 500;
  int k = 2;
  std::vector<std::string> sections;  // empty: whole documents
};

struct MetricsConfig {
  int min_shared_tokens = 1;
  int k = 2;
};

// Every tunable of the pipeline. Defaults are the documented values; a config
// file overrides any subset, section by section.
struct PipelineConfig {
  std::uint64_t seed = 42;
  int jobs = 1;
  ResourceConfig resources;
  CasualConfig casual;
  ConceptConfig concepts;
  IntentConfig intents;
  TaggerConfig tagger;
  MetricsConfig metrics;

  void validate() const {
    auto in01 = [](double v, const char* name, bool open_low = false) {
      if (!(v <= 1.0 && (open_low ? v > 0.0 : v >= 0.0)))
        throw ConfigError(std::string(name) + " must be in " + (open_low ? "(0,1]" : "[0,1]"));
    };
    auto positive = [](long v, const char* name) {
      if (v < 1) throw ConfigError(std::string(name) + " must be >= 1");
    };
    positive(jobs, "general.jobs");
    positive(casual.head_n, "casual.head_n");
    in01(casual.precision_target, "casual.precision_target", true);
    positive(casual.trees, "casual.trees");
    positive(casual.max_depth, "casual.max_depth");
    if (!(casual.validation_fraction > 0 && casual.validation_fraction < 1))
      throw ConfigError("casual.validation_fraction must be in (0,1)");
    if (concepts.ngram_max < 1 || concepts.ngram_max > 5)
      throw ConfigError("concepts.ngram_max must be in [1,5]");
    if (concepts.idf_phrase_min < 0 || concepts.idf_token_min < 0)
      throw ConfigError("concepts idf thresholds must be >= 0");
    in01(concepts.ner_sim_threshold, "concepts.ner_sim_threshold");
    in01(concepts.group_sim_threshold, "concepts.group_sim_threshold");
    if (!(concepts.conv_ratio_threshold > 0))
      throw ConfigError("concepts.conv_ratio_threshold must be > 0");
    if (concepts.conv_min_count < 0) throw ConfigError("concepts.conv_min_count must be >= 0");
    const auto& w = concepts.weights;
    for (double x : {w.frequency, w.pos, w.location, w.similarity})
      if (x < 0) throw ConfigError("concepts weights must be non-negative");
    if (std::abs(w.frequency + w.pos + w.location + w.similarity - 1.0) > 1e-9)
      throw ConfigError("concepts weights must sum to 1");
    positive(concepts.top_k, "concepts.top_k");
    positive(intents.max_segment_len, "intents.max_segment_len");
    for (double b : {intents.boost_concepts, intents.boost_questions, intents.boost_summary})
      if (b < 0) throw ConfigError("intents boosts must be non-negative");
    in01(intents.summary_ratio, "intents.summary_ratio", true);
    positive(intents.summary_cap, "intents.summary_cap");
    positive(intents.max_intents, "intents.max_intents");
    positive(tagger.top_m, "tagger.top_m");
    positive(tagger.k, "tagger.k");
    positive(metrics.min_shared_tokens, "metrics.min_shared_tokens");
    positive(metrics.k, "metrics.k");
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["general"] = {{"seed", seed}, {"jobs", jobs}};
    j["resources"] = {{"stopwords", resources.stopwords},
                      {"english_vocab", resources.english_vocab},
                      {"lemmas", resources.lemmas}};
    j["casual"] = {{"head_n", casual.head_n},
                   {"precision_target", casual.precision_target},
                   {"trees", casual.trees},
                   {"max_depth", casual.max_depth},
                   {"validation_fraction", casual.validation_fraction}};
    j["concepts"] = {{"ngram_max", concepts.ngram_max},
                     {"idf_phrase_min", concepts.idf_phrase_min},
                     {"idf_token_min", concepts.idf_token_min},
                     {"ner_sim_threshold", concepts.ner_sim_threshold},
                     {"group_sim_threshold", concepts.group_sim_threshold},
                     {"conv_ratio_threshold", concepts.conv_ratio_threshold},
                     {"conv_min_count", concepts.conv_min_count},
                     {"ner_labels", join(concepts.ner_labels, ",")},
                     {"weight_frequency", concepts.weights.frequency},
                     {"weight_pos", concepts.weights.pos},
                     {"weight_location", concepts.weights.location},
                     {"weight_similarity", concepts.weights.similarity},
                     {"location_earlier_is_higher", concepts.location_earlier_is_higher},
                     {"top_k", concepts.top_k}};
    j["intents"] = {{"max_segment_len", intents.max_segment_len},
                    {"boost_concepts", intents.boost_concepts},
                    {"boost_questions", intents.boost_questions},
                    {"boost_summary", intents.boost_summary},
                    {"summary_ratio", intents.summary_ratio},
                    {"summary_cap", intents.summary_cap},
                    {"max_intents", intents.max_intents},
                    {"question_rule_1", intents.question_rule_1},
                    {"question_rule_2", intents.question_rule_2},
                    {"question_rule_3", intents.question_rule_3},
                    {"question_rule_4", intents.question_rule_4}};
    j["tagger"] = {{"mode", to_string(tagger.mode)},
                   {"top_m", tagger.top_m},
                   {"k", tagger.k},
                   {"sections", join(tagger.sections, ",")}};
    j["metrics"] = {{"min_shared_tokens", metrics.min_shared_tokens}, {"k", metrics.k}};
    return j;
  }
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& raw) {
  std::istringstream in(raw);
  T v{};
  if constexpr (std::is_same_v<T, bool>) {
    const auto s = to_lower(trim(raw));
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected a boolean, got '" + raw + "'");
  } else {
    in >> v;
    if (in.fail() || !(in >> std::ws).eof())
      throw ConfigError(key + ": cannot parse '" + raw + "'");
    return v;
  }
}

inline std::vector<std::string> parse_list(const std::string& raw) {
  std::vector<std::string> out;
  for (auto& p : split(raw, ',')) {
    auto t = trim(p);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace detail

// Reads an INI file with sections general, resources, casual, concepts,
// intents, tagger, metrics. Unknown sections or keys are errors. Relative
// resource paths resolve against the config file's directory.
inline PipelineConfig load_config(const std::string& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  PipelineConfig c;
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p.empty() || std::filesystem::path(p).is_absolute()) return p;
    return (base / p).lexically_normal().string();
  };

  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty())
      throw ConfigError("config: key '" + section + "' outside a section");
    for (const auto& [key, node] : body) {
      const auto full = section + "." + key;
      const auto& raw = node.data();
      using detail::parse_value;
      bool known = true;
      if (section == "general") {
        if (key == "seed") c.seed = parse_value<std::uint64_t>(full, raw);
        else if (key == "jobs") c.jobs = parse_value<int>(full, raw);
        else known = false;
      } else if (section == "resources") {
        if (key == "stopwords") c.resources.stopwords = resolve(trim(raw));
        else if (key == "english_vocab") c.resources.english_vocab = resolve(trim(raw));
        else if (key == "lemmas") c.resources.lemmas = resolve(trim(raw));
        else known = false;
      } else if (section == "casual") {
        auto& s = c.casual;
        if (key == "head_n") s.head_n = parse_value<int>(full, raw);
        else if (key == "precision_target") s.precision_target = parse_value<double>(full, raw);
        else if (key == "trees") s.trees = parse_value<int>(full, raw);
        else if (key == "max_depth") s.max_depth = parse_value<int>(full, raw);
        else if (key == "validation_fraction") s.validation_fraction = parse_value<double>(full, raw);
        else known = false;
      } else if (section == "concepts") {
        auto& s = c.concepts;
        if (key == "ngram_max") s.ngram_max = parse_value<int>(full, raw);
        else if (key == "idf_phrase_min") s.idf_phrase_min = parse_value<double>(full, raw);
        else if (key == "idf_token_min") s.idf_token_min = parse_value<double>(full, raw);
        else if (key == "ner_sim_threshold") s.ner_sim_threshold = parse_value<double>(full, raw);
        else if (key == "group_sim_threshold") s.group_sim_threshold = parse_value<double>(full, raw);
        else if (key == "conv_ratio_threshold") s.conv_ratio_threshold = parse_value<double>(full, raw);
        else if (key == "conv_min_count") s.conv_min_count = parse_value<int>(full, raw);
        else if (key == "ner_labels") s.ner_labels = detail::parse_list(raw);
        else if (key == "weight_frequency") s.weights.frequency = parse_value<double>(full, raw);
        else if (key == "weight_pos") s.weights.pos = parse_value<double>(full, raw);
        else if (key == "weight_location") s.weights.location = parse_value<double>(full, raw);
        else if (key == "weight_similarity") s.weights.similarity = parse_value<double>(full, raw);
        else if (key == "location_earlier_is_higher") s.location_earlier_is_higher = parse_value<bool>(full, raw);
        else if (key == "top_k") s.top_k = parse_value<int>(full, raw);
        else known = false;
      } else if (section == "intents") {
        auto& s = c.intents;
        if (key == "max_segment_len") s.max_segment_len = parse_value<int>(full, raw);
        else if (key == "boost_concepts") s.boost_concepts = parse_value<double>(full, raw);
        else if (key == "boost_questions") s.boost_questions = parse_value<double>(full, raw);
        else if (key == "boost_summary") s.boost_summary = parse_value<double>(full, raw);
        else if (key == "summary_ratio") s.summary_ratio = parse_value<double>(full, raw);
        else if (key == "summary_cap") s.summary_cap = parse_value<int>(full, raw);
        else if (key == "max_intents") s.max_intents = parse_value<int>(full, raw);
        else if (key == "question_rule_1") s.question_rule_1 = parse_value<bool>(full, raw);
        else if (key == "question_rule_2") s.question_rule_2 = parse_value<bool>(full, raw);
        else if (key == "question_rule_3") s.question_rule_3 = parse_value<bool>(full, raw);
        else if (key == "question_rule_4") s.question_rule_4 = parse_value<bool>(full, raw);
        else known = false;
      } else if (section == "tagger") {
        auto& s = c.tagger;
        if (key == "mode") s.mode = parse_vector_mode(trim(raw));
        else if (key == "top_m") s.top_m = parse_value<int>(full, raw);
        else if (key == "k") s.k = parse_value<int>(full, raw);
        else if (key == "sections") s.sections = detail::parse_list(raw);
        else known = false;
      } else if (section == "metrics") {
        if (key == "min_shared_tokens") c.metrics.min_shared_tokens = parse_value<int>(full, raw);
        else if (key == "k") c.metrics.k = parse_value<int>(full, raw);
        else known = false;
      } else {
        throw ConfigError("config: unknown section [" + section + "]");
      }
      if (!known) throw ConfigError("config: unknown key " + full);
    }
  }
  c.validate();
  return c;
}

}  // namespace talkmine
