#ifndef COPYOPT_CONFIG_HPP
#define COPYOPT_CONFIG_HPP

// Strict JSON configuration: every numeric field is range-checked, unknown
// keys are rejected, and all problems are reported together.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/error.hpp"
#include "copyopt/optimizer.hpp"
#include "copyopt/review.hpp"
#include "copyopt/text_features.hpp"
#include "json.hpp"

namespace copyopt {

struct RetrievalConfig {
  std::size_t k = 5;
  double relevance_threshold = 0.10;
  double dedup_threshold = kDefaultDedupThreshold;
};

struct OptimizerConfig {
  double lambda = 0.6;
  std::size_t top_k = 10;
  std::size_t filter_m = 20;
  TrainHyper train;
};

enum class FinalSort { Reward, Business };

struct BusinessConfig {
  double w_rel = 0.5;
  double w_margin = 0.3;
  double w_urg = 0.2;
  long long stock_cap = 100;
  FinalSort final_sort = FinalSort::Reward;
};

struct HttpGeneratorConfig {
  std::string url;
  int timeout_ms = 5000;
  int retries = 2;
};

struct GenerationConfig {
  std::size_t n = 48;
  std::size_t max_n = 64;
  std::string persona = "everyday shopper";
  std::string query;
  // Seed for generation in experiments (sweeps, category runs), kept apart
  // from the session seed so that changing one leaves the other fixed.
  std::uint64_t seed = 42;
  std::string generator = "template";  // template | http
  HttpGeneratorConfig http;
  // Templates per category; Other falls back to the "default" list.
  std::map<Category, std::vector<std::string>> templates;
  std::vector<std::string> default_templates;
};

enum class ImpressionPolicy { Uniform, RankWeighted };

struct SimulateConfig {
  std::size_t n_sessions = 100000;
  std::uint64_t seed = 42;
  ImpressionPolicy impression_policy = ImpressionPolicy::Uniform;
  std::size_t threads = 1;
};

struct CategoryConfig {
  double lambda_default = 0.6;
  std::filesystem::path calibration;
};

struct Config {
  FeatureConfig feature;
  RetrievalConfig retrieval;
  OptimizerConfig optimizer;
  BusinessConfig business;
  ReviewRules review;
  GenerationConfig generation;
  SimulateConfig simulate;
  std::map<Category, CategoryConfig> categories;

  // Recommended lambda per category, falling back to optimizer.lambda.
  double lambda_for(Category c) const {
    auto it = categories.find(c);
    return it == categories.end() ? optimizer.lambda : it->second.lambda_default;
  }

  const std::vector<std::string>& templates_for(Category c) const {
    auto it = generation.templates.find(c);
    return it == generation.templates.end() ? generation.default_templates : it->second;
  }
};

// Lambda defaults from the recommended per-category bands (midpoints).
inline std::map<Category, CategoryConfig> default_categories() {
  return {{Category::FMCG, {0.75, {}}}, {Category::Apparel, {0.55, {}}}, {Category::Electronics, {0.4, {}}}};
}

inline Config default_config() {
  Config cfg;
  cfg.categories = default_categories();
  return cfg;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct WeightedLine {
  std::string text;
  std::optional<double> weight;
};

// One entry per line with an optional tab-separated weight. Blank lines and
// lines starting with '#' are skipped.
inline std::vector<WeightedLine> parse_weighted_lines(const std::string& content, const std::string& source) {
  std::vector<WeightedLine> out;
  std::istringstream in(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    WeightedLine entry;
    const auto tab = line.find('\t');
    entry.text = detail::ascii_lower(line.substr(0, tab));
    if (tab != std::string::npos) {
      const std::string w = line.substr(tab + 1);
      try {
        std::size_t used = 0;
        entry.weight = std::stod(w, &used);
        if (used != w.size()) throw std::invalid_argument(w);
      } catch (const std::exception&) {
        throw Error(Errc::parse_error, source + ":" + std::to_string(lineno) + ": bad weight '" + w + "'");
      }
    }
    if (!entry.text.empty()) out.push_back(std::move(entry));
  }
  return out;
}

inline std::vector<std::string> load_template_file(const std::filesystem::path& path) {
  std::vector<std::string> out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(line);
  }
  return out;
}

namespace detail {

using nlohmann::json;

// Walks one JSON object, tracking consumed keys so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json* node, std::string path, std::vector<std::string>& problems)
      : node_(node), path_(std::move(path)), problems_(problems) {
    if (node_ != nullptr && !node_->is_object()) {
      problems_.push_back(path_ + ": expected an object");
      node_ = nullptr;
    }
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    if (node_ == nullptr) return nullptr;
    auto it = node_->find(key);
    return it == node_->end() ? nullptr : &*it;
  }

  Section child(const std::string& key) { return Section(get(key), name(key), problems_); }

  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void problem(const std::string& key, const std::string& what) { problems_.push_back(name(key) + ": " + what); }

  void real(const std::string& key, double& out, double lo, double hi, bool lo_open = false) {
    const json* v = get(key);
    if (v == nullptr) return;
    if (!v->is_number()) return problem(key, "expected a number");
    const double x = v->get<double>();
    const bool ok = (lo_open ? x > lo : x >= lo) && x <= hi;
    if (!ok) {
      return problem(key, "value " + v->dump() + " outside " + (lo_open ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "]");
    }
    out = x;
  }

  template <typename Int>
  void integer(const std::string& key, Int& out, long long lo, long long hi) {
    const json* v = get(key);
    if (v == nullptr) return;
    if (!v->is_number_integer()) return problem(key, "expected an integer");
    if (v->is_number_unsigned() && v->get<std::uint64_t>() > static_cast<std::uint64_t>(hi)) {
      return problem(key, "value " + v->dump() + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    const long long x = v->get<long long>();
    if (x < lo || x > hi) {
      return problem(key, "value " + v->dump() + " outside [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    out = static_cast<Int>(x);
  }

  void u64(const std::string& key, std::uint64_t& out) {
    const json* v = get(key);
    if (v == nullptr) return;
    if (!v->is_number_unsigned()) return problem(key, "expected a non-negative integer");
    out = v->get<std::uint64_t>();
  }

  void string(const std::string& key, std::string& out) {
    const json* v = get(key);
    if (v == nullptr) return;
    if (!v->is_string()) return problem(key, "expected a string");
    out = v->get<std::string>();
  }

  void finish() {
    if (node_ == nullptr) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.contains(key)) problems_.push_back(name(key) + ": unknown key");
    }
  }

  static std::string fmt(double x) {
    std::ostringstream ss;
    ss << x;
    return ss.str();
  }

 private:
  const json* node_;
  std::string path_;
  std::vector<std::string>& problems_;
  std::set<std::string> seen_;
};

inline std::size_t line_of(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

inline json parse_json_document(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::parse_error, source + ":" + std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
}

inline std::optional<Category> category_key(const std::string& key) {
  try {
    return parse_category(key);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

// Parses review rules (JSON) into `rules`, appending problems.
inline void parse_review_rules(const nlohmann::json& doc, ReviewRules& rules, std::vector<std::string>& problems,
                               const std::string& source) {
  detail::Section s(&doc, source, problems);
  if (const auto* v = s.get("forbidden_words")) {
    if (!v->is_array()) {
      s.problem("forbidden_words", "expected an array of strings");
    } else {
      for (const auto& w : *v) {
        if (w.is_string()) rules.forbidden_words.push_back(detail::ascii_lower(w.get<std::string>()));
        else s.problem("forbidden_words", "expected strings");
      }
    }
  }
  s.integer("max_length", rules.max_length, 0, 1'000'000);
  if (const auto* v = s.get("required_patterns")) {
    if (!v->is_object()) {
      s.problem("required_patterns", "expected an object keyed by category");
    } else {
      for (const auto& [key, sets] : v->items()) {
        auto cat = detail::category_key(key);
        if (!cat) {
          s.problem("required_patterns." + key, "unknown category");
          continue;
        }
        if (!sets.is_array()) {
          s.problem("required_patterns." + key, "expected an array of phrase sets");
          continue;
        }
        for (const auto& set : sets) {
          std::vector<std::string> alternatives;
          if (set.is_string()) alternatives.push_back(detail::ascii_lower(set.get<std::string>()));
          else if (set.is_array()) {
            for (const auto& p : set) {
              if (p.is_string()) alternatives.push_back(detail::ascii_lower(p.get<std::string>()));
            }
          }
          if (alternatives.empty()) s.problem("required_patterns." + key, "empty phrase set");
          else rules.required_patterns[*cat].push_back(std::move(alternatives));
        }
      }
    }
  }
  if (const auto* v = s.get("brand_tone")) {
    if (!v->is_object()) {
      s.problem("brand_tone", "expected an object keyed by category");
    } else {
      for (const auto& [key, range] : v->items()) {
        auto cat = detail::category_key(key);
        if (!cat) {
          s.problem("brand_tone." + key, "unknown category");
          continue;
        }
        if (!range.is_array() || range.size() != 2 || !range[0].is_number() || !range[1].is_number()) {
          s.problem("brand_tone." + key, "expected [lo, hi]");
          continue;
        }
        const ToneInterval t{range[0].get<double>(), range[1].get<double>()};
        if (!(t.lo >= -1.0 && t.lo <= t.hi && t.hi <= 1.0)) {
          s.problem("brand_tone." + key, "interval must satisfy -1 <= lo <= hi <= 1");
          continue;
        }
        rules.brand_tone[*cat] = t;
      }
    }
  }
  s.finish();
}

inline ReviewRules load_review_rules(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto doc = detail::parse_json_document(text, path.string());
  ReviewRules rules;
  std::vector<std::string> problems;
  parse_review_rules(doc, rules, problems, path.filename().string());
  if (!problems.empty()) throw ValidationError(problems);
  return rules;
}

// Parses a configuration document. Relative file references resolve against
// base_dir.
inline Config parse_config(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  Config cfg = default_config();
  std::vector<std::string> problems;
  detail::Section root(&doc, "", problems);

  auto resolve = [&](const std::string& p) { return std::filesystem::path(p).is_absolute() ? std::filesystem::path(p) : base_dir / p; };
  auto load_lines = [&](const std::string& key, const std::string& rel) -> std::vector<WeightedLine> {
    try {
      const auto path = resolve(rel);
      return parse_weighted_lines(read_text_file(path), path.string());
    } catch (const Error& e) {
      problems.push_back(key + ": " + e.what());
      return {};
    }
  };

  {
    auto s = root.child("feature");
    s.integer("embed_dim", cfg.feature.embed_dim, 2, 1 << 20);
    s.integer("ngram_size", cfg.feature.ngram_size, 1, 64);
    if (const auto* v = s.get("cta_phrases")) {
      if (!v->is_array()) s.problem("cta_phrases", "expected an array of strings");
      else
        for (const auto& p : *v) {
          if (p.is_string()) cfg.feature.cta_phrases.push_back(detail::ascii_lower(p.get<std::string>()));
          else s.problem("cta_phrases", "expected strings");
        }
    }
    std::string file;
    s.string("cta_phrases_file", file);
    if (!file.empty()) {
      for (auto& l : load_lines("feature.cta_phrases_file", file)) cfg.feature.cta_phrases.push_back(l.text);
    }
    auto weight_map = [&](const std::string& key, std::map<std::string, double>& out, bool lexicon) {
      const auto* v = s.get(key);
      if (v == nullptr) return;
      if (!v->is_object()) return s.problem(key, "expected an object of phrase -> number");
      for (const auto& [phrase, w] : v->items()) {
        if (!w.is_number()) {
          s.problem(key + "." + phrase, "expected a number");
          continue;
        }
        double x = w.get<double>();
        if (lexicon) x = std::clamp(x, -1.0, 1.0);
        else if (x < 0.0) {
          s.problem(key + "." + phrase, "weight must be >= 0");
          continue;
        }
        out[detail::ascii_lower(phrase)] = x;
      }
    };
    weight_map("keyword_weights", cfg.feature.keyword_weights, false);
    weight_map("sentiment_lexicon", cfg.feature.sentiment_lexicon, true);
    file.clear();
    s.string("keyword_weights_file", file);
    if (!file.empty()) {
      for (auto& l : load_lines("feature.keyword_weights_file", file)) {
        const double w = l.weight.value_or(1.0);
        if (w < 0.0) problems.push_back("feature.keyword_weights_file: weight for '" + l.text + "' must be >= 0");
        else cfg.feature.keyword_weights[l.text] = w;
      }
    }
    file.clear();
    s.string("sentiment_lexicon_file", file);
    if (!file.empty()) {
      for (auto& l : load_lines("feature.sentiment_lexicon_file", file)) {
        cfg.feature.sentiment_lexicon[l.text] = std::clamp(l.weight.value_or(0.0), -1.0, 1.0);
      }
    }
    if (const auto* v = s.get("extra_features")) {
      const auto& known = extra_feature_names();
      if (!v->is_array()) s.problem("extra_features", "expected an array of names");
      else
        for (const auto& n : *v) {
          if (!n.is_string() || std::find(known.begin(), known.end(), n.get<std::string>()) == known.end()) {
            s.problem("extra_features", "unknown extra feature " + n.dump());
          } else {
            cfg.feature.extra_features.push_back(n.get<std::string>());
          }
        }
    }
    s.finish();
  }

  {
    auto s = root.child("retrieval");
    s.integer("k", cfg.retrieval.k, 1, 1'000'000);
    s.real("relevance_threshold", cfg.retrieval.relevance_threshold, 0.0, 1.0);
    s.real("dedup_threshold", cfg.retrieval.dedup_threshold, 0.0, 1.0);
    s.finish();
  }

  {
    auto s = root.child("optimizer");
    s.real("lambda", cfg.optimizer.lambda, 0.0, 1.0);
    s.integer("top_k", cfg.optimizer.top_k, 1, 1'000'000);
    s.integer("filter_m", cfg.optimizer.filter_m, 2, 1'000'000);
    auto t = s.child("train");
    t.real("learning_rate", cfg.optimizer.train.learning_rate, 0.0, 1e6, true);
    t.integer("epochs", cfg.optimizer.train.epochs, 1, 100'000'000);
    t.real("l2", cfg.optimizer.train.l2, 0.0, 1e6);
    t.real("tolerance", cfg.optimizer.train.tolerance, 0.0, 1.0, true);
    t.finish();
    s.finish();
  }

  {
    auto s = root.child("business");
    s.real("w_rel", cfg.business.w_rel, 0.0, 1e6);
    s.real("w_margin", cfg.business.w_margin, 0.0, 1e6);
    s.real("w_urg", cfg.business.w_urg, 0.0, 1e6);
    s.integer("stock_cap", cfg.business.stock_cap, 1, 1'000'000'000);
    std::string sort = "reward";
    s.string("final_sort", sort);
    if (sort == "reward") cfg.business.final_sort = FinalSort::Reward;
    else if (sort == "business") cfg.business.final_sort = FinalSort::Business;
    else s.problem("final_sort", "expected 'reward' or 'business'");
    if (cfg.business.w_rel == 0.0 && cfg.business.w_margin == 0.0 && cfg.business.w_urg == 0.0) {
      s.problem("w_*", "business weights must not all be zero");
    }
    s.finish();
  }

  {
    auto s = root.child("review");
    std::string rules_path;
    s.string("rules", rules_path);
    if (!rules_path.empty()) {
      try {
        const auto path = resolve(rules_path);
        const auto rdoc = detail::parse_json_document(read_text_file(path), path.string());
        parse_review_rules(rdoc, cfg.review, problems, "review.rules");
      } catch (const Error& e) {
        problems.push_back(std::string("review.rules: ") + e.what());
      }
    }
    std::string words;
    s.string("forbidden_words_file", words);
    if (!words.empty()) {
      for (auto& l : load_lines("review.forbidden_words_file", words)) cfg.review.forbidden_words.push_back(l.text);
    }
    s.finish();
  }

  {
    auto s = root.child("generation");
    s.integer("max_n", cfg.generation.max_n, 1, 1'000'000);
    s.integer("n", cfg.generation.n, 1, 1'000'000);
    if (cfg.generation.n > cfg.generation.max_n) s.problem("n", "exceeds max_n");
    s.string("persona", cfg.generation.persona);
    s.string("query", cfg.generation.query);
    s.u64("seed", cfg.generation.seed);
    s.string("generator", cfg.generation.generator);
    if (cfg.generation.generator != "template" && cfg.generation.generator != "http") {
      s.problem("generator", "expected 'template' or 'http'");
    }
    auto h = s.child("http");
    h.string("url", cfg.generation.http.url);
    h.integer("timeout_ms", cfg.generation.http.timeout_ms, 1, 3'600'000);
    h.integer("retries", cfg.generation.http.retries, 0, 100);
    h.finish();
    if (cfg.generation.generator == "http" && cfg.generation.http.url.empty()) {
      s.problem("http.url", "required when generator is 'http'");
    }
    if (const auto* v = s.get("templates")) {
      if (!v->is_object()) {
        s.problem("templates", "expected an object of category -> file");
      } else {
        for (const auto& [key, file] : v->items()) {
          if (!file.is_string()) {
            s.problem("templates." + key, "expected a file path");
            continue;
          }
          std::vector<std::string> lines;
          try {
            lines = load_template_file(resolve(file.get<std::string>()));
          } catch (const Error& e) {
            s.problem("templates." + key, e.what());
            continue;
          }
          if (key == "default") cfg.generation.default_templates = std::move(lines);
          else if (auto cat = detail::category_key(key)) cfg.generation.templates[*cat] = std::move(lines);
          else s.problem("templates." + key, "unknown category");
        }
      }
    }
    s.finish();
  }

  {
    auto s = root.child("simulate");
    s.integer("n_sessions", cfg.simulate.n_sessions, 1, 1'000'000'000);
    s.u64("seed", cfg.simulate.seed);
    s.integer("threads", cfg.simulate.threads, 1, 1024);
    std::string policy = "uniform";
    s.string("impression_policy", policy);
    if (policy == "uniform") cfg.simulate.impression_policy = ImpressionPolicy::Uniform;
    else if (policy == "rank_weighted") cfg.simulate.impression_policy = ImpressionPolicy::RankWeighted;
    else s.problem("impression_policy", "expected 'uniform' or 'rank_weighted'");
    std::string calibration;
    s.string("calibration", calibration);
    if (!calibration.empty()) {
      for (auto& [cat, cc] : cfg.categories) cc.calibration = resolve(calibration);
    }
    s.finish();
  }

  if (const auto* v = root.get("categories")) {
    if (!v->is_object()) {
      problems.push_back("categories: expected an object keyed by category");
    } else {
      for (const auto& [key, body] : v->items()) {
        auto cat = detail::category_key(key);
        if (!cat) {
          problems.push_back("categories." + key + ": unknown category");
          continue;
        }
        auto& cc = cfg.categories[*cat];
        detail::Section s(&body, "categories." + key, problems);
        s.real("lambda_default", cc.lambda_default, 0.0, 1.0);
        std::string calibration;
        s.string("calibration", calibration);
        if (!calibration.empty()) cc.calibration = resolve(calibration);
        s.finish();
      }
    }
  }

  root.finish();
  if (!problems.empty()) throw ValidationError(problems);
  return cfg;
}

inline Config load_config(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const auto doc = detail::parse_json_document(text, path.string());
  return parse_config(doc, path.parent_path());
}

}  // namespace copyopt

#endif  // COPYOPT_CONFIG_HPP
