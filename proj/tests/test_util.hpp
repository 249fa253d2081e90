#ifndef COPYOPT_TEST_UTIL_HPP
#define COPYOPT_TEST_UTIL_HPP

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "copyopt/copyopt.hpp"

namespace testutil {

inline std::filesystem::path source_dir() { return COPYOPT_SOURCE_DIR; }
inline std::filesystem::path data_dir() { return source_dir() / "data"; }
inline std::filesystem::path golden_dir() { return source_dir() / "tests" / "golden"; }

// Random marketing-ish text: words, CTA fragments, numbers, punctuation and
// a few multi-byte code points.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_words = 30) {
  static const std::vector<std::string> words{
      "buy",   "now",    "shop",  "only",   "left",    "today", "deal",  "great", "awful", "fresh",
      "add",   "to",     "cart",  "sale",   "limited-edition", "free",  "shipping", "the", "a",
      "of",    "coffee", "soft",  "café",   "naïve",   "10",    "$4.99", "!!",    "—",     "...",
      "Order", "TODAY!", "(new)", "\"wow\"", "x",      "syzygy", "rhythm"};
  std::uniform_int_distribution<std::size_t> len(0, max_words);
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> sep(0, 9);
  std::string out;
  const std::size_t n = len(rng);
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      const int s = sep(rng);
      out += s == 0 ? ". " : s == 1 ? "\t" : s == 2 ? "\xC2\xA0" : " ";
    }
    out += words[pick(rng)];
  }
  return out;
}

inline copyopt::FeatureConfig small_feature_config() {
  copyopt::FeatureConfig cfg;
  cfg.cta_phrases = {"buy now", "shop now", "add to cart", "order today"};
  cfg.keyword_weights = {{"limited-edition", 2.0}, {"only", 1.0}, {"left", 1.5}, {"free shipping", 1.5}};
  cfg.sentiment_lexicon = {{"great", 0.8}, {"awful", -0.6}, {"fresh", 0.5}, {"soft", 0.3}};
  return cfg;
}

// Random unit vector with nonnegative components.
inline copyopt::Embedding random_nonneg_unit(std::mt19937_64& rng, std::size_t dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  copyopt::Embedding v(dim);
  double n2 = 0.0;
  for (auto& x : v) {
    x = u(rng) < 0.3 ? 0.0 : u(rng);
    n2 += x * x;
  }
  if (n2 == 0.0) {
    v[0] = 1.0;
    return v;
  }
  for (auto& x : v) x /= std::sqrt(n2);
  return v;
}

inline copyopt::CopyCandidate candidate_with(std::string id, copyopt::Embedding e, copyopt::FeatureVector f = {}) {
  copyopt::CopyCandidate c;
  c.id = std::move(id);
  c.product_id = "P";
  c.text = c.id;
  c.embedding = std::move(e);
  c.features = std::move(f);
  return c;
}

inline std::string slurp(const std::filesystem::path& p) { return copyopt::read_text_file(p); }

}  // namespace testutil

#endif  // COPYOPT_TEST_UTIL_HPP
