#ifndef COPYOPT_CANDIDATE_HPP
#define COPYOPT_CANDIDATE_HPP

#include <algorithm>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

#include "copyopt/error.hpp"
#include "copyopt/text_features.hpp"

namespace copyopt {

enum class Category { FMCG, Apparel, Electronics, Other };

inline std::string_view category_name(Category c) {
  switch (c) {
    case Category::FMCG: return "fmcg";
    case Category::Apparel: return "apparel";
    case Category::Electronics: return "electronics";
    case Category::Other: return "other";
  }
  return "other";
}

inline Category parse_category(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "fmcg") return Category::FMCG;
  if (lower == "apparel") return Category::Apparel;
  if (lower == "electronics") return Category::Electronics;
  if (lower == "other") return Category::Other;
  throw Error(Errc::unknown_category, std::string(name));
}

// One generated copy text with its derived signals. The score fields stay
// empty until the optimizer fills them.
struct CopyCandidate {
  std::string id;
  std::string product_id;
  std::string text;
  Embedding embedding;
  FeatureVector features;
  std::optional<double> diversity_contribution;
  std::optional<double> p_conv;
  std::optional<double> reward;
};

inline CopyCandidate make_candidate(std::string id, std::string product_id, std::string text,
                                    const FeatureConfig& cfg) {
  CopyCandidate c;
  c.id = std::move(id);
  c.product_id = std::move(product_id);
  c.text = std::move(text);
  c.embedding = embed(c.text, cfg);
  c.features = extract_features(c.text, cfg);
  return c;
}

}  // namespace copyopt

#endif  // COPYOPT_CANDIDATE_HPP
