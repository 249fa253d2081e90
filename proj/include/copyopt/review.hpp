#ifndef COPYOPT_REVIEW_HPP
#define COPYOPT_REVIEW_HPP

#include <algorithm>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/text_features.hpp"

namespace copyopt {

struct ToneInterval {
  double lo = -1.0;
  double hi = 1.0;
};

struct ReviewRules {
  std::vector<std::string> forbidden_words;
  std::size_t max_length = 280;  // code points
  // Per category: each inner list is a set of alternatives, at least one of
  // which must appear.
  std::map<Category, std::vector<std::vector<std::string>>> required_patterns;
  std::map<Category, ToneInterval> brand_tone;
};

struct Violation {
  std::string rule;
  std::string reason;

  friend bool operator==(const Violation&, const Violation&) = default;
};

struct ReviewVerdict {
  bool passed = true;
  std::vector<Violation> violations;
};

inline std::size_t count_code_points(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

inline bool contains_phrase(const std::vector<std::string>& tokens, const std::string& phrase) {
  const std::vector<std::vector<std::string>> one{tokenize(phrase)};
  bool found = false;
  detail::match_phrases(tokens, one, [&](std::size_t, std::size_t) { found = true; });
  return found;
}

// Evaluates every rule and reports each broken one; never stops early.
// Tone is checked against the candidate's extracted sentiment.
inline ReviewVerdict review(const CopyCandidate& candidate, const ReviewRules& rules, Category category) {
  ReviewVerdict verdict;
  const auto tokens = tokenize(candidate.text);

  for (const auto& word : rules.forbidden_words) {
    if (contains_phrase(tokens, word)) {
      verdict.violations.push_back({"forbidden_word", "contains forbidden word '" + word + "'"});
    }
  }

  const std::size_t length = count_code_points(candidate.text);
  if (rules.max_length > 0 && length > rules.max_length) {
    verdict.violations.push_back({"max_length", "length " + std::to_string(length) + " exceeds " +
                                                    std::to_string(rules.max_length)});
  }

  if (auto it = rules.required_patterns.find(category); it != rules.required_patterns.end()) {
    for (const auto& alternatives : it->second) {
      const bool any = std::any_of(alternatives.begin(), alternatives.end(),
                                   [&](const std::string& p) { return contains_phrase(tokens, p); });
      if (!any) {
        std::string list;
        for (const auto& p : alternatives) list += (list.empty() ? "" : ", ") + p;
        verdict.violations.push_back({"required_pattern", "missing one of [" + list + "]"});
      }
    }
  }

  if (auto it = rules.brand_tone.find(category); it != rules.brand_tone.end()) {
    const double s = candidate.features.sentiment;
    if (s < it->second.lo || s > it->second.hi) {
      verdict.violations.push_back({"brand_tone", "sentiment " + std::to_string(s) + " outside [" +
                                                      std::to_string(it->second.lo) + ", " +
                                                      std::to_string(it->second.hi) + "]"});
    }
  }

  verdict.passed = verdict.violations.empty();
  return verdict;
}

}  // namespace copyopt

#endif  // COPYOPT_REVIEW_HPP
