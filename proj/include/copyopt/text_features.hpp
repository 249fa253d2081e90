#ifndef COPYOPT_TEXT_FEATURES_HPP
#define COPYOPT_TEXT_FEATURES_HPP

// Deterministic text signals: hashed n-gram embeddings, lexicon sentiment,
// Flesch reading ease, CTA density and keyword strength.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "copyopt/error.hpp"

namespace copyopt {

using Embedding = std::vector<double>;

struct FeatureConfig {
  std::size_t embed_dim = 256;
  std::size_t ngram_size = 3;
  std::vector<std::string> cta_phrases;
  std::map<std::string, double> keyword_weights;
  std::map<std::string, double> sentiment_lexicon;
  // Optional extra extractors by name, see extra_feature_names().
  std::vector<std::string> extra_features;
};

struct FeatureVector {
  double keyword_strength = 0.0;
  double cta_density = 0.0;
  double sentiment = 0.0;
  double readability = 0.0;
  std::map<std::string, double> extra;

  // Fixed serialization order: declared fields, then extra keys sorted.
  std::vector<std::pair<std::string, double>> named() const {
    std::vector<std::pair<std::string, double>> out{{"keyword_strength", keyword_strength},
                                                    {"cta_density", cta_density},
                                                    {"sentiment", sentiment},
                                                    {"readability", readability}};
    for (const auto& [name, value] : extra) out.emplace_back(name, value);
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (auto& [name, value] : named()) out.push_back(name);
    return out;
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// FNV-1a, 64-bit. Published constants so alternate implementations can
// reproduce embeddings and arm assignments bit-exactly.
inline constexpr std::uint64_t kFnvOffset = 14695981039346656037ULL;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = kFnvOffset) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= kFnvPrime;
  }
  return hash;
}

namespace detail {

// Decodes one UTF-8 code point starting at pos; invalid bytes decode as
// themselves so tokenization never fails.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    len = 1;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    int c1 = cont(1);
    if (c1 >= 0) {
      len = 2;
      return (char32_t(b0 & 0x1F) << 6) | char32_t(c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      len = 3;
      return (char32_t(b0 & 0x0F) << 12) | (char32_t(c1) << 6) | char32_t(c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      len = 4;
      return (char32_t(b0 & 0x07) << 18) | (char32_t(c1) << 12) | (char32_t(c2) << 6) |
             char32_t(c3);
    }
  }
  len = 1;
  return b0;
}

inline bool is_unicode_space(char32_t c) {
  switch (c) {
    case U' ': case U'\t': case U'\n': case U'\v': case U'\f': case U'\r':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

inline bool is_unicode_punct(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  return (c >= 0xA1 && c <= 0xBF && c != 0xAA && c != 0xB5 && c != 0xBA) || c == 0xD7 ||
         c == 0xF7 || (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x20A0 && c <= 0x20CF) || (c >= 0x3001 && c <= 0x303F) ||
         (c >= 0xFF01 && c <= 0xFF0F);
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& ch : out) {
    if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
  }
  return out;
}

// Greedy left-to-right non-overlapping phrase matching over a token stream.
// At each position the longest matching phrase wins. Calls on_match(pos,
// phrase_index) and returns the number of covered tokens.
template <typename OnMatch>
std::size_t match_phrases(const std::vector<std::string>& tokens,
                          const std::vector<std::vector<std::string>>& phrases, OnMatch&& on_match) {
  std::size_t covered = 0;
  std::size_t i = 0;
  while (i < tokens.size()) {
    std::size_t best_len = 0;
    std::size_t best = 0;
    for (std::size_t p = 0; p < phrases.size(); ++p) {
      const auto& ph = phrases[p];
      if (ph.empty() || ph.size() <= best_len || i + ph.size() > tokens.size()) continue;
      if (std::equal(ph.begin(), ph.end(), tokens.begin() + static_cast<std::ptrdiff_t>(i))) {
        best_len = ph.size();
        best = p;
      }
    }
    if (best_len > 0) {
      on_match(i, best);
      covered += best_len;
      i += best_len;
    } else {
      ++i;
    }
  }
  return covered;
}

}  // namespace detail

// Splits on Unicode whitespace, strips punctuation from token edges and
// lowercases ASCII letters. Tokens that are pure punctuation vanish.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t len = 0;
    while (pos < text.size() && detail::is_unicode_space(detail::decode_utf8(text, pos, len))) pos += len;
    const std::size_t start = pos;
    while (pos < text.size() && !detail::is_unicode_space(detail::decode_utf8(text, pos, len))) pos += len;
    std::size_t lo = start, hi = pos;
    while (lo < hi && detail::is_unicode_punct(detail::decode_utf8(text, lo, len))) lo += len;
    // Walk back to the last code point boundary.
    while (lo < hi) {
      std::size_t back = hi - 1;
      while (back > lo && (static_cast<unsigned char>(text[back]) & 0xC0) == 0x80) --back;
      if (!detail::is_unicode_punct(detail::decode_utf8(text, back, len))) break;
      hi = back;
    }
    if (lo < hi) tokens.push_back(detail::ascii_lower(text.substr(lo, hi - lo)));
  }
  return tokens;
}

inline std::vector<std::vector<std::string>> tokenize_phrases(const std::vector<std::string>& phrases) {
  std::vector<std::vector<std::string>> out;
  out.reserve(phrases.size());
  for (const auto& p : phrases) out.push_back(tokenize(p));
  return out;
}

// Hashed character n-gram counts over the space-joined token stream, L2
// normalized. Bucket = FNV-1a-64(ngram bytes) mod embed_dim. A stream shorter
// than the n-gram size contributes itself as a single gram.
inline Embedding embed(std::string_view text, const FeatureConfig& cfg) {
  if (cfg.embed_dim < 2) throw Error(Errc::out_of_range, "embed_dim must be >= 2");
  if (cfg.ngram_size < 1) throw Error(Errc::out_of_range, "ngram_size must be >= 1");
  Embedding v(cfg.embed_dim, 0.0);
  const auto tokens = tokenize(text);
  if (tokens.empty()) return v;
  std::string joined;
  for (const auto& t : tokens) {
    if (!joined.empty()) joined += ' ';
    joined += t;
  }
  const std::string_view sv(joined);
  const std::size_t n = cfg.ngram_size;
  if (sv.size() <= n) {
    v[fnv1a64(sv) % cfg.embed_dim] += 1.0;
  } else {
    for (std::size_t i = 0; i + n <= sv.size(); ++i) v[fnv1a64(sv.substr(i, n)) % cfg.embed_dim] += 1.0;
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  const double norm = std::sqrt(norm2);
  for (double& x : v) x /= norm;
  return v;
}

inline double sentiment_polarity(const std::vector<std::string>& tokens, const FeatureConfig& cfg) {
  double sum = 0.0;
  std::size_t hits = 0;
  for (const auto& t : tokens) {
    auto it = cfg.sentiment_lexicon.find(t);
    if (it == cfg.sentiment_lexicon.end()) continue;
    sum += std::clamp(it->second, -1.0, 1.0);
    ++hits;
  }
  if (hits == 0) return 0.0;
  return std::clamp(sum / static_cast<double>(hits), -1.0, 1.0);
}

inline double sentiment_polarity(std::string_view text, const FeatureConfig& cfg) {
  return sentiment_polarity(tokenize(text), cfg);
}

// Maximal runs of vowel letters (aeiouy), at least one per word.
inline std::size_t count_syllables(std::string_view word) {
  std::size_t groups = 0;
  bool in_group = false;
  for (char ch : word) {
    const char c = (ch >= 'A' && ch <= 'Z') ? static_cast<char>(ch - 'A' + 'a') : ch;
    const bool vowel = c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
    if (vowel && !in_group) ++groups;
    in_group = vowel;
  }
  return std::max<std::size_t>(groups, 1);
}

// A sentence ends at a run of . ! ? that is followed by whitespace or the end
// of text, so "4.99" does not split a sentence. At least one sentence.
inline std::size_t count_sentences(std::string_view text) {
  std::size_t sentences = 0;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      std::size_t j = i;
      while (j < text.size() && (text[j] == '.' || text[j] == '!' || text[j] == '?')) ++j;
      std::size_t len = 0;
      if (j == text.size() || detail::is_unicode_space(detail::decode_utf8(text, j, len))) ++sentences;
      i = j;
    } else {
      ++i;
    }
  }
  return std::max<std::size_t>(sentences, 1);
}

// Flesch Reading Ease clamped to [0, 100]; 0 for text with no words.
inline double readability(std::string_view text) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return 0.0;
  std::size_t syllables = 0;
  for (const auto& t : tokens) syllables += count_syllables(t);
  const double words = static_cast<double>(tokens.size());
  const double sentences = static_cast<double>(count_sentences(text));
  const double score = 206.835 - 1.015 * (words / sentences) - 84.6 * (static_cast<double>(syllables) / words);
  return std::clamp(score, 0.0, 100.0);
}

inline double cta_density(const std::vector<std::string>& tokens, const FeatureConfig& cfg) {
  if (tokens.empty()) return 0.0;
  const auto phrases = tokenize_phrases(cfg.cta_phrases);
  const std::size_t covered = detail::match_phrases(tokens, phrases, [](std::size_t, std::size_t) {});
  return static_cast<double>(covered) / static_cast<double>(tokens.size());
}

inline double cta_density(std::string_view text, const FeatureConfig& cfg) {
  return cta_density(tokenize(text), cfg);
}

// Sum of weight x occurrences per keyword phrase, over max(1, token count).
// Occurrences are counted independently for each phrase.
inline double keyword_strength(const std::vector<std::string>& tokens, const FeatureConfig& cfg) {
  double total = 0.0;
  for (const auto& [phrase, weight] : cfg.keyword_weights) {
    const std::vector<std::vector<std::string>> one{tokenize(phrase)};
    std::size_t count = 0;
    detail::match_phrases(tokens, one, [&](std::size_t, std::size_t) { ++count; });
    total += std::max(weight, 0.0) * static_cast<double>(count);
  }
  return total / static_cast<double>(std::max<std::size_t>(tokens.size(), 1));
}

inline double keyword_strength(std::string_view text, const FeatureConfig& cfg) {
  return keyword_strength(tokenize(text), cfg);
}

inline const std::vector<std::string>& extra_feature_names() {
  static const std::vector<std::string> names{"digit_density", "exclamation_rate", "log_token_count"};
  return names;
}

inline double extra_feature(std::string_view name, std::string_view text,
                            const std::vector<std::string>& tokens) {
  if (name == "digit_density") {
    if (tokens.empty()) return 0.0;
    std::size_t digits = 0;
    for (const auto& t : tokens) {
      if (std::any_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; })) ++digits;
    }
    return static_cast<double>(digits) / static_cast<double>(tokens.size());
  }
  if (name == "exclamation_rate") {
    const auto bangs = static_cast<double>(std::count(text.begin(), text.end(), '!'));
    return bangs / static_cast<double>(count_sentences(text));
  }
  if (name == "log_token_count") return std::log1p(static_cast<double>(tokens.size()));
  throw Error(Errc::feature_mismatch, "unknown extra feature '" + std::string(name) + "'");
}

inline FeatureVector extract_features(std::string_view text, const FeatureConfig& cfg) {
  const auto tokens = tokenize(text);
  FeatureVector f;
  f.keyword_strength = keyword_strength(tokens, cfg);
  f.cta_density = cta_density(tokens, cfg);
  f.sentiment = sentiment_polarity(tokens, cfg);
  f.readability = readability(text);
  for (const auto& name : cfg.extra_features) f.extra[name] = extra_feature(name, text, tokens);
  return f;
}

}  // namespace copyopt

#endif  // COPYOPT_TEXT_FEATURES_HPP
