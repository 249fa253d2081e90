#ifndef COPYOPT_PIPELINE_HPP
#define COPYOPT_PIPELINE_HPP

// Candidate generation, post-processing (dedup, relevance threshold,
// business ranking) and the review gate, wired around the optimizer.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/config.hpp"
#include "copyopt/error.hpp"
#include "copyopt/optimizer.hpp"
#include "copyopt/review.hpp"
#include "copyopt/vector_index.hpp"

namespace copyopt {

struct GenerationRequest {
  ProductRecord product;
  std::string persona;
  std::string query;
  std::size_t n = 1;
  std::uint64_t seed = 0;
};

// Request -> candidate texts. Implementations must be deterministic in the
// request for the pipeline's reproducibility guarantees to hold.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual std::vector<std::string> generate(const GenerationRequest& req) = 0;
};

inline const std::vector<std::string>& template_slots() {
  static const std::vector<std::string> slots{"title", "price", "category", "persona", "stock", "query", "cta"};
  return slots;
}

namespace detail {

// A parsed template: literal text interleaved with slots and inline synonym
// groups written as {first|second|third}.
struct TemplatePart {
  enum class Kind { Literal, Slot, Choice } kind;
  std::string text;
  std::vector<std::string> options;
};

inline std::vector<TemplatePart> parse_template(std::string_view tpl) {
  std::vector<TemplatePart> parts;
  std::string literal;
  std::size_t i = 0;
  while (i < tpl.size()) {
    if (tpl[i] != '{') {
      literal += tpl[i++];
      continue;
    }
    const auto close = tpl.find('}', i);
    if (close == std::string_view::npos) {
      literal += tpl.substr(i);
      break;
    }
    if (!literal.empty()) parts.push_back({TemplatePart::Kind::Literal, std::move(literal), {}});
    literal.clear();
    const std::string body(tpl.substr(i + 1, close - i - 1));
    if (body.find('|') != std::string::npos) {
      TemplatePart choice{TemplatePart::Kind::Choice, {}, {}};
      std::size_t start = 0;
      while (true) {
        const auto bar = body.find('|', start);
        choice.options.push_back(body.substr(start, bar - start));
        if (bar == std::string::npos) break;
        start = bar + 1;
      }
      parts.push_back(std::move(choice));
    } else {
      const auto& slots = template_slots();
      if (std::find(slots.begin(), slots.end(), body) == slots.end()) throw Error(Errc::unknown_slot, body);
      parts.push_back({TemplatePart::Kind::Slot, body, {}});
    }
    i = close + 1;
  }
  if (!literal.empty()) parts.push_back({TemplatePart::Kind::Literal, std::move(literal), {}});
  return parts;
}

// Unbiased enough for template picking; mt19937_64 output is specified
// bit-exactly by the standard, unlike the std distributions.
inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline std::string format_price(double price) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", price);
  return buf;
}

// Upper-cases the first letter of the text and of each sentence.
inline std::string sentence_case(std::string s) {
  bool start = true;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (start && c >= 'a' && c <= 'z') {
      s[i] = static_cast<char>(c - 'a' + 'A');
      start = false;
    } else if (c == '.' || c == '!' || c == '?') {
      start = i + 1 < s.size() && s[i + 1] == ' ';
    } else if (c != ' ' && c != '"' && c != '\'') {
      start = false;
    }
  }
  return s;
}

}  // namespace detail

// Deterministic stand-in for a copy-writing model: fills templates by seeded
// sampling of template, CTA phrase and synonym choices.
class TemplateGenerator : public Generator {
 public:
  TemplateGenerator(std::vector<std::string> templates, std::vector<std::string> cta_phrases)
      : cta_phrases_(std::move(cta_phrases)) {
    if (templates.empty()) throw Error(Errc::empty_input, "no templates");
    for (const auto& t : templates) parsed_.push_back(detail::parse_template(t));
    if (cta_phrases_.empty()) cta_phrases_.push_back("shop now");
  }

  std::vector<std::string> generate(const GenerationRequest& req) override {
    std::mt19937_64 rng(req.seed);
    std::vector<std::string> out;
    out.reserve(req.n);
    for (std::size_t i = 0; i < req.n; ++i) {
      const auto& parts = parsed_[detail::pick(rng, parsed_.size())];
      std::string text;
      for (const auto& part : parts) {
        switch (part.kind) {
          case detail::TemplatePart::Kind::Literal: text += part.text; break;
          case detail::TemplatePart::Kind::Choice: text += part.options[detail::pick(rng, part.options.size())]; break;
          case detail::TemplatePart::Kind::Slot: text += fill(part.text, req, rng); break;
        }
      }
      out.push_back(detail::sentence_case(std::move(text)));
    }
    return out;
  }

 private:
  std::string fill(const std::string& slot, const GenerationRequest& req, std::mt19937_64& rng) const {
    if (slot == "title") return req.product.title;
    if (slot == "price") return detail::format_price(req.product.price);
    if (slot == "category") return std::string(category_name(req.product.category));
    if (slot == "persona") return req.persona;
    if (slot == "stock") return std::to_string(req.product.stock);
    if (slot == "query") return req.query;
    return cta_phrases_[detail::pick(rng, cta_phrases_.size())];
  }

  std::vector<std::vector<detail::TemplatePart>> parsed_;
  std::vector<std::string> cta_phrases_;
};

inline std::string candidate_id(const std::string& product_id, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03zu", i);
  return product_id + "#" + buf;
}

inline std::vector<CopyCandidate> to_candidates(const GenerationRequest& req, const std::vector<std::string>& texts,
                                                const FeatureConfig& cfg) {
  std::vector<CopyCandidate> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    out.push_back(make_candidate(candidate_id(req.product.id, i), req.product.id, texts[i], cfg));
  }
  return out;
}

inline std::vector<CopyCandidate> template_generate(const GenerationRequest& req,
                                                    const std::vector<std::string>& templates,
                                                    const FeatureConfig& cfg) {
  TemplateGenerator gen(templates, cfg.cta_phrases);
  return to_candidates(req, gen.generate(req), cfg);
}

inline constexpr double kDefaultRelevanceThreshold = 0.10;

inline std::vector<CopyCandidate> relevance_filter(const std::vector<CopyCandidate>& candidates,
                                                   const ProductRecord& product,
                                                   double threshold = kDefaultRelevanceThreshold) {
  std::vector<CopyCandidate> out;
  for (const auto& c : candidates) {
    if (cosine(c.embedding, product.embedding) >= threshold) out.push_back(c);
  }
  return out;
}

// 1 - min(stock, cap) / cap: empty shelves are maximally urgent.
inline double urgency(long long stock, long long stock_cap = 100) {
  if (stock_cap <= 0) throw Error(Errc::out_of_range, "stock_cap must be > 0");
  const long long clamped = std::clamp<long long>(stock, 0, stock_cap);
  return 1.0 - static_cast<double>(clamped) / static_cast<double>(stock_cap);
}

struct BusinessItem {
  CopyCandidate candidate;
  double relevance = 0.0;
  double margin = 0.0;
  double urgency = 0.0;
  double score = 0.0;
};

struct BusinessWeights {
  double relevance = 0.5;
  double margin = 0.3;
  double urgency = 0.2;
};

inline std::vector<BusinessItem> business_rank(std::vector<BusinessItem> items, const BusinessWeights& w) {
  if (w.relevance < 0.0 || w.margin < 0.0 || w.urgency < 0.0) {
    throw Error(Errc::out_of_range, "business weights must be >= 0");
  }
  if (w.relevance == 0.0 && w.margin == 0.0 && w.urgency == 0.0) {
    throw Error(Errc::all_zero_weights, "at least one business weight must be positive");
  }
  for (auto& item : items) item.score = w.relevance * item.relevance + w.margin * item.margin + w.urgency * item.urgency;
  std::stable_sort(items.begin(), items.end(), [](const BusinessItem& a, const BusinessItem& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.candidate.id < b.candidate.id;
  });
  return items;
}

struct RankedCandidate {
  CopyCandidate candidate;
  ReviewVerdict verdict;
  double relevance = 0.0;
};

inline std::unique_ptr<Generator> make_template_generator(const Config& cfg, Category category) {
  return std::make_unique<TemplateGenerator>(cfg.templates_for(category), cfg.feature.cta_phrases);
}

// generate -> embed/extract -> dedup -> relevance filter -> rerank -> review.
// Review failures stay in the output, flagged.
inline std::vector<RankedCandidate> run_pipeline(const GenerationRequest& req, const LogisticModel& model,
                                                 const Config& cfg, double lambda, Generator& generator) {
  if (req.n < 1 || req.n > cfg.generation.max_n) {
    throw Error(Errc::out_of_range, "n must be in [1, " + std::to_string(cfg.generation.max_n) + "]");
  }
  ProductRecord product = req.product;
  if (product.embedding.size() != cfg.feature.embed_dim) embed_product(product, cfg.feature);

  const auto drafts = to_candidates(req, generator.generate(req), cfg.feature);
  if (drafts.empty()) throw Error(Errc::empty_after_filters, "generator returned no candidates");
  const auto unique = dedup(drafts, cfg.retrieval.dedup_threshold);
  const auto relevant = relevance_filter(unique, product, cfg.retrieval.relevance_threshold);
  if (relevant.empty()) {
    throw Error(Errc::empty_after_filters, "no candidate for " + product.id + " passed relevance threshold " +
                                               std::to_string(cfg.retrieval.relevance_threshold));
  }
  auto ranked = rerank(relevant, model, lambda, cfg.optimizer.top_k, cfg.optimizer.filter_m);

  std::vector<RankedCandidate> out;
  out.reserve(ranked.size());
  for (auto& c : ranked) {
    const double rel = cosine(c.embedding, product.embedding);
    out.push_back({std::move(c), {}, rel});
  }

  if (cfg.business.final_sort == FinalSort::Business) {
    std::vector<BusinessItem> items;
    const double urg = urgency(product.stock, cfg.business.stock_cap);
    for (auto& r : out) items.push_back({r.candidate, r.relevance, product.margin, urg, 0.0});
    items = business_rank(std::move(items), {cfg.business.w_rel, cfg.business.w_margin, cfg.business.w_urg});
    out.clear();
    for (auto& item : items) out.push_back({std::move(item.candidate), {}, item.relevance});
  }

  for (auto& r : out) r.verdict = review(r.candidate, cfg.review, product.category);
  return out;
}

inline std::vector<RankedCandidate> run_pipeline(const GenerationRequest& req, const LogisticModel& model,
                                                 const Config& cfg, double lambda) {
  auto gen = make_template_generator(cfg, req.product.category);
  return run_pipeline(req, model, cfg, lambda, *gen);
}

}  // namespace copyopt

#endif  // COPYOPT_PIPELINE_HPP
