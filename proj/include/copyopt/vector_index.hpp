#ifndef COPYOPT_VECTOR_INDEX_HPP
#define COPYOPT_VECTOR_INDEX_HPP

// Exact cosine retrieval over a product catalog, plus embedding dedup.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/error.hpp"
#include "copyopt/text_features.hpp"

namespace copyopt {

struct ProductRecord {
  std::string id;
  Category category = Category::Other;
  std::string title;
  std::string description;
  double price = 0.0;
  double margin = 0.0;
  long long stock = 0;
  Embedding embedding;
};

inline void embed_product(ProductRecord& p, const FeatureConfig& cfg) {
  p.embedding = embed(p.title + " " + p.description, cfg);
}

// cos(a, b) with cos(0, x) := 0. For a == b the result is exactly 1 since
// sqrt(x * x) == x in IEEE double.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::dimension_mismatch,
                std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

struct Scored {
  std::string id;
  double similarity = 0.0;
};

class VectorIndex {
 public:
  VectorIndex() = default;

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

  // Top-k by cosine, descending; ties keep insertion order.
  std::vector<Scored> top_k(std::span<const double> query, std::size_t k) const {
    if (query.size() != dim_) {
      throw Error(Errc::dimension_mismatch,
                  "query dim " + std::to_string(query.size()) + ", index dim " + std::to_string(dim_));
    }
    std::vector<double> sims(ids_.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) sims[i] = cosine(vectors_[i], query);
    std::vector<std::size_t> order(ids_.size());
    std::iota(order.begin(), order.end(), 0);
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take), order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (sims[a] != sims[b]) return sims[a] > sims[b];
                        return a < b;
                      });
    std::vector<Scored> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back({ids_[order[i]], sims[order[i]]});
    return out;
  }

  friend VectorIndex build_index(const std::vector<ProductRecord>& products);

 private:
  std::vector<std::string> ids_;
  std::vector<Embedding> vectors_;
  std::size_t dim_ = 0;
};

inline VectorIndex build_index(const std::vector<ProductRecord>& products) {
  if (products.empty()) throw Error(Errc::empty_input, "cannot index an empty catalog");
  VectorIndex index;
  index.dim_ = products.front().embedding.size();
  std::unordered_set<std::string> seen;
  for (const auto& p : products) {
    if (!seen.insert(p.id).second) throw Error(Errc::duplicate_id, p.id);
    if (p.embedding.size() != index.dim_) {
      throw Error(Errc::dimension_mismatch, "product " + p.id + " has dim " +
                                                std::to_string(p.embedding.size()) + ", expected " +
                                                std::to_string(index.dim_));
    }
    index.ids_.push_back(p.id);
    index.vectors_.push_back(p.embedding);
  }
  return index;
}

inline std::vector<Scored> top_k(const VectorIndex& index, std::span<const double> query, std::size_t k) {
  return index.top_k(query, k);
}

inline constexpr double kDefaultDedupThreshold = 0.95;

// Keeps a candidate iff its cosine to every already-kept candidate is below
// the threshold. Stable.
inline std::vector<CopyCandidate> dedup(const std::vector<CopyCandidate>& candidates,
                                        double threshold = kDefaultDedupThreshold) {
  std::vector<CopyCandidate> kept;
  for (const auto& c : candidates) {
    const bool distinct = std::all_of(kept.begin(), kept.end(), [&](const CopyCandidate& k) {
      return cosine(c.embedding, k.embedding) < threshold;
    });
    if (distinct) kept.push_back(c);
  }
  return kept;
}

}  // namespace copyopt

#endif  // COPYOPT_VECTOR_INDEX_HPP
