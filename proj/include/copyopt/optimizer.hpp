#ifndef COPYOPT_OPTIMIZER_HPP
#define COPYOPT_OPTIMIZER_HPP

// Diversity scoring, logistic conversion prediction, the weighted reward and
// the filter -> predict -> rank candidate selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/error.hpp"
#include "copyopt/vector_index.hpp"

namespace copyopt {

namespace detail {

inline void check_same_dim(std::span<const Embedding> set) {
  for (const auto& e : set) {
    if (e.size() != set.front().size()) {
      throw Error(Errc::dimension_mismatch, "embeddings in set differ in dimension");
    }
  }
}

inline std::vector<std::vector<double>> similarity_matrix(std::span<const Embedding> set) {
  const std::size_t n = set.size();
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    sim[i][i] = cosine(set[i], set[i]);
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = cosine(set[i], set[j]);
  }
  return sim;
}

}  // namespace detail

// D = 1 - (1/|S|^2) sum_i sum_j cos(s_i, s_j), self-pairs included. For
// nonnegative embeddings 0 <= D <= 1 - 1/|S|.
inline double diversity(std::span<const Embedding> set) {
  if (set.empty()) throw Error(Errc::empty_set, "diversity of an empty set");
  detail::check_same_dim(set);
  const std::size_t n = set.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) total += cosine(set[i], set[j]);
  }
  return 1.0 - total / static_cast<double>(n * n);
}

// d_i = 1 - mean_{j != i} cos(s_i, s_j): candidate i's dissimilarity to the
// rest of the set.
inline double per_candidate_diversity(std::size_t i, std::span<const Embedding> set) {
  if (set.size() < 2) throw Error(Errc::set_too_small, "need at least 2 embeddings");
  if (i >= set.size()) throw Error(Errc::out_of_range, "candidate index " + std::to_string(i));
  detail::check_same_dim(set);
  double sum = 0.0;
  for (std::size_t j = 0; j < set.size(); ++j) {
    if (j != i) sum += cosine(set[i], set[j]);
  }
  return 1.0 - sum / static_cast<double>(set.size() - 1);
}

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct TrainHyper {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-3;
  double tolerance = 1e-8;
};

struct TrainingRecord {
  std::size_t n_samples = 0;
  std::size_t n_positives = 0;
  TrainHyper hyper;
  double final_loss = 0.0;
  int epochs_run = 0;
};

struct LogisticModel {
  // Coefficients in feature serialization order.
  std::vector<std::pair<std::string, double>> theta;
  double intercept = 0.0;
  std::optional<TrainingRecord> trained_on;
};

// P_conv(x) = sigma(intercept + theta . x). Feature names must match exactly.
inline double predict_conversion(const LogisticModel& model, const FeatureVector& x) {
  const auto named = x.named();
  for (const auto& [name, value] : named) {
    const bool known = std::any_of(model.theta.begin(), model.theta.end(),
                                   [&](const auto& t) { return t.first == name; });
    if (!known) throw Error(Errc::feature_mismatch, name);
  }
  double z = model.intercept;
  for (const auto& [name, coef] : model.theta) {
    auto it = std::find_if(named.begin(), named.end(), [&](const auto& f) { return f.first == name; });
    if (it == named.end()) throw Error(Errc::feature_mismatch, name);
    z += coef * it->second;
  }
  return sigmoid(z);
}

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;
  double grad_bias = 0.0;
};

// Mean negative log-likelihood plus (l2/2)|w|^2; the bias is not penalized.
inline LossGradient logistic_loss_gradient(const std::vector<std::vector<double>>& rows,
                                           std::span<const int> labels, std::span<const double> weights,
                                           double bias, double l2) {
  LossGradient out;
  out.grad_weights.assign(weights.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double z = bias;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * rows[i][j];
    // log(1 + e^z) - y z, evaluated without overflow.
    const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    out.loss += (softplus - labels[i] * z) * inv_n;
    const double residual = (sigmoid(z) - labels[i]) * inv_n;
    for (std::size_t j = 0; j < weights.size(); ++j) out.grad_weights[j] += residual * rows[i][j];
    out.grad_bias += residual;
  }
  for (std::size_t j = 0; j < weights.size(); ++j) {
    out.loss += 0.5 * l2 * weights[j] * weights[j];
    out.grad_weights[j] += l2 * weights[j];
  }
  return out;
}

using LabeledSample = std::pair<FeatureVector, int>;

// Full-batch gradient descent. Features are standardized internally (mean 0,
// unit variance, constant columns left centered) and the fitted coefficients
// are mapped back to raw feature units, so the L2 penalty acts on the
// standardized weights.
inline LogisticModel train_logistic(const std::vector<LabeledSample>& data, const TrainHyper& hyper = {}) {
  if (!(hyper.learning_rate > 0.0) || hyper.epochs <= 0 || hyper.l2 < 0.0 || !(hyper.tolerance > 0.0)) {
    throw Error(Errc::out_of_range, "invalid training hyperparameters");
  }
  if (data.size() < 2) throw Error(Errc::degenerate_data, "need at least 2 samples");
  const auto names = data.front().first.names();
  const std::size_t d = names.size();
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  rows.reserve(data.size());
  std::size_t positives = 0;
  for (const auto& [x, y] : data) {
    if (y != 0 && y != 1) throw Error(Errc::out_of_range, "label must be 0 or 1");
    const auto named = x.named();
    if (named.size() != d) throw Error(Errc::feature_mismatch, "inconsistent feature sets in training data");
    std::vector<double> row;
    row.reserve(d);
    for (std::size_t j = 0; j < d; ++j) {
      if (named[j].first != names[j]) throw Error(Errc::feature_mismatch, named[j].first);
      row.push_back(named[j].second);
    }
    rows.push_back(std::move(row));
    labels.push_back(y);
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == data.size()) {
    throw Error(Errc::degenerate_data, "training data contains a single class");
  }

  const double n = static_cast<double>(rows.size());
  std::vector<double> mean(d, 0.0), scale(d, 1.0);
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j] / n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (const auto& row : rows) var += (row[j] - mean[j]) * (row[j] - mean[j]) / n;
    if (var > 0.0) scale[j] = std::sqrt(var);
  }
  for (auto& row : rows) {
    for (std::size_t j = 0; j < d; ++j) row[j] = (row[j] - mean[j]) / scale[j];
  }

  std::vector<double> w(d, 0.0);
  double b = 0.0;
  double prev_loss = std::numeric_limits<double>::infinity();
  double loss = prev_loss;
  int epoch = 0;
  for (; epoch < hyper.epochs; ++epoch) {
    const auto lg = logistic_loss_gradient(rows, labels, w, b, hyper.l2);
    loss = lg.loss;
    if (std::abs(prev_loss - loss) < hyper.tolerance) break;
    prev_loss = loss;
    for (std::size_t j = 0; j < d; ++j) w[j] -= hyper.learning_rate * lg.grad_weights[j];
    b -= hyper.learning_rate * lg.grad_bias;
  }
  if (epoch == hyper.epochs) loss = logistic_loss_gradient(rows, labels, w, b, hyper.l2).loss;

  LogisticModel model;
  model.intercept = b;
  for (std::size_t j = 0; j < d; ++j) {
    const double coef = w[j] / scale[j];
    model.theta.emplace_back(names[j], coef);
    model.intercept -= coef * mean[j];
  }
  for (const auto& [name, coef] : model.theta) {
    if (!std::isfinite(coef)) throw Error(Errc::degenerate_data, "non-finite coefficient for " + name);
  }
  model.trained_on = TrainingRecord{rows.size(), positives, hyper, loss, epoch};
  return model;
}

// R = lambda d + (1 - lambda) p.
inline double reward(double d, double p, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::out_of_range, "lambda must be in [0,1]");
  if (!(d >= 0.0 && d <= 1.0)) throw Error(Errc::out_of_range, "diversity must be in [0,1]");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::out_of_range, "probability must be in [0,1]");
  return lambda * d + (1.0 - lambda) * p;
}

// Greedy farthest-point selection of m candidates. Seed: the candidate
// farthest (1 - cosine) from the centroid; then repeatedly the candidate
// whose nearest selected neighbour is farthest. Ties go to the lowest id.
// Output keeps the input order.
inline std::vector<CopyCandidate> diversity_filter(const std::vector<CopyCandidate>& candidates,
                                                   std::size_t m) {
  if (candidates.empty()) throw Error(Errc::empty_input, "no candidates to filter");
  if (m < 1) throw Error(Errc::out_of_range, "m must be >= 1");
  if (m >= candidates.size()) return candidates;

  const std::size_t n = candidates.size();
  const std::size_t dim = candidates.front().embedding.size();
  Embedding centroid(dim, 0.0);
  for (const auto& c : candidates) {
    if (c.embedding.size() != dim) throw Error(Errc::dimension_mismatch, "candidate " + c.id);
    for (std::size_t k = 0; k < dim; ++k) centroid[k] += c.embedding[k] / static_cast<double>(n);
  }

  auto better = [&](std::size_t a, double score_a, std::size_t b, double score_b) {
    if (score_a != score_b) return score_a > score_b;
    return candidates[a].id < candidates[b].id;
  };

  std::size_t seed = 0;
  double seed_dist = 1.0 - cosine(candidates[0].embedding, centroid);
  for (std::size_t i = 1; i < n; ++i) {
    const double dist = 1.0 - cosine(candidates[i].embedding, centroid);
    if (better(i, dist, seed, seed_dist)) {
      seed = i;
      seed_dist = dist;
    }
  }

  std::vector<bool> chosen(n, false);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  auto select = [&](std::size_t s) {
    chosen[s] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (!chosen[i]) nearest[i] = std::min(nearest[i], 1.0 - cosine(candidates[i].embedding, candidates[s].embedding));
    }
  };
  select(seed);
  for (std::size_t picked = 1; picked < m; ++picked) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (best == n || better(i, nearest[i], best, nearest[best])) best = i;
    }
    select(best);
  }

  std::vector<CopyCandidate> out;
  out.reserve(m);
  for (std::size_t i = 0; i < n; ++i) {
    if (chosen[i]) out.push_back(candidates[i]);
  }
  return out;
}

// diversity_filter -> per-candidate diversity -> P_conv -> reward, sorted by
// reward descending (ties: lower id), truncated to k. A lone surviving
// candidate gets diversity contribution 0.
inline std::vector<CopyCandidate> rerank(const std::vector<CopyCandidate>& candidates,
                                         const LogisticModel& model, double lambda, std::size_t k,
                                         std::size_t m) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::out_of_range, "lambda must be in [0,1]");
  if (k < 1) throw Error(Errc::out_of_range, "k must be >= 1");
  if (m < 2) throw Error(Errc::out_of_range, "m must be >= 2");

  auto pool = diversity_filter(candidates, m);
  std::vector<Embedding> embeddings;
  embeddings.reserve(pool.size());
  for (const auto& c : pool) embeddings.push_back(c.embedding);
  detail::check_same_dim(embeddings);
  const auto sim = detail::similarity_matrix(embeddings);

  for (std::size_t i = 0; i < pool.size(); ++i) {
    double d = 0.0;
    if (pool.size() > 1) {
      double sum = 0.0;
      for (std::size_t j = 0; j < pool.size(); ++j) {
        if (j != i) sum += sim[i][j];
      }
      d = 1.0 - sum / static_cast<double>(pool.size() - 1);
    }
    auto& c = pool[i];
    c.diversity_contribution = d;
    c.p_conv = predict_conversion(model, c.features);
    c.reward = reward(d, *c.p_conv, lambda);
  }

  std::sort(pool.begin(), pool.end(), [](const CopyCandidate& a, const CopyCandidate& b) {
    if (*a.reward != *b.reward) return *a.reward > *b.reward;
    return a.id < b.id;
  });
  if (pool.size() > k) pool.resize(k);
  return pool;
}

}  // namespace copyopt

#endif  // COPYOPT_OPTIMIZER_HPP
