#ifndef COPYOPT_SIMULATOR_HPP
#define COPYOPT_SIMULATOR_HPP

// Seeded synthetic-user model and the lambda sweep / category experiments
// built on it.

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/config.hpp"
#include "copyopt/error.hpp"
#include "copyopt/metrics_ab.hpp"
#include "copyopt/optimizer.hpp"
#include "copyopt/pipeline.hpp"
#include "json.hpp"

namespace copyopt {

// Stage probabilities are logistic in the served copy's predicted conversion
// p and its diversity contribution d:
//   click        sigma(b0_click + b_conv p + b_nov d)
//   atc | click  sigma(c0_atc + c_conv p)
//   order | atc  sigma(d0_ord + d_conv p + d_nov d)
struct BehaviorModel {
  double b0_click = 0.0;
  double b_conv = 0.0;
  double b_nov = 0.0;
  double c0_atc = 0.0;
  double c_conv = 0.0;
  double d0_ord = 0.0;
  double d_conv = 0.0;
  double d_nov = 0.0;

  double p_click(double p, double d) const { return sigmoid(b0_click + b_conv * p + b_nov * d); }
  double p_atc(double p) const { return sigmoid(c0_atc + c_conv * p); }
  double p_order(double p, double d) const { return sigmoid(d0_ord + d_conv * p + d_nov * d); }

  friend bool operator==(const BehaviorModel&, const BehaviorModel&) = default;
};

struct Calibration {
  std::string version;
  std::map<Category, BehaviorModel> models;
  nlohmann::json provenance = nlohmann::json::object();

  const BehaviorModel& at(Category c) const {
    auto it = models.find(c);
    if (it == models.end()) throw Error(Errc::unknown_category, "no calibration for " + std::string(category_name(c)));
    return it->second;
  }
};

namespace detail {

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::string behavior_canonical(const std::map<Category, BehaviorModel>& models) {
  std::string s;
  for (const auto& [cat, m] : models) {
    s += std::string(category_name(cat)) + ":" + fmt17(m.b0_click) + "," + fmt17(m.b_conv) + "," + fmt17(m.b_nov) +
         "," + fmt17(m.c0_atc) + "," + fmt17(m.c_conv) + "," + fmt17(m.d0_ord) + "," + fmt17(m.d_conv) + "," +
         fmt17(m.d_nov) + ";";
  }
  return s;
}

inline std::string hex64(std::uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, h);
  return buf;
}

}  // namespace detail

// FNV-1a-64 over the coefficients printed with 17 significant digits.
inline std::string calibration_checksum(const Calibration& cal) {
  return detail::hex64(fnv1a64(detail::behavior_canonical(cal.models)));
}

inline nlohmann::json calibration_to_json(const Calibration& cal) {
  nlohmann::json cats = nlohmann::json::object();
  for (const auto& [cat, m] : cal.models) {
    cats[std::string(category_name(cat))] = {{"b0_click", m.b0_click}, {"b_conv", m.b_conv}, {"b_nov", m.b_nov},
                                             {"c0_atc", m.c0_atc},     {"c_conv", m.c_conv}, {"d0_ord", m.d0_ord},
                                             {"d_conv", m.d_conv},     {"d_nov", m.d_nov}};
  }
  return {{"version", cal.version},
          {"checksum", calibration_checksum(cal)},
          {"categories", cats},
          {"provenance", cal.provenance}};
}

inline Calibration calibration_from_json(const nlohmann::json& j) {
  Calibration cal;
  try {
    cal.version = j.at("version").get<std::string>();
    for (const auto& [key, m] : j.at("categories").items()) {
      BehaviorModel b;
      b.b0_click = m.at("b0_click").get<double>();
      b.b_conv = m.at("b_conv").get<double>();
      b.b_nov = m.at("b_nov").get<double>();
      b.c0_atc = m.at("c0_atc").get<double>();
      b.c_conv = m.at("c_conv").get<double>();
      b.d0_ord = m.at("d0_ord").get<double>();
      b.d_conv = m.at("d_conv").get<double>();
      b.d_nov = m.at("d_nov").get<double>();
      cal.models[parse_category(key)] = b;
    }
    if (auto it = j.find("provenance"); it != j.end()) cal.provenance = *it;
    const auto stored = j.at("checksum").get<std::string>();
    if (stored != calibration_checksum(cal)) {
      throw Error(Errc::parse_error, "calibration checksum mismatch (stored " + stored + ", computed " +
                                         calibration_checksum(cal) + ")");
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::parse_error, std::string("calibration: ") + e.what());
  }
  return cal;
}

inline Calibration load_calibration(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return calibration_from_json(detail::parse_json_document(text, path.string()));
}

// Merges the per-category calibration entries referenced by the config.
// Each file is read once.
inline Calibration load_configured_calibration(const Config& cfg) {
  Calibration out;
  std::map<std::filesystem::path, Calibration> files;
  for (const auto& [cat, cc] : cfg.categories) {
    if (cc.calibration.empty()) continue;
    auto it = files.find(cc.calibration);
    if (it == files.end()) it = files.emplace(cc.calibration, load_calibration(cc.calibration)).first;
    if (out.version.empty()) {
      out.version = it->second.version;
      out.provenance = it->second.provenance;
    }
    out.models[cat] = it->second.at(cat);
  }
  if (out.models.empty()) throw Error(Errc::unknown_category, "config names no calibration file");
  return out;
}

// Counter-based uniform stream: the value for (seed, session, draw) does not
// depend on any other draw, so sessions can be simulated in any order or in
// parallel with identical results.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double stream_uniform(std::uint64_t seed, std::uint64_t session, std::uint64_t draw) {
  const std::uint64_t key = mix64(seed);
  const std::uint64_t x = mix64(key + 0x9E3779B97F4A7C15ULL * (session * 4 + draw + 1));
  return static_cast<double>(x >> 11) * 0x1.0p-53;
}

struct SimulationOptions {
  ImpressionPolicy policy = ImpressionPolicy::Uniform;
  Arm arm = Arm::Control;
  std::string id_prefix = "s";
  std::size_t threads = 1;
  // Session counter offset, for splitting one stream across calls.
  std::uint64_t first_session = 0;
};

namespace detail {

// Cumulative impression shares over the served slate.
inline std::vector<double> impression_cdf(std::size_t k, ImpressionPolicy policy) {
  std::vector<double> w(k, 1.0);
  if (policy == ImpressionPolicy::RankWeighted) {
    for (std::size_t r = 0; r < k; ++r) w[r] = 1.0 / static_cast<double>(r + 1);
  }
  double total = 0.0;
  for (double x : w) total += x;
  std::vector<double> cdf(k);
  double acc = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    acc += w[r] / total;
    cdf[r] = acc;
  }
  return cdf;
}

inline std::pair<double, double> served_scores(const CopyCandidate& c) {
  if (!c.p_conv || !c.diversity_contribution) {
    throw Error(Errc::out_of_range, "served candidate " + c.id + " has no scores");
  }
  return {*c.p_conv, *c.diversity_contribution};
}

}  // namespace detail

namespace detail {

// A slate prepared for sampling: per-slot scores plus impression CDF.
struct PreparedSlate {
  std::vector<std::pair<double, double>> scores;
  std::vector<double> cdf;

  PreparedSlate(const std::vector<CopyCandidate>& served, ImpressionPolicy policy) {
    if (served.empty()) throw Error(Errc::empty_served_set, "nothing to serve");
    for (const auto& c : served) scores.push_back(served_scores(c));
    cdf = impression_cdf(served.size(), policy);
  }
};

inline void simulate_one(SessionEvent& e, const PreparedSlate& slate, const BehaviorModel& model, std::uint64_t seed,
                         std::uint64_t s) {
  const double u0 = stream_uniform(seed, s, 0);
  const std::size_t slot = std::min<std::size_t>(
      static_cast<std::size_t>(std::upper_bound(slate.cdf.begin(), slate.cdf.end(), u0) - slate.cdf.begin()),
      slate.scores.size() - 1);
  const auto [p, d] = slate.scores[slot];
  e.counts = {1, 0, 0, 0};
  if (stream_uniform(seed, s, 1) < model.p_click(p, d)) {
    e.counts.clicks = 1;
    if (stream_uniform(seed, s, 2) < model.p_atc(p)) {
      e.counts.add_to_carts = 1;
      if (stream_uniform(seed, s, 3) < model.p_order(p, d)) e.counts.orders = 1;
    }
  }
}

inline std::string session_id(const std::string& prefix, std::uint64_t s) {
  char id[32];
  std::snprintf(id, sizeof id, "%07" PRIu64, s);
  return prefix + id;
}

// Runs body(i) for i in [0, n) on up to `threads` workers. Each index is
// independent, so the result does not depend on the split.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t begin = t * chunk, end = std::min(n, begin + chunk);
    if (begin >= end) continue;
    pool.emplace_back([&body, begin, end] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

// One impression per session on a served copy drawn by the impression
// policy, then Bernoulli click / add-to-cart / order stages.
inline std::vector<SessionEvent> simulate_sessions(const std::vector<CopyCandidate>& served,
                                                   const BehaviorModel& model, std::size_t n, std::uint64_t seed,
                                                   const SimulationOptions& opts = {}) {
  if (served.empty()) throw Error(Errc::empty_served_set, "nothing to serve");
  if (n < 1) throw Error(Errc::out_of_range, "n must be >= 1");
  const detail::PreparedSlate slate(served, opts.policy);
  std::vector<SessionEvent> events(n);
  detail::parallel_for(n, opts.threads, [&](std::size_t i) {
    const std::uint64_t s = opts.first_session + i;
    events[i].session_id = detail::session_id(opts.id_prefix, s);
    events[i].arm = opts.arm;
    detail::simulate_one(events[i], slate, model, seed, s);
  });
  return events;
}

struct ArmSlate {
  Arm arm;
  double weight = 1.0;
  std::vector<CopyCandidate> served;
};

// A simulated A/B test: each session is bucketed with assign_arm on its id
// and then behaves as in simulate_sessions on that arm's slate.
inline std::vector<SessionEvent> simulate_experiment(const std::vector<ArmSlate>& arms, const BehaviorModel& model,
                                                     std::size_t n, std::uint64_t seed,
                                                     const SimulationOptions& opts = {}) {
  if (arms.empty()) throw Error(Errc::empty_served_set, "no arms to serve");
  if (n < 1) throw Error(Errc::out_of_range, "n must be >= 1");
  std::vector<ArmWeight> weights;
  std::map<Arm, detail::PreparedSlate> slates;
  for (const auto& a : arms) {
    if (slates.contains(a.arm)) throw Error(Errc::duplicate_id, "arm " + std::string(arm_name(a.arm)) + " given twice");
    weights.push_back({a.arm, a.weight});
    slates.emplace(a.arm, detail::PreparedSlate(a.served, opts.policy));
  }
  std::vector<SessionEvent> events(n);
  detail::parallel_for(n, opts.threads, [&](std::size_t i) {
    const std::uint64_t s = opts.first_session + i;
    auto& e = events[i];
    e.session_id = detail::session_id(opts.id_prefix, s);
    e.arm = assign_arm(e.session_id, seed, weights);
    detail::simulate_one(e, slates.at(e.arm), model, seed, s);
  });
  return events;
}

inline std::vector<SessionEvent> simulate_sessions(const std::vector<CopyCandidate>& served, const Calibration& cal,
                                                   Category category, std::size_t n, std::uint64_t seed,
                                                   const SimulationOptions& opts = {}) {
  return simulate_sessions(served, cal.at(category), n, seed, opts);
}

struct ExpectedRates {
  double ctr = 0.0;       // percent
  double atc_rate = 0.0;  // percent
  double cvr = 0.0;       // percent
};

// Exact expectation of the simulated funnel for one slate (no sampling).
inline ExpectedRates expected_rates(const std::vector<CopyCandidate>& served, const BehaviorModel& model,
                                    ImpressionPolicy policy = ImpressionPolicy::Uniform) {
  if (served.empty()) throw Error(Errc::empty_served_set, "nothing to serve");
  const auto cdf = detail::impression_cdf(served.size(), policy);
  double click = 0.0, atc = 0.0, order = 0.0, prev = 0.0;
  for (std::size_t r = 0; r < served.size(); ++r) {
    const double share = cdf[r] - prev;
    prev = cdf[r];
    const auto [p, d] = detail::served_scores(served[r]);
    const double pc = model.p_click(p, d);
    const double pa = pc * model.p_atc(p);
    click += share * pc;
    atc += share * pa;
    order += share * pa * model.p_order(p, d);
  }
  return {100.0 * click, click > 0.0 ? 100.0 * atc / click : 0.0, 100.0 * order};
}

// A category label for experiment rows; empty means all calibrated
// categories pooled.
using CategoryScope = std::optional<Category>;

inline std::string scope_name(const CategoryScope& scope) {
  return scope ? std::string(category_name(*scope)) : std::string("all");
}

inline CategoryScope parse_scope(std::string_view name) {
  if (name == "all" || name == "ALL" || name == "All") return std::nullopt;
  return parse_category(name);
}

struct TradeoffPoint {
  double lambda = 0.0;
  CategoryScope category;
  double diversity_D = 0.0;
  double ctr = 0.0;
  double cvr = 0.0;
  double atc_rate = 0.0;
  std::size_t n_sessions = 0;
  std::uint64_t seed = 0;
  FunnelCounts counts;
};

// The slate actually served for one product at one lambda.
struct ServedSlate {
  ProductRecord product;
  std::vector<CopyCandidate> served;
  double diversity_D = 0.0;
};

inline std::vector<ProductRecord> products_in_scope(const std::vector<ProductRecord>& catalog, const CategoryScope& scope,
                                                    const Calibration& cal) {
  if (scope && !cal.models.contains(*scope)) {
    throw Error(Errc::unknown_category, "no calibration for " + std::string(category_name(*scope)));
  }
  std::vector<ProductRecord> out;
  for (const auto& p : catalog) {
    if (scope ? p.category == *scope : cal.models.contains(p.category)) out.push_back(p);
  }
  if (out.empty()) throw Error(Errc::empty_served_set, "no products for category " + scope_name(scope));
  return out;
}

// Runs the pipeline for every product and keeps the review-passed copies.
// `seed` is the generation seed.
inline std::vector<ServedSlate> serve_slates(const std::vector<ProductRecord>& products, const LogisticModel& model,
                                             const Config& cfg, double lambda, std::uint64_t seed) {
  std::vector<ServedSlate> slates;
  for (const auto& p : products) {
    GenerationRequest req{p, cfg.generation.persona, cfg.generation.query.empty() ? p.title : cfg.generation.query,
                          cfg.generation.n, seed};
    auto ranked = run_pipeline(req, model, cfg, lambda);
    ServedSlate slate{p, {}, 0.0};
    for (auto& r : ranked) {
      if (r.verdict.passed) slate.served.push_back(std::move(r.candidate));
    }
    if (slate.served.empty()) continue;
    std::vector<Embedding> e;
    for (const auto& c : slate.served) e.push_back(c.embedding);
    slate.diversity_D = diversity(e);
    slates.push_back(std::move(slate));
  }
  if (slates.empty()) throw Error(Errc::empty_served_set, "every candidate failed review");
  return slates;
}

// Equal traffic per product (largest-remainder split of n_sessions).
inline std::vector<std::size_t> split_sessions(std::size_t n_sessions, std::size_t parts) {
  std::vector<std::size_t> out(parts, n_sessions / parts);
  for (std::size_t i = 0; i < n_sessions % parts; ++i) ++out[i];
  return out;
}

inline TradeoffPoint simulate_point(const std::vector<ServedSlate>& slates, const Calibration& cal, double lambda,
                                    const CategoryScope& scope, std::size_t n_sessions, std::uint64_t seed,
                                    const SimulateConfig& sim) {
  TradeoffPoint pt;
  pt.lambda = lambda;
  pt.category = scope;
  pt.n_sessions = n_sessions;
  pt.seed = seed;
  double d_sum = 0.0;
  const auto shares = split_sessions(n_sessions, slates.size());
  for (std::size_t i = 0; i < slates.size(); ++i) {
    d_sum += slates[i].diversity_D;
    if (shares[i] == 0) continue;
    SimulationOptions opts;
    opts.policy = sim.impression_policy;
    opts.threads = sim.threads;
    opts.id_prefix = slates[i].product.id + "-";
    const std::uint64_t product_seed = mix64(seed ^ fnv1a64(slates[i].product.id));
    const auto events =
        simulate_sessions(slates[i].served, cal.at(slates[i].product.category), shares[i], product_seed, opts);
    for (const auto& e : events) pt.counts += e.counts;
  }
  pt.diversity_D = d_sum / static_cast<double>(slates.size());
  pt.ctr = ctr(pt.counts);
  pt.cvr = cvr(pt.counts);
  pt.atc_rate = pt.counts.clicks > 0 ? add_to_cart_rate(pt.counts) : 0.0;
  return pt;
}

// For each lambda: serve slates through the full pipeline, average set
// diversity over the served slates, simulate n_sessions and aggregate the
// funnel metrics. Generation uses cfg.generation.seed; `seed` drives the
// sessions only, and every lambda reuses it (common random numbers).
inline std::vector<TradeoffPoint> lambda_sweep(const std::vector<ProductRecord>& catalog, const LogisticModel& model,
                                               const Calibration& cal, const std::vector<double>& lambdas,
                                               const CategoryScope& scope, std::size_t n_sessions, std::uint64_t seed,
                                               const Config& cfg) {
  if (lambdas.empty()) throw Error(Errc::empty_input, "no lambda values");
  for (double l : lambdas) {
    if (!(l >= 0.0 && l <= 1.0)) throw Error(Errc::out_of_range, "lambda " + detail::fmt17(l) + " outside [0,1]");
  }
  if (n_sessions < 1) throw Error(Errc::out_of_range, "n_sessions must be >= 1");
  const auto products = products_in_scope(catalog, scope, cal);
  std::vector<TradeoffPoint> points;
  for (double l : lambdas) {
    const auto slates = serve_slates(products, model, cfg, l, cfg.generation.seed);
    points.push_back(simulate_point(slates, cal, l, scope, n_sessions, seed, cfg.simulate));
  }
  return points;
}

inline TradeoffPoint category_run(const std::vector<ProductRecord>& catalog, const LogisticModel& model,
                                  const Calibration& cal, Category category, double lambda, std::size_t n_sessions,
                                  std::uint64_t seed, const Config& cfg) {
  if (!cal.models.contains(category)) {
    throw Error(Errc::unknown_category, "no calibration for " + std::string(category_name(category)));
  }
  return lambda_sweep(catalog, model, cal, {lambda}, category, n_sessions, seed, cfg).front();
}

inline constexpr const char* kTradeoffHeader = "lambda,category,diversity,ctr,cvr,atc_rate,n_sessions,seed";

inline std::string tradeoff_csv(std::vector<TradeoffPoint> points) {
  if (points.empty()) throw Error(Errc::empty_input, "no trade-off points");
  std::stable_sort(points.begin(), points.end(), [](const TradeoffPoint& a, const TradeoffPoint& b) {
    const auto ca = scope_name(a.category), cb = scope_name(b.category);
    if (ca != cb) return ca < cb;
    return a.lambda < b.lambda;
  });
  std::string out = std::string(kTradeoffHeader) + "\n";
  char buf[256];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%.6f,%s,%.6f,%.6f,%.6f,%.6f,%zu,%" PRIu64 "\n", p.lambda, scope_name(p.category).c_str(),
                  p.diversity_D, p.ctr, p.cvr, p.atc_rate, p.n_sessions, p.seed);
    out += buf;
  }
  return out;
}

inline void emit_tradeoff(const std::vector<TradeoffPoint>& points, const std::filesystem::path& path) {
  const std::string csv = tradeoff_csv(points);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << csv;
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

}  // namespace copyopt

#endif  // COPYOPT_SIMULATOR_HPP
