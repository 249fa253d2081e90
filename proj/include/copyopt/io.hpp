#ifndef COPYOPT_IO_HPP
#define COPYOPT_IO_HPP

// File formats: catalog JSONL, model JSON, candidate JSONL, event CSV,
// labeled training CSV and the A/B report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "copyopt/candidate.hpp"
#include "copyopt/config.hpp"
#include "copyopt/error.hpp"
#include "copyopt/metrics_ab.hpp"
#include "copyopt/optimizer.hpp"
#include "copyopt/pipeline.hpp"
#include "copyopt/vector_index.hpp"
#include "json.hpp"

namespace copyopt {

using nlohmann::json;

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  return in;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << content;
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

// ---- catalog -------------------------------------------------------------

inline json product_to_json(const ProductRecord& p) {
  return json{{"id", p.id},
              {"category", std::string(category_name(p.category))},
              {"title", p.title},
              {"description", p.description},
              {"price", p.price},
              {"margin", p.margin},
              {"stock", p.stock}};
}

inline ProductRecord product_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::parse_error, "product must be a JSON object");
  static const std::unordered_set<std::string> known{"id", "category", "title", "description", "price", "margin", "stock"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error(Errc::parse_error, "unknown product field '" + key + "'");
  }
  auto need = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw Error(Errc::parse_error, std::string("missing field '") + key + "'");
    return *it;
  };
  ProductRecord p;
  try {
    p.id = need("id").get<std::string>();
    p.category = parse_category(need("category").get<std::string>());
    p.title = need("title").get<std::string>();
    p.description = j.value("description", std::string{});
    p.price = need("price").get<double>();
    p.margin = need("margin").get<double>();
    p.stock = need("stock").get<long long>();
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, e.what());
  }
  if (p.id.empty()) throw Error(Errc::parse_error, "empty product id");
  if (!(p.price > 0.0)) throw Error(Errc::parse_error, "price must be > 0");
  if (!(p.margin >= 0.0 && p.margin <= 1.0)) throw Error(Errc::parse_error, "margin must be in [0,1]");
  if (p.stock < 0) throw Error(Errc::parse_error, "stock must be >= 0");
  return p;
}

// One product per line; embeddings are always recomputed. Errors name the
// offending line.
inline std::vector<ProductRecord> read_catalog(std::istream& in, const FeatureConfig& cfg,
                                               const std::string& source = "catalog") {
  std::vector<ProductRecord> products;
  std::unordered_set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto p = product_from_json(json::parse(line));
      if (!ids.insert(p.id).second) throw Error(Errc::duplicate_id, p.id);
      embed_product(p, cfg);
      products.push_back(std::move(p));
    } catch (const json::parse_error& e) {
      throw Error(Errc::parse_error, source + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code() == Errc::duplicate_id ? Errc::duplicate_id : Errc::parse_error,
                  source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return products;
}

inline std::vector<ProductRecord> load_catalog(const std::filesystem::path& path, const FeatureConfig& cfg) {
  auto in = open_input(path);
  return read_catalog(in, cfg, path.string());
}

// ---- model ---------------------------------------------------------------

inline json model_to_json(const LogisticModel& m) {
  json theta = json::array();
  for (const auto& [name, coef] : m.theta) theta.push_back(json{{"feature", name}, {"coefficient", coef}});
  json out{{"features", theta}, {"intercept", m.intercept}};
  if (m.trained_on) {
    const auto& t = *m.trained_on;
    out["trained_on"] = json{{"n_samples", t.n_samples},
                             {"n_positives", t.n_positives},
                             {"final_loss", t.final_loss},
                             {"epochs_run", t.epochs_run},
                             {"hyperparameters",
                              {{"learning_rate", t.hyper.learning_rate},
                               {"epochs", t.hyper.epochs},
                               {"l2", t.hyper.l2},
                               {"tolerance", t.hyper.tolerance}}}};
  }
  return out;
}

inline LogisticModel model_from_json(const json& j) {
  LogisticModel m;
  try {
    for (const auto& f : j.at("features")) m.theta.emplace_back(f.at("feature").get<std::string>(), f.at("coefficient").get<double>());
    m.intercept = j.at("intercept").get<double>();
    if (auto it = j.find("trained_on"); it != j.end()) {
      TrainingRecord t;
      t.n_samples = it->at("n_samples").get<std::size_t>();
      t.n_positives = it->at("n_positives").get<std::size_t>();
      t.final_loss = it->at("final_loss").get<double>();
      t.epochs_run = it->at("epochs_run").get<int>();
      const auto& h = it->at("hyperparameters");
      t.hyper = {h.at("learning_rate").get<double>(), h.at("epochs").get<int>(), h.at("l2").get<double>(),
                 h.at("tolerance").get<double>()};
      m.trained_on = t;
    }
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("model: ") + e.what());
  }
  for (const auto& [name, coef] : m.theta) {
    if (!std::isfinite(coef)) throw Error(Errc::parse_error, "model: non-finite coefficient " + name);
  }
  return m;
}

// Doubles are written in shortest round-trip form, so save/load is exact.
inline void save_model(const std::filesystem::path& path, const LogisticModel& m) {
  write_file(path, model_to_json(m).dump(2) + "\n");
}

inline LogisticModel load_model(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  return model_from_json(detail::parse_json_document(text, path.string()));
}

// ---- labeled training CSV -----------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

inline double parse_double_cell(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::parse_error, where + ": bad number '" + s + "'");
  }
}

inline long long parse_int_cell(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::parse_error, where + ": bad integer '" + s + "'");
  }
}

}  // namespace detail

inline const std::vector<std::string>& training_columns() {
  static const std::vector<std::string> cols{"keyword_strength", "cta_density", "sentiment", "readability"};
  return cols;
}

// Header: keyword_strength,cta_density,sentiment,readability[,extra...],label
inline std::vector<LabeledSample> read_training_csv(std::istream& in, const std::string& source = "training") {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::parse_error, source + ": empty file");
  const auto header = detail::split_csv_line(line);
  const auto& base = training_columns();
  if (header.size() < base.size() + 1 || header.back() != "label" ||
      !std::equal(base.begin(), base.end(), header.begin())) {
    throw Error(Errc::parse_error, source + ":1: header must start with keyword_strength,cta_density,sentiment,readability and end with label");
  }
  std::vector<LabeledSample> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = source + ":" + std::to_string(lineno);
    if (cells.size() != header.size()) throw Error(Errc::parse_error, where + ": expected " + std::to_string(header.size()) + " columns");
    FeatureVector f;
    f.keyword_strength = detail::parse_double_cell(cells[0], where);
    f.cta_density = detail::parse_double_cell(cells[1], where);
    f.sentiment = detail::parse_double_cell(cells[2], where);
    f.readability = detail::parse_double_cell(cells[3], where);
    for (std::size_t c = base.size(); c + 1 < cells.size(); ++c) f.extra[header[c]] = detail::parse_double_cell(cells[c], where);
    const long long label = detail::parse_int_cell(cells.back(), where);
    if (label != 0 && label != 1) throw Error(Errc::parse_error, where + ": label must be 0 or 1");
    out.emplace_back(std::move(f), static_cast<int>(label));
  }
  return out;
}

inline std::string format_real(double x, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, x);
  return buf;
}

inline std::string write_training_csv(const std::vector<LabeledSample>& data) {
  std::ostringstream out;
  const auto& base = training_columns();
  for (const auto& c : base) out << c << ',';
  if (!data.empty()) {
    for (const auto& [name, value] : data.front().first.extra) out << name << ',';
  }
  out << "label\n";
  for (const auto& [f, y] : data) {
    for (const auto& [name, value] : f.named()) out << format_real(value, 9) << ',';
    out << y << '\n';
  }
  return out.str();
}

// ---- candidates ----------------------------------------------------------

inline json features_to_json(const FeatureVector& f) {
  json out = json::object();
  for (const auto& [name, value] : f.named()) out[name] = value;
  return out;
}

inline json verdict_to_json(const ReviewVerdict& v) {
  json violations = json::array();
  for (const auto& x : v.violations) violations.push_back(json{{"rule", x.rule}, {"reason", x.reason}});
  return json{{"passed", v.passed}, {"violations", violations}};
}

inline json candidate_to_json(const CopyCandidate& c) {
  json out{{"id", c.id}, {"product_id", c.product_id}, {"text", c.text}, {"features", features_to_json(c.features)}};
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  out["diversity_contribution"] = opt(c.diversity_contribution);
  out["p_conv"] = opt(c.p_conv);
  out["reward"] = opt(c.reward);
  return out;
}

inline std::string ranked_to_jsonl(const std::vector<RankedCandidate>& ranked, Category category) {
  std::string out;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    json j = candidate_to_json(ranked[i].candidate);
    j["rank"] = i + 1;
    j["category"] = std::string(category_name(category));
    j["relevance"] = ranked[i].relevance;
    j["verdict"] = verdict_to_json(ranked[i].verdict);
    out += j.dump() + "\n";
  }
  return out;
}

// A served or generated copy as read back from JSONL. Only text-derived
// fields are trusted; embeddings and features are recomputed.
struct CandidateRecord {
  CopyCandidate candidate;
  std::optional<Category> category;
};

inline std::vector<CandidateRecord> read_candidates(std::istream& in, const FeatureConfig& cfg,
                                                    const std::string& source = "candidates") {
  std::vector<CandidateRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    try {
      const auto j = json::parse(line);
      CandidateRecord r;
      r.candidate = make_candidate(j.at("id").get<std::string>(), j.value("product_id", std::string{}),
                                   j.at("text").get<std::string>(), cfg);
      auto load_opt = [&](const char* key, std::optional<double>& dst) {
        if (auto it = j.find(key); it != j.end() && it->is_number()) dst = it->get<double>();
      };
      load_opt("diversity_contribution", r.candidate.diversity_contribution);
      load_opt("p_conv", r.candidate.p_conv);
      load_opt("reward", r.candidate.reward);
      if (auto it = j.find("category"); it != j.end() && it->is_string()) r.category = parse_category(it->get<std::string>());
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(Errc::parse_error, where + ": " + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + ": " + e.what());
    }
  }
  return out;
}

// ---- events CSV ----------------------------------------------------------

inline constexpr const char* kEventHeader = "session_id,arm,impressions,clicks,add_to_carts,orders";

inline std::vector<SessionEvent> read_events_csv(std::istream& in, const std::string& source = "events") {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::parse_error, source + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kEventHeader) throw Error(Errc::parse_error, source + ":1: expected header '" + std::string(kEventHeader) + "'");
  std::vector<SessionEvent> events;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = source + ":" + std::to_string(lineno);
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != 6) throw Error(Errc::parse_error, where + ": expected 6 columns");
    SessionEvent e;
    e.session_id = cells[0];
    try {
      e.arm = parse_arm(cells[1]);
    } catch (const Error&) {
      throw Error(Errc::parse_error, where + ": unknown arm '" + cells[1] + "'");
    }
    e.counts.impressions = detail::parse_int_cell(cells[2], where);
    e.counts.clicks = detail::parse_int_cell(cells[3], where);
    e.counts.add_to_carts = detail::parse_int_cell(cells[4], where);
    e.counts.orders = detail::parse_int_cell(cells[5], where);
    try {
      check_funnel(e);
    } catch (const Error& err) {
      throw Error(Errc::funnel_violation, where + ": " + err.what());
    }
    events.push_back(std::move(e));
  }
  return events;
}

inline std::string write_events_csv(const std::vector<SessionEvent>& events) {
  std::string out = std::string(kEventHeader) + "\n";
  for (const auto& e : events) {
    out += e.session_id + "," + std::string(arm_name(e.arm)) + "," + std::to_string(e.counts.impressions) + "," +
           std::to_string(e.counts.clicks) + "," + std::to_string(e.counts.add_to_carts) + "," +
           std::to_string(e.counts.orders) + "\n";
  }
  return out;
}

// ---- A/B report ----------------------------------------------------------

inline json report_to_json(const AbReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json arms = json::array();
  for (const auto& a : r.arms) {
    arms.push_back(json{{"arm", std::string(arm_name(a.arm))},
                        {"impressions", a.counts.impressions},
                        {"clicks", a.counts.clicks},
                        {"add_to_carts", a.counts.add_to_carts},
                        {"orders", a.counts.orders},
                        {"ctr", opt(a.ctr)},
                        {"atc_rate", opt(a.atc_rate)},
                        {"cvr", opt(a.cvr)}});
  }
  json cmps = json::array();
  for (const auto& c : r.comparisons) {
    json j{{"treatment", std::string(arm_name(c.treatment))},
           {"control", std::string(arm_name(c.control))},
           {"metric", std::string(metric_name(c.metric))}};
    if (c.error) {
      j["error"] = *c.error;
    } else {
      j["lift"] = opt(c.lift);
      j["z"] = c.z;
      j["p_z"] = c.p_z;
      j["chi2"] = c.chi2;
      j["p_chi2"] = c.p_chi2;
      j["significant"] = c.significant;
    }
    cmps.push_back(j);
  }
  return json{{"alpha", r.alpha}, {"arms", arms}, {"comparisons", cmps}};
}

inline std::string report_table(const AbReport& r) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-12s %12s %10s %10s %10s %8s %8s %8s\n", "arm", "impressions", "clicks", "atc",
                "orders", "ctr%", "atc%", "cvr%");
  out << buf;
  auto pct = [](const std::optional<double>& v) { return v ? format_real(*v, 3) : std::string("n/a"); };
  for (const auto& a : r.arms) {
    std::snprintf(buf, sizeof buf, "%-12s %12lld %10lld %10lld %10lld %8s %8s %8s\n", std::string(arm_name(a.arm)).c_str(),
                  a.counts.impressions, a.counts.clicks, a.counts.add_to_carts, a.counts.orders, pct(a.ctr).c_str(),
                  pct(a.atc_rate).c_str(), pct(a.cvr).c_str());
    out << buf;
  }
  out << '\n';
  std::snprintf(buf, sizeof buf, "%-12s %-9s %9s %9s %11s %9s %11s %s\n", "treatment", "metric", "lift%", "z", "p_z",
                "chi2", "p_chi2", "sig");
  out << buf;
  for (const auto& c : r.comparisons) {
    if (c.error) {
      std::snprintf(buf, sizeof buf, "%-12s %-9s %s\n", std::string(arm_name(c.treatment)).c_str(),
                    std::string(metric_name(c.metric)).c_str(), c.error->c_str());
    } else {
      const std::string lift = c.lift ? format_real(100.0 * *c.lift, 2) : std::string("n/a");
      std::snprintf(buf, sizeof buf, "%-12s %-9s %9s %9.4f %11.4g %9.4f %11.4g %s\n",
                    std::string(arm_name(c.treatment)).c_str(), std::string(metric_name(c.metric)).c_str(),
                    lift.c_str(), c.z, c.p_z, c.chi2, c.p_chi2, c.significant ? "yes" : "no");
    }
    out << buf;
  }
  return out.str();
}

}  // namespace copyopt

#endif  // COPYOPT_IO_HPP
