// Offline data preparation:
//   history  synthesize a labeled training CSV from template copy
//   fit      grid-search the per-category behavior coefficients against the
//            target funnel rates and write the calibration file

#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "copyopt/copyopt.hpp"

using namespace copyopt;
using nlohmann::json;

namespace {

struct HistoryTruth {
  double intercept = -3.2;
  double keyword_strength = 4.0;
  double cta_density = 6.0;
  double sentiment = 0.8;
  double readability = 0.01;
};

int run_history(const std::string& config_path, const std::string& catalog_path, std::size_t rounds,
                std::uint64_t seed, const HistoryTruth& truth, const std::string& out_path) {
  const Config cfg = load_config(config_path);
  const auto catalog = load_catalog(catalog_path, cfg.feature);
  std::vector<LabeledSample> rows;
  std::uint64_t row = 0;
  for (const auto& product : catalog) {
    for (std::size_t r = 0; r < rounds; ++r) {
      GenerationRequest req{product, cfg.generation.persona, product.title, cfg.generation.n, mix64(seed + r)};
      for (const auto& c : template_generate(req, cfg.templates_for(product.category), cfg.feature)) {
        const auto& f = c.features;
        const double z = truth.intercept + truth.keyword_strength * f.keyword_strength +
                         truth.cta_density * f.cta_density + truth.sentiment * f.sentiment +
                         truth.readability * f.readability;
        FeatureVector base;
        base.keyword_strength = f.keyword_strength;
        base.cta_density = f.cta_density;
        base.sentiment = f.sentiment;
        base.readability = f.readability;
        rows.emplace_back(base, stream_uniform(seed, row++, 0) < sigmoid(z) ? 1 : 0);
      }
    }
  }
  write_file(out_path, write_training_csv(rows));
  std::size_t positives = 0;
  for (const auto& s : rows) positives += static_cast<std::size_t>(s.second);
  std::fprintf(stderr, "wrote %zu rows (%zu positive) to %s\n", rows.size(), positives, out_path.c_str());
  return 0;
}

// Target funnel rates, in percent.
struct Target {
  std::string name;
  CategoryScope scope;
  double lambda;
  double ctr;
  double cvr;
};

const std::vector<Target>& targets() {
  static const std::vector<Target> t{
      {"fmcg@0.6", Category::FMCG, 0.6, 12.1, 5.2},
      {"apparel@0.6", Category::Apparel, 0.6, 9.7, 4.0},
      {"electronics@0.6", Category::Electronics, 0.6, 8.5, 3.5},
      {"all@0.2", std::nullopt, 0.2, 11.3, 4.7},
      {"all@0.8", std::nullopt, 0.8, 9.1, 3.9},
  };
  return t;
}

constexpr double kCtrTolerance = 0.5;
constexpr double kCvrTolerance = 0.3;
const std::vector<double> kLambdas{0.2, 0.4, 0.6, 0.8};
const std::vector<Category> kCategories{Category::FMCG, Category::Apparel, Category::Electronics};

using Params = std::vector<double>;  // 8 coefficients per category, in kCategories order

BehaviorModel unpack(const Params& x, std::size_t c) {
  const double* v = x.data() + 8 * c;
  return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
}

const char* const kCoefNames[] = {"b0_click", "b_conv", "b_nov", "c0_atc", "c_conv", "d0_ord", "d_conv", "d_nov"};

// Sign of each coefficient: conversion appeal helps every stage (>= 0) and
// novelty can only distract (<= 0); intercepts are free.
const int kCoefSign[] = {0, 1, -1, 0, 1, 0, 1, -1};

bool feasible(std::size_t i, double v) {
  const int sign = kCoefSign[i % 8];
  return sign == 0 || (sign > 0 ? v >= 0.0 : v <= 0.0);
}

class Objective {
 public:
  Objective(std::map<double, std::vector<ServedSlate>> slates, double ridge, double ctr_step, double cvr_step)
      : slates_(std::move(slates)), ridge_(ridge), ctr_step_(ctr_step), cvr_step_(cvr_step) {}

  // Mean expected rates over the products in scope (equal traffic per product).
  ExpectedRates rates(const Params& x, const CategoryScope& scope, double lambda) const {
    ExpectedRates acc;
    std::size_t n = 0;
    for (const auto& s : slates_.at(lambda)) {
      if (scope && s.product.category != *scope) continue;
      const auto idx = std::find(kCategories.begin(), kCategories.end(), s.product.category) - kCategories.begin();
      const auto r = expected_rates(s.served, unpack(x, static_cast<std::size_t>(idx)));
      acc.ctr += r.ctr;
      acc.cvr += r.cvr;
      ++n;
    }
    acc.ctr /= static_cast<double>(n);
    acc.cvr /= static_cast<double>(n);
    return acc;
  }

  double fit_error(const Params& x) const {
    double e = 0.0;
    for (const auto& t : targets()) {
      const auto r = rates(x, t.scope, t.lambda);
      e += std::pow((r.ctr - t.ctr) / kCtrTolerance, 2) + std::pow((r.cvr - t.cvr) / kCvrTolerance, 2);
    }
    return e;
  }

  // Hinge on the pooled curve: each lambda step must lose at least the
  // configured margin of CTR and CVR.
  double trend_penalty(const Params& x) const {
    double e = 0.0;
    for (std::size_t i = 0; i + 1 < kLambdas.size(); ++i) {
      const auto a = rates(x, std::nullopt, kLambdas[i]);
      const auto b = rates(x, std::nullopt, kLambdas[i + 1]);
      e += std::pow(std::max(0.0, ctr_step_ - (a.ctr - b.ctr)) / kCtrTolerance, 2);
      e += std::pow(std::max(0.0, cvr_step_ - (a.cvr - b.cvr)) / kCvrTolerance, 2);
    }
    return 100.0 * e;
  }

  double operator()(const Params& x) const {
    double norm = 0.0;
    for (double v : x) norm += v * v;
    return fit_error(x) + trend_penalty(x) + ridge_ * norm;
  }

 private:
  std::map<double, std::vector<ServedSlate>> slates_;
  double ridge_;
  double ctr_step_;
  double cvr_step_;
};

struct SearchSettings {
  int half_width = 10;  // grid points on each side of the current value
  double initial_step = 0.5;
  double final_step = 1e-4;
  int max_sweeps = 2000;
};

// Cyclic coordinate search: scan a 2*half_width+1 point grid along one
// coefficient at a time, move to the best point, and halve the grid spacing
// once a full sweep stops improving.
Params grid_search(const Objective& f, Params x, const SearchSettings& s, json& trace) {
  double best = f(x);
  double step = s.initial_step;
  int sweeps = 0;
  while (step >= s.final_step && sweeps < s.max_sweeps) {
    ++sweeps;
    bool improved = false;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double center = x[i];
      double best_v = center;
      for (int k = -s.half_width; k <= s.half_width; ++k) {
        if (k == 0) continue;
        x[i] = center + step * k;
        if (!feasible(i, x[i])) continue;
        const double v = f(x);
        if (v < best - 1e-15) {
          best = v;
          best_v = x[i];
          improved = true;
        }
      }
      x[i] = best_v;
    }
    if (!improved) step /= 2.0;
  }
  trace = {{"sweeps", sweeps}, {"final_step", step}, {"objective", best}};
  return x;
}

int run_fit(const std::string& config_path, const std::string& catalog_path, const std::string& model_path,
            double ridge, double ctr_step, double cvr_step, const SearchSettings& settings,
            const std::string& version, const std::string& out_path) {
  const Config cfg = load_config(config_path);
  const auto catalog = load_catalog(catalog_path, cfg.feature);
  const auto model = load_model(model_path);

  std::vector<ProductRecord> products;
  for (const auto& p : catalog) {
    if (std::find(kCategories.begin(), kCategories.end(), p.category) != kCategories.end()) products.push_back(p);
  }
  std::map<double, std::vector<ServedSlate>> slates;
  for (double l : kLambdas) slates[l] = serve_slates(products, model, cfg, l, cfg.generation.seed);

  const Objective f(slates, ridge, ctr_step, cvr_step);
  json trace;
  const Params x = grid_search(f, Params(8 * kCategories.size(), 0.0), settings, trace);

  Calibration cal;
  cal.version = version;
  for (std::size_t c = 0; c < kCategories.size(); ++c) cal.models[kCategories[c]] = unpack(x, c);

  json target_list = json::array();
  json achieved = json::array();
  for (const auto& t : targets()) {
    const auto r = f.rates(x, t.scope, t.lambda);
    target_list.push_back({{"name", t.name}, {"category", scope_name(t.scope)}, {"lambda", t.lambda},
                           {"ctr", t.ctr}, {"cvr", t.cvr}});
    achieved.push_back({{"name", t.name}, {"ctr", r.ctr}, {"cvr", r.cvr}});
  }
  json curve = json::array();
  for (double l : kLambdas) {
    const auto r = f.rates(x, std::nullopt, l);
    curve.push_back({{"lambda", l}, {"ctr", r.ctr}, {"cvr", r.cvr}});
  }
  cal.provenance = {
      {"method", "cyclic coordinate grid search on expected funnel rates"},
      {"objective", "sum of squared errors scaled by tolerance (ctr 0.5pp, cvr 0.3pp) + trend hinge + ridge"},
      {"targets", target_list},
      {"grid",
       {{"points_per_axis", 2 * settings.half_width + 1},
        {"initial_step", settings.initial_step},
        {"final_step", settings.final_step},
        {"start", "all coefficients 0"},
        {"sign_constraints", "b_conv, c_conv, d_conv >= 0; b_nov, d_nov <= 0"}}},
      {"ridge", ridge},
      {"min_pooled_step", {{"ctr", ctr_step}, {"cvr", cvr_step}}},
      {"generation_seed", cfg.generation.seed},
      {"model", model_path},
      {"lambdas", kLambdas},
      {"achieved", achieved},
      {"pooled_curve", curve},
      {"fit_error", f.fit_error(x)},
      {"search", trace},
  };
  write_file(out_path, calibration_to_json(cal).dump(2) + "\n");

  for (const auto& a : achieved) {
    std::fprintf(stderr, "%-16s ctr %.3f cvr %.3f\n", a["name"].get<std::string>().c_str(), a["ctr"].get<double>(),
                 a["cvr"].get<double>());
  }
  for (std::size_t c = 0; c < kCategories.size(); ++c) {
    std::fprintf(stderr, "%s:", std::string(category_name(kCategories[c])).c_str());
    for (std::size_t k = 0; k < 8; ++k) std::fprintf(stderr, " %s=%.4f", kCoefNames[k], x[8 * c + k]);
    std::fprintf(stderr, "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copyopt-calibrate: training history and behavior calibration"};
  app.require_subcommand(1);

  std::string config = "data/config.json", catalog = "data/catalog.jsonl", out;
  std::uint64_t seed = 0;

  auto* history = app.add_subcommand("history", "Synthesize a labeled training CSV");
  std::size_t rounds = 20;
  HistoryTruth truth;
  history->add_option("--config", config)->check(CLI::ExistingFile);
  history->add_option("--catalog", catalog)->check(CLI::ExistingFile);
  history->add_option("--rounds", rounds, "generation rounds per product")->check(CLI::PositiveNumber);
  history->add_option("--seed", seed)->required();
  history->add_option("--intercept", truth.intercept);
  history->add_option("--w-keyword", truth.keyword_strength);
  history->add_option("--w-cta", truth.cta_density);
  history->add_option("--w-sentiment", truth.sentiment);
  history->add_option("--w-readability", truth.readability);
  history->add_option("--out", out)->required();

  auto* fit = app.add_subcommand("fit", "Fit behavior coefficients and write a calibration file");
  std::string model = "data/model.json", version = "1";
  double ridge = 1e-4, ctr_step = 0.3, cvr_step = 0.1;
  SearchSettings settings;
  fit->add_option("--config", config)->check(CLI::ExistingFile);
  fit->add_option("--catalog", catalog)->check(CLI::ExistingFile);
  fit->add_option("--model", model)->check(CLI::ExistingFile);
  fit->add_option("--ridge", ridge);
  fit->add_option("--min-ctr-step", ctr_step, "required pooled CTR drop per lambda step (pp)");
  fit->add_option("--min-cvr-step", cvr_step, "required pooled CVR drop per lambda step (pp)");
  fit->add_option("--half-width", settings.half_width)->check(CLI::PositiveNumber);
  fit->add_option("--initial-step", settings.initial_step)->check(CLI::PositiveNumber);
  fit->add_option("--final-step", settings.final_step)->check(CLI::PositiveNumber);
  fit->add_option("--version", version);
  fit->add_option("--out", out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  try {
    if (*history) return run_history(config, catalog, rounds, seed, truth, out);
    return run_fit(config, catalog, model, ridge, ctr_step, cvr_step, settings, version, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
