// copyopt command-line interface.
// Exit status: 0 success, 1 domain or I/O error, 2 usage error.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "copyopt/copyopt.hpp"
#include "copyopt/http_generator.hpp"

using namespace copyopt;
using nlohmann::json;

namespace {

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty() || out_path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_file(out_path, content);
  }
}

std::vector<double> parse_lambda_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size()) throw Error(Errc::validation_error, "bad lambda value '" + item + "'");
    out.push_back(v);
  }
  return out;
}

const ProductRecord& find_product(const std::vector<ProductRecord>& catalog, const std::string& id) {
  for (const auto& p : catalog) {
    if (p.id == id) return p;
  }
  throw Error(Errc::empty_input, "product " + id + " not in catalog");
}

// ---- generate -------------------------------------------------------------

struct GenerateArgs {
  std::string config, catalog, product, persona, query, out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

int cmd_generate(const GenerateArgs& a) {
  const Config cfg = load_config(a.config);
  const auto catalog = load_catalog(a.catalog, cfg.feature);
  const auto& product = find_product(catalog, a.product);
  GenerationRequest req{product, a.persona.empty() ? cfg.generation.persona : a.persona,
                        a.query.empty() ? product.title : a.query, a.n ? a.n : cfg.generation.n, a.seed};
  if (req.n > cfg.generation.max_n) {
    throw Error(Errc::out_of_range, "n must be in [1, " + std::to_string(cfg.generation.max_n) + "]");
  }
  auto gen = make_generator(cfg, product.category);
  std::string out;
  for (const auto& c : to_candidates(req, gen->generate(req), cfg.feature)) {
    json j = candidate_to_json(c);
    j["category"] = std::string(category_name(product.category));
    out += j.dump() + "\n";
  }
  emit(a.out, out);
  return 0;
}

// ---- rank -----------------------------------------------------------------

struct RankArgs {
  std::string config, catalog, model, product, query, category, out;
  std::optional<double> lambda;
  std::size_t k = 0, n = 0;
  std::uint64_t seed = 0;
};

int cmd_rank(const RankArgs& a) {
  if (a.model.empty()) throw Error(Errc::io_error, "rank needs a trained model (--model)");
  if (!std::filesystem::exists(a.model)) throw Error(Errc::io_error, "model file not found: " + a.model);
  Config cfg = load_config(a.config);
  const auto model = load_model(a.model);
  const auto catalog = load_catalog(a.catalog, cfg.feature);
  if (a.k) cfg.optimizer.top_k = a.k;
  const std::optional<Category> category = a.category.empty() ? std::nullopt : std::optional(parse_category(a.category));

  std::vector<ProductRecord> products;
  if (!a.product.empty()) {
    products.push_back(find_product(catalog, a.product));
  } else {
    std::vector<ProductRecord> pool;
    for (const auto& p : catalog) {
      if (!category || p.category == *category) pool.push_back(p);
    }
    if (pool.empty()) throw Error(Errc::empty_input, "no products in category " + a.category);
    const auto index = build_index(pool);
    for (const auto& hit : top_k(index, embed(a.query, cfg.feature), cfg.retrieval.k)) {
      products.push_back(find_product(pool, hit.id));
    }
  }

  std::string out;
  for (const auto& product : products) {
    const Category cat = category.value_or(product.category);
    const double lambda = a.lambda.value_or(cfg.lambda_for(cat));
    GenerationRequest req{product, cfg.generation.persona, a.query.empty() ? product.title : a.query,
                          a.n ? a.n : cfg.generation.n, a.seed};
    auto gen = make_generator(cfg, cat);
    out += ranked_to_jsonl(run_pipeline(req, model, cfg, lambda, *gen), cat);
  }
  emit(a.out, out);
  return 0;
}

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out;
  std::optional<double> lr, l2, tol;
  std::optional<std::size_t> epochs;
};

int cmd_train(const TrainArgs& a) {
  TrainHyper hyper = a.config.empty() ? TrainHyper{} : load_config(a.config).optimizer.train;
  if (a.lr) hyper.learning_rate = *a.lr;
  if (a.epochs) hyper.epochs = *a.epochs;
  if (a.l2) hyper.l2 = *a.l2;
  if (a.tol) hyper.tolerance = *a.tol;
  auto in = open_input(a.data);
  const auto data = read_training_csv(in, a.data);
  const auto model = train_logistic(data, hyper);
  emit(a.out, model_to_json(model).dump(2) + "\n");
  const auto& rec = *model.trained_on;
  std::fprintf(stderr, "trained on %zu samples (%zu positive): loss %.6f after %d epochs\n", rec.n_samples,
               rec.n_positives, rec.final_loss, rec.epochs_run);
  return 0;
}

// ---- abtest ---------------------------------------------------------------

struct AbtestArgs {
  std::string events, out;
  double alpha = 0.05;
};

int cmd_abtest(const AbtestArgs& a) {
  auto in = open_input(a.events);
  const auto report = evaluate_experiment(read_events_csv(in, a.events), a.alpha);
  if (!a.out.empty()) write_file(a.out, report_to_json(report).dump(2) + "\n");
  std::cout << report_table(report);
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string config, category, out;
  std::vector<std::string> served;
  std::vector<std::string> weights;
  std::size_t sessions = 0, threads = 0;
  std::uint64_t seed = 0;
};

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) return {"", s};
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int cmd_simulate(const SimulateArgs& a) {
  const Config cfg = load_config(a.config);
  const auto cal = load_configured_calibration(cfg);
  std::map<Arm, double> weight_of;
  for (const auto& w : a.weights) {
    const auto [arm, value] = split_assignment(w);
    weight_of[parse_arm(arm)] = parse_lambda_list(value).at(0);
  }

  std::optional<Category> recorded;
  std::vector<ArmSlate> arms;
  for (const auto& s : a.served) {
    auto [arm_text, path] = split_assignment(s);
    const Arm arm = arm_text.empty() ? Arm::Control : parse_arm(arm_text);
    auto in = open_input(path);
    ArmSlate slate{arm, weight_of.contains(arm) ? weight_of[arm] : 1.0, {}};
    for (auto& r : read_candidates(in, cfg.feature, path)) {
      if (!recorded && r.category) recorded = r.category;
      slate.served.push_back(std::move(r.candidate));
    }
    arms.push_back(std::move(slate));
  }
  if (a.category.empty() && !recorded) {
    throw Error(Errc::unknown_category, "no category given and none recorded in served files");
  }
  const Category category = a.category.empty() ? *recorded : parse_category(a.category);

  SimulationOptions opts;
  opts.policy = cfg.simulate.impression_policy;
  opts.threads = a.threads ? a.threads : cfg.simulate.threads;
  const auto events =
      simulate_experiment(arms, cal.at(category), a.sessions ? a.sessions : cfg.simulate.n_sessions, a.seed, opts);
  emit(a.out, write_events_csv(events));
  return 0;
}

// ---- sweep ----------------------------------------------------------------

struct SweepArgs {
  std::string config, catalog, model, lambdas = "0.2,0.4,0.6,0.8", category = "all", out;
  std::size_t sessions = 0, threads = 0;
  std::uint64_t seed = 0;
};

int cmd_sweep(const SweepArgs& a) {
  Config cfg = load_config(a.config);
  if (a.threads) cfg.simulate.threads = a.threads;
  const auto cal = load_configured_calibration(cfg);
  const auto model = load_model(a.model);
  const auto catalog = load_catalog(a.catalog, cfg.feature);
  const auto points = lambda_sweep(catalog, model, cal, parse_lambda_list(a.lambdas), parse_scope(a.category),
                                   a.sessions ? a.sessions : cfg.simulate.n_sessions, a.seed, cfg);
  emit(a.out, tradeoff_csv(points));
  return 0;
}

// ---- review ---------------------------------------------------------------

struct ReviewArgs {
  std::string config, candidates, category, out;
};

int cmd_review(const ReviewArgs& a) {
  const Config cfg = load_config(a.config);
  auto in = open_input(a.candidates);
  std::string out;
  for (const auto& r : read_candidates(in, cfg.feature, a.candidates)) {
    const Category cat = a.category.empty() ? r.category.value_or(Category::Other) : parse_category(a.category);
    json j{{"id", r.candidate.id}, {"category", std::string(category_name(cat))}};
    j["verdict"] = verdict_to_json(review(r.candidate, cfg.review, cat));
    out += j.dump() + "\n";
  }
  emit(a.out, out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"copyopt: generate, rank and evaluate product copy"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate candidate copy for one product (JSONL)");
  g->add_option("--config", gen.config)->required();
  g->add_option("--catalog", gen.catalog)->required();
  g->add_option("--product", gen.product)->required();
  g->add_option("--n", gen.n, "number of candidates (default: generation.n)");
  g->add_option("--persona", gen.persona);
  g->add_option("--query", gen.query);
  g->add_option("--seed", gen.seed)->required();
  g->add_option("--out", gen.out);

  RankArgs rank;
  auto* r = app.add_subcommand("rank", "Generate, score and rank copy (JSONL)");
  r->add_option("--config", rank.config)->required();
  r->add_option("--catalog", rank.catalog)->required();
  r->add_option("--model", rank.model, "trained model JSON");
  auto* r_product = r->add_option("--product", rank.product, "product id");
  auto* r_query = r->add_option("--query", rank.query, "retrieve products by free-text query");
  r_product->excludes(r_query);
  r->add_option("--lambda", rank.lambda, "diversity weight (default: per-category recommendation)")
      ->check(CLI::Range(0.0, 1.0));
  r->add_option("--k", rank.k, "copies to keep per product");
  r->add_option("--n", rank.n, "candidates to generate per product");
  r->add_option("--category", rank.category);
  r->add_option("--seed", rank.seed)->required();
  r->add_option("--out", rank.out);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Fit the conversion model from a labeled CSV");
  t->add_option("--config", train.config, "take hyperparameters from this config");
  t->add_option("--data", train.data)->required();
  t->add_option("--out", train.out)->required();
  t->add_option("--lr", train.lr);
  t->add_option("--epochs", train.epochs);
  t->add_option("--l2", train.l2);
  t->add_option("--tol", train.tol);

  AbtestArgs ab;
  auto* b = app.add_subcommand("abtest", "Evaluate an experiment event log");
  b->add_option("--events", ab.events)->required();
  b->add_option("--alpha", ab.alpha)->check(CLI::Range(0.0, 1.0));
  b->add_option("--out", ab.out, "write the JSON report here");

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Simulate sessions against served copy (event CSV)");
  s->add_option("--config", sim.config)->required();
  s->add_option("--served", sim.served, "[arm=]ranked.jsonl, repeatable")->required();
  s->add_option("--weight", sim.weights, "arm=weight, repeatable (default 1 each)");
  s->add_option("--category", sim.category);
  s->add_option("--sessions", sim.sessions);
  s->add_option("--threads", sim.threads);
  s->add_option("--seed", sim.seed)->required();
  s->add_option("--out", sim.out);

  SweepArgs sweep;
  auto* w = app.add_subcommand("sweep", "Lambda sweep through the simulator (trade-off CSV)");
  w->add_option("--config", sweep.config)->required();
  w->add_option("--catalog", sweep.catalog)->required();
  w->add_option("--model", sweep.model)->required();
  w->add_option("--lambdas", sweep.lambdas, "comma-separated, default 0.2,0.4,0.6,0.8");
  w->add_option("--category", sweep.category, "fmcg, apparel, electronics or all");
  w->add_option("--sessions", sweep.sessions);
  w->add_option("--threads", sweep.threads);
  w->add_option("--seed", sweep.seed)->required();
  w->add_option("--out", sweep.out);

  ReviewArgs rev;
  auto* v = app.add_subcommand("review", "Run the review gate over candidate JSONL");
  v->add_option("--config", rev.config)->required();
  v->add_option("--candidates", rev.candidates)->required();
  v->add_option("--category", rev.category);
  v->add_option("--out", rev.out);

  try {
    app.parse(argc, argv);
    if (*r && rank.product.empty() && rank.query.empty()) {
      throw CLI::RequiredError("rank needs --product or --query");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*r) return cmd_rank(rank);
    if (*t) return cmd_train(train);
    if (*b) return cmd_abtest(ab);
    if (*s) return cmd_simulate(sim);
    if (*w) return cmd_sweep(sweep);
    return cmd_review(rev);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
