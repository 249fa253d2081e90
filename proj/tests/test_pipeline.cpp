#include <gtest/gtest.h>

#include <atomic>
#include <random>
#include <thread>

#include "copyopt/http_generator.hpp"
#include "copyopt/pipeline.hpp"
#include "test_util.hpp"

using namespace copyopt;

namespace {

ProductRecord sample_product(const FeatureConfig& cfg) {
  ProductRecord p;
  p.id = "SKU1";
  p.category = Category::FMCG;
  p.title = "Oat Crunch Granola";
  p.description = "Crunchy baked granola clusters with oats and honey.";
  p.price = 4.5;
  p.margin = 0.4;
  p.stock = 12;
  embed_product(p, cfg);
  return p;
}

Config pipeline_config() {
  Config cfg = default_config();
  cfg.feature = testutil::small_feature_config();
  cfg.generation.default_templates = {
      "{title}: {crunchy|fresh|wholesome} and only {price}. {cta}",
      "Meet {title} for the {persona}. {cta}",
      "{title}, only {stock} left! {cta}",
  };
  cfg.optimizer.top_k = 3;
  cfg.optimizer.filter_m = 6;
  cfg.retrieval.relevance_threshold = 0.05;
  return cfg;
}

LogisticModel flat_model() {
  LogisticModel m;
  m.intercept = -2.0;
  m.theta = {{"keyword_strength", 1.0}, {"cta_density", 2.0}, {"sentiment", 0.5}, {"readability", 0.0}};
  return m;
}

class FixedGenerator : public Generator {
 public:
  explicit FixedGenerator(std::vector<std::string> texts) : texts_(std::move(texts)) {}
  std::vector<std::string> generate(const GenerationRequest&) override { return texts_; }

 private:
  std::vector<std::string> texts_;
};

}  // namespace

TEST(Templates, FillsSlotsAndSentenceCases) {
  GenerationRequest req;
  req.product.title = "granola";
  req.product.price = 4.5;
  req.product.stock = 7;
  req.product.category = Category::FMCG;
  req.persona = "runner";
  req.query = "breakfast";
  req.n = 1;
  TemplateGenerator gen({"{title} at {price} for {persona}, {stock} left in {category}. {query}? {cta}"}, {"buy now"});
  EXPECT_EQ(gen.generate(req).at(0), "Granola at 4.50 for runner, 7 left in fmcg. Breakfast? Buy now");
}

TEST(Templates, UnknownSlotThrows) {
  try {
    TemplateGenerator gen({"{title} {colour}"}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::unknown_slot);
  }
  EXPECT_THROW(TemplateGenerator({}, {}), Error);
}

TEST(Templates, ChoicesCoverAllOptionsAndAreSeedDeterministic) {
  TemplateGenerator gen({"{red|green|blue}"}, {});
  GenerationRequest req;
  req.n = 200;
  req.seed = 9;
  const auto a = gen.generate(req);
  EXPECT_EQ(a, gen.generate(req));
  for (const char* c : {"Red", "Green", "Blue"}) EXPECT_NE(std::find(a.begin(), a.end(), c), a.end()) << c;
  req.seed = 10;
  EXPECT_NE(a, gen.generate(req));
}

TEST(Templates, CandidateIdsAndFeatures) {
  const auto cfg = testutil::small_feature_config();
  GenerationRequest req;
  req.product = sample_product(cfg);
  req.n = 3;
  const auto cs = template_generate(req, {"{title}. {cta}"}, cfg);
  ASSERT_EQ(cs.size(), 3u);
  EXPECT_EQ(cs[0].id, "SKU1#000");
  EXPECT_EQ(cs[2].id, "SKU1#002");
  for (const auto& c : cs) {
    EXPECT_EQ(c.product_id, "SKU1");
    EXPECT_EQ(c.features, extract_features(c.text, cfg));
    EXPECT_EQ(c.embedding, embed(c.text, cfg));
  }
}

TEST(Relevance, ThresholdIsInclusive) {
  const auto cfg = testutil::small_feature_config();
  const auto p = sample_product(cfg);
  std::vector<CopyCandidate> cs{make_candidate("a", p.id, p.title + " " + p.description, cfg),
                                make_candidate("b", p.id, "zzz qqq xxx", cfg)};
  const auto kept = relevance_filter(cs, p, 1.0);
  ASSERT_EQ(kept.size(), 1u);
  EXPECT_EQ(kept[0].id, "a");
  EXPECT_EQ(relevance_filter(cs, p, 0.0).size(), 2u);
}

TEST(Business, UrgencyAndRanking) {
  EXPECT_EQ(urgency(0), 1.0);
  EXPECT_EQ(urgency(25), 0.75);
  EXPECT_EQ(urgency(500), 0.0);
  EXPECT_EQ(urgency(-3), 1.0);
  EXPECT_THROW(urgency(1, 0), Error);

  std::vector<BusinessItem> items{{testutil::candidate_with("a", {1}), 0.9, 0.1, 0.0, 0.0},
                                  {testutil::candidate_with("b", {1}), 0.2, 0.9, 1.0, 0.0},
                                  {testutil::candidate_with("c", {1}), 0.9, 0.1, 0.0, 0.0}};
  const auto ranked = business_rank(items, {0.5, 0.3, 0.2});
  // a, c: 0.45 + 0.03 = 0.48; b: 0.1 + 0.27 + 0.2 = 0.57
  EXPECT_EQ(ranked[0].candidate.id, "b");
  EXPECT_EQ(ranked[1].candidate.id, "a");
  EXPECT_EQ(ranked[2].candidate.id, "c");
  EXPECT_NEAR(ranked[0].score, 0.57, 1e-15);
  try {
    business_rank(items, {0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::all_zero_weights);
  }
  EXPECT_THROW(business_rank(items, {-1, 1, 1}), Error);
}

TEST(Review, ForbiddenWordFailsAndAllViolationsAreCollected) {
  ReviewRules rules;
  rules.forbidden_words = {"miracle", "guaranteed"};
  rules.max_length = 20;
  rules.required_patterns[Category::FMCG] = {{"fresh", "natural"}};
  rules.brand_tone[Category::FMCG] = {0.0, 1.0};
  auto c = make_candidate("x", "p", "Miracle cure, GUARANTEED awful results", testutil::small_feature_config());
  const auto v = review(c, rules, Category::FMCG);
  EXPECT_FALSE(v.passed);
  ASSERT_EQ(v.violations.size(), 5u);
  EXPECT_EQ(v.violations[0].rule, "forbidden_word");
  EXPECT_EQ(v.violations[1].rule, "forbidden_word");
  EXPECT_EQ(v.violations[2].rule, "max_length");
  EXPECT_EQ(v.violations[3].rule, "required_pattern");
  EXPECT_EQ(v.violations[4].rule, "brand_tone");
  // Other categories only see the global rules.
  EXPECT_EQ(review(c, rules, Category::Apparel).violations.size(), 3u);
}

TEST(Review, MatchesWholeTokensOnly) {
  ReviewRules rules;
  rules.forbidden_words = {"cure"};
  const auto cfg = testutil::small_feature_config();
  EXPECT_TRUE(review(make_candidate("a", "p", "Secure checkout", cfg), rules, Category::Other).passed);
  EXPECT_FALSE(review(make_candidate("b", "p", "The cure!", cfg), rules, Category::Other).passed);
}

TEST(Review, LengthCountsCodePoints) {
  ReviewRules rules;
  rules.max_length = 4;
  const auto cfg = testutil::small_feature_config();
  EXPECT_TRUE(review(make_candidate("a", "p", "caf\xC3\xA9", cfg), rules, Category::Other).passed);
  EXPECT_FALSE(review(make_candidate("b", "p", "cafes", cfg), rules, Category::Other).passed);
}

TEST(ReviewProperties, AddingRulesNeverUnfails) {
  std::mt19937_64 rng(41);
  const auto cfg = testutil::small_feature_config();
  const std::vector<std::string> pool{"buy", "free", "awful", "deal", "today", "limited-edition", "cart"};
  for (int trial = 0; trial < 2000; ++trial) {
    const auto c = make_candidate("c", "p", testutil::random_text(rng, 15), cfg);
    ReviewRules rules;
    rules.max_length = 0;
    std::size_t before = review(c, rules, Category::FMCG).violations.size();
    for (int step = 0; step < 4; ++step) {
      switch (rng() % 4) {
        case 0: rules.forbidden_words.push_back(pool[rng() % pool.size()]); break;
        case 1: rules.max_length = rules.max_length == 0 ? 10 + rng() % 100 : rules.max_length; break;
        case 2: rules.required_patterns[Category::FMCG].push_back({pool[rng() % pool.size()]}); break;
        case 3: rules.brand_tone[Category::FMCG] = {-0.5, 0.5}; break;
      }
      const auto v = review(c, rules, Category::FMCG);
      ASSERT_GE(v.violations.size(), before);
      ASSERT_EQ(v.passed, v.violations.empty());
      before = v.violations.size();
    }
  }
}

TEST(RunPipeline, ProducesRankedReviewedCandidates) {
  const auto cfg = pipeline_config();
  GenerationRequest req;
  req.product = sample_product(cfg.feature);
  req.persona = "busy parent";
  req.n = 12;
  req.seed = 3;
  const auto out = run_pipeline(req, flat_model(), cfg, 0.6);
  ASSERT_FALSE(out.empty());
  ASSERT_LE(out.size(), cfg.optimizer.top_k);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& c = out[i].candidate;
    ASSERT_TRUE(c.reward.has_value());
    EXPECT_GE(out[i].relevance, cfg.retrieval.relevance_threshold);
    EXPECT_TRUE(out[i].verdict.passed);
    if (i > 0) {
      EXPECT_GE(*out[i - 1].candidate.reward, *c.reward);
    }
  }
  const auto again = run_pipeline(req, flat_model(), cfg, 0.6);
  ASSERT_EQ(again.size(), out.size());
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(again[i].candidate.text, out[i].candidate.text);
}

TEST(RunPipeline, ReviewFailuresStayFlagged) {
  auto cfg = pipeline_config();
  cfg.review.forbidden_words = {"granola"};
  GenerationRequest req;
  req.product = sample_product(cfg.feature);
  req.n = 8;
  const auto out = run_pipeline(req, flat_model(), cfg, 0.5);
  ASSERT_FALSE(out.empty());
  for (const auto& r : out) {
    EXPECT_FALSE(r.verdict.passed);
    EXPECT_EQ(r.verdict.violations.at(0).rule, "forbidden_word");
  }
}

TEST(RunPipeline, BusinessFinalSort) {
  auto cfg = pipeline_config();
  cfg.business.final_sort = FinalSort::Business;
  GenerationRequest req;
  req.product = sample_product(cfg.feature);
  req.n = 12;
  const auto out = run_pipeline(req, flat_model(), cfg, 0.5);
  for (std::size_t i = 1; i < out.size(); ++i) EXPECT_GE(out[i - 1].relevance, out[i].relevance);
}

TEST(RunPipeline, Errors) {
  auto cfg = pipeline_config();
  cfg.retrieval.relevance_threshold = 0.5;
  GenerationRequest req;
  req.product = sample_product(cfg.feature);
  req.n = 0;
  EXPECT_THROW(run_pipeline(req, flat_model(), cfg, 0.5), Error);
  req.n = cfg.generation.max_n + 1;
  EXPECT_THROW(run_pipeline(req, flat_model(), cfg, 0.5), Error);

  req.n = 2;
  FixedGenerator unrelated({"zzz qqq", "xxyy vvww"});
  try {
    run_pipeline(req, flat_model(), cfg, 0.5, unrelated);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::empty_after_filters);
  }
  FixedGenerator none({});
  EXPECT_THROW(run_pipeline(req, flat_model(), cfg, 0.5, none), Error);
}

TEST(RunPipeline, DedupCollapsesRepeats) {
  const auto cfg = pipeline_config();
  GenerationRequest req;
  req.product = sample_product(cfg.feature);
  req.n = 4;
  FixedGenerator repeats({"Oat Crunch Granola, buy now", "Oat Crunch Granola, buy now",
                          "Oat crunch granola. Buy now!", "Honey oats granola clusters"});
  const auto out = run_pipeline(req, flat_model(), cfg, 0.5, repeats);
  EXPECT_EQ(out.size(), 2u);
}

// ---- HTTP generator ---------------------------------------------------------

class HttpGeneratorTest : public ::testing::Test {
 protected:
  void SetUp() override {
    server_.Post("/gen", [this](const httplib::Request& req, httplib::Response& res) {
      ++calls_;
      const auto body = nlohmann::json::parse(req.body);
      last_body_ = body;
      if (fail_first_ > 0) {
        --fail_first_;
        res.status = 503;
        return;
      }
      nlohmann::json out;
      for (int i = 0; i < body.at("n").get<int>(); ++i) {
        out["candidates"].push_back(body.at("product").at("title").get<std::string>() + " #" + std::to_string(i));
      }
      res.set_content(out.dump(), "application/json");
    });
    server_.Post("/bad", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("{\"oops\": 1}", "application/json");
    });
    server_.Post("/denied", [](const httplib::Request&, httplib::Response& res) { res.status = 403; });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  void TearDown() override {
    server_.stop();
    thread_.join();
  }

  HttpGeneratorConfig config(const std::string& path) {
    HttpGeneratorConfig cfg;
    cfg.url = "http://127.0.0.1:" + std::to_string(port_) + path;
    cfg.timeout_ms = 2000;
    cfg.retries = 2;
    return cfg;
  }

  GenerationRequest request() {
    GenerationRequest req;
    req.product.id = "P9";
    req.product.title = "Trail Shoe";
    req.product.category = Category::Apparel;
    req.persona = "hiker";
    req.n = 3;
    req.seed = 77;
    return req;
  }

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> calls_{0};
  int fail_first_ = 0;
  nlohmann::json last_body_;
};

TEST_F(HttpGeneratorTest, RoundTrip) {
  HttpGenerator gen(config("/gen"));
  const auto out = gen.generate(request());
  EXPECT_EQ(out, (std::vector<std::string>{"Trail Shoe #0", "Trail Shoe #1", "Trail Shoe #2"}));
  EXPECT_EQ(last_body_.at("product").at("category"), "apparel");
  EXPECT_EQ(last_body_.at("persona"), "hiker");
  EXPECT_EQ(last_body_.at("seed"), 77);
}

TEST_F(HttpGeneratorTest, RetriesServerErrors) {
  fail_first_ = 2;
  HttpGenerator gen(config("/gen"));
  EXPECT_EQ(gen.generate(request()).size(), 3u);
  EXPECT_EQ(calls_.load(), 3);
}

TEST_F(HttpGeneratorTest, GivesUpAfterRetries) {
  fail_first_ = 5;
  HttpGenerator gen(config("/gen"));
  try {
    gen.generate(request());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::generation_unavailable);
  }
  EXPECT_EQ(calls_.load(), 3);
}

TEST_F(HttpGeneratorTest, ClientErrorsAndMalformedBodiesFailFast) {
  HttpGenerator denied(config("/denied"));
  EXPECT_THROW(denied.generate(request()), Error);
  HttpGenerator bad(config("/bad"));
  EXPECT_THROW(bad.generate(request()), Error);
}

TEST(HttpGeneratorUrl, Parsing) {
  const auto u = parse_url("http://localhost:8080/v1/gen");
  EXPECT_EQ(u.origin, "http://localhost:8080");
  EXPECT_EQ(u.path, "/v1/gen");
  EXPECT_EQ(parse_url("http://host").path, "/");
  EXPECT_THROW(parse_url("https://host/x"), Error);
  EXPECT_THROW(parse_url("host/x"), Error);
}

TEST(HttpGeneratorUrl, UnreachableServiceIsUnavailable) {
  HttpGeneratorConfig cfg;
  cfg.url = "http://127.0.0.1:1/gen";
  cfg.timeout_ms = 200;
  cfg.retries = 1;
  HttpGenerator gen(cfg);
  try {
    gen.generate(GenerationRequest{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::generation_unavailable);
  }
}
