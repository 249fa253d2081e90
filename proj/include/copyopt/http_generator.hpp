#ifndef COPYOPT_HTTP_GENERATOR_HPP
#define COPYOPT_HTTP_GENERATOR_HPP

// Generator backed by an external copy-writing service.
//
// POST <url> with {"product": {...}, "persona", "query", "n", "seed"};
// the service answers {"candidates": ["text", ...]}.

#include <string>
#include <vector>

#include "copyopt/config.hpp"
#include "copyopt/error.hpp"
#include "copyopt/pipeline.hpp"
#include "httplib.h"
#include "json.hpp"

namespace copyopt {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http") {
    throw Error(Errc::validation_error, "generator url must start with http://: " + url);
  }
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

class HttpGenerator : public Generator {
 public:
  explicit HttpGenerator(HttpGeneratorConfig cfg) : cfg_(std::move(cfg)), url_(parse_url(cfg_.url)) {}

  std::vector<std::string> generate(const GenerationRequest& req) override {
    const nlohmann::json body{{"product",
                               {{"id", req.product.id},
                                {"category", std::string(category_name(req.product.category))},
                                {"title", req.product.title},
                                {"description", req.product.description},
                                {"price", req.product.price},
                                {"stock", req.product.stock}}},
                              {"persona", req.persona},
                              {"query", req.query},
                              {"n", req.n},
                              {"seed", req.seed}};
    httplib::Client client(url_.origin);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    std::string last_error;
    for (long long attempt = 0; attempt <= cfg_.retries; ++attempt) {
      auto res = client.Post(url_.path, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error(Errc::generation_unavailable, "generator returned HTTP " + std::to_string(res->status));
      }
      return parse_response(res->body);
    }
    throw Error(Errc::generation_unavailable, "generator at " + cfg_.url + " failed after " +
                                                  std::to_string(cfg_.retries + 1) + " attempt(s): " + last_error);
  }

 private:
  static std::vector<std::string> parse_response(const std::string& text) {
    try {
      const auto j = nlohmann::json::parse(text);
      return j.at("candidates").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::generation_unavailable, std::string("malformed generator response: ") + e.what());
    }
  }

  HttpGeneratorConfig cfg_;
  ParsedUrl url_;
};

// The generator named by generation.generator.
inline std::unique_ptr<Generator> make_generator(const Config& cfg, Category category) {
  if (cfg.generation.generator == "http") return std::make_unique<HttpGenerator>(cfg.generation.http);
  return make_template_generator(cfg, category);
}

}  // namespace copyopt

#endif  // COPYOPT_HTTP_GENERATOR_HPP
