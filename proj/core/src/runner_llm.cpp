#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <fstream>
#include <thread>

#include "checkpoint_io.hpp"
#include "dcgsql/runner.hpp"
#include "httplib.h"
#include "json.hpp"

namespace dcgsql {

using nlohmann::json;

// ---------------------------------------------------------------------------
// HTTP client
// ---------------------------------------------------------------------------

HttpLlmClient::HttpLlmClient(std::string base_url, std::string auth_token, int max_retries)
    : base_url_(std::move(base_url)),
      auth_token_(std::move(auth_token)),
      max_retries_(max_retries) {
  if (base_url_.empty()) throw UserError("LLM base URL is empty");
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

std::string HttpLlmClient::post(const std::string& path, const std::string& body) {
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(base_url_);
    client.set_read_timeout(120, 0);
    httplib::Headers headers;
    if (!auth_token_.empty()) headers.emplace("Authorization", "Bearer " + auth_token_);
    auto res = client.Post(path, headers, body, "application/json");
    if (res && res->status == 200) return res->body;
    if (attempt + 1 >= max_retries_) {
      std::string why = res ? "HTTP " + std::to_string(res->status)
                            : "transport error " + httplib::to_string(res.error());
      throw Error("LLM request to " + base_url_ + path + " failed: " + why);
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200 << attempt));
  }
}

std::string HttpLlmClient::complete(const std::string& prompt, double temperature,
                                    int max_tokens) {
  json body{{"prompt", prompt}, {"temperature", temperature}, {"max_tokens", max_tokens}};
  json res = json::parse(post("/complete", body.dump()));
  return res.value("text", std::string());
}

std::vector<double> HttpLlmClient::loglikelihood(const std::string& prompt,
                                                 const std::string& continuation) {
  json body{{"prompt", prompt}, {"continuation", continuation}};
  json res = json::parse(post("/loglikelihood", body.dump()));
  return res.value("logprobs", std::vector<double>{});
}

// ---------------------------------------------------------------------------
// Stub and echo clients
// ---------------------------------------------------------------------------

std::string prompt_hash(const std::string& prompt) {
  return detail::bytes_fingerprint(prompt);
}

StubLlmClient::StubLlmClient(std::map<std::string, std::string> responses,
                             std::string default_response)
    : responses_(std::move(responses)), default_response_(std::move(default_response)) {}

StubLlmClient StubLlmClient::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open stub map '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw UserError("stub map '" + path + "' is malformed: " + e.what());
  }
  std::map<std::string, std::string> responses;
  std::string default_response;
  for (const auto& [key, value] : doc.items()) {
    if (key == "<default>")
      default_response = value.get<std::string>();
    else
      responses[key] = value.get<std::string>();
  }
  return StubLlmClient(std::move(responses), std::move(default_response));
}

std::string StubLlmClient::complete(const std::string& prompt, double, int) {
  auto it = responses_.find(prompt_hash(prompt));
  if (it != responses_.end()) return it->second;
  return default_response_;
}

std::vector<double> StubLlmClient::loglikelihood(const std::string&,
                                                 const std::string& continuation) {
  // Deterministic neutral likelihood: one zero per whitespace-separated token.
  std::size_t tokens = 0;
  bool in_tok = false;
  for (char c : continuation) {
    bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
    if (!space && !in_tok) ++tokens;
    in_tok = !space;
  }
  return std::vector<double>(std::max<std::size_t>(tokens, 1), 0.0);
}

void StubLlmClient::put(const std::string& prompt, const std::string& response) {
  responses_[prompt_hash(prompt)] = response;
}

std::string EchoLlmClient::complete(const std::string& prompt, double, int) {
  const std::string marker = "### SQL: ";
  std::size_t pos = prompt.rfind(marker);
  if (pos == std::string::npos) return "";
  std::size_t begin = pos + marker.size();
  std::size_t end = prompt.find('\n', begin);
  if (end == std::string::npos) end = prompt.size();
  return prompt.substr(begin, end - begin);
}

std::vector<double> EchoLlmClient::loglikelihood(const std::string&,
                                                 const std::string& continuation) {
  return StubLlmClient().loglikelihood("", continuation);
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

namespace {

std::string strip_code_fences(const std::string& text) {
  std::string out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = text.substr(pos, eol - pos);
    std::size_t first = line.find_first_not_of(" \t");
    bool fence = first != std::string::npos && line.compare(first, 3, "```") == 0;
    if (!fence) {
      out += line;
      out.push_back('\n');
    }
    pos = eol + 1;
  }
  return out;
}

}  // namespace

std::optional<std::string> extract_sql(const std::string& completion) {
  std::string text = strip_code_fences(completion);
  std::string lowered = text;
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  std::size_t begin = lowered.find("select");
  if (begin == std::string::npos) return std::nullopt;
  std::size_t end = text.find(';', begin);
  std::string sql = text.substr(begin, end == std::string::npos ? std::string::npos
                                                                : end - begin);
  while (!sql.empty() && (std::isspace(static_cast<unsigned char>(sql.back())) != 0))
    sql.pop_back();
  if (sql.empty()) return std::nullopt;
  return sql;
}

std::optional<std::string> generate(LlmClient& client, const PromptBundle& bundle,
                                    const GenerateConfig& config) {
  std::string completion =
      client.complete(bundle.full_text, config.temperature, config.max_tokens);
  if (completion.empty()) return std::nullopt;
  return extract_sql(completion);
}

double usefulness_from_loglikelihood(const std::vector<double>& logprobs,
                                     bool mean_per_token) {
  if (logprobs.empty()) return 0.0;
  double sum = 0.0;
  for (double lp : logprobs) sum += lp;
  double value = mean_per_token ? sum / static_cast<double>(logprobs.size()) : sum;
  return std::clamp(std::exp(value), 0.0, 1.0);
}

}  // namespace dcgsql
