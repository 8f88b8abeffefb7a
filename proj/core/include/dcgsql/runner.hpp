#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"
#include "dcgsql/promptkit.hpp"
#include "dcgsql/retriever.hpp"
#include "dcgsql/sqlkit.hpp"

namespace dcgsql {

// ---------------------------------------------------------------------------
// LLM clients
// ---------------------------------------------------------------------------

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const std::string& prompt, double temperature,
                               int max_tokens) = 0;
  /// Per-token log-probabilities of `continuation` given `prompt`.
  virtual std::vector<double> loglikelihood(const std::string& prompt,
                                            const std::string& continuation) = 0;
};

/// POST {"prompt","temperature","max_tokens"} -> {"text"} at <base>/complete;
/// POST {"prompt","continuation"} -> {"logprobs":[...]} at <base>/loglikelihood.
/// Auth token, when present, is sent as a bearer Authorization header.
class HttpLlmClient : public LlmClient {
 public:
  HttpLlmClient(std::string base_url, std::string auth_token = "", int max_retries = 3);
  std::string complete(const std::string& prompt, double temperature,
                       int max_tokens) override;
  std::vector<double> loglikelihood(const std::string& prompt,
                                    const std::string& continuation) override;

 private:
  std::string post(const std::string& path, const std::string& body);
  std::string base_url_;
  std::string auth_token_;
  int max_retries_;
};

std::string prompt_hash(const std::string& prompt);

/// Canned responses keyed by prompt hash; fully deterministic.
class StubLlmClient : public LlmClient {
 public:
  StubLlmClient() = default;
  explicit StubLlmClient(std::map<std::string, std::string> responses,
                         std::string default_response = "");
  static StubLlmClient from_file(const std::string& path);
  std::string complete(const std::string& prompt, double temperature,
                       int max_tokens) override;
  std::vector<double> loglikelihood(const std::string& prompt,
                                    const std::string& continuation) override;
  void put(const std::string& prompt, const std::string& response);

 private:
  std::map<std::string, std::string> responses_;  // prompt hash -> text
  std::string default_response_;
};

/// Returns the gold SQL of the last demonstration block in the prompt.
class EchoLlmClient : public LlmClient {
 public:
  std::string complete(const std::string& prompt, double temperature,
                       int max_tokens) override;
  std::vector<double> loglikelihood(const std::string& prompt,
                                    const std::string& continuation) override;
};

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct GenerateConfig {
  double temperature = 0.5;
  int max_tokens = 512;
};

/// Extracted SQL: first "SELECT" (case-insensitive) through the first ";" or
/// the end, code fences stripped. Empty optional when nothing extractable.
std::optional<std::string> extract_sql(const std::string& completion);

std::optional<std::string> generate(LlmClient& client, const PromptBundle& bundle,
                                    const GenerateConfig& config = {});

/// Usefulness score for retriever training: exp(mean or sum of the per-token
/// log-probabilities of the anchor's gold SQL), clamped to [0,1].
double usefulness_from_loglikelihood(const std::vector<double>& logprobs,
                                     bool mean_per_token = true);

// ---------------------------------------------------------------------------
// Execution accuracy
// ---------------------------------------------------------------------------

enum class ExOutcome { Match, Mismatch, GoldError };

struct ExecutionOptions {
  double timeout_seconds = 30.0;
};

ExOutcome execution_accuracy(const std::string& pred_sql, const std::string& gold_sql,
                             const std::string& db_file,
                             const ExecutionOptions& options = {});

// ---------------------------------------------------------------------------
// Evaluation report
// ---------------------------------------------------------------------------

struct LevelStats {
  std::size_t n = 0;
  std::size_t ex_correct = 0;
  std::size_t em_correct = 0;
};

struct EvalReport {
  LevelStats overall;
  std::map<std::string, LevelStats> by_hardness;  // easy / medium / hard / extra
  std::optional<double> avg_ted;
  std::vector<std::pair<std::string, std::string>> failures;  // (id, reason)
};

/// Accuracy in percent, rounded to one decimal place.
double pct(std::size_t correct, std::size_t n);

EvalReport evaluate(const std::vector<Sample>& dataset,
                    const std::map<std::string, std::string>& predictions,
                    const SchemaCatalog& catalog, const std::string& db_root,
                    const std::map<std::string, std::vector<std::string>>* retrieved = nullptr,
                    const std::vector<Sample>* pool = nullptr,
                    const ExecutionOptions& exec = {},
                    const ClauseSetOptions& em_opts = {});

std::string render_report(const EvalReport& report);
std::string report_to_json(const EvalReport& report);
void save_report(const EvalReport& report, const std::string& path);

// ---------------------------------------------------------------------------
// Retrieval latency
// ---------------------------------------------------------------------------

struct LatencyStats {
  double mean_seconds = 0.0;
  double p95_seconds = 0.0;
};

LatencyStats measure_retrieval_latency(const RetrievalIndex& index,
                                       const std::vector<SchemaLinkGraph>& queries,
                                       const EncoderParams& params, std::size_t k = 4);

}  // namespace dcgsql
