#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dcgsql/catalog.hpp"
#include "dcgsql/encoder.hpp"
#include "dcgsql/linker.hpp"
#include "dcgsql/promptkit.hpp"
#include "dcgsql/pruner.hpp"
#include "dcgsql/retriever.hpp"
#include "dcgsql/runner.hpp"
#include "dcgsql/sqlkit.hpp"
#include "dcgsql/synth.hpp"
#include "json.hpp"

using namespace dcgsql;
using nlohmann::json;

namespace {

std::map<std::string, const SchemaLinkGraph*> graphs_by_id(
    const std::vector<SchemaLinkGraph>& graphs) {
  std::map<std::string, const SchemaLinkGraph*> out;
  for (const auto& g : graphs) out[g.sample_id] = &g;
  return out;
}

const SchemaLinkGraph& graph_of(const std::map<std::string, const SchemaLinkGraph*>& by_id,
                                const std::string& id) {
  auto it = by_id.find(id);
  if (it == by_id.end()) throw UserError("no graph for sample '" + id + "'");
  return *it->second;
}

std::map<std::string, Sample> samples_by_id(const std::vector<Sample>& samples) {
  std::map<std::string, Sample> out;
  for (const auto& s : samples) out[s.id] = s;
  return out;
}

void write_lines(const std::string& path, const std::vector<json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write file '" + path + "'");
  for (const auto& l : lines) out << l.dump() << "\n";
}

std::vector<json> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UserError("cannot open file '" + path + "'");
  std::vector<json> lines;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw UserError(path + ":" + std::to_string(lineno) + ": malformed JSON: " + e.what());
    }
  }
  return lines;
}

ValueMatches value_matches_for(const Sample& sample, const DatabaseSchema& db,
                               const std::string& db_root) {
  if (db_root.empty()) return {};
  return value_match(tokenize_question(sample.question), db,
                     value_store_path(db_root, sample.db_id));
}

struct PromptRecord {
  std::string id;
  std::string prompt;
};

std::vector<PromptRecord> load_prompts(const std::string& path) {
  std::vector<PromptRecord> prompts;
  for (const auto& obj : read_lines(path))
    prompts.push_back({obj.value("id", std::string()), obj.value("prompt", std::string())});
  return prompts;
}

std::unique_ptr<LlmClient> make_client(const std::string& kind, const std::string& stub_map,
                                       const std::string& stub_default,
                                       const std::string& llm_url) {
  if (kind == "echo") return std::make_unique<EchoLlmClient>();
  if (kind == "stub") {
    if (!stub_map.empty()) return std::make_unique<StubLlmClient>(StubLlmClient::from_file(stub_map));
    return std::make_unique<StubLlmClient>(std::map<std::string, std::string>{}, stub_default);
  }
  if (kind == "http") {
    std::string url = llm_url;
    if (url.empty() && std::getenv("DCG_LLM_URL")) url = std::getenv("DCG_LLM_URL");
    if (url.empty()) throw UserError("http client requires --llm-url or DCG_LLM_URL");
    std::string token = std::getenv("DCG_LLM_TOKEN") ? std::getenv("DCG_LLM_TOKEN") : "";
    return std::make_unique<HttpLlmClient>(url, token);
  }
  throw UserError("unknown client '" + kind + "' (expected stub, echo, or http)");
}

/// Demonstration block inputs for one pool sample, taken from its graph.
CotDemo demo_from_graph(const Sample& sample, const SchemaLinkGraph& graph,
                        bool full_schema, const SchemaCatalog* catalog) {
  CotDemo demo;
  demo.question = sample.question;
  demo.gold_sql = sample.gold_sql.value_or("");
  demo.schema = full_schema && catalog ? catalog->at(sample.db_id) : graph.pruned_schema;
  demo.value_matches = graph.value_matches;
  return demo;
}

std::string render_demo_with_fallback(const CotDemo& demo, QueryCategory category) {
  try {
    return render_cot_demo(demo, category);
  } catch (const UserError&) {
    // Template slot mismatch; fall back to the bare (SIMPLE) layout.
    return render_cot_demo(demo, QueryCategory::Simple);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep contextual schema link graph pipeline for text-to-SQL"};
  app.require_subcommand(1);
  app.set_config("--config", "", "flat key=value config file; flags override");

  // Shared option storage.
  std::string catalog_path, data_path, pool_path, out_path, scores_path, graphs_path;
  std::string pool_graphs_path, index_path, encoder_path, pruner_path, retrieved_path;
  std::string pred_path, db_root, prompts_path, stub_map, stub_default = "";
  std::string provider = "stub", client_kind = "stub", llm_url, usefulness_path;
  std::string metrics_out, loss_out, scores_in, save_encoder;
  double lr = 1e-3, tau_tab = 0.66, tau_col = 0.43, threshold = 0.5, temperature = 0.5;
  double contrastive_t = 0.1, stub_score = 0.5, timeout = 30.0, holdout = 0.2;
  int epochs = 30, batch = 8, d = 64, layers = 2, heads = 4, d_ff = 256, max_tokens = 512;
  std::size_t k = 4, m_pos = 4, m_neg = 16, max_demos = 8, synthetic = 0, n_queries = 20;
  std::uint64_t seed = 7;
  bool no_value_edges = false, similar_first = false, full_demo_schema = false;
  bool em_compare_values = false, usefulness_sum = false;

  // --- ingest ---
  auto* ingest = app.add_subcommand("ingest", "validate catalog and dataset files");
  ingest->add_option("--catalog", catalog_path)->required();
  ingest->add_option("--data", data_path)->required();
  ingest->add_option("--out", out_path);
  ingest->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> samples = load_dataset(data_path, catalog);
    std::size_t tables = 0, columns = 0;
    for (const auto& db : catalog.databases) {
      tables += db.tables.size();
      columns += db.column_count();
    }
    json summary{{"databases", catalog.databases.size()},
                 {"tables", tables},
                 {"columns", columns},
                 {"samples", samples.size()}};
    if (!out_path.empty()) {
      std::ofstream out(out_path, std::ios::binary);
      out << summary.dump(2) << "\n";
    }
    std::cout << summary.dump(2) << "\n";
  });

  // --- train-pruner ---
  auto* train_pruner_cmd = app.add_subcommand("train-pruner", "train the schema pruning model");
  train_pruner_cmd->add_option("--catalog", catalog_path)->required();
  train_pruner_cmd->add_option("--data", data_path)->required();
  train_pruner_cmd->add_option("--out", out_path)->required();
  train_pruner_cmd->add_option("--metrics-out", metrics_out);
  train_pruner_cmd->add_option("--epochs", epochs);
  train_pruner_cmd->add_option("--lr", lr);
  train_pruner_cmd->add_option("--batch", batch);
  train_pruner_cmd->add_option("--seed", seed);
  train_pruner_cmd->add_option("--holdout", holdout);
  train_pruner_cmd->add_option("--d", d);
  train_pruner_cmd->add_option("--layers", layers);
  train_pruner_cmd->add_option("--heads", heads);
  train_pruner_cmd->add_option("--d-ff", d_ff);
  train_pruner_cmd->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> samples = load_dataset(data_path, catalog);
    std::map<std::string, RelevanceLabels> labels;
    for (const auto& s : samples) {
      if (!s.gold_sql) throw UserError("sample '" + s.id + "' has no gold SQL");
      labels[s.id] = derive_relevance_labels(*s.gold_sql, catalog.at(s.db_id));
    }
    CrossEncoderConfig config{d, layers, heads, d_ff, 256};
    CrossEncoderParams params =
        CrossEncoderParams::init(config, build_pruner_vocab(samples, catalog), seed);
    PrunerTrainConfig tc;
    tc.epochs = epochs;
    tc.lr = lr;
    tc.batch = batch;
    tc.seed = seed;
    tc.holdout_fraction = holdout;
    PrunerMetrics metrics = train_pruner(params, samples, catalog, labels, tc);
    save_pruner_checkpoint(params, out_path);
    json mj{{"tables",
             {{"precision", metrics.tables.precision},
              {"recall", metrics.tables.recall},
              {"f1", metrics.tables.f1}}},
            {"columns",
             {{"precision", metrics.columns.precision},
              {"recall", metrics.columns.recall},
              {"f1", metrics.columns.f1}}},
            {"epoch_loss", metrics.epoch_loss}};
    if (!metrics_out.empty()) {
      std::ofstream out(metrics_out, std::ios::binary);
      out << mj.dump(2) << "\n";
    }
    std::cout << mj.dump(2) << "\n";
  });

  // --- score ---
  auto* score_cmd = app.add_subcommand("score", "produce relevance scores per sample");
  score_cmd->add_option("--catalog", catalog_path)->required();
  score_cmd->add_option("--data", data_path)->required();
  score_cmd->add_option("--out", out_path)->required();
  score_cmd->add_option("--pruner", pruner_path);
  score_cmd->add_option("--scores-in", scores_in);
  score_cmd->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> samples = load_dataset(data_path, catalog);
    std::vector<RelevanceScores> scores;
    if (!scores_in.empty()) {
      scores = load_scores_file(scores_in, catalog, samples);
    } else if (!pruner_path.empty()) {
      CrossEncoderParams params = load_pruner_checkpoint(pruner_path);
      for (const auto& s : samples) {
        PrunerInput input =
            build_input_sequence(tokenize_question(s.question), catalog.at(s.db_id));
        RelevanceScores rs = score_relevance(params, input);
        rs.sample_id = s.id;
        scores.push_back(std::move(rs));
      }
    } else {
      throw UserError("score requires --pruner or --scores-in");
    }
    save_scores_file(scores, out_path);
  });

  // --- build-graphs ---
  auto* build_cmd = app.add_subcommand("build-graphs", "build schema link graphs");
  build_cmd->add_option("--catalog", catalog_path)->required();
  build_cmd->add_option("--data", data_path)->required();
  build_cmd->add_option("--scores", scores_path)->required();
  build_cmd->add_option("--out", out_path)->required();
  build_cmd->add_option("--db-root", db_root);
  build_cmd->add_option("--tau-tab", tau_tab);
  build_cmd->add_option("--tau-col", tau_col);
  build_cmd->add_option("--threshold", threshold);
  build_cmd->add_flag("--no-value-edges", no_value_edges);
  build_cmd->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> samples = load_dataset(data_path, catalog);
    std::vector<RelevanceScores> scores = load_scores_file(scores_path, catalog, samples);
    std::map<std::string, const RelevanceScores*> by_id;
    for (const auto& s : scores) by_id[s.sample_id] = &s;
    std::vector<SchemaLinkGraph> graphs;
    for (const auto& sample : samples) {
      auto it = by_id.find(sample.id);
      if (it == by_id.end()) throw UserError("no scores for sample '" + sample.id + "'");
      const DatabaseSchema& db = catalog.at(sample.db_id);
      TokenSeq tokens = tokenize_question(sample.question);
      PrunedSchema pruned = prune(*it->second, db, threshold);
      ValueMatches matches = value_matches_for(sample, pruned, db_root);
      GraphOptions options;
      options.tau_tab = tau_tab;
      options.tau_col = tau_col;
      options.include_value_match_edges = !no_value_edges;
      graphs.push_back(build_graph(sample, tokens, pruned, *it->second, matches, options));
    }
    save_graphs(graphs, out_path);
  });

  // --- rank ---
  auto* rank_cmd = app.add_subcommand("rank", "rank pool candidates by usefulness");
  rank_cmd->add_option("--catalog", catalog_path)->required();
  rank_cmd->add_option("--data", pool_path)->required();
  rank_cmd->add_option("--out", out_path)->required();
  rank_cmd->add_option("--provider", provider)
      ->check(CLI::IsMember({"stub", "file", "llm"}));
  rank_cmd->add_option("--usefulness", usefulness_path);
  rank_cmd->add_option("--stub-score", stub_score);
  rank_cmd->add_option("--graphs", graphs_path);
  rank_cmd->add_option("--llm-url", llm_url);
  rank_cmd->add_option("--m-pos", m_pos);
  rank_cmd->add_option("--m-neg", m_neg);
  rank_cmd->add_option("--temperature", temperature);
  rank_cmd->add_option("--max-tokens", max_tokens);
  rank_cmd->add_flag("--usefulness-sum", usefulness_sum,
                     "use summed token log-probabilities instead of the mean");
  rank_cmd->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> pool = load_dataset(pool_path, catalog);
    std::unique_ptr<UsefulnessProvider> prov;
    std::unique_ptr<LlmClient> client;
    std::vector<SchemaLinkGraph> graphs;
    std::map<std::string, const SchemaLinkGraph*> by_id;
    if (provider == "stub") {
      prov = std::make_unique<StubConstantProvider>(stub_score);
    } else if (provider == "file") {
      if (usefulness_path.empty()) throw UserError("--provider file requires --usefulness");
      prov = std::make_unique<FileBackedProvider>(usefulness_path);
    } else {
      if (graphs_path.empty()) throw UserError("--provider llm requires --graphs");
      graphs = load_graphs(graphs_path);
      by_id = graphs_by_id(graphs);
      client = make_client("http", "", "", llm_url);
      prov = std::make_unique<CallbackProvider>([&](const Sample& anchor,
                                                    const Sample& candidate) {
        const SchemaLinkGraph& ag = graph_of(by_id, anchor.id);
        const SchemaLinkGraph& cg = graph_of(by_id, candidate.id);
        CotDemo demo = demo_from_graph(candidate, cg, false, nullptr);
        QueryCategory category =
            candidate.gold_sql ? categorize(parse_sql(*candidate.gold_sql))
                               : QueryCategory::Simple;
        PromptBundle bundle =
            assemble_prompt({demo}, {category}, anchor.question, ag.pruned_schema,
                            ag.value_matches);
        std::vector<double> logprobs =
            client->loglikelihood(bundle.full_text, " " + anchor.gold_sql.value_or(""));
        return usefulness_from_loglikelihood(logprobs, !usefulness_sum);
      });
    }
    // Cache whatever the provider produced so expensive scoring is resumable.
    FileBackedProvider cache;
    std::vector<ScoredCandidateSet> sets;
    for (const auto& anchor : pool) {
      if (!anchor.gold_sql) continue;
      ScoredCandidateSet set = score_candidates(anchor, pool, *prov, m_pos, m_neg);
      for (const auto& [id, score] : set.ranked) cache.put(anchor.id, id, score);
      sets.push_back(std::move(set));
    }
    save_candidate_sets(sets, out_path);
    if (!usefulness_path.empty() && provider != "file") cache.save(usefulness_path);
  });

  // --- train-retriever ---
  auto* train_ret = app.add_subcommand("train-retriever", "contrastive graph encoder training");
  train_ret->add_option("--graphs", graphs_path)->required();
  train_ret->add_option("--ranked", retrieved_path)->required();
  train_ret->add_option("--out", out_path)->required();
  train_ret->add_option("--loss-out", loss_out);
  train_ret->add_option("--epochs", epochs);
  train_ret->add_option("--lr", lr);
  train_ret->add_option("--batch", batch);
  train_ret->add_option("--temperature", contrastive_t);
  train_ret->add_option("--seed", seed);
  train_ret->add_option("--d", d);
  train_ret->add_option("--layers", layers);
  train_ret->add_option("--heads", heads);
  train_ret->add_option("--d-ff", d_ff);
  train_ret->callback([&] {
    std::vector<SchemaLinkGraph> graphs = load_graphs(graphs_path);
    std::vector<ScoredCandidateSet> sets = load_candidate_sets(retrieved_path);
    EncoderConfig config{d, layers, heads, d_ff};
    EncoderParams params = EncoderParams::init(config, build_encoder_vocab(graphs), seed);
    RetrieverTrainConfig tc;
    tc.epochs = epochs;
    tc.lr = lr;
    tc.batch = batch;
    tc.temperature = contrastive_t;
    tc.seed = seed;
    RetrieverTrainResult result = train_retriever(params, graphs, sets, tc);
    save_encoder_checkpoint(params, out_path);
    json lj{{"epoch_loss", result.epoch_loss}};
    if (!loss_out.empty()) {
      std::ofstream out(loss_out, std::ios::binary);
      out << lj.dump(2) << "\n";
    }
    std::cout << lj.dump(2) << "\n";
  });

  // --- index ---
  auto* index_cmd = app.add_subcommand("index", "embed the pool into a retrieval index");
  index_cmd->add_option("--graphs", graphs_path)->required();
  index_cmd->add_option("--out", out_path)->required();
  index_cmd->add_option("--encoder", encoder_path);
  index_cmd->add_option("--save-encoder", save_encoder);
  index_cmd->add_option("--seed", seed);
  index_cmd->add_option("--d", d);
  index_cmd->add_option("--layers", layers);
  index_cmd->add_option("--heads", heads);
  index_cmd->add_option("--d-ff", d_ff);
  index_cmd->callback([&] {
    std::vector<SchemaLinkGraph> graphs = load_graphs(graphs_path);
    EncoderParams params =
        encoder_path.empty()
            ? EncoderParams::init(EncoderConfig{d, layers, heads, d_ff},
                                  build_encoder_vocab(graphs), seed)
            : load_encoder_checkpoint(encoder_path);
    RetrievalIndex index = build_index(graphs, params, RelationVocabulary{});
    save_index(index, out_path);
    std::string enc_out = save_encoder;
    if (enc_out.empty() && encoder_path.empty()) enc_out = out_path + ".encoder.ckpt";
    if (!enc_out.empty()) save_encoder_checkpoint(params, enc_out);
  });

  // --- retrieve ---
  auto* retrieve_cmd = app.add_subcommand("retrieve", "top-k demonstrations per test sample");
  retrieve_cmd->add_option("--index", index_path)->required();
  retrieve_cmd->add_option("--graphs", graphs_path)->required();
  retrieve_cmd->add_option("--encoder", encoder_path)->required();
  retrieve_cmd->add_option("--out", out_path)->required();
  retrieve_cmd->add_option("--k", k);
  retrieve_cmd->callback([&] {
    RetrievalIndex index = load_index(index_path);
    std::vector<SchemaLinkGraph> graphs = load_graphs(graphs_path);
    EncoderParams params = load_encoder_checkpoint(encoder_path);
    std::vector<json> lines;
    for (const auto& g : graphs) {
      auto top = retrieve_top_k(index, g, params, k);
      json demos = json::array();
      for (const auto& [id, sim] : top) demos.push_back(json::array({id, sim}));
      lines.push_back(json{{"id", g.sample_id}, {"demos", demos}});
    }
    write_lines(out_path, lines);
  });

  // --- prompt ---
  auto* prompt_cmd = app.add_subcommand("prompt", "assemble few-shot prompts");
  prompt_cmd->add_option("--retrieved", retrieved_path)->required();
  prompt_cmd->add_option("--data", data_path)->required();
  prompt_cmd->add_option("--graphs", graphs_path)->required();
  prompt_cmd->add_option("--pool", pool_path)->required();
  prompt_cmd->add_option("--pool-graphs", pool_graphs_path)->required();
  prompt_cmd->add_option("--catalog", catalog_path);
  prompt_cmd->add_option("--out", out_path)->required();
  prompt_cmd->add_option("--max-demos", max_demos);
  prompt_cmd->add_flag("--similar-first", similar_first,
                       "render the most similar demonstration first instead of last");
  prompt_cmd->add_flag("--full-demo-schema", full_demo_schema,
                       "render demonstrations with their full database schema");
  prompt_cmd->callback([&] {
    SchemaCatalog catalog;
    if (!catalog_path.empty()) catalog = load_catalog(catalog_path);
    if (full_demo_schema && catalog_path.empty())
      throw UserError("--full-demo-schema requires --catalog");
    std::vector<Sample> tests;
    {
      SchemaCatalog* cat = catalog_path.empty() ? nullptr : &catalog;
      // Dataset validation needs a catalog; when absent, read leniently.
      if (cat) {
        tests = load_dataset(data_path, *cat);
      } else {
        for (const auto& obj : read_lines(data_path)) {
          Sample s;
          s.id = obj.value("id", std::string());
          s.db_id = obj.value("db_id", std::string());
          s.question = obj.value("question", std::string());
          if (obj.contains("sql") && obj["sql"].is_string())
            s.gold_sql = obj["sql"].get<std::string>();
          tests.push_back(std::move(s));
        }
      }
    }
    std::vector<SchemaLinkGraph> test_graphs = load_graphs(graphs_path);
    std::vector<SchemaLinkGraph> pool_graphs = load_graphs(pool_graphs_path);
    auto test_by_id = graphs_by_id(test_graphs);
    auto pool_by_id = graphs_by_id(pool_graphs);
    std::map<std::string, Sample> pool_samples;
    for (const auto& obj : read_lines(pool_path)) {
      Sample s;
      s.id = obj.value("id", std::string());
      s.db_id = obj.value("db_id", std::string());
      s.question = obj.value("question", std::string());
      if (obj.contains("sql") && obj["sql"].is_string())
        s.gold_sql = obj["sql"].get<std::string>();
      pool_samples[s.id] = std::move(s);
    }

    std::map<std::string, std::vector<std::string>> retrieved;
    for (const auto& obj : read_lines(retrieved_path)) {
      std::vector<std::string> ids;
      for (const auto& dj : obj.value("demos", json::array()))
        ids.push_back(dj[0].get<std::string>());
      retrieved[obj.value("id", std::string())] = std::move(ids);
    }

    PromptOptions options;
    options.max_demos = max_demos;
    options.most_similar_last = !similar_first;
    std::vector<json> lines;
    for (const auto& test : tests) {
      const SchemaLinkGraph& tg = graph_of(test_by_id, test.id);
      auto rit = retrieved.find(test.id);
      if (rit == retrieved.end()) throw UserError("no retrieved demos for '" + test.id + "'");
      std::vector<CotDemo> demos;
      std::vector<QueryCategory> categories;
      std::vector<std::string> rendered;
      for (const auto& demo_id : rit->second) {
        auto sit = pool_samples.find(demo_id);
        if (sit == pool_samples.end())
          throw UserError("retrieved demo '" + demo_id + "' is not in the pool");
        CotDemo demo = demo_from_graph(sit->second, graph_of(pool_by_id, demo_id),
                                       full_demo_schema, &catalog);
        QueryCategory category = categorize(parse_sql(demo.gold_sql));
        rendered.push_back(render_demo_with_fallback(demo, category));
      }
      // Assemble manually from pre-rendered blocks so per-demo fallbacks
      // stay possible.
      PromptBundle bundle;
      bundle.demonstrations = rendered;
      if (options.most_similar_last)
        std::reverse(bundle.demonstrations.begin(), bundle.demonstrations.end());
      PromptBundle test_only =
          assemble_prompt({}, {}, test.question, tg.pruned_schema, tg.value_matches, options);
      bundle.test_block = test_only.test_block;
      std::string full;
      for (const auto& block : bundle.demonstrations) full += block + "\n\n";
      full += bundle.test_block;
      bundle.full_text = std::move(full);
      bundle.token_estimate = (bundle.full_text.size() + 3) / 4;
      lines.push_back(json{{"id", test.id},
                           {"prompt", bundle.full_text},
                           {"token_estimate", bundle.token_estimate}});
    }
    write_lines(out_path, lines);
  });

  // --- generate ---
  auto* generate_cmd = app.add_subcommand("generate", "run the LLM over assembled prompts");
  generate_cmd->add_option("--prompts", prompts_path)->required();
  generate_cmd->add_option("--out", out_path)->required();
  generate_cmd->add_option("--client", client_kind)
      ->check(CLI::IsMember({"stub", "echo", "http"}));
  generate_cmd->add_option("--stub-map", stub_map);
  generate_cmd->add_option("--stub-default", stub_default);
  generate_cmd->add_option("--llm-url", llm_url);
  generate_cmd->add_option("--temperature", temperature);
  generate_cmd->add_option("--max-tokens", max_tokens);
  generate_cmd->callback([&] {
    std::unique_ptr<LlmClient> client =
        make_client(client_kind, stub_map, stub_default, llm_url);
    GenerateConfig config{temperature, max_tokens};
    std::vector<json> lines;
    for (const auto& prompt : load_prompts(prompts_path)) {
      PromptBundle bundle;
      bundle.full_text = prompt.prompt;
      std::optional<std::string> sql = generate(*client, bundle, config);
      lines.push_back(json{{"id", prompt.id}, {"sql", sql.value_or("")}});
    }
    write_lines(out_path, lines);
  });

  // --- evaluate ---
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions with EX/EM/TED");
  eval_cmd->add_option("--pred", pred_path)->required();
  eval_cmd->add_option("--data", data_path)->required();
  eval_cmd->add_option("--catalog", catalog_path)->required();
  eval_cmd->add_option("--db-root", db_root)->required();
  eval_cmd->add_option("--retrieved", retrieved_path);
  eval_cmd->add_option("--pool", pool_path);
  eval_cmd->add_option("--out", out_path);
  eval_cmd->add_option("--timeout", timeout);
  eval_cmd->add_flag("--em-compare-values", em_compare_values,
                     "compare literal values in WHERE/HAVING clauses");
  eval_cmd->callback([&] {
    SchemaCatalog catalog = load_catalog(catalog_path);
    std::vector<Sample> dataset = load_dataset(data_path, catalog);
    std::map<std::string, std::string> predictions;
    for (const auto& obj : read_lines(pred_path))
      predictions[obj.value("id", std::string())] = obj.value("sql", std::string());

    std::map<std::string, std::vector<std::string>> retrieved;
    std::vector<Sample> pool;
    bool with_ted = !retrieved_path.empty() && !pool_path.empty();
    if (with_ted) {
      for (const auto& obj : read_lines(retrieved_path)) {
        std::vector<std::string> ids;
        for (const auto& dj : obj.value("demos", json::array()))
          ids.push_back(dj[0].get<std::string>());
        retrieved[obj.value("id", std::string())] = std::move(ids);
      }
      pool = load_dataset(pool_path, catalog);
    }
    ExecutionOptions exec;
    exec.timeout_seconds = timeout;
    ClauseSetOptions em_opts;
    em_opts.compare_values = em_compare_values;
    EvalReport report =
        evaluate(dataset, predictions, catalog, db_root, with_ted ? &retrieved : nullptr,
                 with_ted ? &pool : nullptr, exec, em_opts);
    std::cout << render_report(report);
    if (!out_path.empty()) save_report(report, out_path);
  });

  // --- bench ---
  auto* bench_cmd = app.add_subcommand("bench", "measure retrieval latency");
  bench_cmd->add_option("--index", index_path);
  bench_cmd->add_option("--encoder", encoder_path);
  bench_cmd->add_option("--graphs", graphs_path);
  bench_cmd->add_option("--synthetic", synthetic, "synthesize an index of this many entries");
  bench_cmd->add_option("--queries", n_queries);
  bench_cmd->add_option("--k", k);
  bench_cmd->add_option("--d", d);
  bench_cmd->add_option("--seed", seed);
  bench_cmd->add_option("--out", out_path);
  bench_cmd->callback([&] {
    RetrievalIndex index;
    EncoderParams params;
    std::vector<SchemaLinkGraph> queries;
    if (synthetic > 0) {
      for (std::size_t i = 0; i < n_queries; ++i)
        queries.push_back(synth::random_graph(12, seed + i));
      params = EncoderParams::init(EncoderConfig{d, 2, 4, 4 * d},
                                   build_encoder_vocab(queries), seed);
      index.dim = d;
      index.fingerprint = encoder_fingerprint(params);
      nn::Rng rng(seed);
      for (std::size_t i = 0; i < synthetic; ++i) {
        GraphEmbedding e;
        e.sample_id = "synth" + std::to_string(i);
        e.vector.resize(d);
        for (double& v : e.vector) v = rng.uniform(-1.0, 1.0);
        index.entries.push_back(std::move(e));
      }
    } else {
      if (index_path.empty() || encoder_path.empty() || graphs_path.empty())
        throw UserError("bench requires --index/--encoder/--graphs or --synthetic");
      index = load_index(index_path);
      params = load_encoder_checkpoint(encoder_path);
      queries = load_graphs(graphs_path);
    }
    LatencyStats stats = measure_retrieval_latency(index, queries, params, k);
    json out{{"mean_seconds", stats.mean_seconds},
             {"p95_seconds", stats.p95_seconds},
             {"queries", queries.size()},
             {"index_entries", index.entries.size()}};
    std::cout << out.dump(2) << "\n";
    if (!out_path.empty()) {
      std::ofstream f(out_path, std::ios::binary);
      f << out.dump(2) << "\n";
    }
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const UserError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
