#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcgsql/catalog.hpp"
#include "dcgsql/linker.hpp"
#include "dcgsql/pruner.hpp"
#include "dcgsql/retriever.hpp"

namespace dcgsql::synth {

/// Creates a SQLite value store for `schema` with the given rows per table.
/// Values for number-typed columns are bound numerically when they parse.
void make_sqlite_db(const std::string& path, const DatabaseSchema& schema,
                    const std::map<std::string, std::vector<std::vector<std::string>>>& rows);

/// The world-database fixture (city / sqlite_sequence / country /
/// countrylanguage) with a value store containing Dutch and English rows.
SchemaCatalog world_catalog();
void write_world_value_store(const std::string& db_file);

/// Relevance scores derived from each sample's gold SQL: items referenced by
/// the SQL get probability 0.9, others 0.1; attention peaks (1.0) on question
/// tokens that equal one of the item's name words, 0.15 elsewhere.
std::vector<RelevanceScores> heuristic_scores(const std::vector<Sample>& samples,
                                              const SchemaCatalog& catalog);
RelevanceScores heuristic_scores_for(const Sample& sample, const DatabaseSchema& db,
                                     const RelevanceLabels& labels);

// ---------------------------------------------------------------------------
// Pruner corpus: questions mention the name words of exactly the relevant
// schema items, so the label-generation rule is the evaluation oracle.
// ---------------------------------------------------------------------------

struct PrunerCorpus {
  SchemaCatalog catalog;
  std::vector<Sample> samples;
  std::map<std::string, RelevanceLabels> labels;
};

PrunerCorpus make_pruner_corpus(std::size_t n_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Retrieval pool with planted skeleton groups: samples of one group share a
// question/SQL skeleton; the usefulness ranking marks same-group candidates
// as positives.
// ---------------------------------------------------------------------------

struct RetrievalCorpus {
  SchemaCatalog catalog;
  std::vector<Sample> samples;
  std::map<std::string, int> group_of;  // sample id -> skeleton group
  std::vector<SchemaLinkGraph> graphs;
  std::vector<ScoredCandidateSet> train_sets;  // planted rankings for anchors
  std::vector<std::string> eval_anchor_ids;
};

RetrievalCorpus make_retrieval_corpus(std::size_t n_samples, std::uint64_t seed);

// ---------------------------------------------------------------------------
// End-to-end fixture: three small databases, twenty test samples, and a pool
// holding a gold twin of every test sample plus distractors.
// ---------------------------------------------------------------------------

struct E2eFixture {
  SchemaCatalog catalog;
  std::vector<Sample> pool;
  std::vector<Sample> tests;
  std::map<std::string, std::map<std::string, std::vector<std::vector<std::string>>>> rows;
};

E2eFixture make_e2e_fixture();

/// Writes catalog.json, pool.jsonl, test.jsonl, scores_pool.jsonl,
/// scores_test.jsonl and the dbs/<db_id>/<db_id>.sqlite value stores
/// under `dir`.
void write_e2e_files(const E2eFixture& fixture, const std::string& dir);

/// Random small graph for gradient checks and benchmarks.
SchemaLinkGraph random_graph(std::size_t n_nodes, std::uint64_t seed);

}  // namespace dcgsql::synth
