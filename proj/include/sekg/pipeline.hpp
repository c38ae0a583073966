#pragma once

// Stage orchestration: typed configuration, per-stage artifacts and the run
// manifest.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sekg/extract.hpp"
#include "sekg/graph.hpp"
#include "sekg/ingest.hpp"
#include "sekg/provider.hpp"

namespace sekg {

namespace fs = std::filesystem;

/// Effective configuration. `values` holds every key as `section.key` text
/// after defaults and overrides; the typed fields are derived from it.
struct PipelineConfig {
  fs::path base_dir;
  std::map<std::string, std::string> values;

  // [input]
  fs::path threads;
  bool threads_are_trees = true;  // input.threads_format: threads | items
  fs::path faers_counts;
  fs::path faers_totals;
  std::optional<fs::path> overrides;
  std::optional<fs::path> matchmap;
  std::optional<fs::path> annotations;

  // [ingest]
  std::optional<TimeWindow> window;
  bool keep_deleted_authors = true;
  std::vector<std::string> bot_authors;

  // [extract]
  HttpEndpoint llm;
  std::string llm_model;
  fs::path extraction_prompt;
  std::size_t max_in_flight = 4;

  // [normalize]
  HttpEndpoint embedder;
  std::string embed_model;
  std::size_t embed_batch = 64;
  double theta = 0.9;
  std::string cluster_model;
  fs::path cluster_prompt;

  // [retry]
  RetryPolicy retry;

  // [graph]
  RenderParams render;
  std::size_t max_examples = 5;

  // [stats]
  std::vector<Brand> brands;

  // [eval]
  double eval_fraction = 0.05;
  std::uint64_t eval_seed = 0;
  std::size_t annotators = 3;

  // [paths]
  fs::path cache_dir;
  fs::path output_dir;
};

/// Every recognized key with its default ("" = unset).
const std::map<std::string, std::string>& config_defaults();

/// Builds and validates a config from raw values; relative paths resolve
/// against `base_dir`. Throws ConfigError on unknown keys, malformed values,
/// missing referenced files, theta outside (0, 1] or an inverted window.
PipelineConfig make_config(std::map<std::string, std::string> values, const fs::path& base_dir);

/// Reads an INI file (`[section]` then `key = value`) and applies
/// `section.key=value` overrides, which win over the file.
PipelineConfig load_config(const fs::path& file, std::span<const std::string> overrides = {});

/// sha256 over the sorted `section.key=value` lines of the effective values.
std::string config_hash(const PipelineConfig& config);

/// Parses `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SSZ` or integer epoch seconds.
/// A bare date denotes its first second, or its last with `end_of_day`.
EpochSeconds parse_timestamp(std::string_view text, bool end_of_day = false);

enum class Stage { Ingest, Extract, Normalize, Graph, Stats };

const char* to_string(Stage stage) noexcept;
std::span<const Stage> all_stages() noexcept;

/// Artifact file names written by a stage, relative to the output directory.
/// Stats artifacts depend on the configured brands.
std::vector<std::string> stage_artifacts(Stage stage, const PipelineConfig& config);

/// Lines in an NDJSON file, or data rows (excluding the header) in a CSV.
std::size_t artifact_rows(const fs::path& path);

std::string brand_slug(Brand b);

struct ArtifactBundle {
  fs::path output_dir;
  std::vector<Stage> executed;
  std::vector<Stage> skipped;
  nlohmann::json manifest;
};

struct EvalScores {
  std::size_t annotators = 0;
  std::size_t relations = 0;
  double side_effect_accuracy = 0.0;
  double severity_accuracy = 0.0;
};

class Pipeline {
 public:
  /// Uses HTTP providers built from the configured endpoints.
  explicit Pipeline(PipelineConfig config);
  /// Injected providers; the caller keeps them alive.
  Pipeline(PipelineConfig config, LLMProvider& llm, EmbeddingProvider& embedder);
  ~Pipeline();

  const PipelineConfig& config() const noexcept { return config_; }
  fs::path artifact(const std::string& name) const { return config_.output_dir / name; }

  /// Runs one stage from the previous stage's artifacts and records it in
  /// manifest.json. Errors are rethrown with the stage name prefixed and the
  /// same kind; earlier artifacts stay untouched.
  void run_stage(Stage stage);

  /// All stages in order. With `resume`, leading stages whose artifacts all
  /// exist are skipped; throws ConfigError if the existing manifest was
  /// produced by a different config.
  ArtifactBundle run(bool resume = false);

  /// Writes eval_sample.csv, one line per relation of the sampled records.
  /// Returns the number of sampled records.
  std::size_t sample_eval();

  /// Majority-vote accuracy from the annotation file; writes eval_scores.json.
  EvalScores score_eval();

 private:
  void stage_ingest(nlohmann::json& counts);
  void stage_extract(nlohmann::json& counts);
  void stage_normalize(nlohmann::json& counts);
  void stage_graph(nlohmann::json& counts);
  void stage_stats(nlohmann::json& counts);

  nlohmann::json read_manifest() const;
  void record_stage(Stage stage, nlohmann::json counts, double seconds);

  PipelineConfig config_;
  std::unique_ptr<LLMProvider> owned_llm_;
  std::unique_ptr<EmbeddingProvider> owned_embedder_;
  LLMProvider* llm_;
  EmbeddingProvider* embedder_;
};

}  // namespace sekg
