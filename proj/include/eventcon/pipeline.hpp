#pragma once

// Configuration and stage orchestration shared by the command-line tool.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "eventcon/eval_harness.hpp"
#include "eventcon/linear_models.hpp"

namespace eventcon {

struct PipelineConfig {
  // Inputs.
  std::string tags;
  std::string ngrams;
  std::string vrep;
  std::string embeddings;
  std::string events;
  std::string stoplist;  // optional
  std::string concept_images;
  std::string concept_features;
  std::string eval_features;
  std::string eval_labels;
  std::string work_dir = "work";

  // Segmentation.
  std::size_t max_len = 5;
  double smoothing = 1.0;
  std::optional<double> vrep_default;  // median of the table when unset

  // Discovery.
  std::size_t k_neighbors = 20;
  double min_score = 0.0;
  std::size_t max_concepts = 0;

  // Clustering and manifests.
  std::size_t k_clusters = 150;
  std::size_t kmeans_batch = 100;
  std::size_t kmeans_iters = 100;
  double neg_ratio = 10.0;

  // Concept classifiers.
  std::size_t cv_folds = 5;
  std::vector<double> cv_grid = kDefaultCGrid;
  double logistic_tol = 1e-6;
  std::size_t logistic_max_iter = 1000;

  // Event classifier and evaluation.
  double svm_C = 1.0;
  SvmLoss svm_loss = SvmLoss::kHinge;
  double svm_tol = 1e-6;
  std::size_t svm_max_iter = 1000;
  EvalMode eval_mode = EvalMode::kOneShot;
  std::size_t reps = 5;
  double split = 0.7;
  std::size_t top_r = 5;
  std::size_t top_n = 10;

  std::size_t threads = 1;
  std::uint64_t seed = 0;

  EvalConfig eval_config(std::uint64_t master_seed) const;
};

struct ConfigParse {
  PipelineConfig config;
  std::vector<std::string> errors;
};

// Parses flat key=value lines ('#' comments). Every problem is collected;
// nothing is thrown. Paths are resolved relative to `base_dir`.
ConfigParse parse_config(const std::string& text, const std::string& base_dir = {});
// Adds an error for every required input path that is unset or missing.
void check_paths(const PipelineConfig& config, std::vector<std::string>& errors);
// parse_config + check_paths on a file; throws ConfigError listing every
// violation at once.
PipelineConfig validate_config(const std::string& path);
std::string describe_config(const PipelineConfig& config);

// Per-stage seeds derived from the master seed.
enum class StageSeed : std::uint64_t { kCluster = 1, kManifests = 2, kTrainBank = 3, kEvaluate = 4 };
std::uint64_t stage_seed(std::uint64_t master, StageSeed stage);

using Logger = std::function<void(const std::string&)>;

// Individual stages. Each writes its artifact atomically.
void run_segment_stage(const std::string& tags, const std::string& ngrams, const std::string& vrep,
                       std::size_t max_len, double smoothing, std::optional<double> vrep_default,
                       std::size_t threads, const std::string& out, const Logger& log);
void run_discover_stage(const std::string& segments, const std::string& events,
                        const std::string& embeddings, const std::string& stoplist,
                        std::size_t k_neighbors, double min_score, std::size_t max_concepts,
                        const std::string& out, const Logger& log);
void run_cluster_stage(const std::string& pool, const std::string& embeddings, std::size_t k,
                       std::size_t batch, std::size_t iterations, std::uint64_t master_seed,
                       const std::string& out, const Logger& log);
void run_manifests_stage(const std::string& clusters, const std::string& images,
                         const std::string& features, double neg_ratio, std::uint64_t master_seed,
                         std::size_t threads, const std::string& out_dir, const Logger& log);
void run_train_bank_stage(const std::string& pool, const std::string& manifests_dir,
                          const std::string& features, std::size_t folds,
                          const std::vector<double>& grid, const TrainOptions& train,
                          std::uint64_t master_seed, std::size_t threads, const std::string& out,
                          const Logger& log);
void run_score_stage(const std::string& bank, const std::string& features, std::size_t threads,
                     const std::string& out, const Logger& log);
void run_top_concepts(const std::string& bank, const std::string& scores,
                      const std::string& labels, std::size_t r, std::size_t n,
                      const std::string& out, const Logger& log);
// Writes `out` (line-delimited records) and `out`.txt (aligned table).
void run_evaluate_stage(const std::string& features, const std::string& labels,
                        const EvalConfig& config, const std::string& representation,
                        const std::string& out, const Logger& log);
struct NamedFeatures {
  std::string name;
  std::string path;
};
void run_compare_stage(const std::vector<NamedFeatures>& representations,
                       const std::string& labels, const EvalConfig& config,
                       const std::string& out, const Logger& log);

struct RunAllResult {
  std::vector<std::string> executed;
  std::vector<std::string> skipped;
  std::string report_path;
  std::string comparison_path;
};

// segment -> discover -> cluster -> manifests -> train-bank -> score ->
// evaluate -> compare. A stage is skipped when all its outputs are at least
// as new as all its inputs, unless `force` is set. A failing stage removes
// its outputs and rethrows with the stage name prefixed.
RunAllResult run_all(const PipelineConfig& config, const std::string& config_path, bool force,
                     const Logger& log);

struct WorkLayout {
  std::string segments, pool, clusters, manifests, bank, scores, top_concepts, report, comparison;
  explicit WorkLayout(const std::string& work_dir);
};

}  // namespace eventcon
