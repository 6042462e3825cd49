// evc: command-line front end for the event concept pipeline.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "eventcon/error.hpp"
#include "eventcon/pipeline.hpp"
#include "eventcon/text.hpp"

namespace fs = std::filesystem;
using namespace eventcon;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kInvariant = 3 };

// The config file seeds option defaults, so it is located before CLI11 runs.
std::string find_config_arg(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config" && i + 1 < argc) return argv[i + 1];
    if (a.rfind("--config=", 0) == 0) return a.substr(9);
  }
  return {};
}

PipelineConfig load_defaults(const std::string& path) {
  if (path.empty()) return {};
  if (!fs::exists(path)) throw ConfigError("config file not found: " + path);
  auto parsed = parse_config(read_file(path), fs::path(path).parent_path().string());
  if (!parsed.errors.empty()) {
    throw ConfigError("invalid configuration " + path + ":\n  " + join(parsed.errors, "\n  "));
  }
  return parsed.config;
}

void require(const std::string& value, const std::string& flag) {
  if (value.empty()) throw ConfigError("missing required option " + flag);
}

}  // namespace

int main(int argc, char** argv) {
  std::string config_path;
  PipelineConfig cfg;
  try {
    config_path = find_config_arg(argc, argv);
    cfg = load_defaults(config_path);
  } catch (const ConfigError& e) {
    std::cerr << "evc: " << e.what() << '\n';
    return kUsage;
  }

  CLI::App app{"Event concept discovery, concept-bank training and one-shot evaluation"};
  app.require_subcommand(1);
  bool quiet = false;
  bool force = false;
  std::uint64_t seed = cfg.seed;
  app.add_option("--config", config_path, "Flat key=value configuration file");
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_flag("--force", force, "Rerun stages even when outputs are fresh");
  app.add_flag("--quiet", quiet, "Only print errors");
  app.add_option("--threads", cfg.threads, "Worker threads (0 = hardware)")->capture_default_str();

  std::string out;
  std::string features;
  std::string labels;
  std::string segments;
  std::string pool;
  std::string clusters;
  std::string manifests;
  std::string bank;
  std::string top_out;
  std::string representation = "features";
  std::string mode = to_string(cfg.eval_mode);
  std::string grid;
  std::vector<std::string> named;
  std::string vrep_default;

  auto* seg = app.add_subcommand("segment", "Segment tags and rank segments");
  seg->add_option("--tags", cfg.tags, "Tag corpus (JSON lines)");
  seg->add_option("--ngrams", cfg.ngrams, "N-gram counts");
  seg->add_option("--vrep", cfg.vrep, "Visual representativeness table");
  seg->add_option("--max-len", cfg.max_len, "Maximum segment length")->capture_default_str();
  seg->add_option("--smoothing", cfg.smoothing, "Additive smoothing")->capture_default_str();
  seg->add_option("--vrep-default", vrep_default, "Score for phrases absent from the vrep table");
  seg->add_option("--out", out, "Ranked segments file")->required();

  auto* disc = app.add_subcommand("discover", "Build the concept pool");
  disc->add_option("--segments", segments, "Ranked segments file")->required();
  disc->add_option("--events", cfg.events, "Event label list");
  disc->add_option("--embeddings", cfg.embeddings, "Embedding table");
  disc->add_option("--stoplist", cfg.stoplist, "Phrases to exclude");
  disc->add_option("--k", cfg.k_neighbors, "Neighbors per event label")->capture_default_str();
  disc->add_option("--min-score", cfg.min_score, "Minimum segment score")->capture_default_str();
  disc->add_option("--max-concepts", cfg.max_concepts, "Pool size cap (0 = none)")->capture_default_str();
  disc->add_option("--out", out, "Pool file")->required();

  auto* clus = app.add_subcommand("cluster", "Cluster concept embeddings");
  clus->add_option("--pool", pool, "Pool file")->required();
  clus->add_option("--embeddings", cfg.embeddings, "Embedding table");
  clus->add_option("--k", cfg.k_clusters, "Number of clusters")->capture_default_str();
  clus->add_option("--batch", cfg.kmeans_batch, "Mini-batch size")->capture_default_str();
  clus->add_option("--iters", cfg.kmeans_iters, "Iterations")->capture_default_str();
  clus->add_option("--out", out, "Cluster file")->required();

  auto* man = app.add_subcommand("manifests", "Build per-concept training manifests");
  man->add_option("--cluster", clusters, "Cluster file")->required();
  man->add_option("--images", cfg.concept_images, "Concept image manifest");
  man->add_option("--features", features, "Concept image features, to check image ids");
  man->add_option("--neg-ratio", cfg.neg_ratio, "Negatives per positive")->capture_default_str();
  man->add_option("--out", out, "Output directory")->required();

  auto* train = app.add_subcommand("train-bank", "Train one classifier per concept");
  train->add_option("--pool", pool, "Pool file")->required();
  train->add_option("--manifests", manifests, "Manifest directory")->required();
  train->add_option("--features", cfg.concept_features, "Concept image features");
  train->add_option("--cv-folds", cfg.cv_folds, "Cross-validation folds")->capture_default_str();
  train->add_option("--cv-grid", grid, "Comma-separated C values");
  train->add_option("--out", out, "Bank file")->required();

  auto* score = app.add_subcommand("score", "Map images to concept-score vectors");
  score->add_option("--bank", bank, "Bank file")->required();
  score->add_option("--features", cfg.eval_features, "Image features");
  score->add_option("--labels", labels, "Class labels, enables --top-out");
  score->add_option("--top-out", top_out, "Per-class top concepts file");
  score->add_option("--out", out, "Scores file")->required();

  auto* eval = app.add_subcommand("evaluate", "One-shot or split evaluation");
  eval->add_option("--features", features, "Feature file")->required();
  eval->add_option("--labels", cfg.eval_labels, "Class labels");
  eval->add_option("--mode", mode, "one-shot or split")->capture_default_str();
  eval->add_option("--reps", cfg.reps, "Repetitions")->capture_default_str();
  eval->add_option("--split", cfg.split, "Training fraction in split mode")->capture_default_str();
  eval->add_option("--svm-c", cfg.svm_C, "Event classifier C")->capture_default_str();
  eval->add_option("--name", representation, "Representation name")->capture_default_str();
  eval->add_option("--out", out, "Report file")->required();

  auto* cmp = app.add_subcommand("compare", "Evaluate several representations with paired seeds");
  cmp->add_option("--features", named, "name=path, repeatable")->required();
  cmp->add_option("--labels", cfg.eval_labels, "Class labels");
  cmp->add_option("--mode", mode, "one-shot or split")->capture_default_str();
  cmp->add_option("--reps", cfg.reps, "Repetitions")->capture_default_str();
  cmp->add_option("--split", cfg.split, "Training fraction in split mode")->capture_default_str();
  cmp->add_option("--svm-c", cfg.svm_C, "Event classifier C")->capture_default_str();
  cmp->add_option("--out", out, "Report file")->required();

  auto* all = app.add_subcommand("run-all", "Run every stage from raw inputs to the report");
  auto* val = app.add_subcommand("validate", "Check a configuration and print it resolved");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  const Logger log = [quiet](const std::string& msg) {
    if (!quiet) std::cerr << msg << '\n';
  };

  try {
    if (!grid.empty()) {
      auto parsed = parse_config("cv_grid=" + grid);
      if (!parsed.errors.empty()) throw ConfigError(parsed.errors.front());
      cfg.cv_grid = parsed.config.cv_grid;
    }
    if (*eval || *cmp) cfg.eval_mode = parse_eval_mode(mode);
    const TrainOptions train_opts{cfg.logistic_tol, cfg.logistic_max_iter};

    if (*seg) {
      require(cfg.tags, "--tags");
      require(cfg.ngrams, "--ngrams");
      require(cfg.vrep, "--vrep");
      if (!vrep_default.empty()) {
        auto parsed = parse_config("vrep_default=" + vrep_default);
        if (!parsed.errors.empty()) throw ConfigError(parsed.errors.front());
        cfg.vrep_default = parsed.config.vrep_default;
      }
      run_segment_stage(cfg.tags, cfg.ngrams, cfg.vrep, cfg.max_len, cfg.smoothing, cfg.vrep_default,
                        cfg.threads, out, log);
    } else if (*disc) {
      require(cfg.events, "--events");
      require(cfg.embeddings, "--embeddings");
      run_discover_stage(segments, cfg.events, cfg.embeddings, cfg.stoplist, cfg.k_neighbors,
                         cfg.min_score, cfg.max_concepts, out, log);
    } else if (*clus) {
      require(cfg.embeddings, "--embeddings");
      run_cluster_stage(pool, cfg.embeddings, cfg.k_clusters, cfg.kmeans_batch, cfg.kmeans_iters, seed,
                        out, log);
    } else if (*man) {
      require(cfg.concept_images, "--images");
      run_manifests_stage(clusters, cfg.concept_images, features, cfg.neg_ratio, seed, cfg.threads, out,
                          log);
    } else if (*train) {
      require(cfg.concept_features, "--features");
      run_train_bank_stage(pool, manifests, cfg.concept_features, cfg.cv_folds, cfg.cv_grid, train_opts,
                           seed, cfg.threads, out, log);
    } else if (*score) {
      require(cfg.eval_features, "--features");
      run_score_stage(bank, cfg.eval_features, cfg.threads, out, log);
      if (!top_out.empty()) {
        require(labels, "--labels");
        run_top_concepts(bank, out, labels, cfg.top_r, cfg.top_n, top_out, log);
      }
    } else if (*eval) {
      require(cfg.eval_labels, "--labels");
      run_evaluate_stage(features, cfg.eval_labels, cfg.eval_config(seed), representation, out, log);
      if (quiet) std::cout << out << '\n';
    } else if (*cmp) {
      require(cfg.eval_labels, "--labels");
      std::vector<NamedFeatures> reps;
      for (const auto& n : named) {
        const auto eq = n.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == n.size()) {
          throw ConfigError("--features expects name=path, got '" + n + "'");
        }
        reps.push_back({n.substr(0, eq), n.substr(eq + 1)});
      }
      run_compare_stage(reps, cfg.eval_labels, cfg.eval_config(seed), out, log);
    } else if (*all) {
      if (config_path.empty()) throw ConfigError("run-all requires --config");
      cfg.seed = seed;
      const auto result = run_all(cfg, config_path, force, log);
      std::cout << result.report_path << '\n' << result.comparison_path << '\n';
    } else if (*val) {
      if (config_path.empty()) throw ConfigError("validate requires --config");
      auto checked = validate_config(config_path);
      checked.seed = seed;
      checked.threads = cfg.threads;
      std::cout << describe_config(checked);
    }
  } catch (const ConfigError& e) {
    std::cerr << "evc: config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "evc: data error: " << e.what() << '\n';
    return kData;
  } catch (const InvariantError& e) {
    std::cerr << "evc: internal error: " << e.what() << '\n';
    return kInvariant;
  } catch (const std::exception& e) {
    std::cerr << "evc: internal error: " << e.what() << '\n';
    return kInvariant;
  }
  return kOk;
}
