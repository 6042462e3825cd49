#include "eventcon/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

#include "eventcon/bank_io.hpp"
#include "eventcon/concept_bank.hpp"
#include "eventcon/concept_clustering.hpp"
#include "eventcon/concept_discovery.hpp"
#include "eventcon/corpus_io.hpp"
#include "eventcon/error.hpp"
#include "eventcon/parallel.hpp"
#include "eventcon/rng.hpp"
#include "eventcon/segmentation.hpp"
#include "eventcon/text.hpp"

namespace eventcon {
namespace fs = std::filesystem;

EvalConfig PipelineConfig::eval_config(std::uint64_t master_seed) const {
  EvalConfig ec;
  ec.mode = eval_mode;
  ec.repetitions = reps;
  ec.split_fraction = split;
  ec.seed = stage_seed(master_seed, StageSeed::kEvaluate);
  ec.svm_C = svm_C;
  ec.svm.loss = svm_loss;
  ec.svm.tol = svm_tol;
  ec.svm.max_iter = svm_max_iter;
  ec.threads = threads;
  return ec;
}

std::uint64_t stage_seed(std::uint64_t master, StageSeed stage) {
  return derive_seed(master, static_cast<std::uint64_t>(stage));
}

// ---------------------------------------------------------------------------
// Configuration

namespace {

struct ConfigReader {
  PipelineConfig& cfg;
  std::vector<std::string>& errors;
  std::string base_dir;

  void fail(const std::string& key, const std::string& why) { errors.push_back(key + ": " + why); }

  void path(const std::string& key, const std::string& v, std::string& dst) {
    if (v.empty()) {
      dst.clear();
      return;
    }
    fs::path p(v);
    if (p.is_relative() && !base_dir.empty()) p = fs::path(base_dir) / p;
    dst = p.lexically_normal().string();
    (void)key;
  }

  void size(const std::string& key, const std::string& v, std::size_t& dst, long long lo,
            long long hi = (1LL << 40)) {
    long long x = 0;
    if (!parse_int64(v, x)) return fail(key, "expected an integer, got '" + v + "'");
    if (x < lo || x > hi) {
      return fail(key, "value " + v + " out of range [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    }
    dst = static_cast<std::size_t>(x);
  }

  // Open or closed interval checks on a real value.
  void real(const std::string& key, const std::string& v, double& dst, double lo, bool lo_open,
            double hi = 1e300, bool hi_open = false) {
    double x = 0;
    if (!parse_double(v, x) || !std::isfinite(x)) return fail(key, "expected a number, got '" + v + "'");
    const bool ok_lo = lo_open ? x > lo : x >= lo;
    const bool ok_hi = hi_open ? x < hi : x <= hi;
    if (!ok_lo || !ok_hi) return fail(key, "value " + v + " out of range");
    dst = x;
  }
};

}  // namespace

ConfigParse parse_config(const std::string& text, const std::string& base_dir) {
  ConfigParse result;
  PipelineConfig& cfg = result.config;
  ConfigReader r{cfg, result.errors, base_dir};

  using Handler = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Handler> handlers = {
      {"tags", [&](auto& k, auto& v) { r.path(k, v, cfg.tags); }},
      {"ngrams", [&](auto& k, auto& v) { r.path(k, v, cfg.ngrams); }},
      {"vrep", [&](auto& k, auto& v) { r.path(k, v, cfg.vrep); }},
      {"embeddings", [&](auto& k, auto& v) { r.path(k, v, cfg.embeddings); }},
      {"events", [&](auto& k, auto& v) { r.path(k, v, cfg.events); }},
      {"stoplist", [&](auto& k, auto& v) { r.path(k, v, cfg.stoplist); }},
      {"concept_images", [&](auto& k, auto& v) { r.path(k, v, cfg.concept_images); }},
      {"concept_features", [&](auto& k, auto& v) { r.path(k, v, cfg.concept_features); }},
      {"eval_features", [&](auto& k, auto& v) { r.path(k, v, cfg.eval_features); }},
      {"eval_labels", [&](auto& k, auto& v) { r.path(k, v, cfg.eval_labels); }},
      {"work_dir", [&](auto& k, auto& v) {
         if (v.empty()) return r.fail(k, "must not be empty");
         r.path(k, v, cfg.work_dir);
       }},
      {"max_len", [&](auto& k, auto& v) { r.size(k, v, cfg.max_len, 1, 64); }},
      {"smoothing", [&](auto& k, auto& v) { r.real(k, v, cfg.smoothing, 0.0, true); }},
      {"vrep_default", [&](auto& k, auto& v) {
         if (v.empty()) {
           cfg.vrep_default.reset();
           return;
         }
         double x = 0;
         r.real(k, v, x, 0.0, false, 1.0, false);
         if (x >= 0.0 && x <= 1.0) cfg.vrep_default = x;
       }},
      {"k_neighbors", [&](auto& k, auto& v) { r.size(k, v, cfg.k_neighbors, 1); }},
      {"min_score", [&](auto& k, auto& v) { r.real(k, v, cfg.min_score, 0.0, false); }},
      {"max_concepts", [&](auto& k, auto& v) { r.size(k, v, cfg.max_concepts, 0); }},
      {"k_clusters", [&](auto& k, auto& v) { r.size(k, v, cfg.k_clusters, 1); }},
      {"kmeans_batch", [&](auto& k, auto& v) { r.size(k, v, cfg.kmeans_batch, 1); }},
      {"kmeans_iters", [&](auto& k, auto& v) { r.size(k, v, cfg.kmeans_iters, 0); }},
      {"neg_ratio", [&](auto& k, auto& v) { r.real(k, v, cfg.neg_ratio, 0.0, true); }},
      {"cv_folds", [&](auto& k, auto& v) { r.size(k, v, cfg.cv_folds, 2, 100); }},
      {"cv_grid", [&](auto& k, auto& v) {
         std::vector<double> grid;
         for (const auto& part : split(v, ',')) {
           double x = 0;
           if (!parse_double(trim(part), x) || !(x > 0.0) || !std::isfinite(x)) {
             return r.fail(k, "expected comma-separated positive numbers, got '" + v + "'");
           }
           grid.push_back(x);
         }
         cfg.cv_grid = grid;
       }},
      {"logistic_tol", [&](auto& k, auto& v) { r.real(k, v, cfg.logistic_tol, 0.0, true); }},
      {"logistic_max_iter", [&](auto& k, auto& v) { r.size(k, v, cfg.logistic_max_iter, 1); }},
      {"svm_C", [&](auto& k, auto& v) { r.real(k, v, cfg.svm_C, 0.0, true); }},
      {"svm_loss", [&](auto& k, auto& v) {
         if (v == "hinge") cfg.svm_loss = SvmLoss::kHinge;
         else if (v == "squared_hinge") cfg.svm_loss = SvmLoss::kSquaredHinge;
         else r.fail(k, "expected hinge or squared_hinge, got '" + v + "'");
       }},
      {"svm_tol", [&](auto& k, auto& v) { r.real(k, v, cfg.svm_tol, 0.0, true); }},
      {"svm_max_iter", [&](auto& k, auto& v) { r.size(k, v, cfg.svm_max_iter, 1); }},
      {"eval_mode", [&](auto& k, auto& v) {
         try {
           cfg.eval_mode = parse_eval_mode(v);
         } catch (const ConfigError& e) {
           r.fail(k, e.what());
         }
       }},
      {"reps", [&](auto& k, auto& v) { r.size(k, v, cfg.reps, 1, 100000); }},
      {"split", [&](auto& k, auto& v) { r.real(k, v, cfg.split, 0.0, true, 1.0, true); }},
      {"top_r", [&](auto& k, auto& v) { r.size(k, v, cfg.top_r, 1); }},
      {"top_n", [&](auto& k, auto& v) { r.size(k, v, cfg.top_n, 1); }},
      {"threads", [&](auto& k, auto& v) { r.size(k, v, cfg.threads, 0, 1024); }},
      {"seed", [&](auto& k, auto& v) {
         std::uint64_t x = 0;
         auto res = std::from_chars(v.data(), v.data() + v.size(), x);
         if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
           return r.fail(k, "expected an unsigned integer, got '" + v + "'");
         }
         cfg.seed = x;
       }},
  };

  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const auto body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      result.errors.push_back("line " + std::to_string(line_no) + ": expected key=value");
      continue;
    }
    const std::string key(trim(body.substr(0, eq)));
    const std::string value(trim(body.substr(eq + 1)));
    auto it = handlers.find(key);
    if (it == handlers.end()) {
      result.errors.push_back("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      continue;
    }
    if (!seen.insert(key).second) {
      result.errors.push_back("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
      continue;
    }
    it->second(key, value);
  }
  return result;
}

void check_paths(const PipelineConfig& cfg, std::vector<std::string>& errors) {
  const std::vector<std::pair<std::string, const std::string*>> required = {
      {"tags", &cfg.tags},
      {"ngrams", &cfg.ngrams},
      {"vrep", &cfg.vrep},
      {"embeddings", &cfg.embeddings},
      {"events", &cfg.events},
      {"concept_images", &cfg.concept_images},
      {"concept_features", &cfg.concept_features},
      {"eval_features", &cfg.eval_features},
      {"eval_labels", &cfg.eval_labels},
  };
  for (const auto& [key, value] : required) {
    if (value->empty()) {
      errors.push_back(key + ": required path is missing");
    } else if (!fs::exists(*value)) {
      errors.push_back(key + ": file not found: " + *value);
    }
  }
  if (!cfg.stoplist.empty() && !fs::exists(cfg.stoplist)) {
    errors.push_back("stoplist: file not found: " + cfg.stoplist);
  }
}

PipelineConfig validate_config(const std::string& path) {
  const std::string text = read_file(path);
  auto parsed = parse_config(text, fs::path(path).parent_path().string());
  check_paths(parsed.config, parsed.errors);
  if (!parsed.errors.empty()) {
    throw ConfigError("invalid configuration " + path + ":\n  " + join(parsed.errors, "\n  "));
  }
  return parsed.config;
}

std::string describe_config(const PipelineConfig& c) {
  std::ostringstream out;
  auto grid = [&]() {
    std::vector<std::string> parts;
    for (double g : c.cv_grid) parts.push_back(format_double(g));
    return join(parts, ",");
  };
  out << "tags=" << c.tags << "\nngrams=" << c.ngrams << "\nvrep=" << c.vrep
      << "\nembeddings=" << c.embeddings << "\nevents=" << c.events << "\nstoplist=" << c.stoplist
      << "\nconcept_images=" << c.concept_images << "\nconcept_features=" << c.concept_features
      << "\neval_features=" << c.eval_features << "\neval_labels=" << c.eval_labels
      << "\nwork_dir=" << c.work_dir << "\nmax_len=" << c.max_len
      << "\nsmoothing=" << format_double(c.smoothing)
      << "\nvrep_default=" << (c.vrep_default ? format_double(*c.vrep_default) : "")
      << "\nk_neighbors=" << c.k_neighbors << "\nmin_score=" << format_double(c.min_score)
      << "\nmax_concepts=" << c.max_concepts << "\nk_clusters=" << c.k_clusters
      << "\nkmeans_batch=" << c.kmeans_batch << "\nkmeans_iters=" << c.kmeans_iters
      << "\nneg_ratio=" << format_double(c.neg_ratio) << "\ncv_folds=" << c.cv_folds
      << "\ncv_grid=" << grid() << "\nlogistic_tol=" << format_double(c.logistic_tol)
      << "\nlogistic_max_iter=" << c.logistic_max_iter << "\nsvm_C=" << format_double(c.svm_C)
      << "\nsvm_loss=" << (c.svm_loss == SvmLoss::kHinge ? "hinge" : "squared_hinge")
      << "\nsvm_tol=" << format_double(c.svm_tol) << "\nsvm_max_iter=" << c.svm_max_iter
      << "\neval_mode=" << to_string(c.eval_mode) << "\nreps=" << c.reps
      << "\nsplit=" << format_double(c.split) << "\ntop_r=" << c.top_r << "\ntop_n=" << c.top_n
      << "\nthreads=" << c.threads << "\nseed=" << c.seed << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Stages

namespace {

void report_warnings(const Warnings& w, const Logger& log) {
  constexpr std::size_t kShown = 5;
  for (std::size_t i = 0; i < std::min(kShown, w.size()); ++i) log("warning: " + w[i]);
  if (w.size() > kShown) log("warning: ... " + std::to_string(w.size() - kShown) + " more");
}

}  // namespace

void run_segment_stage(const std::string& tags, const std::string& ngrams, const std::string& vrep,
                       std::size_t max_len, double smoothing, std::optional<double> vrep_default,
                       std::size_t threads, const std::string& out, const Logger& log) {
  Warnings warnings;
  const auto records = load_tag_corpus(tags, &warnings);
  const auto table = load_ngram_counts(ngrams, &warnings);
  const auto vrep_table = load_visual_rep(vrep, vrep_default);
  report_warnings(warnings, log);
  if (records.empty()) throw DataError(tags + ": no usable tag records");
  const NGramStickiness provider(table, StickinessParams{smoothing});
  const auto results = segment_corpus(records, provider, max_len, threads);
  const auto ranked = rank_segments(results, vrep_table);
  save_ranked_segments(ranked, out);
  log("segment: " + std::to_string(records.size()) + " tags -> " + std::to_string(ranked.size()) +
      " distinct segments");
}

void run_discover_stage(const std::string& segments, const std::string& events,
                        const std::string& embeddings, const std::string& stoplist,
                        std::size_t k_neighbors, double min_score, std::size_t max_concepts,
                        const std::string& out, const Logger& log) {
  const auto ranked = load_ranked_segments(segments);
  const auto event_labels = load_phrase_list(events);
  if (event_labels.empty()) throw DataError(events + ": no event labels");
  Warnings warnings;
  const auto table = load_embeddings(embeddings, KeyPolicy::kNormalize, &warnings);
  report_warnings(warnings, log);

  std::vector<NeighborList> lists(event_labels.size());
  for (std::size_t i = 0; i < event_labels.size(); ++i) {
    lists[i] = {event_labels[i], nearest_neighbors(table, event_labels[i], k_neighbors)};
  }
  PoolOptions options;
  if (!stoplist.empty()) {
    for (auto& s : load_phrase_list(stoplist)) options.stoplist.insert(std::move(s));
  }
  options.min_score = min_score;
  options.max_concepts = max_concepts;
  const auto pool = build_pool(ranked, lists, table, options);
  save_pool(pool, out);
  log("discover: " + std::to_string(pool.size()) + " concepts");
}

void run_cluster_stage(const std::string& pool_path, const std::string& embeddings, std::size_t k,
                       std::size_t batch, std::size_t iterations, std::uint64_t master_seed,
                       const std::string& out, const Logger& log) {
  const auto table = load_embeddings(embeddings);
  const auto pool = load_pool(pool_path, &table);
  KMeansOptions options;
  options.k = k;
  options.batch_size = batch;
  options.iterations = iterations;
  options.seed = stage_seed(master_seed, StageSeed::kCluster);
  const auto clusters = cluster_pool(pool, options);
  save_clusters(clusters, out);
  log("cluster: " + std::to_string(pool.size()) + " concepts into " +
      std::to_string(std::min(k, pool.size())) + " clusters");
}

void run_manifests_stage(const std::string& clusters_path, const std::string& images,
                         const std::string& features, double neg_ratio, std::uint64_t master_seed,
                         std::size_t threads, const std::string& out_dir, const Logger& log) {
  const auto clusters = load_clusters(clusters_path);
  std::optional<FeatureMatrix> fm;
  if (!features.empty()) fm = load_features(features);
  const auto manifest = load_manifest(images, fm ? &*fm : nullptr);
  const std::uint64_t seed = stage_seed(master_seed, StageSeed::kManifests);
  std::vector<TrainingManifest> manifests(clusters.phrases.size());
  parallel_for(manifests.size(), threads, [&](std::size_t i) {
    manifests[i] = build_training_manifest(clusters.phrases[i], clusters, manifest, neg_ratio,
                                           derive_seed(seed, i));
  });
  save_training_manifests(manifests, out_dir);
  log("manifests: " + std::to_string(manifests.size()) + " training manifests");
}

void run_train_bank_stage(const std::string& pool_path, const std::string& manifests_dir,
                          const std::string& features, std::size_t folds,
                          const std::vector<double>& grid, const TrainOptions& train,
                          std::uint64_t master_seed, std::size_t threads, const std::string& out,
                          const Logger& log) {
  const auto pool = load_pool(pool_path);
  const auto manifests = load_training_manifests(manifests_dir);
  const auto fm = load_features(features);
  BankConfig config;
  config.grid = grid;
  config.folds = folds;
  config.seed = stage_seed(master_seed, StageSeed::kTrainBank);
  config.train = train;
  config.threads = threads;
  const auto bank = train_bank(pool.phrases(), manifests, fm, config);
  save_bank(bank, out);
  log("train-bank: " + std::to_string(bank.size()) + " classifiers, cv accuracy in [" +
      bank.metadata.at("cv_accuracy_min") + ", " + bank.metadata.at("cv_accuracy_max") + "]");
}

void run_score_stage(const std::string& bank_path, const std::string& features, std::size_t threads,
                     const std::string& out, const Logger& log) {
  const auto bank = load_bank(bank_path);
  const auto fm = load_features(features);
  const auto scored = score_matrix(bank, fm, threads);
  for (const auto& s : scored) {
    if (s.scores.size() != bank.size()) throw InvariantError("concept-score vector has wrong length");
  }
  save_features(to_feature_matrix(scored, bank.size()), out);
  log("score: " + std::to_string(scored.size()) + " images x " + std::to_string(bank.size()) +
      " concepts");
}

void run_top_concepts(const std::string& bank_path, const std::string& scores_path,
                      const std::string& labels, std::size_t r, std::size_t n,
                      const std::string& out, const Logger& log) {
  const auto bank = load_bank(bank_path);
  const auto fm = load_features(scores_path, labels);
  const auto set = LabeledFeatureSet::from(fm);
  std::ostringstream text;
  for (std::size_t c = 0; c < set.classes.size(); ++c) {
    std::vector<ConceptScoreVector> scored;
    for (std::size_t i : set.members[c]) scored.push_back({set.ids[i], set.rows[i]});
    const auto top = top_concepts(bank, scored, r, n);
    for (std::size_t k = 0; k < top.size(); ++k) {
      text << set.classes[c] << '\t' << (k + 1) << '\t' << top[k].first << '\t' << top[k].second << '\n';
    }
  }
  write_file_atomic(out, text.str());
  log("top-concepts: written for " + std::to_string(set.classes.size()) + " classes");
}

void run_evaluate_stage(const std::string& features, const std::string& labels,
                        const EvalConfig& config, const std::string& representation,
                        const std::string& out, const Logger& log) {
  const auto fm = load_features(features, labels);
  const auto report = evaluate(LabeledFeatureSet::from(fm), config, representation);
  save_report(report, out);
  const std::string table = format_report_table(report);
  write_file_atomic(out + ".txt", table);
  log("evaluate:\n" + table);
}

void run_compare_stage(const std::vector<NamedFeatures>& representations,
                       const std::string& labels, const EvalConfig& config,
                       const std::string& out, const Logger& log) {
  std::vector<std::pair<std::string, FeatureMatrix>> loaded;
  for (const auto& r : representations) loaded.emplace_back(r.name, load_features(r.path, labels));
  const auto reports = compare_representations(loaded, config);
  std::string records;
  for (const auto& r : reports) records += serialize_report(r);
  write_file_atomic(out, records);
  const std::string table = format_comparison_table(reports);
  write_file_atomic(out + ".txt", table);
  log("compare:\n" + table);
}

// ---------------------------------------------------------------------------
// Orchestration

WorkLayout::WorkLayout(const std::string& work_dir) {
  const fs::path w(work_dir);
  segments = (w / "segments.tsv").string();
  pool = (w / "pool.tsv").string();
  clusters = (w / "clusters.tsv").string();
  manifests = (w / "manifests").string();
  bank = (w / "bank.json").string();
  scores = (w / "concept_scores.txt").string();
  top_concepts = (w / "top_concepts.tsv").string();
  report = (w / "report.jsonl").string();
  comparison = (w / "comparison.jsonl").string();
}

namespace {

struct Stage {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::function<void()> action;
};

std::optional<fs::file_time_type> mtime(const std::string& path) {
  std::error_code ec;
  auto t = fs::last_write_time(path, ec);
  if (ec) return std::nullopt;
  return t;
}

bool is_fresh(const Stage& stage) {
  std::optional<fs::file_time_type> newest_input;
  for (const auto& in : stage.inputs) {
    if (in.empty()) continue;
    auto t = mtime(in);
    if (!t) return false;
    if (!newest_input || *t > *newest_input) newest_input = t;
  }
  for (const auto& out : stage.outputs) {
    auto t = mtime(out);
    if (!t) return false;
    if (newest_input && *t < *newest_input) return false;
  }
  return true;
}

void remove_outputs(const Stage& stage) {
  std::error_code ec;
  for (const auto& out : stage.outputs) {
    fs::remove_all(out, ec);
    fs::remove_all(out + ".tmp", ec);
    fs::remove_all(out + ".tmpdir", ec);
  }
}

[[noreturn]] void rethrow_with_stage(const std::string& stage) {
  const std::string prefix = "stage '" + stage + "': ";
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const InvariantError& e) {
    throw InvariantError(prefix + e.what());
  } catch (const std::exception& e) {
    throw InvariantError(prefix + e.what());
  }
}

}  // namespace

RunAllResult run_all(const PipelineConfig& c, const std::string& config_path, bool force,
                     const Logger& log) {
  std::vector<std::string> errors;
  check_paths(c, errors);
  if (!errors.empty()) throw ConfigError("invalid configuration:\n  " + join(errors, "\n  "));
  fs::create_directories(c.work_dir);
  const WorkLayout w(c.work_dir);
  const std::string cfg = config_path;
  const std::uint64_t seed = c.seed;
  const EvalConfig ec = c.eval_config(seed);
  TrainOptions train{c.logistic_tol, c.logistic_max_iter};

  std::vector<Stage> stages = {
      {"segment", {c.tags, c.ngrams, c.vrep, cfg}, {w.segments},
       [&] { run_segment_stage(c.tags, c.ngrams, c.vrep, c.max_len, c.smoothing, c.vrep_default, c.threads, w.segments, log); }},
      {"discover", {w.segments, c.events, c.embeddings, c.stoplist, cfg}, {w.pool},
       [&] { run_discover_stage(w.segments, c.events, c.embeddings, c.stoplist, c.k_neighbors, c.min_score, c.max_concepts, w.pool, log); }},
      {"cluster", {w.pool, c.embeddings, cfg}, {w.clusters},
       [&] { run_cluster_stage(w.pool, c.embeddings, c.k_clusters, c.kmeans_batch, c.kmeans_iters, seed, w.clusters, log); }},
      {"manifests", {w.clusters, c.concept_images, c.concept_features, cfg}, {w.manifests},
       [&] { run_manifests_stage(w.clusters, c.concept_images, c.concept_features, c.neg_ratio, seed, c.threads, w.manifests, log); }},
      {"train-bank", {w.pool, w.manifests, c.concept_features, cfg}, {w.bank},
       [&] { run_train_bank_stage(w.pool, w.manifests, c.concept_features, c.cv_folds, c.cv_grid, train, seed, c.threads, w.bank, log); }},
      {"score", {w.bank, c.eval_features, c.eval_labels, cfg}, {w.scores, w.top_concepts},
       [&] {
         run_score_stage(w.bank, c.eval_features, c.threads, w.scores, log);
         run_top_concepts(w.bank, w.scores, c.eval_labels, c.top_r, c.top_n, w.top_concepts, log);
       }},
      {"evaluate", {w.scores, c.eval_labels, cfg}, {w.report, w.report + ".txt"},
       [&] { run_evaluate_stage(w.scores, c.eval_labels, ec, "concepts", w.report, log); }},
      {"compare", {w.scores, c.eval_features, c.eval_labels, cfg}, {w.comparison, w.comparison + ".txt"},
       [&] {
         run_compare_stage({{"concepts", w.scores}, {"raw", c.eval_features}}, c.eval_labels, ec, w.comparison, log);
       }},
  };

  RunAllResult result;
  for (const auto& stage : stages) {
    if (!force && is_fresh(stage)) {
      log("[skip] " + stage.name);
      result.skipped.push_back(stage.name);
      continue;
    }
    log("[run]  " + stage.name);
    try {
      stage.action();
    } catch (...) {
      remove_outputs(stage);
      rethrow_with_stage(stage.name);
    }
    result.executed.push_back(stage.name);
  }
  result.report_path = w.report;
  result.comparison_path = w.comparison;
  return result;
}

}  // namespace eventcon
