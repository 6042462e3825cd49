#include "eventcon/concept_clustering.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "eventcon/error.hpp"
#include "eventcon/rng.hpp"
#include "eventcon/text.hpp"
#include "json.hpp"

namespace eventcon {
namespace fs = std::filesystem;
using nlohmann::json;

double squared_distance(const Vector& a, const Vector& b) {
  double d = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double t = a[j] - b[j];
    d += t * t;
  }
  return d;
}

std::size_t nearest_centroid(const std::vector<Vector>& centroids, const Vector& x) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    const double d = squared_distance(centroids[c], x);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

double kmeans_objective(const std::vector<Vector>& vectors, const std::vector<Vector>& centroids,
                        const std::vector<std::size_t>& assignment) {
  double total = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    total += squared_distance(vectors[i], centroids[assignment[i]]);
  }
  return total;
}

namespace {

std::vector<Vector> kmeanspp(const std::vector<Vector>& vectors, std::size_t k, Rng& rng) {
  const std::size_t n = vectors.size();
  std::vector<Vector> centroids;
  centroids.reserve(k);
  centroids.push_back(vectors[rng.index(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(vectors[i], centroids[0]);
  while (centroids.size() < k) {
    double total = 0.0;
    for (double d : d2) total += d;
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double cum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (d2[i] == 0.0) continue;
        cum += d2[i];
        if (cum > r) {
          pick = i;
          break;
        }
      }
      if (pick == n) {  // r landed in the rounding gap at the top
        for (std::size_t i = n; i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = rng.index(n);
    }
    centroids.push_back(vectors[pick]);
    for (std::size_t i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], squared_distance(vectors[i], centroids.back()));
    }
  }
  return centroids;
}

std::vector<std::size_t> assign_all(const std::vector<Vector>& vectors,
                                    const std::vector<Vector>& centroids) {
  std::vector<std::size_t> a(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) a[i] = nearest_centroid(centroids, vectors[i]);
  return a;
}

}  // namespace

ClusterModel minibatch_kmeans(const std::vector<Vector>& vectors, const KMeansOptions& options) {
  const std::size_t n = vectors.size();
  const std::size_t k = options.k;
  if (k == 0) throw ConfigError("k must be at least 1");
  if (n < k) {
    throw DataError("cannot form " + std::to_string(k) + " clusters from " + std::to_string(n) +
                    " points");
  }
  if (options.batch_size == 0) throw ConfigError("batch size must be positive");
  const std::size_t dim = vectors.front().size();
  for (const auto& v : vectors) {
    if (v.size() != dim) throw DataError("k-means input vectors differ in dimension");
  }

  Rng rng(options.seed);
  ClusterModel model;
  model.k = k;
  model.centroids = kmeanspp(vectors, k, rng);
  model.objective_history.push_back(
      kmeans_objective(vectors, model.centroids, assign_all(vectors, model.centroids)));

  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::vector<double> lifetime(k, 0.0);
  std::vector<Vector> sums(k, Vector(dim));
  std::vector<double> counts(k);

  for (std::size_t it = 0; it < options.iterations; ++it) {
    const std::vector<std::size_t> batch =
        options.batch_size >= n ? all : rng.sample(all, options.batch_size);
    for (auto& s : sums) std::fill(s.begin(), s.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i : batch) {
      const std::size_t c = nearest_centroid(model.centroids, vectors[i]);
      for (std::size_t j = 0; j < dim; ++j) sums[c][j] += vectors[i][j];
      counts[c] += 1.0;
    }
    // Equivalent to streaming x into c with rate 1/lifetime[c], one point at
    // a time, against the assignment cached at the start of the batch.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0.0) continue;
      lifetime[c] += counts[c];
      const double eta = counts[c] / lifetime[c];
      for (std::size_t j = 0; j < dim; ++j) {
        const double mean = sums[c][j] / counts[c];
        model.centroids[c][j] += eta * (mean - model.centroids[c][j]);
      }
    }
    model.objective_history.push_back(
        kmeans_objective(vectors, model.centroids, assign_all(vectors, model.centroids)));
  }
  model.assignment = assign_all(vectors, model.centroids);
  return model;
}

std::size_t ConceptClusters::index_of(std::string_view phrase) const {
  for (std::size_t i = 0; i < phrases.size(); ++i) {
    if (phrases[i] == phrase) return i;
  }
  throw DataError("unknown concept '" + std::string(phrase) + "'");
}

ConceptClusters cluster_pool(const ConceptPool& pool, KMeansOptions options) {
  options.k = std::min(options.k, pool.size());
  std::vector<Vector> vectors;
  vectors.reserve(pool.size());
  for (const auto& c : pool.concepts) vectors.push_back(c.vector);
  const ClusterModel model = minibatch_kmeans(vectors, options);
  ConceptClusters out;
  out.phrases = pool.phrases();
  out.cluster = model.assignment;
  return out;
}

std::set<std::string> positive_set(const ConceptClusters& clusters,
                                   std::string_view concept_phrase) {
  const std::size_t cluster = clusters.cluster[clusters.index_of(concept_phrase)];
  std::set<std::string> out;
  for (std::size_t i = 0; i < clusters.phrases.size(); ++i) {
    if (clusters.cluster[i] == cluster) out.insert(clusters.phrases[i]);
  }
  return out;
}

TrainingManifest build_training_manifest(std::string_view concept_phrase,
                                         const ConceptClusters& clusters,
                                         const ConceptImageManifest& manifest,
                                         double neg_ratio, std::uint64_t seed) {
  if (!(neg_ratio > 0.0)) throw ConfigError("neg_ratio must be positive");
  const std::set<std::string> pos_concepts = positive_set(clusters, concept_phrase);
  const auto* own = manifest.find(concept_phrase);
  if (!own || own->empty()) {
    throw DataError("concept '" + std::string(concept_phrase) + "' has no images");
  }

  TrainingManifest out;
  out.concept_phrase = std::string(concept_phrase);
  out.positives = *own;

  std::unordered_set<std::string> excluded;
  for (const auto& phrase : pos_concepts) {
    if (const auto* imgs = manifest.find(phrase)) excluded.insert(imgs->begin(), imgs->end());
  }
  std::vector<std::string> eligible;
  std::unordered_set<std::string> seen;
  for (const auto& phrase : clusters.phrases) {
    if (pos_concepts.count(phrase)) continue;
    const auto* imgs = manifest.find(phrase);
    if (!imgs) continue;
    for (const auto& id : *imgs) {
      if (!excluded.count(id) && seen.insert(id).second) eligible.push_back(id);
    }
  }
  if (eligible.empty()) {
    throw DataError("concept '" + out.concept_phrase +
                    "' has no negative-eligible images (its cluster covers the pool)");
  }
  const double wanted = std::max(1.0, std::floor(neg_ratio * static_cast<double>(out.positives.size())));
  const std::size_t v = std::min(static_cast<std::size_t>(wanted), eligible.size());

  std::vector<std::size_t> idx(eligible.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(seed);
  auto picked = rng.sample(std::move(idx), v);
  std::sort(picked.begin(), picked.end());
  out.negatives.reserve(v);
  for (std::size_t i : picked) out.negatives.push_back(eligible[i]);
  return out;
}

void save_clusters(const ConceptClusters& clusters, const std::string& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < clusters.phrases.size(); ++i) {
    out << clusters.phrases[i] << '\t' << clusters.cluster[i] << '\n';
  }
  write_file_atomic(path, out.str());
}

ConceptClusters load_clusters(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ConceptClusters out;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    long long id = 0;
    if (fields.size() != 2 || !parse_int64(trim(fields[1]), id) || id < 0) {
      throw DataError(at_line(path, line_no) + "expected '<phrase>\\t<cluster_id>'");
    }
    std::string phrase = normalize(fields[0]);
    if (!seen.insert(phrase).second) {
      throw DataError(at_line(path, line_no) + "duplicate concept '" + phrase + "'");
    }
    out.phrases.push_back(std::move(phrase));
    out.cluster.push_back(static_cast<std::size_t>(id));
  }
  if (out.phrases.empty()) throw DataError(path + ": empty cluster file");
  return out;
}

void save_training_manifest(const TrainingManifest& m, const std::string& path) {
  json j;
  j["concept"] = m.concept_phrase;
  j["positives"] = m.positives;
  j["negatives"] = m.negatives;
  write_file_atomic(path, j.dump(1) + "\n");
}

TrainingManifest load_training_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
    TrainingManifest m;
    m.concept_phrase = j.at("concept").get<std::string>();
    m.positives = j.at("positives").get<std::vector<std::string>>();
    m.negatives = j.at("negatives").get<std::vector<std::string>>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed training manifest: " + e.what());
  }
}

namespace {

std::string manifest_filename(std::size_t index, const std::string& phrase) {
  char prefix[16];
  std::snprintf(prefix, sizeof(prefix), "%05zu_", index);
  std::string name = prefix;
  for (char ch : phrase.substr(0, 48)) {
    name.push_back(std::isalnum(static_cast<unsigned char>(ch)) ? ch : '_');
  }
  return name + ".json";
}

}  // namespace

void save_training_manifests(const std::vector<TrainingManifest>& manifests,
                             const std::string& dir) {
  const fs::path target(dir);
  const fs::path staging = target.string() + ".tmpdir";
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (std::size_t i = 0; i < manifests.size(); ++i) {
      save_training_manifest(manifests[i],
                             (staging / manifest_filename(i, manifests[i].concept_phrase)).string());
    }
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  fs::remove_all(target);
  fs::rename(staging, target);
}

std::vector<TrainingManifest> load_training_manifests(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path().string());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<TrainingManifest> out;
  out.reserve(files.size());
  for (const auto& f : files) out.push_back(load_training_manifest(f));
  return out;
}

}  // namespace eventcon
