#pragma once

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "eventcon/concept_discovery.hpp"
#include "eventcon/corpus_io.hpp"

namespace eventcon {

struct KMeansOptions {
  std::size_t k = 150;
  std::size_t batch_size = 100;
  std::size_t iterations = 100;
  std::uint64_t seed = 0;
};

struct ClusterModel {
  std::size_t k = 0;
  std::vector<Vector> centroids;
  std::vector<std::size_t> assignment;  // parallel to the input vectors
  // Full-data objective after k-means++ seeding and after each iteration.
  std::vector<double> objective_history;
};

// Mini-batch k-means with k-means++ seeding. Each iteration assigns a batch
// against the current centroids, then moves every touched centroid towards
// its batch members with a per-centroid learning rate 1/(lifetime count).
// A final full pass assigns every point to its nearest centroid (ties go to
// the lower index). Deterministic for a given seed.
ClusterModel minibatch_kmeans(const std::vector<Vector>& vectors, const KMeansOptions& options);

double squared_distance(const Vector& a, const Vector& b);
std::size_t nearest_centroid(const std::vector<Vector>& centroids, const Vector& x);
double kmeans_objective(const std::vector<Vector>& vectors, const std::vector<Vector>& centroids,
                        const std::vector<std::size_t>& assignment);

// Concept phrase -> cluster id, in pool order. This is what the cluster
// file stores.
struct ConceptClusters {
  std::vector<std::string> phrases;
  std::vector<std::size_t> cluster;

  std::size_t index_of(std::string_view phrase) const;  // throws if unknown
};

ConceptClusters cluster_pool(const ConceptPool& pool, KMeansOptions options);

// All concepts sharing the concept's cluster, including itself.
std::set<std::string> positive_set(const ConceptClusters& clusters, std::string_view concept_phrase);

struct TrainingManifest {
  std::string concept_phrase;
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

inline constexpr double kDefaultNegRatio = 10.0;

// Positives are all images of the concept. Negatives are a seeded uniform
// sample, without replacement, from images of concepts outside the concept's
// cluster, never including an image that also belongs to any concept of the
// cluster. Sample size is min(neg_ratio * |positives|, available).
TrainingManifest build_training_manifest(std::string_view concept_phrase,
                                         const ConceptClusters& clusters,
                                         const ConceptImageManifest& manifest,
                                         double neg_ratio, std::uint64_t seed);

void save_clusters(const ConceptClusters& clusters, const std::string& path);
ConceptClusters load_clusters(const std::string& path);

void save_training_manifest(const TrainingManifest& m, const std::string& path);
TrainingManifest load_training_manifest(const std::string& path);

// Writes one file per concept, named by pool position.
void save_training_manifests(const std::vector<TrainingManifest>& manifests,
                             const std::string& dir);
std::vector<TrainingManifest> load_training_manifests(const std::string& dir);

}  // namespace eventcon
