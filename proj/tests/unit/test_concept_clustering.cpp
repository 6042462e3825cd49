#include <doctest.h>

#include <algorithm>

#include "eventcon/concept_clustering.hpp"
#include "eventcon/error.hpp"
#include "oracles.hpp"

using namespace eventcon;

namespace {

std::vector<Vector> blobs(Rng& rng, std::size_t per, std::size_t k, std::size_t d, double spread) {
  std::vector<Vector> pts;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < per; ++i) {
      Vector v(d);
      for (std::size_t j = 0; j < d; ++j) v[j] = (j == c % d ? 10.0 * static_cast<double>(c + 1) : 0.0) + spread * rng.normal();
      pts.push_back(v);
    }
  }
  return pts;
}

ConceptPool pool_of(const std::vector<Vector>& vs) {
  ConceptPool p;
  p.embedding_dim = vs[0].size();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    p.concepts.push_back({"c" + std::to_string(i), ConceptSource::kSegment, {"e"}, vs[i]});
  }
  return p;
}

}  // namespace

TEST_CASE("full-batch objective never increases") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const auto pts = blobs(rng, 15, 4, 3, 3.0);
    KMeansOptions opt{4, pts.size(), 30, static_cast<std::uint64_t>(t)};
    const auto m = minibatch_kmeans(pts, opt);
    for (std::size_t i = 1; i < m.objective_history.size(); ++i) {
      CHECK(m.objective_history[i] <= m.objective_history[i - 1] * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("final assignment is nearest-centroid") {
  Rng rng(2);
  const auto pts = blobs(rng, 30, 5, 4, 6.0);
  const auto m = minibatch_kmeans(pts, {5, 16, 40, 9});
  REQUIRE(m.assignment.size() == pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < m.centroids.size(); ++c) {
      const double d = oracle::sq_dist(pts[i], m.centroids[c]);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    CHECK(m.assignment[i] == arg);
  }
  CHECK(kmeans_objective(pts, m.centroids, m.assignment) == m.objective_history.back());
}

TEST_CASE("seeded runs are bit-identical") {
  Rng rng(3);
  const auto pts = blobs(rng, 20, 3, 2, 4.0);
  const auto a = minibatch_kmeans(pts, {3, 10, 25, 77});
  const auto b = minibatch_kmeans(pts, {3, 10, 25, 77});
  CHECK(a.centroids == b.centroids);
  CHECK(a.assignment == b.assignment);
  CHECK(a.objective_history == b.objective_history);
}

TEST_CASE("two separated blobs recover the optimal 2-clustering") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    const auto pts = blobs(rng, 5 + rng.index(2), 2, 2, 1.0);
    const auto m = minibatch_kmeans(pts, {2, pts.size(), 20, static_cast<std::uint64_t>(t)});
    const auto [best, cost] = oracle::best_two_clustering(pts);
    CHECK(oracle::same_partition(best, m.assignment));
    CHECK(m.objective_history.back() == doctest::Approx(cost).epsilon(1e-9));
  }
}

TEST_CASE("k equal to the number of points and degenerate inputs") {
  std::vector<Vector> pts = {{0.0}, {1.0}, {5.0}};
  const auto m = minibatch_kmeans(pts, {3, 3, 5, 1});
  CHECK(m.objective_history.back() == 0.0);
  std::vector<Vector> same(4, Vector{2.0, 2.0});
  const auto s = minibatch_kmeans(same, {2, 4, 5, 1});
  CHECK(s.objective_history.back() == 0.0);
  CHECK_THROWS(minibatch_kmeans(pts, {0, 3, 5, 1}));
  CHECK_THROWS(minibatch_kmeans(pts, {4, 3, 5, 1}));
}

TEST_CASE("cluster_pool clamps k and keeps pool order") {
  Rng rng(5);
  const auto pts = blobs(rng, 4, 3, 3, 0.5);
  const auto pool = pool_of(pts);
  const auto c = cluster_pool(pool, {150, 100, 10, 1});
  CHECK(c.phrases == pool.phrases());
  for (auto id : c.cluster) CHECK(id < pool.size());
  CHECK(c.index_of("c3") == 3);
  CHECK_THROWS(c.index_of("nope"));
}

TEST_CASE("training manifest excludes every image of the positive cluster") {
  ConceptClusters clusters;
  clusters.phrases = {"a", "b", "c", "d"};
  clusters.cluster = {0, 0, 1, 1};
  ConceptImageManifest manifest;
  manifest.concepts = clusters.phrases;
  manifest.images["a"] = {"i1", "i2"};
  manifest.images["b"] = {"i3", "shared"};
  manifest.images["c"] = {"i4", "i5", "shared", "i6"};
  manifest.images["d"] = {"i7", "i5"};
  const auto m = build_training_manifest("a", clusters, manifest, 10.0, 1);
  CHECK(m.positives == std::vector<std::string>{"i1", "i2"});
  std::set<std::string> neg(m.negatives.begin(), m.negatives.end());
  CHECK(neg == std::set<std::string>{"i4", "i5", "i6", "i7"});
  CHECK(neg.size() == m.negatives.size());

  const auto small = build_training_manifest("c", clusters, manifest, 0.25, 1);
  CHECK(small.negatives.size() == 1);
  for (const auto& id : small.negatives) CHECK((id == "i1" || id == "i2" || id == "i3"));

  CHECK(positive_set(clusters, "d") == std::set<std::string>{"c", "d"});
  ConceptImageManifest missing = manifest;
  missing.images.erase("a");
  CHECK_THROWS_AS(build_training_manifest("a", clusters, missing, 1.0, 1), DataError);
}

TEST_CASE("negative sampling is seeded and size follows the ratio") {
  ConceptClusters clusters;
  ConceptImageManifest manifest;
  for (int c = 0; c < 10; ++c) {
    const std::string p = "c" + std::to_string(c);
    clusters.phrases.push_back(p);
    clusters.cluster.push_back(static_cast<std::size_t>(c % 3));
    manifest.concepts.push_back(p);
    for (int i = 0; i < 6; ++i) manifest.images[p].push_back(p + "_" + std::to_string(i));
  }
  const auto a = build_training_manifest("c0", clusters, manifest, 2.0, 11);
  const auto b = build_training_manifest("c0", clusters, manifest, 2.0, 11);
  const auto c = build_training_manifest("c0", clusters, manifest, 2.0, 12);
  CHECK(a.negatives == b.negatives);
  CHECK(a.negatives != c.negatives);
  CHECK(a.negatives.size() == 12);
  CHECK(build_training_manifest("c0", clusters, manifest, 100.0, 1).negatives.size() == 36);
}

TEST_CASE("cluster and manifest files round-trip") {
  oracle::TempDir dir("clusters");
  ConceptClusters clusters;
  clusters.phrases = {"wedding cake", "tent"};
  clusters.cluster = {1, 0};
  save_clusters(clusters, dir.file("c.tsv"));
  const auto back = load_clusters(dir.file("c.tsv"));
  CHECK(back.phrases == clusters.phrases);
  CHECK(back.cluster == clusters.cluster);

  std::vector<TrainingManifest> ms = {{"wedding cake", {"a", "b"}, {"c"}}, {"tent/../x", {"c"}, {"a"}}};
  save_training_manifests(ms, dir.file("m"));
  const auto mback = load_training_manifests(dir.file("m"));
  REQUIRE(mback.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(mback[i].concept_phrase == ms[i].concept_phrase);
    CHECK(mback[i].positives == ms[i].positives);
    CHECK(mback[i].negatives == ms[i].negatives);
  }
  CHECK_FALSE(std::filesystem::exists(dir.file("m.tmpdir")));
}
