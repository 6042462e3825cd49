#include <doctest.h>

#include <algorithm>

#include "eventcon/concept_discovery.hpp"
#include "eventcon/error.hpp"
#include "oracles.hpp"

using namespace eventcon;

namespace {

EmbeddingTable small_table() {
  EmbeddingTable t(2);
  t.insert("party", {1.0, 0.0});
  t.insert("cake", {0.9, 0.1});
  t.insert("balloon", {0.8, 0.3});
  t.insert("tent", {0.0, 1.0});
  t.insert("wedding cake", {0.7, 0.7});
  return t;
}

}  // namespace

TEST_CASE("embed_phrase: exact key, word mean, or absent") {
  EmbeddingTable t(2);
  t.insert("a", {1.0, 0.0});
  t.insert("b", {0.0, 1.0});
  CHECK(*embed_phrase(t, "a") == Vector{1.0, 0.0});
  CHECK(*embed_phrase(t, "a b") == Vector{0.5, 0.5});
  CHECK(*embed_phrase(t, "a zz") == Vector{1.0, 0.0});
  CHECK_FALSE(embed_phrase(t, "zz yy").has_value());
}

TEST_CASE("cosine similarity edge cases") {
  CHECK(cosine_similarity({1, 0}, {2, 0}) == 1.0);
  CHECK(cosine_similarity({1, 0}, {-3, 0}) == -1.0);
  CHECK(cosine_similarity({0, 0}, {1, 1}) == 0.0);
}

TEST_CASE("nearest neighbors match exhaustive cosine ranking") {
  const auto t = small_table();
  const auto got = nearest_neighbors(t, "party", 10);
  std::vector<std::pair<double, std::string>> all;
  const Vector q{1.0, 0.0};
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t.key(i) == "party") continue;
    const auto& v = t.vector(i);
    const double c = (q[0] * v[0] + q[1] * v[1]) / std::sqrt(v[0] * v[0] + v[1] * v[1]);
    all.emplace_back(-c, t.key(i));
  }
  std::sort(all.begin(), all.end());
  REQUIRE(got.size() == all.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].phrase == all[i].second);
    CHECK(got[i].similarity == doctest::Approx(-all[i].first).epsilon(1e-12));
  }
  CHECK(nearest_neighbors(t, "party", 2).size() == 2);
  CHECK_THROWS_AS(nearest_neighbors(t, "unknown thing", 3), DataError);
}

TEST_CASE("identical direction ranks first with similarity one") {
  EmbeddingTable t(2);
  t.insert("q", {2.0, 2.0});
  t.insert("x", {1.0, 1.0});
  t.insert("y", {1.0, 0.0});
  const auto n = nearest_neighbors(t, "q", 5);
  CHECK(n[0].phrase == "x");
  CHECK(n[0].similarity == doctest::Approx(1.0));
}

TEST_CASE("neighbor ties are broken by phrase") {
  EmbeddingTable t(1);
  t.insert("q", {1.0});
  t.insert("b", {1.0});
  t.insert("a", {2.0});
  t.insert("c", {3.0});
  const auto n = nearest_neighbors(t, "q", 3);
  CHECK(n[0].phrase == "a");
  CHECK(n[1].phrase == "b");
  CHECK(n[2].phrase == "c");
}

TEST_CASE("build_pool merges sources, filters and orders") {
  const auto t = small_table();
  std::vector<RankedSegment> ranked = {{"wedding cake", 5.0, 3, {"wedding"}},
                                       {"cake", 2.0, 1, {"birthday"}},
                                       {"gibberish", 1.5, 1, {"x"}},
                                       {"tent", 0.1, 1, {"camping"}}};
  std::vector<NeighborList> lists = {{"birthday", {{"cake", 0.9}, {"balloon", 0.8}}}};
  PoolOptions opt;
  opt.min_score = 1.0;
  const auto pool = build_pool(ranked, lists, t, opt);
  CHECK(pool.phrases() == std::vector<std::string>{"wedding cake", "cake", "balloon"});
  CHECK(pool.concepts[1].source == ConceptSource::kBoth);
  CHECK(pool.concepts[1].provenance_events == std::set<std::string>{"birthday"});
  CHECK(pool.concepts[2].source == ConceptSource::kNeighbor);
  CHECK(pool.embedding_dim == 2);

  opt.stoplist.insert("cake");
  CHECK(build_pool(ranked, lists, t, opt).phrases() ==
        std::vector<std::string>{"wedding cake", "balloon"});
  opt.max_concepts = 1;
  CHECK(build_pool(ranked, lists, t, opt).size() == 1);

  PoolOptions strict;
  strict.min_score = 100.0;
  CHECK_THROWS_AS(build_pool(ranked, {}, t, strict), DataError);
}

TEST_CASE("pool filtering is monotone") {
  Rng rng(12);
  EmbeddingTable t(3);
  std::vector<RankedSegment> ranked;
  for (int i = 0; i < 40; ++i) {
    const std::string p = "w" + std::to_string(i);
    t.insert(p, {rng.normal(), rng.normal(), rng.normal()});
    ranked.push_back({p, rng.uniform() * 10, 1, {"e"}});
  }
  std::sort(ranked.begin(), ranked.end(),
            [](const auto& a, const auto& b) { return a.aggregate_score > b.aggregate_score; });
  std::vector<NeighborList> lists = {{"w0", nearest_neighbors(t, "w0", 5)}};
  PoolOptions opt;
  std::size_t prev = build_pool(ranked, lists, t, opt).size();
  for (double m : {1.0, 3.0, 5.0, 8.0}) {
    opt.min_score = m;
    const auto pool = build_pool(ranked, lists, t, opt);
    CHECK(pool.size() <= prev);
    prev = pool.size();
    const auto phrases = pool.phrases();
    std::set<std::string> uniq(phrases.begin(), phrases.end());
    CHECK(uniq.size() == pool.size());
  }
}

TEST_CASE("pool round-trips") {
  oracle::TempDir dir("pool");
  const auto t = small_table();
  std::vector<RankedSegment> ranked = {{"wedding cake", 5.0, 3, {"wedding"}}};
  std::vector<NeighborList> lists = {{"birthday", {{"cake", 0.9}}}, {"party", {{"cake", 0.9}}}};
  const auto pool = build_pool(ranked, lists, t, {});
  save_pool(pool, dir.file("p.tsv"));
  const auto back = load_pool(dir.file("p.tsv"), &t);
  REQUIRE(back.size() == pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    CHECK(back.concepts[i].phrase == pool.concepts[i].phrase);
    CHECK(back.concepts[i].source == pool.concepts[i].source);
    CHECK(back.concepts[i].provenance_events == pool.concepts[i].provenance_events);
    CHECK(back.concepts[i].vector == pool.concepts[i].vector);
  }
}
