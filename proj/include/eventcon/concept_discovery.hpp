#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "eventcon/corpus_io.hpp"
#include "eventcon/segmentation.hpp"

namespace eventcon {

enum class ConceptSource { kSegment, kNeighbor, kBoth };

std::string to_string(ConceptSource source);
ConceptSource parse_concept_source(std::string_view s);

struct Concept {
  std::string phrase;
  ConceptSource source = ConceptSource::kSegment;
  std::set<std::string> provenance_events;
  Vector vector;
};

// Ordered, duplicate-free concept set. Order is fixed at build time and
// defines the feature order of everything downstream.
struct ConceptPool {
  std::vector<Concept> concepts;
  std::size_t embedding_dim = 0;

  std::size_t size() const { return concepts.size(); }
  std::optional<std::size_t> index_of(std::string_view phrase) const;
  std::vector<std::string> phrases() const;
};

// Exact key if present, else the component-wise mean of the vectors of
// in-vocabulary words; nullopt when no word is known.
std::optional<Vector> embed_phrase(const EmbeddingTable& table, std::string_view phrase);

double cosine_similarity(const Vector& a, const Vector& b);

struct Neighbor {
  std::string phrase;
  double similarity = 0.0;
};

inline constexpr std::size_t kDefaultNeighbors = 20;

// Top-k vocabulary entries by cosine similarity to the label's vector,
// excluding the label itself. Ties are broken by phrase.
std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::string_view label,
                                        std::size_t k = kDefaultNeighbors);

struct NeighborList {
  std::string event;
  std::vector<Neighbor> neighbors;
};

struct PoolOptions {
  std::unordered_set<std::string> stoplist;
  double min_score = 0.0;
  std::size_t max_concepts = 0;  // 0 = unlimited
};

ConceptPool build_pool(const std::vector<RankedSegment>& ranked,
                       const std::vector<NeighborList>& neighbor_lists,
                       const EmbeddingTable& embeddings, const PoolOptions& options);

// "<phrase>\t<source>\t<provenance,comma-joined>" per line.
void save_pool(const ConceptPool& pool, const std::string& path);
// Vectors are recomputed from the embedding table when one is given and
// left empty otherwise.
ConceptPool load_pool(const std::string& path, const EmbeddingTable* embeddings = nullptr);

}  // namespace eventcon
