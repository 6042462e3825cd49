#include "eventcon/concept_discovery.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "eventcon/error.hpp"
#include "eventcon/text.hpp"

namespace eventcon {

std::string to_string(ConceptSource source) {
  switch (source) {
    case ConceptSource::kSegment:
      return "SEGMENT";
    case ConceptSource::kNeighbor:
      return "NEIGHBOR";
    case ConceptSource::kBoth:
      return "BOTH";
  }
  return "?";
}

ConceptSource parse_concept_source(std::string_view s) {
  if (s == "SEGMENT") return ConceptSource::kSegment;
  if (s == "NEIGHBOR") return ConceptSource::kNeighbor;
  if (s == "BOTH") return ConceptSource::kBoth;
  throw DataError("unknown concept source '" + std::string(s) + "'");
}

std::optional<std::size_t> ConceptPool::index_of(std::string_view phrase) const {
  for (std::size_t i = 0; i < concepts.size(); ++i) {
    if (concepts[i].phrase == phrase) return i;
  }
  return std::nullopt;
}

std::vector<std::string> ConceptPool::phrases() const {
  std::vector<std::string> out;
  out.reserve(concepts.size());
  for (const auto& c : concepts) out.push_back(c.phrase);
  return out;
}

std::optional<Vector> embed_phrase(const EmbeddingTable& table, std::string_view phrase) {
  if (const Vector* v = table.find(phrase)) return *v;
  Vector sum(table.dim(), 0.0);
  std::size_t known = 0;
  for (const auto& word : split_whitespace(phrase)) {
    if (const Vector* v = table.find(word)) {
      for (std::size_t j = 0; j < sum.size(); ++j) sum[j] += (*v)[j];
      ++known;
    }
  }
  if (known == 0) return std::nullopt;
  for (double& x : sum) x /= static_cast<double>(known);
  return sum;
}

double cosine_similarity(const Vector& a, const Vector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    dot += a[j] * b[j];
    na += a[j] * a[j];
    nb += b[j] * b[j];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<Neighbor> nearest_neighbors(const EmbeddingTable& table, std::string_view label,
                                        std::size_t k) {
  const std::string key = normalize(label);
  const auto query = embed_phrase(table, key);
  if (!query) throw DataError("event label '" + key + "' has no embedding");

  std::vector<Neighbor> all;
  all.reserve(table.size());
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (table.key(i) == key) continue;
    all.push_back({table.key(i), cosine_similarity(*query, table.vector(i))});
  }
  auto order = [](const Neighbor& a, const Neighbor& b) {
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    return a.phrase < b.phrase;
  };
  const std::size_t take = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(take), all.end(), order);
  all.resize(take);
  return all;
}

ConceptPool build_pool(const std::vector<RankedSegment>& ranked,
                       const std::vector<NeighborList>& neighbor_lists,
                       const EmbeddingTable& embeddings, const PoolOptions& options) {
  ConceptPool pool;
  pool.embedding_dim = embeddings.dim();
  std::unordered_map<std::string, std::size_t> index;

  auto admit = [&](const std::string& raw, ConceptSource source,
                   const std::set<std::string>& events) {
    const std::string phrase = normalize(raw);
    if (phrase.empty() || options.stoplist.count(phrase)) return;
    if (auto it = index.find(phrase); it != index.end()) {
      Concept& existing = pool.concepts[it->second];
      if (existing.source != source) existing.source = ConceptSource::kBoth;
      existing.provenance_events.insert(events.begin(), events.end());
      return;
    }
    auto vec = embed_phrase(embeddings, phrase);
    if (!vec) return;
    index.emplace(phrase, pool.concepts.size());
    pool.concepts.push_back({phrase, source, events, std::move(*vec)});
  };

  // Ranked segments arrive sorted by descending aggregate score.
  for (const auto& seg : ranked) {
    if (seg.aggregate_score < options.min_score) continue;
    admit(seg.phrase, ConceptSource::kSegment, seg.events);
  }
  for (const auto& list : neighbor_lists) {
    const std::set<std::string> events{normalize(list.event)};
    for (const auto& n : list.neighbors) admit(n.phrase, ConceptSource::kNeighbor, events);
  }
  if (options.max_concepts > 0 && pool.concepts.size() > options.max_concepts) {
    pool.concepts.resize(options.max_concepts);
  }
  if (pool.concepts.empty()) throw DataError("concept pool is empty after filtering");
  return pool;
}

void save_pool(const ConceptPool& pool, const std::string& path) {
  std::ostringstream out;
  for (const auto& c : pool.concepts) {
    out << c.phrase << '\t' << to_string(c.source) << '\t'
        << join(std::vector<std::string>(c.provenance_events.begin(), c.provenance_events.end()), ",")
        << '\n';
  }
  write_file_atomic(path, out.str());
}

ConceptPool load_pool(const std::string& path, const EmbeddingTable* embeddings) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  ConceptPool pool;
  pool.embedding_dim = embeddings ? embeddings->dim() : 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 3) {
      throw DataError(at_line(path, line_no) + "expected '<phrase>\\t<source>\\t<provenance>'");
    }
    Concept c;
    c.phrase = normalize(fields[0]);
    if (c.phrase.empty()) throw DataError(at_line(path, line_no) + "empty phrase");
    if (pool.index_of(c.phrase)) {
      throw DataError(at_line(path, line_no) + "duplicate concept '" + c.phrase + "'");
    }
    c.source = parse_concept_source(trim(fields[1]));
    for (auto& e : split(fields[2], ',')) {
      if (!trim(e).empty()) c.provenance_events.insert(std::string(trim(e)));
    }
    if (embeddings) {
      auto vec = embed_phrase(*embeddings, c.phrase);
      if (!vec) throw DataError(at_line(path, line_no) + "concept '" + c.phrase + "' has no embedding");
      c.vector = std::move(*vec);
    }
    pool.concepts.push_back(std::move(c));
  }
  if (pool.concepts.empty()) throw DataError(path + ": empty concept pool");
  return pool;
}

}  // namespace eventcon
