#pragma once

// Loaders and in-memory tables for every external data artifact. All tables
// are immutable after loading and safe to share across threads.

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace eventcon {

using Vector = std::vector<double>;
using Warnings = std::vector<std::string>;

class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  // First insertion of a key wins; returns false on a duplicate.
  bool insert(std::string key, Vector v);
  const Vector* find(std::string_view key) const;

  const std::string& key(std::size_t i) const { return keys_[i]; }
  const Vector& vector(std::size_t i) const { return vectors_[i]; }

 private:
  std::size_t dim_;
  std::vector<std::string> keys_;
  std::vector<Vector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct TagRecord {
  std::string event;
  std::vector<std::string> words;
};

// Raw n-gram statistics. Keys are space-joined normalized words.
class NGramTable {
 public:
  NGramTable() = default;

  void add(const std::vector<std::string>& words, long long count);

  std::size_t max_order() const { return totals_.empty() ? 0 : totals_.size() - 1; }
  long long count(std::string_view ngram) const;
  long long count(const std::vector<std::string>& words, std::size_t begin,
                  std::size_t end) const;
  // Sum of counts over all n-grams of the given order.
  long long total(std::size_t order) const;
  // Number of distinct n-grams with a positive count at the given order.
  std::size_t distinct(std::size_t order) const;

 private:
  std::unordered_map<std::string, long long> counts_;
  std::vector<long long> totals_;
  std::vector<std::size_t> distinct_;
};

class VisualRepTable {
 public:
  VisualRepTable() = default;
  VisualRepTable(std::unordered_map<std::string, double> scores, double default_score);

  // Score for a normalized phrase, or the default when absent.
  double lookup(std::string_view phrase) const;
  bool contains(std::string_view phrase) const;
  double default_score() const { return default_score_; }
  std::size_t size() const { return scores_.size(); }

 private:
  std::unordered_map<std::string, double> scores_;
  double default_score_ = 0.0;
};

// Image feature rows keyed by image id, in file order.
class FeatureMatrix {
 public:
  explicit FeatureMatrix(std::size_t dim = 0) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t rows() const { return ids_.size(); }

  void add_row(std::string id, Vector v);
  const Vector* find(std::string_view id) const;
  const std::string& id(std::size_t i) const { return ids_[i]; }
  const Vector& row(std::size_t i) const { return rows_[i]; }

  bool has_labels() const { return !labels_.empty(); }
  void set_label(std::string_view id, std::string label);
  const std::string& label(std::size_t i) const { return labels_[i]; }

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<Vector> rows_;
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Concept phrase -> image ids, in file order.
struct ConceptImageManifest {
  std::vector<std::string> concepts;
  std::unordered_map<std::string, std::vector<std::string>> images;

  const std::vector<std::string>* find(std::string_view concept_phrase) const;
};

enum class KeyPolicy {
  kNormalize,          // normalize keys ('_' encodes a space)
  kRequireNormalized,  // keys must already be in normalized form
};

EmbeddingTable load_embeddings(const std::string& path,
                               KeyPolicy policy = KeyPolicy::kNormalize,
                               Warnings* warnings = nullptr);
std::vector<TagRecord> load_tag_corpus(const std::string& path,
                                       Warnings* warnings = nullptr);
NGramTable load_ngram_counts(const std::string& path, Warnings* warnings = nullptr);
VisualRepTable load_visual_rep(const std::string& path,
                               std::optional<double> default_override = std::nullopt);
FeatureMatrix load_features(const std::string& path,
                            const std::string& labels_path = {});
void load_labels(const std::string& path, FeatureMatrix& features);
// Every image id must resolve in `features` when it is given.
ConceptImageManifest load_manifest(const std::string& path,
                                   const FeatureMatrix* features = nullptr);
// One normalized phrase per line; '#' starts a comment. Order-preserving,
// duplicates dropped.
std::vector<std::string> load_phrase_list(const std::string& path);

void save_features(const FeatureMatrix& features, const std::string& path);
void save_labels(const FeatureMatrix& features, const std::string& path);

double median(std::vector<double> values);

// Writes to path via a temporary sibling and renames on success.
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace eventcon
