#include "eventcon/corpus_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eventcon/error.hpp"
#include "eventcon/text.hpp"
#include "json.hpp"

namespace eventcon {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

// getline() without the trailing '\r' of CRLF files.
bool next_line(std::istream& in, std::string& line) {
  if (!std::getline(in, line)) return false;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return true;
}

double parse_finite(const std::string& field, const std::string& path,
                    std::size_t line_no) {
  double v = 0.0;
  if (!parse_double(field, v)) {
    throw DataError(at_line(path, line_no) + "not a number: '" + field + "'");
  }
  if (!std::isfinite(v)) {
    throw DataError(at_line(path, line_no) + "non-finite value '" + field + "'");
  }
  return v;
}

std::pair<std::size_t, std::size_t> parse_header(const std::string& line,
                                                 const std::string& path) {
  const auto fields = split_whitespace(line);
  long long rows = 0, dim = 0;
  if (fields.size() != 2 || !parse_int64(fields[0], rows) ||
      !parse_int64(fields[1], dim) || rows < 0 || dim <= 0) {
    throw DataError(at_line(path, 1) + "expected header '<count> <dimension>'");
  }
  return {static_cast<std::size_t>(rows), static_cast<std::size_t>(dim)};
}

std::string normalize_embedding_key(std::string key, KeyPolicy policy,
                                    const std::string& path, std::size_t line_no) {
  std::replace(key.begin(), key.end(), '_', ' ');
  std::string norm = normalize(key);
  if (norm.empty()) throw DataError(at_line(path, line_no) + "empty key");
  if (policy == KeyPolicy::kRequireNormalized && norm != key) {
    throw DataError(at_line(path, line_no) + "key '" + key + "' is not normalized");
  }
  return norm;
}

}  // namespace

bool EmbeddingTable::insert(std::string key, Vector v) {
  if (index_.count(key)) return false;
  index_.emplace(key, keys_.size());
  keys_.push_back(std::move(key));
  vectors_.push_back(std::move(v));
  return true;
}

const Vector* EmbeddingTable::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

void NGramTable::add(const std::vector<std::string>& words, long long count) {
  const std::size_t order = words.size();
  if (order == 0 || count < 0) return;
  if (totals_.size() <= order) {
    totals_.resize(order + 1, 0);
    distinct_.resize(order + 1, 0);
  }
  long long& slot = counts_[join(words, " ")];
  if (slot == 0 && count > 0) ++distinct_[order];
  slot += count;
  totals_[order] += count;
}

long long NGramTable::count(std::string_view ngram) const {
  auto it = counts_.find(std::string(ngram));
  return it == counts_.end() ? 0 : it->second;
}

long long NGramTable::count(const std::vector<std::string>& words, std::size_t begin,
                            std::size_t end) const {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key.push_back(' ');
    key += words[i];
  }
  return count(key);
}

long long NGramTable::total(std::size_t order) const {
  return order < totals_.size() ? totals_[order] : 0;
}

std::size_t NGramTable::distinct(std::size_t order) const {
  return order < distinct_.size() ? distinct_[order] : 0;
}

VisualRepTable::VisualRepTable(std::unordered_map<std::string, double> scores,
                               double default_score)
    : scores_(std::move(scores)), default_score_(default_score) {}

double VisualRepTable::lookup(std::string_view phrase) const {
  auto it = scores_.find(std::string(phrase));
  return it == scores_.end() ? default_score_ : it->second;
}

bool VisualRepTable::contains(std::string_view phrase) const {
  return scores_.count(std::string(phrase)) > 0;
}

void FeatureMatrix::add_row(std::string id, Vector v) {
  if (v.size() != dim_) {
    throw DataError("feature row '" + id + "' has dimension " +
                    std::to_string(v.size()) + ", expected " + std::to_string(dim_));
  }
  if (index_.count(id)) throw DataError("duplicate image id '" + id + "'");
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  rows_.push_back(std::move(v));
  if (!labels_.empty()) labels_.emplace_back();
}

const Vector* FeatureMatrix::find(std::string_view id) const {
  auto it = index_.find(std::string(id));
  return it == index_.end() ? nullptr : &rows_[it->second];
}

void FeatureMatrix::set_label(std::string_view id, std::string label) {
  auto it = index_.find(std::string(id));
  if (it == index_.end()) throw DataError("label for unknown image id '" + std::string(id) + "'");
  if (labels_.empty()) labels_.resize(ids_.size());
  labels_[it->second] = std::move(label);
}

const std::vector<std::string>* ConceptImageManifest::find(
    std::string_view concept_phrase) const {
  auto it = images.find(std::string(concept_phrase));
  return it == images.end() ? nullptr : &it->second;
}

EmbeddingTable load_embeddings(const std::string& path, KeyPolicy policy,
                               Warnings* warnings) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw DataError(path + ": empty embeddings file");
  const auto [vocab, dim] = parse_header(line, path);

  EmbeddingTable table(dim);
  std::size_t line_no = 1, entries = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_whitespace(line);
    if (fields.size() != dim + 1) {
      throw DataError(at_line(path, line_no) + "dimension mismatch: expected " +
                      std::to_string(dim) + " values, found " +
                      std::to_string(fields.size() - 1));
    }
    Vector v(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = parse_finite(fields[j + 1], path, line_no);
    std::string key = normalize_embedding_key(fields[0], policy, path, line_no);
    ++entries;
    if (!table.insert(key, std::move(v)) && warnings) {
      warnings->push_back(at_line(path, line_no) + "duplicate key '" + key +
                          "' ignored (first occurrence kept)");
    }
  }
  if (entries != vocab) {
    throw DataError(path + ": header declares " + std::to_string(vocab) +
                    " entries, found " + std::to_string(entries));
  }
  return table;
}

std::vector<TagRecord> load_tag_corpus(const std::string& path, Warnings* warnings) {
  auto in = open_input(path);
  std::vector<TagRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at_line(path, line_no) + "malformed record: " + e.what());
    }
    if (!j.is_object() || !j.contains("event") || !j["event"].is_string() ||
        !j.contains("tags") || !j["tags"].is_array()) {
      throw DataError(at_line(path, line_no) +
                      "malformed record: expected {\"event\": string, \"tags\": [string]}");
    }
    TagRecord rec;
    rec.event = normalize(j["event"].get<std::string>());
    if (rec.event.empty()) throw DataError(at_line(path, line_no) + "empty event label");
    for (const auto& t : j["tags"]) {
      if (!t.is_string()) throw DataError(at_line(path, line_no) + "tag entries must be strings");
      for (auto& w : split_whitespace(normalize(t.get<std::string>()))) {
        rec.words.push_back(std::move(w));
      }
    }
    if (rec.words.empty()) {
      if (warnings) warnings->push_back(at_line(path, line_no) + "empty tag skipped");
      continue;
    }
    records.push_back(std::move(rec));
  }
  return records;
}

NGramTable load_ngram_counts(const std::string& path, Warnings* warnings) {
  auto in = open_input(path);
  NGramTable table;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    long long count = 0;
    if (fields.size() != 2 || !parse_int64(trim(fields[1]), count)) {
      throw DataError(at_line(path, line_no) + "expected '<ngram>\\t<count>'");
    }
    if (count < 0) throw DataError(at_line(path, line_no) + "negative count");
    const std::string ngram = normalize(fields[0]);
    if (ngram.empty()) throw DataError(at_line(path, line_no) + "empty n-gram");
    if (!seen.insert(ngram).second && warnings) {
      warnings->push_back(at_line(path, line_no) + "repeated n-gram '" + ngram +
                          "'; counts summed");
    }
    table.add(split_whitespace(ngram), count);
  }
  if (table.max_order() == 0) throw DataError(path + ": empty table");
  return table;
}

VisualRepTable load_visual_rep(const std::string& path,
                               std::optional<double> default_override) {
  auto in = open_input(path);
  std::unordered_map<std::string, double> scores;
  std::vector<double> values;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2) throw DataError(at_line(path, line_no) + "expected '<phrase>\\t<score>'");
    const double score = parse_finite(std::string(trim(fields[1])), path, line_no);
    if (score < 0.0 || score > 1.0) {
      throw DataError(at_line(path, line_no) + "score " + fields[1] + " outside [0,1]");
    }
    const std::string phrase = normalize(fields[0]);
    if (phrase.empty()) throw DataError(at_line(path, line_no) + "empty phrase");
    if (!scores.emplace(phrase, score).second) {
      throw DataError(at_line(path, line_no) + "duplicate phrase '" + phrase + "'");
    }
    values.push_back(score);
  }
  if (scores.empty()) throw DataError(path + ": empty table");
  double def = default_override ? *default_override : median(values);
  if (!(def >= 0.0 && def <= 1.0)) throw ConfigError("visual-rep default outside [0,1]");
  return VisualRepTable(std::move(scores), def);
}

FeatureMatrix load_features(const std::string& path, const std::string& labels_path) {
  auto in = open_input(path);
  std::string line;
  if (!next_line(in, line)) throw DataError(path + ": empty feature file");
  const auto [rows, dim] = parse_header(line, path);
  FeatureMatrix fm(dim);
  std::size_t line_no = 1;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split_whitespace(line);
    if (fields.size() != dim + 1) {
      throw DataError(at_line(path, line_no) + "dimension mismatch: expected " +
                      std::to_string(dim) + " values, found " +
                      std::to_string(fields.size() - 1));
    }
    Vector v(dim);
    for (std::size_t j = 0; j < dim; ++j) v[j] = parse_finite(fields[j + 1], path, line_no);
    if (fm.find(fields[0])) {
      throw DataError(at_line(path, line_no) + "duplicate image id '" + fields[0] + "'");
    }
    fm.add_row(std::move(fields[0]), std::move(v));
  }
  if (fm.rows() != rows) {
    throw DataError(path + ": header declares " + std::to_string(rows) + " rows, found " +
                    std::to_string(fm.rows()));
  }
  if (!labels_path.empty()) load_labels(labels_path, fm);
  return fm;
}

void load_labels(const std::string& path, FeatureMatrix& features) {
  auto in = open_input(path);
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() != 2 || trim(fields[1]).empty()) {
      throw DataError(at_line(path, line_no) + "expected '<image_id>\\t<class>'");
    }
    const std::string id(trim(fields[0]));
    if (!features.find(id)) throw DataError(at_line(path, line_no) + "unknown image id '" + id + "'");
    if (!seen.insert(id).second) throw DataError(at_line(path, line_no) + "duplicate label for '" + id + "'");
    features.set_label(id, std::string(trim(fields[1])));
  }
  if (seen.size() != features.rows()) {
    throw DataError(path + ": " + std::to_string(features.rows() - seen.size()) +
                    " image(s) have no label");
  }
}

ConceptImageManifest load_manifest(const std::string& path, const FeatureMatrix* features) {
  auto in = open_input(path);
  ConceptImageManifest manifest;
  std::vector<std::string> unresolved;
  std::string line;
  std::size_t line_no = 0;
  while (next_line(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(at_line(path, line_no) + "malformed record: " + e.what());
    }
    if (!j.is_object() || !j.contains("concept") || !j["concept"].is_string() ||
        !j.contains("images") || !j["images"].is_array()) {
      throw DataError(at_line(path, line_no) +
                      "malformed record: expected {\"concept\": string, \"images\": [string]}");
    }
    const std::string concept_phrase = normalize(j["concept"].get<std::string>());
    if (concept_phrase.empty()) throw DataError(at_line(path, line_no) + "empty concept");
    if (manifest.images.count(concept_phrase)) {
      throw DataError(at_line(path, line_no) + "duplicate concept '" + concept_phrase + "'");
    }
    std::vector<std::string> ids;
    std::unordered_set<std::string> seen;
    for (const auto& id : j["images"]) {
      if (!id.is_string()) throw DataError(at_line(path, line_no) + "image ids must be strings");
      auto s = id.get<std::string>();
      if (features && !features->find(s)) unresolved.push_back(s);
      if (seen.insert(s).second) ids.push_back(std::move(s));
    }
    if (ids.empty()) throw DataError(at_line(path, line_no) + "concept '" + concept_phrase + "' has no images");
    manifest.concepts.push_back(concept_phrase);
    manifest.images.emplace(concept_phrase, std::move(ids));
  }
  if (!unresolved.empty()) {
    std::sort(unresolved.begin(), unresolved.end());
    unresolved.erase(std::unique(unresolved.begin(), unresolved.end()), unresolved.end());
    throw DataError(path + ": unresolved image id(s): " + join(unresolved, ", "));
  }
  return manifest;
}

std::vector<std::string> load_phrase_list(const std::string& path) {
  auto in = open_input(path);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  std::string line;
  while (next_line(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::string phrase = normalize(line);
    if (phrase.empty()) continue;
    if (seen.insert(phrase).second) out.push_back(std::move(phrase));
  }
  return out;
}

void save_features(const FeatureMatrix& features, const std::string& path) {
  std::ostringstream out;
  out << features.rows() << ' ' << features.dim() << '\n';
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << features.id(i);
    for (double v : features.row(i)) out << ' ' << format_double(v);
    out << '\n';
  }
  write_file_atomic(path, out.str());
}

void save_labels(const FeatureMatrix& features, const std::string& path) {
  std::ostringstream out;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    out << features.id(i) << '\t' << features.label(i) << '\n';
  }
  write_file_atomic(path, out.str());
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out << contents;
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw DataError("write failed: " + tmp);
    }
  }
  fs::rename(tmp, target);
}

std::string read_file(const std::string& path) {
  auto in = open_input(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace eventcon
