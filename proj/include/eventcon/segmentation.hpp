#pragma once

// Tag segmentation: splits each tag into consecutive, non-overlapping
// segments that maximize total stickiness, then scores segments by
// stickiness times visual representativeness.

#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "eventcon/corpus_io.hpp"

namespace eventcon {

struct Segment {
  std::vector<std::string> words;
  std::size_t start = 0;
  std::size_t length = 0;

  std::string phrase() const;
};

struct ScoredSegment {
  Segment segment;
  double stickiness = 0.0;
  double visual_rep = 0.0;
  double final_score = 0.0;
};

struct SegmentationResult {
  TagRecord tag;
  std::vector<Segment> segments;
  std::vector<double> stickiness;  // parallel to segments
  double total_stickiness = 0.0;
};

// Stickiness of words[begin, end). Must be nonnegative.
using StickinessFn =
    std::function<double(const std::vector<std::string>& words, std::size_t begin, std::size_t end)>;

struct StickinessParams {
  double additive_smoothing = 1.0;  // add-one by default
};

// Default provider: length prior times a squashed symmetric conditional
// probability over an offline n-gram table.
//
//   Stk(s)  = |s|/(|s|+1) * 2 / (1 + exp(-SCP(s)))
//   SCP(w)  = log P(w)
//   SCP(s)  = log( P(s)^2 / mean_i P(w_1..w_i) P(w_i+1..w_|s|) ),  |s| >= 2
//
// P is the additively smoothed relative frequency within the n-gram's own
// order: (c + a) / (total + a * (distinct + 1)).
class NGramStickiness {
 public:
  explicit NGramStickiness(const NGramTable& table, StickinessParams params = {})
      : table_(&table), params_(params) {}

  double operator()(const std::vector<std::string>& words, std::size_t begin,
                    std::size_t end) const;
  double probability(const std::vector<std::string>& words, std::size_t begin,
                     std::size_t end) const;
  double scp(const std::vector<std::string>& words, std::size_t begin,
             std::size_t end) const;

 private:
  const NGramTable* table_;
  StickinessParams params_;
};

double length_prior(std::size_t length);
double stickiness(const NGramTable& ngrams, const Segment& segment,
                  const StickinessParams& params = {});

inline constexpr std::size_t kDefaultMaxSegmentLength = 5;

// Maximizes the summed stickiness over all segmentations whose segments are
// at most max_len words long. Ties go to fewer segments, then to the
// lexicographically smallest list of segment start positions.
SegmentationResult segment_tag(const TagRecord& tag, const StickinessFn& provider,
                               std::size_t max_len = kDefaultMaxSegmentLength);

// Order-stable: result i corresponds to tags[i] for any thread count.
std::vector<SegmentationResult> segment_corpus(const std::vector<TagRecord>& tags,
                                               const StickinessFn& provider,
                                               std::size_t max_len,
                                               std::size_t threads = 1);

ScoredSegment score_segment(const Segment& seg, double stickiness,
                            const VisualRepTable& vrep);

struct RankedSegment {
  std::string phrase;
  double aggregate_score = 0.0;
  long long frequency = 0;
  std::set<std::string> events;  // not persisted in the ranked-segments file
};

// Occurrence-summed final scores per phrase, sorted by aggregate score
// (descending), then frequency (descending), then phrase.
std::vector<RankedSegment> rank_segments(const std::vector<SegmentationResult>& corpus,
                                         const VisualRepTable& vrep);

void save_ranked_segments(const std::vector<RankedSegment>& ranked, const std::string& path);
std::vector<RankedSegment> load_ranked_segments(const std::string& path);

}  // namespace eventcon
