#include "eventcon/segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "eventcon/error.hpp"
#include "eventcon/parallel.hpp"
#include "eventcon/text.hpp"

namespace eventcon {

std::string Segment::phrase() const { return join(words, " "); }

double length_prior(std::size_t length) {
  return static_cast<double>(length) / static_cast<double>(length + 1);
}

double NGramStickiness::probability(const std::vector<std::string>& words,
                                    std::size_t begin, std::size_t end) const {
  const std::size_t order = end - begin;
  if (order > table_->max_order()) {
    throw DataError("segment of " + std::to_string(order) +
                    " words exceeds the n-gram table's maximum order " +
                    std::to_string(table_->max_order()) +
                    "; supply higher-order counts or lower the maximum segment length");
  }
  const double a = params_.additive_smoothing;
  const double c = static_cast<double>(table_->count(words, begin, end));
  const double total = static_cast<double>(table_->total(order));
  const double buckets = static_cast<double>(table_->distinct(order)) + 1.0;
  return (c + a) / (total + a * buckets);
}

double NGramStickiness::scp(const std::vector<std::string>& words, std::size_t begin,
                            std::size_t end) const {
  const double p = probability(words, begin, end);
  if (end - begin == 1) return std::log(p);
  double mean = 0.0;
  for (std::size_t split = begin + 1; split < end; ++split) {
    mean += probability(words, begin, split) * probability(words, split, end);
  }
  mean /= static_cast<double>(end - begin - 1);
  return std::log(p * p / mean);
}

double NGramStickiness::operator()(const std::vector<std::string>& words,
                                   std::size_t begin, std::size_t end) const {
  const double s = scp(words, begin, end);
  // 2 * sigmoid(s), evaluated on the stable branch.
  const double squashed = s >= 0 ? 2.0 / (1.0 + std::exp(-s)) : 2.0 * std::exp(s) / (1.0 + std::exp(s));
  return length_prior(end - begin) * squashed;
}

double stickiness(const NGramTable& ngrams, const Segment& segment,
                  const StickinessParams& params) {
  return NGramStickiness(ngrams, params)(segment.words, 0, segment.words.size());
}

namespace {

struct PrefixBest {
  double value = 0.0;
  std::size_t count = 0;
  std::vector<std::size_t> starts;  // segment starts after position 0
  bool reachable = false;
};

bool better(double value, std::size_t count, const std::vector<std::size_t>& starts,
            const PrefixBest& incumbent) {
  if (!incumbent.reachable) return true;
  if (value != incumbent.value) return value > incumbent.value;
  if (count != incumbent.count) return count < incumbent.count;
  return starts < incumbent.starts;
}

}  // namespace

SegmentationResult segment_tag(const TagRecord& tag, const StickinessFn& provider,
                               std::size_t max_len) {
  const auto& words = tag.words;
  const std::size_t n = words.size();
  if (n == 0) throw DataError("cannot segment an empty tag");
  if (max_len == 0) throw ConfigError("maximum segment length must be positive");

  // stk[end][len] caches provider(words, end - len, end).
  std::vector<std::vector<double>> stk(n + 1);
  std::vector<PrefixBest> best(n + 1);
  best[0].reachable = true;
  for (std::size_t end = 1; end <= n; ++end) {
    const std::size_t longest = std::min(max_len, end);
    stk[end].resize(longest + 1);
    for (std::size_t len = 1; len <= longest; ++len) {
      const std::size_t begin = end - len;
      const double s = provider(words, begin, end);
      if (!(s >= 0.0) || !std::isfinite(s)) {
        throw InvariantError("stickiness provider returned " + format_double(s));
      }
      stk[end][len] = s;
      const PrefixBest& prev = best[begin];
      const double value = prev.value + s;
      const std::size_t count = prev.count + 1;
      std::vector<std::size_t> starts = prev.starts;
      if (begin > 0) starts.push_back(begin);
      if (better(value, count, starts, best[end])) {
        best[end] = {value, count, std::move(starts), true};
      }
    }
  }

  SegmentationResult result;
  result.tag = tag;
  result.total_stickiness = best[n].value;
  std::vector<std::size_t> bounds{0};
  bounds.insert(bounds.end(), best[n].starts.begin(), best[n].starts.end());
  bounds.push_back(n);
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    Segment seg;
    seg.start = bounds[k];
    seg.length = bounds[k + 1] - bounds[k];
    seg.words.assign(words.begin() + seg.start, words.begin() + bounds[k + 1]);
    result.stickiness.push_back(stk[bounds[k + 1]][seg.length]);
    result.segments.push_back(std::move(seg));
  }
  return result;
}

std::vector<SegmentationResult> segment_corpus(const std::vector<TagRecord>& tags,
                                               const StickinessFn& provider,
                                               std::size_t max_len, std::size_t threads) {
  std::vector<SegmentationResult> out(tags.size());
  parallel_for(tags.size(), threads,
               [&](std::size_t i) { out[i] = segment_tag(tags[i], provider, max_len); });
  return out;
}

ScoredSegment score_segment(const Segment& seg, double stickiness,
                            const VisualRepTable& vrep) {
  if (!(stickiness >= 0.0)) throw DataError("stickiness must be nonnegative");
  ScoredSegment scored;
  scored.segment = seg;
  scored.stickiness = stickiness;
  scored.visual_rep = vrep.lookup(normalize(seg.phrase()));
  scored.final_score = stickiness * scored.visual_rep;
  return scored;
}

std::vector<RankedSegment> rank_segments(const std::vector<SegmentationResult>& corpus,
                                         const VisualRepTable& vrep) {
  if (corpus.empty()) throw DataError("cannot rank segments of an empty corpus");
  std::map<std::string, RankedSegment> by_phrase;
  for (const auto& result : corpus) {
    for (std::size_t k = 0; k < result.segments.size(); ++k) {
      const auto scored = score_segment(result.segments[k], result.stickiness[k], vrep);
      const std::string phrase = result.segments[k].phrase();
      auto& entry = by_phrase[phrase];
      entry.phrase = phrase;
      entry.aggregate_score += scored.final_score;
      entry.frequency += 1;
      entry.events.insert(result.tag.event);
    }
  }
  std::vector<RankedSegment> ranked;
  ranked.reserve(by_phrase.size());
  for (auto& [_, entry] : by_phrase) ranked.push_back(std::move(entry));
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.aggregate_score != b.aggregate_score) return a.aggregate_score > b.aggregate_score;
    if (a.frequency != b.frequency) return a.frequency > b.frequency;
    return a.phrase < b.phrase;
  });
  return ranked;
}

void save_ranked_segments(const std::vector<RankedSegment>& ranked, const std::string& path) {
  std::ostringstream out;
  for (const auto& r : ranked) {
    out << r.phrase << '\t' << format_double(r.aggregate_score) << '\t' << r.frequency << '\n';
  }
  write_file_atomic(path, out.str());
}

std::vector<RankedSegment> load_ranked_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<RankedSegment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    RankedSegment r;
    if (fields.size() != 3 || !parse_double(fields[1], r.aggregate_score) ||
        !parse_int64(trim(fields[2]), r.frequency) || r.frequency < 1 ||
        !(r.aggregate_score >= 0.0)) {
      throw DataError(at_line(path, line_no) +
                      "expected '<phrase>\\t<aggregate_score>\\t<frequency>'");
    }
    r.phrase = normalize(fields[0]);
    if (r.phrase.empty()) throw DataError(at_line(path, line_no) + "empty phrase");
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace eventcon
