#include "eventcon/eval_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "eventcon/error.hpp"
#include "eventcon/parallel.hpp"
#include "eventcon/rng.hpp"
#include "eventcon/text.hpp"
#include "json.hpp"

namespace eventcon {
using nlohmann::json;

std::string to_string(EvalMode mode) { return mode == EvalMode::kOneShot ? "one-shot" : "split"; }

EvalMode parse_eval_mode(const std::string& s) {
  if (s == "one-shot") return EvalMode::kOneShot;
  if (s == "split") return EvalMode::kSplit;
  throw ConfigError("unknown evaluation mode '" + s + "' (expected one-shot or split)");
}

void EvalConfig::validate() const {
  if (repetitions < 1) throw ConfigError("repetitions must be at least 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split fraction must be in (0, 1)");
  if (!(svm_C > 0.0)) throw ConfigError("SVM C must be positive");
}

LabeledFeatureSet LabeledFeatureSet::from(const FeatureMatrix& features,
                                          const std::vector<std::string>* order) {
  if (!features.has_labels()) throw DataError("features have no class labels");
  LabeledFeatureSet set;
  std::vector<std::size_t> rows;
  if (order) {
    if (order->size() != features.rows()) throw DataError("image id coverage mismatch");
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < features.rows(); ++i) pos[features.id(i)] = i;
    for (const auto& id : *order) {
      auto it = pos.find(id);
      if (it == pos.end()) throw DataError("image id coverage mismatch: '" + id + "'");
      rows.push_back(it->second);
    }
  } else {
    for (std::size_t i = 0; i < features.rows(); ++i) rows.push_back(i);
  }
  std::map<std::string, std::size_t> class_index;
  for (std::size_t r : rows) class_index.emplace(features.label(r), 0);
  for (auto& [name, idx] : class_index) {
    idx = set.classes.size();
    set.classes.push_back(name);
  }
  set.members.resize(set.classes.size());
  for (std::size_t r : rows) {
    const std::size_t c = class_index[features.label(r)];
    set.members[c].push_back(set.ids.size());
    set.ids.push_back(features.id(r));
    set.rows.push_back(features.row(r));
    set.class_of.push_back(c);
  }
  return set;
}

namespace {

std::vector<std::size_t> others(const LabeledFeatureSet& data, std::size_t cls) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < data.ids.size(); ++i) {
    if (data.class_of[i] != cls) out.push_back(i);
  }
  return out;
}

RepetitionDetail run_binary(const LabeledFeatureSet& data, const std::vector<std::size_t>& train_pos,
                            const std::vector<std::size_t>& train_neg,
                            const std::vector<std::size_t>& test_pos,
                            const std::vector<std::size_t>& test_neg, const EvalConfig& config) {
  std::unordered_set<std::size_t> train_set(train_pos.begin(), train_pos.end());
  train_set.insert(train_neg.begin(), train_neg.end());
  for (const auto* test : {&test_pos, &test_neg}) {
    for (std::size_t i : *test) {
      if (train_set.count(i)) throw InvariantError("training image '" + data.ids[i] + "' leaked into the test set");
    }
  }
  if (test_pos.size() == 0 || test_neg.size() == 0) throw DataError("empty test set");

  std::vector<Vector> X;
  std::vector<int> y;
  RepetitionDetail detail;
  for (std::size_t i : train_pos) {
    X.push_back(data.rows[i]);
    y.push_back(1);
    detail.train_ids.push_back(data.ids[i]);
  }
  for (std::size_t i : train_neg) {
    X.push_back(data.rows[i]);
    y.push_back(-1);
    detail.train_ids.push_back(data.ids[i]);
  }
  const LinearModel model = train_linear_svm(X, y, config.svm_C, config.svm);
  for (std::size_t i : test_pos) detail.correct += predict_label(model, data.rows[i]) == 1 ? 1 : 0;
  for (std::size_t i : test_neg) detail.correct += predict_label(model, data.rows[i]) == -1 ? 1 : 0;
  detail.test_positives = test_pos.size();
  detail.test_negatives = test_neg.size();
  detail.accuracy = static_cast<double>(detail.correct) /
                    static_cast<double>(test_pos.size() + test_neg.size());
  return detail;
}

RepetitionDetail one_shot_repetition(const LabeledFeatureSet& data, std::size_t cls, Rng& rng,
                                     const EvalConfig& config) {
  const auto& positives = data.members[cls];
  const auto negatives = others(data, cls);
  if (positives.size() < 2) {
    throw DataError("class '" + data.classes[cls] + "' has fewer than 2 images");
  }
  if (negatives.size() < 2) throw DataError("class '" + data.classes[cls] + "' has no negatives to sample");

  const std::size_t p = rng.index(positives.size());
  const std::size_t n = rng.index(negatives.size());
  std::vector<std::size_t> rest_pos, rest_neg;
  for (std::size_t k = 0; k < positives.size(); ++k) {
    if (k != p) rest_pos.push_back(positives[k]);
  }
  for (std::size_t k = 0; k < negatives.size(); ++k) {
    if (k != n) rest_neg.push_back(negatives[k]);
  }
  const std::size_t t = std::min(rest_pos.size(), rest_neg.size());
  std::vector<std::size_t> test_pos =
      t < rest_pos.size() ? rng.sample(rest_pos, t) : rest_pos;
  std::vector<std::size_t> test_neg = rng.sample(rest_neg, t);
  if (test_pos.size() != test_neg.size()) throw InvariantError("unbalanced one-shot test set");
  return run_binary(data, {positives[p]}, {negatives[n]}, test_pos, test_neg, config);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_side(
    std::vector<std::size_t> items, double fraction, Rng& rng) {
  rng.shuffle(items);
  auto n_train = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(items.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, items.size() - 1);
  std::vector<std::size_t> train(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(items.begin() + static_cast<std::ptrdiff_t>(n_train), items.end());
  return {train, test};
}

RepetitionDetail split_repetition(const LabeledFeatureSet& data, std::size_t cls, Rng& rng,
                                  const EvalConfig& config) {
  const auto& positives = data.members[cls];
  const auto candidates = others(data, cls);
  if (positives.size() < 2) {
    throw DataError("class '" + data.classes[cls] + "' is too small to split (needs at least 2 images)");
  }
  if (candidates.size() < 2) throw DataError("class '" + data.classes[cls] + "' has too few negatives");
  const std::size_t count = std::min(positives.size(), candidates.size());
  const auto pos = count < positives.size() ? rng.sample(positives, count) : positives;
  const auto neg = rng.sample(candidates, count);
  auto [train_pos, test_pos] = split_side(pos, config.split_fraction, rng);
  auto [train_neg, test_neg] = split_side(neg, config.split_fraction, rng);
  return run_binary(data, train_pos, train_neg, test_pos, test_neg, config);
}

EvalReport run_protocol(const LabeledFeatureSet& data, const EvalConfig& config,
                        const std::string& representation, EvalMode mode) {
  config.validate();
  if (data.classes.size() < 2) throw DataError("evaluation needs at least two classes");
  const std::size_t n_classes = data.classes.size();
  const std::size_t reps = config.repetitions;

  std::vector<RepetitionDetail> details(n_classes * reps);
  parallel_for(details.size(), config.threads, [&](std::size_t task) {
    const std::size_t cls = task / reps;
    const std::size_t rep = task % reps;
    Rng rng(derive_seed(config.seed, cls, rep));
    details[task] = mode == EvalMode::kOneShot ? one_shot_repetition(data, cls, rng, config)
                                               : split_repetition(data, cls, rng, config);
    details[task].repetition = rep;
  });

  EvalReport report;
  report.representation = representation;
  report.mode = mode;
  report.repetitions = reps;
  report.split_fraction = config.split_fraction;
  report.seed = config.seed;
  report.svm_C = config.svm_C;
  double sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    ClassResult cr;
    cr.name = data.classes[c];
    double acc = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      acc += details[c * reps + r].accuracy;
      cr.repetitions.push_back(std::move(details[c * reps + r]));
    }
    cr.accuracy = acc / static_cast<double>(reps);
    sum += cr.accuracy;
    report.classes.push_back(std::move(cr));
  }
  report.overall_accuracy = sum / static_cast<double>(n_classes);
  return report;
}

}  // namespace

EvalReport one_shot_eval(const LabeledFeatureSet& data, const EvalConfig& config,
                         const std::string& representation) {
  return run_protocol(data, config, representation, EvalMode::kOneShot);
}

EvalReport split_eval(const LabeledFeatureSet& data, const EvalConfig& config,
                      const std::string& representation) {
  return run_protocol(data, config, representation, EvalMode::kSplit);
}

EvalReport evaluate(const LabeledFeatureSet& data, const EvalConfig& config,
                    const std::string& representation) {
  return run_protocol(data, config, representation, config.mode);
}

std::vector<EvalReport> compare_representations(
    const std::vector<std::pair<std::string, FeatureMatrix>>& representations,
    const EvalConfig& config) {
  if (representations.empty()) throw ConfigError("no representations to compare");
  std::vector<std::string> order;
  for (std::size_t i = 0; i < representations.front().second.rows(); ++i) {
    order.push_back(representations.front().second.id(i));
  }
  std::vector<EvalReport> reports;
  std::vector<std::string> reference_labels;
  for (const auto& [name, features] : representations) {
    LabeledFeatureSet set;
    try {
      set = LabeledFeatureSet::from(features, &order);
    } catch (const DataError& e) {
      throw DataError("representation '" + name + "': " + e.what());
    }
    std::vector<std::string> labels;
    for (std::size_t c : set.class_of) labels.push_back(set.classes[c]);
    if (reference_labels.empty()) {
      reference_labels = labels;
    } else if (labels != reference_labels) {
      throw DataError("representation '" + name + "' labels images differently");
    }
    reports.push_back(evaluate(set, config, name));
  }
  return reports;
}

std::string serialize_report(const EvalReport& report) {
  std::ostringstream out;
  json summary = {{"record", "summary"},
                  {"representation", report.representation},
                  {"mode", to_string(report.mode)},
                  {"repetitions", report.repetitions},
                  {"split_fraction", report.split_fraction},
                  {"seed", report.seed},
                  {"svm_C", report.svm_C},
                  {"classes", report.classes.size()},
                  {"overall_accuracy", report.overall_accuracy}};
  out << summary.dump() << '\n';
  for (const auto& c : report.classes) {
    json reps = json::array();
    for (const auto& r : c.repetitions) {
      reps.push_back({{"repetition", r.repetition},
                      {"train_ids", r.train_ids},
                      {"test_positives", r.test_positives},
                      {"test_negatives", r.test_negatives},
                      {"correct", r.correct},
                      {"accuracy", r.accuracy}});
    }
    json rec = {{"record", "class"}, {"class", c.name}, {"accuracy", c.accuracy}, {"repetitions", reps}};
    out << rec.dump() << '\n';
  }
  return out.str();
}

EvalReport deserialize_report(const std::string& text, const std::string& origin) {
  EvalReport report;
  bool have_summary = false;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      const json j = json::parse(line);
      const auto kind = j.at("record").get<std::string>();
      if (kind == "summary") {
        report.representation = j.at("representation").get<std::string>();
        report.mode = parse_eval_mode(j.at("mode").get<std::string>());
        report.repetitions = j.at("repetitions").get<std::size_t>();
        report.split_fraction = j.at("split_fraction").get<double>();
        report.seed = j.at("seed").get<std::uint64_t>();
        report.svm_C = j.at("svm_C").get<double>();
        report.overall_accuracy = j.at("overall_accuracy").get<double>();
        have_summary = true;
      } else if (kind == "class") {
        ClassResult c;
        c.name = j.at("class").get<std::string>();
        c.accuracy = j.at("accuracy").get<double>();
        for (const auto& r : j.at("repetitions")) {
          RepetitionDetail d;
          d.repetition = r.at("repetition").get<std::size_t>();
          d.train_ids = r.at("train_ids").get<std::vector<std::string>>();
          d.test_positives = r.at("test_positives").get<std::size_t>();
          d.test_negatives = r.at("test_negatives").get<std::size_t>();
          d.correct = r.at("correct").get<std::size_t>();
          d.accuracy = r.at("accuracy").get<double>();
          c.repetitions.push_back(std::move(d));
        }
        report.classes.push_back(std::move(c));
      } else {
        throw DataError(at_line(origin, line_no) + "unknown record type '" + kind + "'");
      }
    }
  } catch (const json::exception& e) {
    throw DataError(at_line(origin, line_no) + "malformed report record: " + e.what());
  }
  if (!have_summary) throw DataError(origin + ": report has no summary record");
  return report;
}

std::vector<EvalReport> deserialize_reports(const std::string& text, const std::string& origin) {
  std::vector<std::string> chunks;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    bool summary = false;
    try {
      const json j = json::parse(line);
      summary = j.is_object() && j.value("record", "") == "summary";
    } catch (const json::exception& e) {
      throw DataError(origin + ": malformed report record: " + e.what());
    }
    if (summary || chunks.empty()) chunks.emplace_back();
    chunks.back() += line + "\n";
  }
  std::vector<EvalReport> out;
  for (const auto& chunk : chunks) out.push_back(deserialize_report(chunk, origin));
  return out;
}

void save_report(const EvalReport& report, const std::string& path) {
  write_file_atomic(path, serialize_report(report));
}

EvalReport load_report(const std::string& path) { return deserialize_report(read_file(path), path); }

namespace {

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width, bool right = false) {
  if (s.size() >= width) return s;
  return right ? std::string(width - s.size(), ' ') + s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string format_report_table(const EvalReport& report) {
  return format_comparison_table({report});
}

std::string format_comparison_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) return {};
  std::size_t name_w = std::string("Overall").size();
  for (const auto& c : reports.front().classes) name_w = std::max(name_w, c.name.size());
  std::vector<std::size_t> col_w;
  for (const auto& r : reports) col_w.push_back(std::max<std::size_t>(r.representation.size(), 7));

  std::ostringstream out;
  const auto& first = reports.front();
  out << "# mode=" << to_string(first.mode) << " repetitions=" << first.repetitions
      << " split=" << format_double(first.split_fraction) << " seed=" << first.seed
      << " svm_C=" << format_double(first.svm_C) << " (accuracy %)\n";
  out << pad("class", name_w);
  for (std::size_t k = 0; k < reports.size(); ++k) out << "  " << pad(reports[k].representation, col_w[k], true);
  out << '\n';
  for (std::size_t c = 0; c < first.classes.size(); ++c) {
    out << pad(first.classes[c].name, name_w);
    for (std::size_t k = 0; k < reports.size(); ++k) {
      out << "  " << pad(percent(reports[k].classes[c].accuracy), col_w[k], true);
    }
    out << '\n';
  }
  out << pad("Overall", name_w);
  for (std::size_t k = 0; k < reports.size(); ++k) {
    out << "  " << pad(percent(reports[k].overall_accuracy), col_w[k], true);
  }
  out << '\n';
  return out.str();
}

}  // namespace eventcon
