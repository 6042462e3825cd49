// Writes the synthetic six-event fixture used by the end-to-end tests.
//
// Concept images carry the concept signal in a small semantic subspace and a
// nuisance component drawn independently of the concept. Evaluation images of
// a class reuse that class's concept prototypes but carry a large
// class-specific nuisance mode, so raw features are poor one-shot exemplars.

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <map>
#include <cstdio>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "eventcon/corpus_io.hpp"
#include "eventcon/rng.hpp"
#include "eventcon/text.hpp"

namespace fs = std::filesystem;
using eventcon::Rng;
using eventcon::Vector;

namespace {

struct Event {
  std::string label;
  std::vector<std::string> concepts;
};

const std::vector<Event> kEvents = {
    {"wedding", {"wedding cake", "bridal gown", "ring exchange", "first dance"}},
    {"graduation", {"diploma ceremony", "mortar board", "cap toss", "commencement speech"}},
    {"birthday", {"birthday candles", "party hats", "gift wrap", "balloon arch"}},
    {"concert", {"stage lights", "guitar solo", "mosh pit", "drum kit"}},
    {"marathon", {"finish line", "race bib", "water station", "running shoes"}},
    {"camping", {"pitched tent", "camp fire", "sleeping bag", "hiking trail"}},
};

const std::vector<std::string> kFiller = {
    "photo", "nikon",  "canon",  "img",    "summer", "winter", "friends", "family",
    "fun",   "trip",   "travel", "bw",     "sunset", "city",   "day",     "night",
    "2012",  "2013",   "lol",    "random", "people", "happy",  "blue",    "red"};

constexpr std::size_t kEmbedDim = 16;
constexpr std::size_t kSemanticDim = 8;
constexpr std::size_t kNuisanceDim = 16;

std::string key_of(const std::string& phrase) {
  std::string k = phrase;
  for (auto& ch : k) {
    if (ch == ' ') ch = '_';
  }
  return k;
}

Vector gaussian(Rng& rng, std::size_t d, double sd) {
  Vector v(d);
  for (auto& x : v) x = sd * rng.normal();
  return v;
}

Vector unit(Vector v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  for (auto& x : v) x /= n;
  return v;
}

void write(const fs::path& path, const std::string& text) { eventcon::write_file_atomic(path.string(), text); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic event fixture"};
  std::string out_dir;
  std::uint64_t seed = 2016;
  std::size_t images_per_concept = 25;
  std::size_t eval_per_class = 40;
  std::size_t tags_per_event = 60;
  double nuisance_norm = 10.0;
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  app.add_option("--images-per-concept", images_per_concept)->capture_default_str();
  app.add_option("--eval-per-class", eval_per_class)->capture_default_str();
  app.add_option("--tags-per-event", tags_per_event)->capture_default_str();
  app.add_option("--nuisance-norm", nuisance_norm)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out_dir);
  fs::create_directories(dir);
  Rng rng(seed);

  // Embeddings: each event owns one axis of the embedding space.
  {
    std::ostringstream body;
    std::size_t count = 0;
    auto emit = [&](const std::string& token, const Vector& v) {
      body << token;
      for (double x : v) body << ' ' << eventcon::format_double(x);
      body << '\n';
      ++count;
    };
    for (std::size_t e = 0; e < kEvents.size(); ++e) {
      Vector axis(kEmbedDim, 0.0);
      axis[e] = 3.0;
      Vector label = axis;
      for (auto& x : label) x += 0.05 * rng.normal();
      emit(kEvents[e].label, label);
      for (const auto& c : kEvents[e].concepts) {
        Vector v = axis;
        for (auto& x : v) x += 0.4 * rng.normal();
        emit(key_of(c), v);
      }
    }
    for (const auto& f : kFiller) emit(f, gaussian(rng, kEmbedDim, 1.0));
    write(dir / "embeddings.txt",
          std::to_string(count) + " " + std::to_string(kEmbedDim) + "\n" + body.str());
  }

  // Tag corpus and an independent n-gram resource.
  {
    std::ostringstream tags;
    std::map<std::string, long long> unigrams;
    std::map<std::string, long long> bigrams;
    for (const auto& ev : kEvents) {
      for (std::size_t t = 0; t < tags_per_event; ++t) {
        std::vector<std::string> parts;
        const std::size_t nc = 1 + rng.index(2);
        for (const auto& c : rng.sample(ev.concepts, nc)) parts.push_back(c);
        const std::size_t nf = 1 + rng.index(3);
        for (std::size_t i = 0; i < nf; ++i) parts.push_back(kFiller[rng.index(kFiller.size())]);
        rng.shuffle(parts);
        nlohmann::json j;
        j["event"] = ev.label;
        j["tags"] = parts;
        tags << j.dump() << '\n';
      }
      for (const auto& c : ev.concepts) {
        const long long n = 200 + static_cast<long long>(rng.index(200));
        bigrams[c] += n;
        for (const auto& w : eventcon::split_whitespace(c)) unigrams[w] += n + static_cast<long long>(rng.index(20));
      }
    }
    for (const auto& f : kFiller) unigrams[f] += 500 + static_cast<long long>(rng.index(1000));
    write(dir / "tags.jsonl", tags.str());
    std::ostringstream counts;
    for (const auto& [k, v] : unigrams) counts << k << '\t' << v << '\n';
    for (const auto& [k, v] : bigrams) counts << k << '\t' << v << '\n';
    write(dir / "ngrams.tsv", counts.str());
  }

  // Visual representativeness: concept phrases are visual, filler is not.
  {
    std::ostringstream vrep;
    for (const auto& ev : kEvents) {
      for (const auto& c : ev.concepts) vrep << c << '\t' << eventcon::format_double(0.8 + 0.2 * rng.uniform()) << '\n';
    }
    for (const auto& f : kFiller) vrep << f << '\t' << eventcon::format_double(0.1 * rng.uniform()) << '\n';
    write(dir / "vrep.tsv", vrep.str());
  }

  {
    std::ostringstream events;
    for (const auto& ev : kEvents) events << ev.label << '\n';
    write(dir / "events.txt", events.str());
    write(dir / "stoplist.txt", "img\nlol\nrandom\n");
  }

  // Image features.
  const std::size_t dim = kSemanticDim + kNuisanceDim;
  std::vector<std::vector<Vector>> prototypes(kEvents.size());
  for (std::size_t e = 0; e < kEvents.size(); ++e) {
    Vector axis(kSemanticDim, 0.0);
    axis[e] = 1.0;
    for (std::size_t c = 0; c < kEvents[e].concepts.size(); ++c) {
      const Vector r = unit(gaussian(rng, kSemanticDim, 1.0));
      Vector p(kSemanticDim);
      for (std::size_t i = 0; i < kSemanticDim; ++i) p[i] = 3.0 * axis[i] + 0.8 * r[i];
      prototypes[e].push_back(p);
    }
  }
  auto image = [&](const Vector& proto, const Vector& nuisance) {
    Vector v(dim);
    for (std::size_t i = 0; i < kSemanticDim; ++i) v[i] = proto[i] + 0.3 * rng.normal();
    for (std::size_t i = 0; i < kNuisanceDim; ++i) v[kSemanticDim + i] = nuisance[i] + 0.3 * rng.normal();
    return v;
  };
  auto nuisance_mode = [&] {
    Vector m = unit(gaussian(rng, kNuisanceDim, 1.0));
    for (auto& x : m) x *= nuisance_norm;
    return m;
  };

  {
    std::vector<Vector> global_modes;
    for (int i = 0; i < 8; ++i) global_modes.push_back(nuisance_mode());
    eventcon::FeatureMatrix fm(dim);
    std::ostringstream manifest;
    std::size_t next_id = 0;
    for (std::size_t e = 0; e < kEvents.size(); ++e) {
      for (std::size_t c = 0; c < kEvents[e].concepts.size(); ++c) {
        std::vector<std::string> ids;
        for (std::size_t k = 0; k < images_per_concept; ++k) {
          char id[16];
          std::snprintf(id, sizeof id, "c%05zu", next_id++);
          fm.add_row(id, image(prototypes[e][c], global_modes[rng.index(global_modes.size())]));
          ids.push_back(id);
        }
        nlohmann::json j;
        j["concept"] = kEvents[e].concepts[c];
        j["images"] = ids;
        manifest << j.dump() << '\n';
      }
    }
    eventcon::save_features(fm, (dir / "concept_features.txt").string());
    write(dir / "concept_images.jsonl", manifest.str());
  }

  {
    eventcon::FeatureMatrix fm(dim);
    std::ostringstream labels;
    std::size_t next_id = 0;
    for (std::size_t e = 0; e < kEvents.size(); ++e) {
      std::vector<Vector> modes;
      for (int i = 0; i < 3; ++i) modes.push_back(nuisance_mode());
      for (std::size_t k = 0; k < eval_per_class; ++k) {
        char id[16];
        std::snprintf(id, sizeof id, "e%05zu", next_id++);
        const auto& proto = prototypes[e][rng.index(prototypes[e].size())];
        fm.add_row(id, image(proto, modes[rng.index(modes.size())]));
        labels << id << '\t' << kEvents[e].label << '\n';
      }
    }
    eventcon::save_features(fm, (dir / "eval_features.txt").string());
    write(dir / "eval_labels.tsv", labels.str());
  }

  write(dir / "pipeline.conf",
        "# Synthetic six-event fixture.\n"
        "tags=tags.jsonl\n"
        "ngrams=ngrams.tsv\n"
        "vrep=vrep.tsv\n"
        "vrep_default=0.05\n"
        "embeddings=embeddings.txt\n"
        "events=events.txt\n"
        "stoplist=stoplist.txt\n"
        "concept_images=concept_images.jsonl\n"
        "concept_features=concept_features.txt\n"
        "eval_features=eval_features.txt\n"
        "eval_labels=eval_labels.tsv\n"
        "work_dir=work\n"
        "max_len=2\n"
        "k_neighbors=4\n"
        "min_score=2\n"
        "k_clusters=6\n"
        "kmeans_batch=24\n"
        "kmeans_iters=50\n"
        "neg_ratio=10\n"
        "cv_folds=5\n"
        "reps=5\n"
        "seed=7\n");
  std::cout << "fixture written to " << dir.string() << '\n';
  return 0;
}
