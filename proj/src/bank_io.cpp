#include "eventcon/bank_io.hpp"

#include <cmath>

#include "eventcon/error.hpp"
#include "json.hpp"

namespace eventcon {
using nlohmann::json;

std::string serialize_bank(const ConceptBank& bank) {
  json j;
  j["format"] = "eventcon-concept-bank";
  j["version"] = kBankFormatVersion;
  j["feature_dim"] = bank.feature_dim;
  j["metadata"] = bank.metadata;
  json concepts = json::array();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const auto& m = bank.models[i];
    const auto& s = bank.summaries[i];
    concepts.push_back({{"phrase", bank.concepts[i]},
                        {"kind", to_string(m.kind)},
                        {"C", m.reg_C},
                        {"bias", m.bias},
                        {"weights", m.weights},
                        {"cv", {{"best_C", s.best_C},
                                {"accuracy", s.cv_accuracy},
                                {"positives", s.positives},
                                {"negatives", s.negatives}}}});
  }
  j["concepts"] = std::move(concepts);
  return j.dump() + "\n";
}

ConceptBank deserialize_bank(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(origin + ": bank file is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "eventcon-concept-bank") {
      throw DataError(origin + ": not a concept bank file");
    }
    const int version = j.at("version").get<int>();
    if (version != kBankFormatVersion) {
      throw DataError(origin + ": bank format version " + std::to_string(version) +
                      " is not supported (expected " + std::to_string(kBankFormatVersion) + ")");
    }
    ConceptBank bank;
    bank.feature_dim = j.at("feature_dim").get<std::size_t>();
    bank.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& c : j.at("concepts")) {
      LinearModel m;
      m.kind = parse_model_kind(c.at("kind").get<std::string>());
      m.reg_C = c.at("C").get<double>();
      m.bias = c.at("bias").get<double>();
      m.weights = c.at("weights").get<std::vector<double>>();
      if (m.weights.size() != bank.feature_dim) {
        throw DataError(origin + ": concept '" + c.at("phrase").get<std::string>() +
                        "' has a weight vector of the wrong dimension");
      }
      if (!(m.reg_C > 0.0)) throw DataError(origin + ": non-positive regularization constant");
      for (double w : m.weights) {
        if (!std::isfinite(w)) throw DataError(origin + ": non-finite weight");
      }
      const auto& cv = c.at("cv");
      ConceptTrainingSummary s{cv.at("best_C").get<double>(), cv.at("accuracy").get<double>(),
                               cv.at("positives").get<std::size_t>(),
                               cv.at("negatives").get<std::size_t>()};
      bank.concepts.push_back(c.at("phrase").get<std::string>());
      bank.models.push_back(std::move(m));
      bank.summaries.push_back(s);
    }
    return bank;
  } catch (const json::exception& e) {
    throw DataError(origin + ": malformed bank file: " + e.what());
  }
}

void save_bank(const ConceptBank& bank, const std::string& path) {
  write_file_atomic(path, serialize_bank(bank));
}

ConceptBank load_bank(const std::string& path) { return deserialize_bank(read_file(path), path); }

}  // namespace eventcon
