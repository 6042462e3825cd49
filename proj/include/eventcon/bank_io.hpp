#pragma once

#include <string>

#include "eventcon/concept_bank.hpp"

namespace eventcon {

inline constexpr int kBankFormatVersion = 1;

// Versioned JSON container. Doubles are written in shortest round-trip form
// so load_bank(save_bank(b)) reproduces every weight bit-exactly.
std::string serialize_bank(const ConceptBank& bank);
ConceptBank deserialize_bank(const std::string& text, const std::string& origin = "<memory>");

void save_bank(const ConceptBank& bank, const std::string& path);
ConceptBank load_bank(const std::string& path);

}  // namespace eventcon
