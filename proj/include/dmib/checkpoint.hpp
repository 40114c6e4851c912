#pragma once

#include <string>

#include "json.hpp"

#include "dmib/data.hpp"
#include "dmib/model.hpp"

namespace dmib {

struct LoadedCheckpoint {
  DmibNetwork network;
  Preprocessor preprocessor;
  nlohmann::json meta;  // architecture, preprocessing stats and writer extras
};

// Binary file: magic + version, a JSON metadata block (architecture,
// preprocessing statistics, caller extras), then named little-endian f64
// parameter blocks. Parameter values round-trip bit-exactly, and identical
// inputs always produce identical bytes.
void save_checkpoint(const std::string& path, const DmibNetwork& net, const Preprocessor& pp,
                     const nlohmann::json& extra = nlohmann::json::object());

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace dmib
