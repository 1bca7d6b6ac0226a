#pragma once

#include <string>

#include "icred/tape.hpp"

namespace icred {

/// Checkpoint container: "ICRED-CKPT-1" magic line, entry count, then per
/// tensor a text header (name rank dims) and raw little-endian doubles.
/// Round-trips bit-exactly.
inline constexpr const char* kCheckpointMagic = "ICRED-CKPT-1";

void save_checkpoint(const std::string& path, const ParamMap& params);
ParamMap load_checkpoint(const std::string& path);

}  // namespace icred
