#pragma once

#include <cstdint>
#include <string>

#include "grin/net.hpp"
#include "grin/tape.hpp"
#include "grin/trainer.hpp"

namespace grin {

// On-disk training state. A little-endian binary file:
//
//   "GRIN"                         4-byte magic
//   u32 version                    currently 1
//   u64 entry count
//   entries, each:
//     u32 name length | name bytes | u32 rank (0, 2, or 4)
//     rank x u64 dims | product-of-dims x f64 values
//
// Entries appear in a canonical order: parameters by name, the five Adam
// scalars (adam/beta1, adam/beta2, adam/eps, adam/lr, adam/t), first moments
// (adam/m/<param>), second moments (adam/v/<param>), then meta/encoder_seed.
// Loading a file and saving it back reproduces it byte for byte.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ParamMap params;
  AdamState adam;
  bool has_adam = false;  // true when the file carried optimizer state
  std::uint64_t encoder_seed = kEncoderSeed;
};

// Writes params plus optimizer state. Pass has_adam = false to drop the
// optimizer section (inference-only checkpoints). Throws IoError if the file
// cannot be written.
void save_checkpoint(const std::string& path, const ParamMap& params, const AdamState& adam,
                     bool has_adam = true, std::uint64_t encoder_seed = kEncoderSeed);

// Parses and validates the whole file before returning, so a malformed or
// truncated file throws FormatError (naming the offending field) without
// handing back partial state. Missing file throws IoError.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace grin
