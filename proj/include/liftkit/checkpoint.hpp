#pragma once

#include <string>

#include "liftkit/trainer.hpp"

namespace liftkit {

// Self-contained little-endian binary checkpoint:
//   magic "LIFTKCKP", u32 format version, u64 JSON length, JSON metadata
//   (model/train config, skeleton, shapes, epoch), float32 parameter blocks in
//   declaration order, float64 schedule arrays, float32 Adam moments.
// save -> load -> save is byte-identical.
void save_checkpoint(const std::string& path, const TrainerState& state);
TrainerState load_checkpoint(const std::string& path);

}  // namespace liftkit
