#pragma once

#include <cstdint>
#include <string>

#include "dreamif/model.hpp"

namespace dreamif {

// Checkpoint container: magic "DRIF", one version byte, a little-endian u32
// manifest length, a JSON manifest {config, step, params:[{name,shape}...]}
// with params sorted by name, then raw little-endian f32 blobs in manifest
// order. Saves are atomic (temp file + fsync + rename) and bit-deterministic,
// so saving an unchanged model twice yields identical bytes.

inline constexpr char kCheckpointMagic[4] = {'D', 'R', 'I', 'F'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const Model<float>& model, std::int64_t step);

// Reads only the header; cheap way to get the config or step.
struct CheckpointInfo {
    ModelConfig config;
    std::int64_t step = 0;
};
CheckpointInfo peek_checkpoint(const std::string& path);

// Rebuilds the model from the stored config and overwrites every parameter.
// Bad magic -> FormatError; unknown version -> VersionError; anything
// structurally wrong (truncation, trailing bytes, manifest/param mismatch)
// -> CorruptionError.
Model<float> load_checkpoint(const std::string& path, std::int64_t* step = nullptr);

}  // namespace dreamif
