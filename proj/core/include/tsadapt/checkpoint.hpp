#pragma once

#include <string>

#include "tsadapt/backbone.hpp"

namespace tsadapt {

/// Checkpoint container: a 4-byte little-endian header length, a JSON
/// header (config digest + per-tensor name/shape/offset manifest), then
/// contiguous f32 tensor blobs. Adapter checkpoints hold only the Y/X
/// factors, so a fine-tune delta stays adapter-sized.
void save_adapters(const std::string& path, FrozenTransformer& model);

/// Loads adapter factors back into a model of the same shape. Throws
/// ValidationError on any manifest mismatch.
void load_adapters(const std::string& path, FrozenTransformer& model);

/// On-disk size in bytes, for container-overhead reporting.
std::size_t file_size_bytes(const std::string& path);

}  // namespace tsadapt
