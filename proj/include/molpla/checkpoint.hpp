#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "molpla/encoder.hpp"

namespace molpla {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Directory layout: model.json (config, tensor table, hashes, extra metadata)
// and model.bin (float32 little-endian values in tensor-table order).
void save_checkpoint(const Model& m, const std::filesystem::path& dir,
                     const nlohmann::json& meta = nlohmann::json::object());
Model load_checkpoint(const std::filesystem::path& dir, nlohmann::json* manifest = nullptr);

// Hash identifying a saved checkpoint (derived from model.json, which embeds
// the weight hash).
std::string checkpoint_hash(const std::filesystem::path& dir);

}  // namespace molpla
