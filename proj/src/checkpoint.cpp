#include "molpla/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "molpla/io.hpp"

namespace molpla {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian hosts");

void save_checkpoint(const Model& m, const std::filesystem::path& dir, const nlohmann::json& meta) {
  std::vector<char> bytes;
  bytes.reserve(m.params.total_size() * sizeof(float));
  nlohmann::json tensors = nlohmann::json::array();
  size_t offset = 0;
  for (const Parameter& p : m.params.all()) {
    tensors.push_back({{"name", p.name}, {"shape", {p.value.rows, p.value.cols}}, {"offset", offset}});
    for (double v : p.value.data) {
      const float f = static_cast<float>(v);
      char buf[sizeof(float)];
      std::memcpy(buf, &f, sizeof f);
      bytes.insert(bytes.end(), buf, buf + sizeof buf);
    }
    offset += p.value.size();
  }
  nlohmann::json doc;
  doc["format"] = "molpla-checkpoint-1";
  doc["dtype"] = "float32-le";
  doc["config"] = m.config.to_json();
  doc["tensors"] = tensors;
  doc["num_values"] = offset;
  doc["weights_hash"] = hash_bytes(bytes.data(), bytes.size());
  doc["meta"] = meta;
  write_binary_file(dir / "model.bin", bytes);
  write_json_file(dir / "model.json", doc);
}

Model load_checkpoint(const std::filesystem::path& dir, nlohmann::json* manifest) {
  nlohmann::json doc;
  std::vector<char> bytes;
  try {
    doc = read_json_file(dir / "model.json");
    bytes = read_binary_file(dir / "model.bin");
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("cannot read checkpoint: ") + e.what());
  }
  if (doc.value("format", "") != "molpla-checkpoint-1") throw CheckpointError("unknown checkpoint format");
  if (doc.value("weights_hash", "") != hash_bytes(bytes.data(), bytes.size())) {
    throw CheckpointError("checkpoint weights do not match the recorded hash");
  }
  Model m(EncoderConfig::from_json(doc.at("config")));
  const size_t n_values = bytes.size() / sizeof(float);
  const auto& tensors = doc.at("tensors");
  if (tensors.size() != m.params.all().size()) throw CheckpointError("checkpoint tensor count mismatch");
  for (const auto& t : tensors) {
    Parameter& p = m.params.at(t.at("name").get<std::string>());
    const int rows = t.at("shape")[0], cols = t.at("shape")[1];
    if (rows != p.value.rows || cols != p.value.cols) throw CheckpointError("shape mismatch for " + p.name);
    const size_t off = t.at("offset");
    if (off + p.value.size() > n_values) throw CheckpointError("checkpoint data truncated");
    for (size_t i = 0; i < p.value.size(); ++i) {
      float f;
      std::memcpy(&f, bytes.data() + (off + i) * sizeof(float), sizeof f);
      p.value.data[i] = f;
    }
  }
  if (manifest) *manifest = doc;
  return m;
}

std::string checkpoint_hash(const std::filesystem::path& dir) { return hash_file(dir / "model.json"); }

}  // namespace molpla
