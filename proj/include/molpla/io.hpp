#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace molpla {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);
void write_binary_file(const std::filesystem::path& path, const std::vector<char>& bytes);
std::vector<char> read_binary_file(const std::filesystem::path& path);

// Gzipped line-JSON; output is byte-deterministic (no timestamp in header).
void write_jsonl_gz(const std::filesystem::path& path, const std::vector<nlohmann::json>& rows);
std::vector<nlohmann::json> read_jsonl_gz(const std::filesystem::path& path);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);
nlohmann::json read_json_file(const std::filesystem::path& path);

// Non-empty, non-comment lines ('#').
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string hex64(std::uint64_t v);
std::string hash_bytes(const void* data, std::size_t size);
std::string hash_file(const std::filesystem::path& path);

}  // namespace molpla
