#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mwand {

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

nlohmann::json read_json(const std::filesystem::path& path);
/// Pretty-printed with a trailing newline; key order is sorted, so output is stable.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

void append_f32_le(std::string& out, float v);
void append_u32_le(std::string& out, std::uint32_t v);
float load_f32_le(const unsigned char* p);
std::uint32_t load_u32_le(const unsigned char* p);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace mwand
