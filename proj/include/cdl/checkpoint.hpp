#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cdl/autograd.hpp"

namespace cdl {

std::string to_hex(std::uint64_t v);
std::uint64_t from_hex(const std::string& s);

/// Serializes parameter names, shapes and values; returns the FNV-1a
/// checksum of the written bytes.
std::uint64_t write_parameter_blob(const ag::ParameterStore& params, const std::filesystem::path& path);
/// Loads values into a store with matching names and shapes. Throws
/// IntegrityError on checksum, name or shape mismatch or truncation.
void read_parameter_blob(const std::filesystem::path& path, ag::ParameterStore& params,
                         std::uint64_t expected_checksum);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace cdl
