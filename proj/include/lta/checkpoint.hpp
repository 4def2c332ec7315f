#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "lta/autograd.hpp"

namespace lta {

// On-disk layout (all integers little-endian):
//   "LTACKPT1" | u64 header_len | header JSON | u64 count |
//   count x (u32 name_len | name | u64 rows | u64 cols | f64 values, row-major) |
//   u64 FNV-1a of everything before it
struct Checkpoint {
  nlohmann::json header;
  ag::ParameterSet params;
};

void save_checkpoint(const ag::ParameterSet& params, const nlohmann::json& header,
                     const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Copies values from a loaded checkpoint into `params`, which must have the
// same names and shapes in the same order.
void restore_parameters(const ag::ParameterSet& loaded, ag::ParameterSet& params);

// Fails with ErrorCode::kModelMismatch when header["model"] != expected.
void expect_model(const nlohmann::json& header, const std::string& expected);

// Stable 16-hex-digit hash of a JSON document (object keys are sorted by
// nlohmann::json, so reordering keys does not change it).
std::string config_hash(const nlohmann::json& config);

}  // namespace lta
