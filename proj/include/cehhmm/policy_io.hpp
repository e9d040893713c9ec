#pragma once

// Policy document (schema "cehhmm.policy/1", JSON). Tables are written in
// storage order with the start-sentinel rows explicit. Doubles are printed in
// shortest round-trip form, so serialize/deserialize is lossless.

#include <filesystem>
#include <string>
#include <string_view>

#include "cehhmm/hhmm_policy.hpp"

namespace cehhmm {

inline constexpr std::string_view kPolicySchema = "cehhmm.policy/1";

std::string serialize(const PolicyParams& params);

/// Throws FormatError on schema or shape mismatch, and on rows that are not
/// normalized within 1e-9 (the message names the table and the row).
PolicyParams deserialize(std::string_view document);

void save_policy(const PolicyParams& params, const std::filesystem::path& path);
PolicyParams load_policy(const std::filesystem::path& path);

}  // namespace cehhmm
