#pragma once

// Text format for tabular worlds (schema "cehhmm.world/1", JSON).
// See docs/formats.md for the layout.

#include <filesystem>
#include <string>
#include <string_view>

#include "cehhmm/pomdp.hpp"

namespace cehhmm {

inline constexpr std::string_view kWorldSchema = "cehhmm.world/1";

/// Throws FormatError naming the offending field or row.
WorldModel parse_world(std::string_view text);
WorldModel load_world(const std::filesystem::path& path);

/// Serializes a world with a tabular evaluation.
std::string world_to_text(const WorldModel& world);

/// Reads a whole file; throws FormatError when it cannot be opened.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cehhmm
