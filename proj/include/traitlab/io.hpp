#pragma once

#include <filesystem>
#include <string>

namespace traitlab {

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temp file and rename, so readers never observe
// a half-written file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

}  // namespace traitlab
