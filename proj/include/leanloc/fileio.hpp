#pragma once

#include <filesystem>
#include <string>

namespace leanloc {

std::string read_text(const std::filesystem::path& file);
/// Writes to a temporary sibling and renames over `file`.
void write_text_atomic(const std::filesystem::path& file, const std::string& text);

}  // namespace leanloc
