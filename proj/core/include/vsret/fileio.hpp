#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace vsret {

/// Whole-file reads and writes; failures raise IoError.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace vsret
