#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fcenet {

class IoError : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// Writes to a sibling temporary file and renames it over the target, so a
// failure never leaves a partial output behind.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace fcenet
