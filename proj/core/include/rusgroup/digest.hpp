#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace rusgroup {

// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);

// SHA-256 of a file's bytes; throws InputError when unreadable.
std::string sha256_file_hex(const std::filesystem::path& path);

std::string base64_encode(std::string_view data);

}  // namespace rusgroup
