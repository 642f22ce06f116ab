#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <sys/types.h>

namespace ecg::cloudstore::detail {

/// Writes to a sibling temporary file, fsyncs it, renames it over `path` and
/// fsyncs the directory. Throws kIoError.
void atomic_write(const std::filesystem::path& path, std::string_view content, mode_t mode = 0644);

/// Appends one line and fsyncs. Throws kIoError.
void append_line(const std::filesystem::path& path, std::string_view line);

/// Throws kIoError when the file cannot be read.
std::string read_text(const std::filesystem::path& path);

}  // namespace ecg::cloudstore::detail
