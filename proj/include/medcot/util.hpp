#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace medcot {

// FNV-1a 64-bit over raw bytes; the project-wide stable hash for ids,
// prompt fingerprints, and plan fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);
std::string fnv1a64_hex(std::string_view bytes);

// "2026-08-18T12:34:56Z" (UTC, second resolution).
std::string iso8601_utc_now();

// Fixed-point decimal formatting (gcc 11 lacks std::format).
std::string format_double(double value, int decimals);

// Signed fixed-point with an explicit leading '+' for non-negative values.
std::string format_signed(double value, int decimals);

std::string trim(std::string_view s);
bool starts_with(std::string_view s, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view text);

// Whole-file IO; both throw std::runtime_error with the path on failure.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Appends one line (adds the trailing '\n') and flushes.
void append_line(const std::filesystem::path& path, std::string_view line);

}  // namespace medcot
