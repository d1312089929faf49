#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace powergp {

// Shortest decimal form that round-trips a double bit-exactly (17 significant
// digits); used by every text format the toolkit writes.
std::string g17(double value);

// Strict double parse: the whole token must be consumed. Throws FormatError.
double parse_double_strict(std::string_view token, const std::string& context);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::string fnv1a64_hex(std::string_view text);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

} // namespace powergp
