#pragma once

// Helpers shared by the file formats. All writers build the output text by
// hand so numbers are emitted with 17 significant digits (lossless double
// round-trip) and byte layout is deterministic; readers go through
// nlohmann::json.

#include <filesystem>
#include <span>
#include <string>

#include <json.hpp>

namespace labelprop {

// %.17g rendering; strtod of the result reproduces the exact double.
std::string fmt_double(double v);

// JSON string literal including quotes.
std::string json_quote(std::string_view s);

void append_double_array(std::string& out, std::span<const double> values);

nlohmann::json parse_json_file(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

// Field accessors that raise errors naming the offending key.
const nlohmann::json& require_field(const nlohmann::json& obj, const char* key,
                                    const char* context);

}  // namespace labelprop
