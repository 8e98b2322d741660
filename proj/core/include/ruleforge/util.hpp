#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ruleforge {

/// Error hierarchy. Validation findings never throw (they land in
/// ValidationReport); these cover I/O, transport, and contract breaches.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IngestError : Error { using Error::Error; };
struct BackendError : Error { using Error::Error; };
struct StoreError : Error { using Error::Error; };
struct RenderError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };

namespace util {

/// Byte offset of the first invalid UTF-8 sequence, or nullopt if valid.
std::optional<std::size_t> find_invalid_utf8(std::string_view text);

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Collapses every whitespace run to one space and trims the ends.
/// NBSP (U+00A0) counts as whitespace.
std::string normalize_whitespace(std::string_view s);

/// Lowercased, alphanumeric-only form used for tolerant name matching.
std::string fold_key(std::string_view s);

bool starts_with(std::string_view s, std::string_view prefix);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);
void append_line(const std::string& path, std::string_view line);

/// Wall-clock timestamp, ISO-8601 UTC ("2024-01-31T09:15:02Z").
std::string iso_timestamp_now();

/// Fixed-point decimal rendering with `digits` fractional digits
/// (half-away-from-zero), for display surfaces only.
std::string format_fixed(double value, int digits);

}  // namespace util
}  // namespace ruleforge
