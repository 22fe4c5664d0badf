#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace tforge::csv {

/// Quotes a field when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

/// Joins fields into one CRLF-terminated record.
std::string record(const std::vector<std::string>& fields);

/// Splits RFC-4180 text into records. Accepts LF or CRLF line ends.
/// Throws Error on an unterminated quoted field.
std::vector<std::vector<std::string>> parse(std::string_view text);

} // namespace tforge::csv
