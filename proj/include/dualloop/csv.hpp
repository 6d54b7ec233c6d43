#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace dualloop::csv {

// Quotes a field when it contains a comma, quote or line break.
std::string field(std::string_view text);
std::string number(double value);

// Splits one CSV record. Handles quoted fields with doubled quotes.
std::vector<std::string> split_line(std::string_view line);

// Parses a whole document into records, skipping blank lines.
std::vector<std::vector<std::string>> parse(std::string_view text);

}  // namespace dualloop::csv
