#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sigaug {

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

// Flat `key = value` text. Blank lines and lines starting with '#' are
// ignored; surrounding whitespace is trimmed. Throws ParseError.
std::vector<KeyValue> parse_key_values(std::istream& in);
// Throws IoError when the file cannot be opened.
std::vector<KeyValue> read_key_value_file(const std::string& path);

// "0.1,0.3, 0.5" -> {0.1, 0.3, 0.5}. Throws ArgumentError.
std::vector<double> parse_double_list(std::string_view text);
std::string format_double_list(const std::vector<double>& values);

}  // namespace sigaug
