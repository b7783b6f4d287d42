#ifndef MMLDA_TEXT_IO_HPP_
#define MMLDA_TEXT_IO_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mmlda/common.hpp"

namespace mmlda::text {

std::string_view trim(std::string_view s);

// Splits on any run of the given delimiters; empty fields are dropped.
std::vector<std::string_view> split_ws(std::string_view s);

// Splits on a single delimiter, keeping empty fields.
std::vector<std::string_view> split(std::string_view s, char delim);

// Strict numeric parsing of the whole field. `where` is used in messages.
std::uint64_t parse_uint(std::string_view field, const std::string& source, std::size_t line);
std::int64_t parse_int(std::string_view field, const std::string& source, std::size_t line);
double parse_double(std::string_view field, const std::string& source, std::size_t line);

// Round-trip exact decimal formatting.
std::string format_double(double v);

std::vector<std::string> read_lines(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& content);

// Flat "key=value" files. '#' starts a comment; blank lines ignored.
using KeyValues = std::map<std::string, std::string>;
KeyValues read_key_values(const std::filesystem::path& path);
KeyValues parse_key_values(std::string_view content, const std::string& source);
void write_key_values(const std::filesystem::path& path, const KeyValues& kv);

// Dense numeric CSV with one header row and a leading text key column.
struct KeyedTable {
  std::vector<std::string> header;  // excludes the key column name
  std::vector<std::string> keys;
  Matrix<double> values;
};
KeyedTable read_keyed_csv(const std::filesystem::path& path);
void write_keyed_csv(const std::filesystem::path& path, const std::string& key_name,
                     const std::vector<std::string>& header, const std::vector<std::string>& keys,
                     const Matrix<double>& values);

}  // namespace mmlda::text

#endif  // MMLDA_TEXT_IO_HPP_
