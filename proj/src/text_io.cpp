#include "mmlda/text_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mmlda::text {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t' && s[j] != '\r') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string_view> split(std::string_view s, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

namespace {

template <typename T>
T parse_number(std::string_view field, const std::string& source, std::size_t line,
               const char* kind) {
  field = trim(field);
  T value{};
  const auto* end = field.data() + field.size();
  const auto res = std::from_chars(field.data(), end, value);
  if (field.empty() || res.ec != std::errc{} || res.ptr != end) {
    throw ParseError(source, line, "expected " + std::string(kind) + ", got '" +
                                       std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::uint64_t parse_uint(std::string_view field, const std::string& source, std::size_t line) {
  return parse_number<std::uint64_t>(field, source, line, "non-negative integer");
}

std::int64_t parse_int(std::string_view field, const std::string& source, std::size_t line) {
  return parse_number<std::int64_t>(field, source, line, "integer");
}

double parse_double(std::string_view field, const std::string& source, std::size_t line) {
  const auto t = trim(field);
  // from_chars rejects these spellings; accept what format_double can emit.
  if (t == "inf") return HUGE_VAL;
  if (t == "-inf") return -HUGE_VAL;
  return parse_number<double>(field, source, line, "number");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed: " + path.string());
}

KeyValues parse_key_values(std::string_view content, const std::string& source) {
  KeyValues kv;
  std::size_t lineno = 0;
  for (auto raw : split(content, '\n')) {
    ++lineno;
    auto hash = raw.find('#');
    auto line = trim(raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, "expected key=value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(source, lineno, "empty key");
    kv[std::string(key)] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  write_text(path, out);
}

KeyedTable read_keyed_csv(const std::filesystem::path& path) {
  const auto lines = read_lines(path);
  const auto source = path.string();
  if (lines.empty()) throw ParseError(source, 1, "missing header");
  KeyedTable table;
  const auto head = split(lines[0], ',');
  for (std::size_t i = 1; i < head.size(); ++i) table.header.emplace_back(trim(head[i]));
  const std::size_t cols = table.header.size();
  std::vector<double> data;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto fields = split(lines[i], ',');
    if (fields.size() != cols + 1) {
      throw ParseError(source, i + 1, "expected " + std::to_string(cols + 1) + " fields, got " +
                                          std::to_string(fields.size()));
    }
    table.keys.emplace_back(trim(fields[0]));
    for (std::size_t c = 1; c < fields.size(); ++c) data.push_back(parse_double(fields[c], source, i + 1));
  }
  table.values = Matrix<double>(table.keys.size(), cols);
  table.values.data() = std::move(data);
  return table;
}

void write_keyed_csv(const std::filesystem::path& path, const std::string& key_name,
                     const std::vector<std::string>& header, const std::vector<std::string>& keys,
                     const Matrix<double>& values) {
  std::string out = key_name;
  for (const auto& h : header) out += "," + h;
  out += "\n";
  for (std::size_t r = 0; r < values.rows(); ++r) {
    out += keys[r];
    for (double v : values.row(r)) out += "," + format_double(v);
    out += "\n";
  }
  write_text(path, out);
}

}  // namespace mmlda::text
