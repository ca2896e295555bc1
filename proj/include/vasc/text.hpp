/* SPDX-License-Identifier: Apache-2.0 */
#ifndef VASC_TEXT_HPP
#define VASC_TEXT_HPP

#include <charconv>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "vasc/common.hpp"

namespace vasc::text {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <typename T>
bool parse(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

template <typename T>
T parse_or_throw(std::string_view s, const std::string& context) {
  T v{};
  if (!parse(s, v)) throw Error(context + ": cannot parse '" + std::string(s) + "'");
  return v;
}

/// Reads a CSV with a header row. Returns rows of trimmed fields; checks header prefix.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

inline CsvTable read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    for (auto f : split(line, ',')) fields.emplace_back(f);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size())
        throw Error(path + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                    std::to_string(t.header.size()));
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw Error(path + ": missing header row");
  return t;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  return os;
}

}  // namespace vasc::text

#endif  // VASC_TEXT_HPP
