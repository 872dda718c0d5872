#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

namespace sysid::io {

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return fmt::format("{:.12g}", v);
}

// Comment lines ("# key = value") followed by a header row and data rows.
class CsvBuilder {
 public:
  void meta(const std::string& key, const std::string& value) { text_ += "# " + key + " = " + value + "\n"; }
  void meta(const std::string& key, double value) { meta(key, num(value)); }

  void header(const std::vector<std::string>& cols) {
    cols_ = cols.size();
    row_strings(cols);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(num(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
  }

  const std::string& str() const { return text_; }

 private:
  std::string text_;
  std::size_t cols_ = 0;
};

// Minimal reader for files produced by CsvBuilder: skips '#' lines, splits on commas.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::pair<std::string, std::string>> meta;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }

  std::size_t col(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw std::out_of_range("csv: no column '" + name + "'");
    return static_cast<std::size_t>(c);
  }

  std::string meta_value(const std::string& key) const {
    for (const auto& [k, v] : meta)
      if (k == key) return v;
    return {};
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    const std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find(" = ");
      if (eq != std::string::npos) t.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 3));
      continue;
    }
    if (t.header.empty())
      t.header = split_csv_line(line);
    else
      t.rows.push_back(split_csv_line(line));
  }
  return t;
}

}  // namespace sysid::io
