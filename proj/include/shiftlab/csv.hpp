#ifndef SHIFTLAB_CSV_HPP
#define SHIFTLAB_CSV_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include <unistd.h>

#include "errors.hpp"

namespace shiftlab {

/// Shortest round-trippable decimal form of a double (up to 17 significant
/// digits, '.' decimal separator regardless of locale).
inline std::string format_double(double x) {
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  std::string s(buf);
  for (char& c : s) {
    if (c == ',') c = '.';
  }
  return s;
}

/// RFC 4180 CSV text with LF line endings. Fields containing a comma, quote
/// or newline are quoted with embedded quotes doubled.
class CsvTable {
 public:
  using Cell = std::variant<std::string, double, long long>;

  explicit CsvTable(std::vector<std::string> header) : columns_(header.size()) { add_row_text(header); }

  /// Comment lines ("# ...") emitted before the header.
  void add_comment(std::string_view line) { preamble_ += "# " + std::string(line) + "\n"; }

  void add_row(std::initializer_list<Cell> cells) { add_row(std::vector<Cell>(cells)); }

  void add_row(const std::vector<Cell>& cells) {
    if (cells.size() != columns_) throw InvalidInput("csv: row width does not match header");
    std::vector<std::string> text;
    text.reserve(cells.size());
    for (const Cell& c : cells) {
      if (const auto* s = std::get_if<std::string>(&c)) {
        text.push_back(*s);
      } else if (const auto* d = std::get_if<double>(&c)) {
        text.push_back(format_double(*d));
      } else {
        text.push_back(std::to_string(std::get<long long>(c)));
      }
    }
    add_row_text(text);
  }

  std::size_t rows() const noexcept { return rows_ - 1; }

  std::string str() const { return preamble_ + body_; }

 private:
  static std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  void add_row_text(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) body_ += ',';
      body_ += quote(fields[i]);
    }
    body_ += '\n';
    ++rows_;
  }

  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string preamble_;
  std::string body_;
};

/// Writes `content` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      fs::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

}  // namespace shiftlab

#endif
