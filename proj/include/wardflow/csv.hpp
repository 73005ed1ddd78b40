#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wardflow/types.hpp"

namespace wardflow {

/// RFC 4180 reader over an in-memory buffer. Handles quoted fields with
/// embedded commas, quotes ("") and newlines; accepts both \n and \r\n.
class CsvReader {
public:
  explicit CsvReader(std::string buffer) : buf_(std::move(buffer)) {}

  static CsvReader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("cannot open file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return CsvReader(std::move(ss).str());
  }

  /// Reads the next record into `fields`. Returns false at end of input.
  /// A record with an unterminated quote consumes to end of input.
  bool next(std::vector<std::string>& fields) {
    fields.clear();
    if (pos_ >= buf_.size()) return false;
    std::string field;
    bool in_quotes = false;
    for (;;) {
      if (pos_ >= buf_.size()) {
        fields.push_back(std::move(field));
        return true;
      }
      char c = buf_[pos_++];
      if (in_quotes) {
        if (c == '"') {
          if (pos_ < buf_.size() && buf_[pos_] == '"') {
            field.push_back('"');
            ++pos_;
          } else {
            in_quotes = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"' && field.empty()) {
        in_quotes = true;
      } else if (c == ',') {
        fields.push_back(std::move(field));
        field.clear();
      } else if (c == '\n') {
        if (!field.empty() && field.back() == '\r') field.pop_back();
        fields.push_back(std::move(field));
        return true;
      } else {
        field.push_back(c);
      }
    }
  }

private:
  std::string buf_;
  std::size_t pos_ = 0;
};

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<std::int64_t> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

/// Shortest round-trip formatting; keeps artifacts byte-stable across runs.
inline std::string format_double(double v) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

inline std::string csv_quote(std::string_view s) {
  bool needs = s.find_first_of(",\"\r\n") != std::string_view::npos;
  if (!needs) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += '"';
  return out;
}

/// Buffered CSV writer; rows are joined with \n (readers accept both line
/// endings, and \n keeps hashes platform-independent).
class CsvWriter {
public:
  explicit CsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw data_error("cannot open file for write: " + path);
  }

  void row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) buf_ += ',';
      buf_ += csv_quote(fields[i]);
    }
    buf_ += '\n';
    if (buf_.size() > 1 << 20) flush();
  }

  void raw_line(std::string_view line) {
    buf_ += line;
    buf_ += '\n';
    if (buf_.size() > 1 << 20) flush();
  }

  void flush() {
    out_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    buf_.clear();
  }

  ~CsvWriter() { flush(); }

private:
  std::ofstream out_;
  std::string buf_;
};

}  // namespace wardflow
