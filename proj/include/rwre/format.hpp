#pragma once

// Locale-independent numeric output and small text-artifact helpers.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rwre {

// 12 significant digits, shortest general form; "inf", "-inf", "nan".
std::string format_number(double value);
std::string format_number(std::uint64_t value);
std::string format_number(std::int64_t value);
inline std::string format_number(int value) { return format_number(static_cast<std::int64_t>(value)); }
inline std::string format_number(std::uint32_t value) {
  return format_number(static_cast<std::uint64_t>(value));
}

// Accumulates a comma-separated table with a header row.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns);

  template <class... Ts>
  void row(const Ts&... values) {
    std::vector<std::string> cells{cell(values)...};
    add_row(std::move(cells));
  }
  void add_row(std::vector<std::string> cells);

  std::size_t rows() const noexcept { return rows_; }
  const std::string& text() const noexcept { return text_; }

 private:
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  static std::string cell(std::string_view s) { return std::string(s); }
  static std::string cell(bool b) { return b ? "1" : "0"; }
  template <class T>
  static std::string cell(const T& v) {
    return format_number(v);
  }

  std::size_t columns_;
  std::size_t rows_ = 0;
  std::string text_;
};

// FNV-1a 64-bit; used for manifest content hashes.
std::uint64_t content_hash(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t value);

}  // namespace rwre
