#pragma once

// Numeric CSV tables: one header line, then rows of numbers. Values are
// written in shortest round-trip form, so write -> read is exact.

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tdk/types.hpp"

namespace tdk {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
  /// Throws if the column is missing.
  std::size_t require_column(std::string_view name) const;
  std::vector<double> column_values(std::string_view name) const;
};

/// "prefix0", "prefix1", ... "prefix{n-1}"
std::vector<std::string> indexed_columns(std::string_view prefix, std::size_t n);

std::string format_number(double v);

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  void write_row(std::span<const double> values);
  std::size_t columns() const { return columns_; }

 private:
  std::ostream& out_;
  std::size_t columns_;
};

void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);
void write_csv_file(const std::string& path, const CsvTable& table);

}  // namespace tdk
