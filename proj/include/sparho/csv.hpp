#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace sparho {

/// Shortest round-trip representation; identical doubles always format to
/// identical bytes.
std::string format_double(double value);

/// Minimal CSV writer with a fixed column set.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& columns);

  class Row {
   public:
    explicit Row(CsvWriter& writer) : writer_(writer) {}
    Row& col(const std::string& value);
    Row& col(double value);
    Row& col(long value);
    Row& col(std::uint64_t value);
    ~Row();

    Row(const Row&) = delete;
    Row& operator=(const Row&) = delete;

   private:
    CsvWriter& writer_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }

 private:
  friend class Row;
  void write_row(const std::vector<std::string>& cells);

  std::ofstream out_;
  std::size_t n_columns_;
};

}  // namespace sparho
