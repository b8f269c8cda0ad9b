#include "sparho/csv.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace sparho {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& columns)
    : out_(path), n_columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot open output file: " + path);
  write_row(columns);
}

void CsvWriter::write_row(const std::vector<std::string>& cells) {
  if (cells.size() != n_columns_)
    throw std::runtime_error("csv row has wrong number of columns");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ',';
    out_ << cells[i];
  }
  out_ << '\n';
}

CsvWriter::Row& CsvWriter::Row::col(const std::string& value) {
  cells_.push_back(value);
  return *this;
}

CsvWriter::Row& CsvWriter::Row::col(double value) {
  cells_.push_back(format_double(value));
  return *this;
}

CsvWriter::Row& CsvWriter::Row::col(long value) {
  cells_.push_back(std::to_string(value));
  return *this;
}

CsvWriter::Row& CsvWriter::Row::col(std::uint64_t value) {
  cells_.push_back(std::to_string(value));
  return *this;
}

CsvWriter::Row::~Row() { writer_.write_row(cells_); }

}  // namespace sparho
