#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dipa/tensor.hpp"

namespace dipa {

// Malformed binary input; offset is the byte position of the problem.
class FormatError : public std::runtime_error {
 public:
  FormatError(std::size_t offset, const std::string& what);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);

// Binary 8-bit PGM ("P5"), scaled to [0, 1] by maxval.
Tensor parse_pgm(std::span<const std::uint8_t> bytes);
Tensor read_pgm(const std::filesystem::path& path);
// Values are clipped to [0, 1] and rounded to 8 bits.
std::vector<std::uint8_t> encode_pgm(const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);

// "DIPAMAT\0", u32 version = 1, u32 rows, u32 cols, rows*cols LE doubles.
std::vector<std::uint8_t> encode_matrix(const Tensor& matrix);
Tensor parse_matrix(std::span<const std::uint8_t> bytes);
void write_matrix(const std::filesystem::path& path, const Tensor& matrix);
Tensor read_matrix(const std::filesystem::path& path);

// "DIPAPO\0\0", u32 version = 1, u32 payload length in bytes, LE doubles.
std::vector<std::uint8_t> encode_parameters(std::span<const double> values);
std::vector<double> parse_parameters(std::span<const std::uint8_t> bytes);
void write_parameters(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_parameters(const std::filesystem::path& path);

// Shortest round-trip decimal form; always '.' as decimal separator.
std::string format_double(double value);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  void add_row(std::vector<std::string> cells);
  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }
  std::string str() const;
  void write(const std::filesystem::path& path) const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace dipa
