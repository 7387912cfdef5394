#include "dipa/io.hpp"

#include <algorithm>
#include <bit>
#include <string>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

namespace dipa {

namespace {

constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kMatrixHeader = 16 + 4;  // magic, version, rows, cols
constexpr std::size_t kParamHeader = 16;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  const auto bits = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[at + i]) << (8 * i);
  return v;
}

double get_f64(std::span<const std::uint8_t> b, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[at + i]) << (8 * i);
  return std::bit_cast<double>(v);
}

void check_magic(std::span<const std::uint8_t> b, std::string_view magic, const char* what) {
  if (b.size() < magic.size()) throw FormatError(b.size(), std::string(what) + ": truncated magic");
  for (std::size_t i = 0; i < magic.size(); ++i) {
    if (b[i] != static_cast<std::uint8_t>(magic[i])) throw FormatError(i, std::string(what) + ": bad magic");
  }
}

// PGM header tokens are separated by whitespace; '#' starts a comment that
// runs to the end of the line.
struct PgmCursor {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  void skip_space() {
    while (pos < bytes.size()) {
      const auto c = bytes[pos];
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') {
        ++pos;
      } else {
        break;
      }
    }
  }

  unsigned long number(const char* field) {
    skip_space();
    const std::size_t start = pos;
    unsigned long v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000) throw FormatError(start, std::string("pgm: ") + field + " too large");
      ++pos;
    }
    if (pos == start) throw FormatError(start, std::string("pgm: expected ") + field);
    return v;
  }
};

}  // namespace

FormatError::FormatError(std::size_t offset, const std::string& what)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "' for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// ---------------------------------------------------------------------------

Tensor parse_pgm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError(0, "pgm: expected magic P5");
  PgmCursor cur{bytes, 2};
  const auto width = cur.number("width");
  const auto height = cur.number("height");
  const auto maxval = cur.number("maxval");
  if (width == 0 || height == 0) throw FormatError(cur.pos, "pgm: zero image dimension");
  if (maxval == 0 || maxval > 255) throw FormatError(cur.pos, "pgm: only 8-bit maxval 1..255 is supported");
  if (cur.pos >= bytes.size()) throw FormatError(cur.pos, "pgm: missing whitespace after header");
  ++cur.pos;  // single whitespace byte before the raster

  const std::size_t n = width * height;
  if (bytes.size() - cur.pos < n) {
    throw FormatError(bytes.size(), "pgm: raster truncated, expected " + std::to_string(n) + " bytes");
  }
  Tensor out({height, width});
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = bytes[cur.pos + i];
    if (v > maxval) throw FormatError(cur.pos + i, "pgm: sample exceeds maxval");
    out[i] = static_cast<double>(v) / static_cast<double>(maxval);
  }
  return out;
}

Tensor read_pgm(const std::filesystem::path& path) { return parse_pgm(read_bytes(path)); }

std::vector<std::uint8_t> encode_pgm(const Tensor& image) {
  if (image.rank() != 2) throw std::invalid_argument("pgm: image must be 2-D, got " + shape_string(image.shape()));
  const std::string header =
      "P5\n" + std::to_string(image.shape()[1]) + " " + std::to_string(image.shape()[0]) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : image.data()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(c * 255.0)));
  }
  return out;
}

void write_pgm(const std::filesystem::path& path, const Tensor& image) { write_bytes(path, encode_pgm(image)); }

// ---------------------------------------------------------------------------

std::vector<std::uint8_t> encode_matrix(const Tensor& matrix) {
  if (matrix.rank() != 2) throw std::invalid_argument("matrix: expected rank 2, got " + shape_string(matrix.shape()));
  const std::string_view magic("DIPAMAT\0", 8);
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(matrix.shape()[0]));
  put_u32(out, static_cast<std::uint32_t>(matrix.shape()[1]));
  for (double v : matrix.data()) put_f64(out, v);
  return out;
}

Tensor parse_matrix(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, std::string_view("DIPAMAT\0", 8), "matrix");
  if (bytes.size() < kMatrixHeader) throw FormatError(bytes.size(), "matrix: truncated header");
  const auto version = get_u32(bytes, 8);
  if (version != kVersion) throw FormatError(8, "matrix: unsupported version " + std::to_string(version));
  const std::size_t rows = get_u32(bytes, 12);
  const std::size_t cols = get_u32(bytes, 16);
  const std::size_t need = kMatrixHeader + rows * cols * 8;
  if (bytes.size() < need) {
    throw FormatError(bytes.size(), "matrix: truncated payload, expected " + std::to_string(need) + " bytes");
  }
  if (bytes.size() > need) throw FormatError(need, "matrix: trailing bytes");
  Tensor out({rows, cols});
  for (std::size_t i = 0; i < rows * cols; ++i) out[i] = get_f64(bytes, kMatrixHeader + 8 * i);
  return out;
}

void write_matrix(const std::filesystem::path& path, const Tensor& matrix) {
  write_bytes(path, encode_matrix(matrix));
}

Tensor read_matrix(const std::filesystem::path& path) { return parse_matrix(read_bytes(path)); }

std::vector<std::uint8_t> encode_parameters(std::span<const double> values) {
  if (values.size() * 8 > 0xFFFFFFFFull) throw std::invalid_argument("parameters: payload exceeds 4 GiB");
  const std::string_view magic("DIPAPO\0\0", 8);
  std::vector<std::uint8_t> out(magic.begin(), magic.end());
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(values.size() * 8));
  for (double v : values) put_f64(out, v);
  return out;
}

std::vector<double> parse_parameters(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, std::string_view("DIPAPO\0\0", 8), "parameters");
  if (bytes.size() < kParamHeader) throw FormatError(bytes.size(), "parameters: truncated header");
  const auto version = get_u32(bytes, 8);
  if (version != kVersion) throw FormatError(8, "parameters: unsupported version " + std::to_string(version));
  const std::size_t length = get_u32(bytes, 12);
  if (length % 8 != 0) throw FormatError(12, "parameters: payload length is not a multiple of 8");
  if (bytes.size() < kParamHeader + length) {
    throw FormatError(bytes.size(), "parameters: truncated payload, expected " + std::to_string(length) + " bytes");
  }
  if (bytes.size() > kParamHeader + length) throw FormatError(kParamHeader + length, "parameters: trailing bytes");
  std::vector<double> out(length / 8);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = get_f64(bytes, kParamHeader + 8 * i);
  return out;
}

void write_parameters(const std::filesystem::path& path, std::span<const double> values) {
  write_bytes(path, encode_parameters(values));
}

std::vector<double> read_parameters(const std::filesystem::path& path) {
  return parse_parameters(read_bytes(path));
}

// ---------------------------------------------------------------------------

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {
  if (header_.empty()) throw std::invalid_argument("csv: empty header");
}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) {
    throw std::invalid_argument("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                                std::to_string(header_.size()));
  }
  for (const auto& c : cells) {
    if (c.find_first_of(",\"\n") != std::string::npos) throw std::invalid_argument("csv: cell needs quoting: " + c);
  }
  rows_.push_back(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void CsvTable::write(const std::filesystem::path& path) const { write_text(path, str()); }

}  // namespace dipa
