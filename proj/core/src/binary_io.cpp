#include "binary_io.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <iterator>

#include "pki/errors.hpp"

namespace pki::detail {

void ByteWriter::f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }

double ByteReader::f64() { return std::bit_cast<double>(get(8, "f64")); }

std::string ByteReader::bytes(std::size_t n) {
  if (remaining() < n) fail("truncated: expected " + std::to_string(n) + " bytes", pos_);
  std::string out(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
  pos_ += n;
  return out;
}

void ByteReader::fail(const std::string& what, std::size_t at) const {
  throw ParseError(context_ + ": " + what, at);
}

std::uint64_t ByteReader::get(std::size_t n, const char* what) {
  if (remaining() < n) fail(std::string("truncated while reading ") + what, pos_);
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < n; ++i) x |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
  pos_ += n;
  return x;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::string read_text_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return {bytes.begin(), bytes.end()};
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace pki::detail
