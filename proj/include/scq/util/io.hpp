#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace scq {

// Shortest round-trip decimal form of a double (std::to_chars without a
// precision argument is guaranteed to parse back to the same value).
std::string format_double(double v);
std::string format_float(float v);

// Write bytes to a temporary file in the same directory, then rename into
// place, so readers never observe a partially-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

std::string read_file(const std::filesystem::path& path);

// FNV-1a, used for config fingerprints and determinism checks.
std::uint64_t fnv1a64(std::string_view bytes);

std::string hex64(std::uint64_t v);

// Little-endian binary column helpers for the dataset/checkpoint formats.
void append_u32_le(std::string& out, std::uint32_t v);
void append_u64_le(std::string& out, std::uint64_t v);
void append_f32_le(std::string& out, float v);

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t read_u32_le();
  std::uint64_t read_u64_le();
  float read_f32_le();
  std::string_view read_bytes(std::size_t n);
  bool at_end() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace scq
