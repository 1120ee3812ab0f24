#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace halo {

/// Raised for malformed or missing persisted artifacts. The message always
/// names the offending file.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace io {

void write_f64_le(const std::filesystem::path& path, std::span<const double> values);
void write_f32_le(const std::filesystem::path& path, std::span<const float> values);
void write_u16_le(const std::filesystem::path& path, std::span<const std::uint16_t> values);

/// Readers check the byte length against `count` and throw DataError
/// ("truncated array ...") with expected/actual sizes on mismatch.
std::vector<double> read_f64_le(const std::filesystem::path& path, std::size_t count);
std::vector<float> read_f32_le(const std::filesystem::path& path, std::size_t count);
std::vector<std::uint16_t> read_u16_le(const std::filesystem::path& path, std::size_t count);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
/// Hex SHA-256 over every regular file of a directory, visited in sorted
/// relative-path order (path bytes are hashed alongside contents).
std::string sha256_directory(const std::filesystem::path& dir);

/// Runs `fill` against a sibling temporary directory, then renames it over
/// `target`. An interrupted run never leaves a half-written `target`.
void write_directory_atomically(const std::filesystem::path& target,
                                const std::function<void(const std::filesystem::path&)>& fill);

/// Shortest decimal string that round-trips to the same double.
std::string format_double(double v);

}  // namespace io
}  // namespace halo
