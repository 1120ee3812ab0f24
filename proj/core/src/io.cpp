#include "halo/io.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

namespace halo::io {

namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little,
              "binary artifacts are written with native little-endian layout");

namespace {

void write_bytes(const fs::path& path, const void* data, std::size_t bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    out.close();
    if (!out) throw DataError("write failed: " + path.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw DataError("cannot move into place: " + path.string());
  }
}

template <typename T>
std::vector<T> read_array(const fs::path& path, std::size_t count) {
  std::error_code ec;
  const auto actual = fs::file_size(path, ec);
  if (ec) throw DataError("cannot read " + path.string() + ": " + ec.message());
  const std::size_t expected = count * sizeof(T);
  if (actual != expected) {
    throw DataError("truncated array in " + path.string() + ": expected " +
                    std::to_string(expected) + " bytes, found " + std::to_string(actual));
  }
  std::vector<T> values(count);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(expected));
  if (!in) throw DataError("read failed: " + path.string());
  return values;
}

struct DigestDeleter {
  void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};
using DigestCtx = std::unique_ptr<EVP_MD_CTX, DigestDeleter>;

DigestCtx new_sha256() {
  DigestCtx ctx(EVP_MD_CTX_new());
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 init failed");
  }
  return ctx;
}

void digest_file(EVP_MD_CTX* ctx, const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for hashing: " + path.string());
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    const auto got = in.gcount();
    if (got > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(got));
  }
}

std::string finish_hex(EVP_MD_CTX* ctx) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md.data(), &len);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

}  // namespace

void write_f64_le(const fs::path& path, std::span<const double> values) {
  write_bytes(path, values.data(), values.size_bytes());
}

void write_f32_le(const fs::path& path, std::span<const float> values) {
  write_bytes(path, values.data(), values.size_bytes());
}

void write_u16_le(const fs::path& path, std::span<const std::uint16_t> values) {
  write_bytes(path, values.data(), values.size_bytes());
}

std::vector<double> read_f64_le(const fs::path& path, std::size_t count) {
  return read_array<double>(path, count);
}

std::vector<float> read_f32_le(const fs::path& path, std::size_t count) {
  return read_array<float>(path, count);
}

std::vector<std::uint16_t> read_u16_le(const fs::path& path, std::size_t count) {
  return read_array<std::uint16_t>(path, count);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  write_bytes(path, text.data(), text.size());
}

std::string sha256_file(const fs::path& path) {
  auto ctx = new_sha256();
  digest_file(ctx.get(), path);
  return finish_hex(ctx.get());
}

std::string sha256_directory(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(fs::relative(entry.path(), dir));
  }
  std::sort(files.begin(), files.end());
  auto ctx = new_sha256();
  for (const auto& rel : files) {
    const std::string name = rel.generic_string();
    EVP_DigestUpdate(ctx.get(), name.data(), name.size() + 1);
    digest_file(ctx.get(), dir / rel);
  }
  return finish_hex(ctx.get());
}

void write_directory_atomically(const fs::path& target_in,
                                const std::function<void(const fs::path&)>& fill) {
  fs::path target = target_in.lexically_normal();
  if (!target.has_filename()) target = target.parent_path();
  const fs::path parent = target.has_parent_path() ? target.parent_path() : fs::path(".");
  std::error_code ec;
  fs::create_directories(parent, ec);
  if (ec) throw DataError("cannot create directory " + parent.string() + ": " + ec.message());

  std::random_device rd;
  const fs::path tmp = parent / (target.filename().string() + ".tmp-" + std::to_string(rd()));
  fs::create_directory(tmp, ec);
  if (ec) throw DataError("cannot create directory " + tmp.string() + ": " + ec.message());
  try {
    fill(tmp);
    if (fs::exists(target)) fs::remove_all(target);
    fs::rename(tmp, target);
  } catch (...) {
    fs::remove_all(tmp, ec);
    throw;
  }
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) return "nan";
  return std::string(buf.data(), ptr);
}

}  // namespace halo::io
