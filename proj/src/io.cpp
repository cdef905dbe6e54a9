#include "slif/io.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "slif/errors.hpp"

namespace slif {

namespace {
constexpr char kMagic[4] = {'S', 'L', 'I', 'F'};

void put_u32(std::ofstream& out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}
}  // namespace

void write_tensor_slif(const std::string& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  put_u32(out, static_cast<uint32_t>(t.rows()));
  put_u32(out, static_cast<uint32_t>(t.cols()));
  static_assert(sizeof(float) == 4);
  out.write(reinterpret_cast<const char*>(t.ptr()), t.numel() * 4);
  if (!out) throw FormatError("short write: " + path);
}

Tensor read_tensor_slif(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic in tensor file: " + path);
  const uint32_t rows = get_u32(in);
  const uint32_t cols = get_u32(in);
  if (!in) throw FormatError("truncated header: " + path);
  Tensor t({static_cast<int64_t>(rows), static_cast<int64_t>(cols)});
  in.read(reinterpret_cast<char*>(t.ptr()), t.numel() * 4);
  if (!in) throw FormatError("truncated payload: " + path);
  return t;
}

uint64_t fnv1a64(const void* data, size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 1469598103934665603ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

std::string format_metric(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void ensure_dir(const std::string& path) { std::filesystem::create_directories(path); }

}  // namespace slif
