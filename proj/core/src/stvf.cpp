#include "tubeground/stvf.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace tubeground::stvf {
namespace {

constexpr char kMagic[4] = {'S', 'T', 'V', 'F'};

static_assert(std::endian::native == std::endian::little,
              "STVF IO assumes a little-endian host");

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

bool read_u32(std::istream& is, std::uint32_t& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return is.gcount() == sizeof(v);
}

}  // namespace

void write_tensor(const Tensor& tensor, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw StvfError(ErrorCode::Io, "cannot open for writing: " + path.string());
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
  for (std::size_t i = 0; i < tensor.rank(); ++i) {
    write_u32(os, static_cast<std::uint32_t>(tensor.dim(i)));
  }
  std::vector<float> payload(tensor.size());
  for (std::size_t i = 0; i < tensor.size(); ++i) {
    payload[i] = static_cast<float>(tensor[i]);
  }
  os.write(reinterpret_cast<const char*>(payload.data()),
           static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!os) throw StvfError(ErrorCode::Io, "write failed: " + path.string());
}

namespace {

std::vector<std::size_t> read_header(std::istream& is, const std::string& name) {
  char magic[4];
  is.read(magic, 4);
  if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw StvfError(ErrorCode::BadMagic, "not a feature file: " + name);
  }
  std::uint32_t version = 0;
  if (!read_u32(is, version)) {
    throw StvfError(ErrorCode::BadHeader, "truncated header: " + name);
  }
  if (version != kVersion) {
    throw StvfError(ErrorCode::VersionMismatch,
                    "unsupported feature file version " + std::to_string(version) +
                        " in " + name);
  }
  std::uint32_t rank = 0;
  if (!read_u32(is, rank) || rank > 3) {
    throw StvfError(ErrorCode::BadHeader, "bad tensor rank in " + name);
  }
  std::vector<std::size_t> dims(rank);
  for (std::uint32_t i = 0; i < rank; ++i) {
    std::uint32_t d = 0;
    if (!read_u32(is, d)) {
      throw StvfError(ErrorCode::BadHeader, "truncated dims in " + name);
    }
    dims[i] = d;
  }
  return dims;
}

}  // namespace

Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StvfError(ErrorCode::Io, "cannot open: " + path.string());
  const std::vector<std::size_t> dims = read_header(is, path.string());
  std::size_t count = 1;
  for (const std::size_t d : dims) count *= d;
  std::vector<float> payload(count);
  is.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::size_t>(is.gcount()) != count * sizeof(float)) {
    throw StvfError(ErrorCode::Truncated, "truncated payload: " + path.string());
  }
  Tensor t(dims);
  for (std::size_t i = 0; i < count; ++i) t[i] = static_cast<double>(payload[i]);
  return t;
}

std::vector<std::size_t> read_dims(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw StvfError(ErrorCode::Io, "cannot open: " + path.string());
  return read_header(is, path.string());
}

}  // namespace tubeground::stvf
