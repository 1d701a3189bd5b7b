#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tubeground/errors.hpp"
#include "tubeground/tensor.hpp"

namespace tubeground::stvf {

/// Binary tensor container:
///   magic "STVF" | version u32le | rank u32le | dims u32le[rank] |
///   payload float32le, row-major.
inline constexpr std::uint32_t kVersion = 1;

enum class ErrorCode { BadMagic, VersionMismatch, BadHeader, Truncated, Io };

class StvfError : public DataError {
 public:
  StvfError(ErrorCode code, const std::string& what) : DataError(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

/// Values are stored at float32 precision; round-trips are bit-exact for
/// float32-representable doubles.
void write_tensor(const Tensor& tensor, const std::filesystem::path& path);

Tensor read_tensor(const std::filesystem::path& path);

/// Reads only the dimensions; cheap validation hook for manifests.
std::vector<std::size_t> read_dims(const std::filesystem::path& path);

}  // namespace tubeground::stvf
