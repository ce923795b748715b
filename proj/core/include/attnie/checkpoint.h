#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "attnie/tensor.h"

namespace attnie {

// Binary container of named tensors:
//   magic "ATNIECKP" (8 bytes), format version (u32 LE), tensor count (u64 LE),
//   then per tensor: name length (u64 LE), UTF-8 name, rank (u64 LE),
//   extents (u64 LE each), values (IEEE-754 binary64 LE).
inline constexpr char kCheckpointMagic[8] = {'A', 'T', 'N', 'I',
                                             'E', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

void write_checkpoint(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& tensors);
// Throws FormatError on bad magic, unknown version or truncation.
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace attnie
