#include "attnie/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "attnie/errors.h"

namespace attnie {
namespace {

// Hard cap on a single name or rank; anything larger is a corrupt file.
constexpr std::uint64_t kMaxNameBytes = 1 << 16;
constexpr std::uint64_t kMaxRank = 16;

void put_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) {
    throw FormatError("checkpoint truncated");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char buf[4];
  if (!in.read(reinterpret_cast<char*>(buf), 4)) {
    throw FormatError("checkpoint truncated");
  }
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out,
                      const std::vector<NamedTensor>& tensors) {
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  put_u32(out, kCheckpointVersion);
  put_u64(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, t.rank());
    for (std::size_t e : t.shape()) put_u64(out, e);
    for (double v : t.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

std::vector<NamedTensor> read_checkpoint(std::istream& in) {
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = get_u32(in);
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version) + " (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint64_t count = get_u64(in);
  std::vector<NamedTensor> tensors;
  for (std::uint64_t k = 0; k < count; ++k) {
    const std::uint64_t name_len = get_u64(in);
    if (name_len > kMaxNameBytes) throw FormatError("checkpoint name too long");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name_len))) {
      throw FormatError("checkpoint truncated in tensor name");
    }
    const std::uint64_t rank = get_u64(in);
    if (rank > kMaxRank) throw FormatError("checkpoint rank too large: " + name);
    Shape shape(rank);
    std::uint64_t n = 1;
    for (auto& e : shape) {
      e = get_u64(in);
      n *= e;
    }
    if (n > (std::uint64_t{1} << 34)) {
      throw FormatError("checkpoint tensor too large: " + name);
    }
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(get_u64(in));
    tensors.push_back({std::move(name), Tensor::from(std::move(shape), std::move(data))});
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw FormatError("trailing bytes after checkpoint payload");
  }
  return tensors;
}

void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedTensor>& tensors) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IngestionError("cannot write checkpoint " + path.string());
  write_checkpoint(out, tensors);
  if (!out) throw IngestionError("failed writing checkpoint " + path.string());
}

std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestionError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace attnie
