#include "qcs/nn/weights_io.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

namespace qcs::nn {

namespace {

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void le(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) out_.push_back(static_cast<std::uint8_t>((value >> (8 * i)) & 0xFF));
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  template <typename T>
  T le() {
    need(sizeof(T));
    T value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(static_cast<T>(in_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return value;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (n > in_.size() - pos_) fail(ErrorKind::ChecksumFailure, "weight file truncated");
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - done, 1u << 30));
    crc = ::crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> save_weights(const Network<float>& net) {
  const auto& arch = net.architecture();
  const auto& params = net.parameters();
  Writer w;
  w.bytes("QCSW", 4);
  w.le<std::uint16_t>(kWeightFormatVersion);
  w.le<std::uint16_t>(static_cast<std::uint16_t>(arch.id));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(arch.input_size));
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& name = arch.params[i].name;
    w.le<std::uint16_t>(static_cast<std::uint16_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(params[i].shape.size()));
    for (int d : params[i].shape) w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    w.le<std::uint64_t>(offset);
    offset += static_cast<std::uint64_t>(params[i].size()) * 4;
  }
  w.le<std::uint64_t>(offset);
  for (const auto& p : params)
    for (Eigen::Index j = 0; j < p.size(); ++j) {
      std::uint32_t bits;
      std::memcpy(&bits, &p.data[j], 4);
      w.le<std::uint32_t>(bits);
    }
  const std::uint32_t crc = crc32(w.buffer());
  w.le<std::uint32_t>(crc);
  return std::move(w.buffer());
}

Network<float> load_weights(std::span<const std::uint8_t> bytes, std::optional<ArchId> expected) {
  if (bytes.size() < 4 + 2 + 2 + 4 + 4 + 8 + 4) fail(ErrorKind::ChecksumFailure, "weight file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.le<std::uint32_t>() != crc32(body)) fail(ErrorKind::ChecksumFailure, "CRC32 mismatch");

  Reader r(body);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), "QCSW", 4) != 0) fail(ErrorKind::VersionMismatch, "not a QCSW weight file");
  const auto version = r.le<std::uint16_t>();
  if (version != kWeightFormatVersion)
    fail(ErrorKind::VersionMismatch, "weight format version " + std::to_string(version));
  const auto arch_raw = r.le<std::uint16_t>();
  if (arch_raw > static_cast<std::uint16_t>(ArchId::NetC))
    fail(ErrorKind::ArchMismatch, "unknown architecture id " + std::to_string(arch_raw));
  const auto arch = static_cast<ArchId>(arch_raw);
  if (expected && *expected != arch)
    fail(ErrorKind::ArchMismatch, "file holds " + std::string(to_string(arch)) + ", expected " +
                                      std::string(to_string(*expected)));
  const auto input_size = static_cast<int>(r.le<std::uint32_t>());
  if (input_size < 16 || input_size > 4096) fail(ErrorKind::ShapeMismatch, "implausible input size");

  Network<float> net(Architecture::make(arch, input_size));
  auto& params = net.parameters();
  const auto count = r.le<std::uint32_t>();
  if (count != params.size()) fail(ErrorKind::ShapeMismatch, "tensor count differs from architecture");

  std::vector<std::uint64_t> offsets;
  for (std::size_t i = 0; i < count; ++i) {
    const auto name_len = r.le<std::uint16_t>();
    const auto name = r.take(name_len);
    if (std::string(name.begin(), name.end()) != net.architecture().params[i].name)
      fail(ErrorKind::ShapeMismatch, "unexpected tensor name at index " + std::to_string(i));
    const auto rank = r.le<std::uint8_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = static_cast<int>(r.le<std::uint32_t>());
    if (shape != params[i].shape) fail(ErrorKind::ShapeMismatch, "tensor shape differs for " + net.architecture().params[i].name);
    offsets.push_back(r.le<std::uint64_t>());
  }
  const auto data_bytes = r.le<std::uint64_t>();
  const auto data = r.take(static_cast<std::size_t>(data_bytes));
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t need = static_cast<std::uint64_t>(params[i].size()) * 4;
    if (offsets[i] > data_bytes || need > data_bytes - offsets[i])
      fail(ErrorKind::ShapeMismatch, "tensor data out of range");
    Reader tensor(data.subspan(static_cast<std::size_t>(offsets[i]), static_cast<std::size_t>(need)));
    for (Eigen::Index j = 0; j < params[i].size(); ++j) {
      const auto bits = tensor.le<std::uint32_t>();
      std::memcpy(&params[i].data[j], &bits, 4);
    }
  }
  return net;
}

void save_weights_file(const std::filesystem::path& path, const Network<float>& net) {
  const auto bytes = save_weights(net);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

Network<float> load_weights_file(const std::filesystem::path& path, std::optional<ArchId> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::MissingFile, path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load_weights(bytes, expected);
}

std::uint32_t weights_checksum(const Network<float>& net) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  for (const auto& p : net.parameters())
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(p.data.data()), static_cast<uInt>(p.size() * sizeof(float)));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace qcs::nn
