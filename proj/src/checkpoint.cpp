#include "cgrl/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cgrl {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_string(std::string& out, std::string_view s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n)
      throw CheckpointError(CheckpointErrc::kTruncated,
                            "checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string_view to_string(CheckpointErrc code) {
  switch (code) {
    case CheckpointErrc::kIo:
      return "io_error";
    case CheckpointErrc::kBadMagic:
      return "bad_magic";
    case CheckpointErrc::kUnsupportedVersion:
      return "unsupported_version";
    case CheckpointErrc::kTruncated:
      return "truncated";
    case CheckpointErrc::kShapeMismatch:
      return "shape_mismatch";
    case CheckpointErrc::kFingerprintMismatch:
      return "fingerprint_mismatch";
    case CheckpointErrc::kMissingTensor:
      return "missing_tensor";
  }
  return "unknown";
}

CheckpointError::CheckpointError(CheckpointErrc code, const std::string& what)
    : std::runtime_error(what), code_(code) {}

void Checkpoint::add(NamedTensor tensor) {
  const std::string key = tensor.name;
  tensors[key] = std::move(tensor);
}

void Checkpoint::add(std::vector<NamedTensor> list) {
  for (auto& t : list) add(std::move(t));
}

const NamedTensor& Checkpoint::get(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end())
    throw CheckpointError(CheckpointErrc::kMissingTensor, "missing tensor '" + name + "'");
  return it->second;
}

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end())
    throw CheckpointError(CheckpointErrc::kMissingTensor, "missing metadata '" + key + "'");
  return it->second;
}

std::string serialize_checkpoint(const Checkpoint& cp) {
  std::string out;
  out.append(kCheckpointMagic);
  put_u32(out, cp.version);
  put_u64(out, cp.graph_fingerprint);
  put_u32(out, static_cast<std::uint32_t>(cp.metadata.size()));
  for (const auto& [k, v] : cp.metadata) {
    put_string(out, k);
    put_string(out, v);
  }
  put_u32(out, static_cast<std::uint32_t>(cp.tensors.size()));
  for (const auto& [name, t] : cp.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.shape) count *= static_cast<std::uint64_t>(d);
    if (count != t.values.size())
      throw CheckpointError(CheckpointErrc::kShapeMismatch,
                            "tensor '" + name + "' shape disagrees with its value count");
    put_string(out, name);
    put_u32(out, static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) put_u64(out, static_cast<std::uint64_t>(d));
    put_u64(out, count * sizeof(double));
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.size() < kCheckpointMagic.size() ||
      bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic)
    throw CheckpointError(CheckpointErrc::kBadMagic, "bad magic");
  Reader r(bytes.substr(kCheckpointMagic.size()));
  Checkpoint cp;
  cp.version = r.u32();
  if (cp.version != kCheckpointVersion)
    throw CheckpointError(CheckpointErrc::kUnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(cp.version));
  cp.graph_fingerprint = r.u64();
  const std::uint32_t n_meta = r.u32();
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    std::string k = r.str();
    cp.metadata[k] = r.str();
  }
  const std::uint32_t n_tensors = r.u32();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = r.str();
    const std::uint32_t ndim = r.u32();
    std::uint64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const std::uint64_t dim = r.u64();
      t.shape.push_back(static_cast<std::int64_t>(dim));
      count *= dim;
    }
    const std::uint64_t byte_length = r.u64();
    if (byte_length != count * sizeof(double))
      throw CheckpointError(CheckpointErrc::kShapeMismatch,
                            "tensor '" + t.name + "' declares " + std::to_string(byte_length) +
                                " bytes for " + std::to_string(count) + " values");
    r.need(byte_length);
    t.values.resize(count);
    for (auto& v : t.values) v = std::bit_cast<double>(r.u64());
    cp.tensors[t.name] = std::move(t);
  }
  if (!r.at_end())
    throw CheckpointError(CheckpointErrc::kTruncated, "trailing bytes after last tensor");
  return cp;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointErrc::kIo, "cannot write " + tmp.string());
    f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!f) throw CheckpointError(CheckpointErrc::kIo, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointErrc::kIo, "cannot rename onto " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointErrc::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  write_file_atomic(path, serialize_checkpoint(checkpoint));
}

Checkpoint read_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_fingerprint) {
  Checkpoint cp = parse_checkpoint(read_file(path));
  if (expected_fingerprint && cp.graph_fingerprint != *expected_fingerprint)
    throw CheckpointError(CheckpointErrc::kFingerprintMismatch,
                          "checkpoint graph fingerprint does not match the configured graph");
  return cp;
}

}  // namespace cgrl
