#pragma once

// Binary container for named tensors, shared by checkpoints and cached
// datasets.
//
// Layout, all integers and doubles little-endian:
//   "CGRL1"                       5-byte magic
//   u32 version
//   u64 graph fingerprint
//   u32 metadata count, then per entry: u32 len, key bytes, u32 len, value bytes
//   u32 tensor count, then per tensor:
//     u32 len, name bytes, u32 ndim, ndim x u64 dims, u64 byte length, f64 values
// Metadata and tensors are written in ascending name order, which makes
// save -> load -> save byte-identical.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cgrl/tensor_nn.hpp"

namespace cgrl {

enum class CheckpointErrc {
  kIo = 1,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kShapeMismatch,
  kFingerprintMismatch,
  kMissingTensor,
};

std::string_view to_string(CheckpointErrc code);

class CheckpointError : public std::runtime_error {
 public:
  CheckpointError(CheckpointErrc code, const std::string& what);
  CheckpointErrc code() const { return code_; }

 private:
  CheckpointErrc code_;
};

inline constexpr std::string_view kCheckpointMagic = "CGRL1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t graph_fingerprint = 0;
  std::map<std::string, std::string> metadata;
  TensorMap tensors;

  void add(NamedTensor tensor);
  void add(std::vector<NamedTensor> tensors);
  bool has(const std::string& name) const { return tensors.count(name) != 0; }
  /// Throws CheckpointError(kMissingTensor).
  const NamedTensor& get(const std::string& name) const;
  /// Throws CheckpointError(kMissingTensor) when the key is absent.
  const std::string& meta(const std::string& key) const;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint parse_checkpoint(std::string_view bytes);

/// Writes to a sibling temp file then renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
/// When `expected_fingerprint` is set, a different stored fingerprint throws
/// CheckpointError(kFingerprintMismatch).
Checkpoint read_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint64_t> expected_fingerprint = std::nullopt);

}  // namespace cgrl
