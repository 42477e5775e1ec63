// Named float32 tensor archive used for checkpoints and converted weights.
//
// Layout (all integers little-endian):
//   8 bytes   magic "SOPSEGTA"
//   u32       format version (1)
//   u64       metadata length, then that many bytes of UTF-8 JSON
//   u64       entry count
//   per entry:
//     u32 name length, name bytes
//     u32 rank, then rank x i64 dims
//     prod(dims) x float32 values, row-major

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace sopseg {

struct ArchiveTensor {
  std::vector<std::int64_t> shape;
  std::vector<float> values;

  std::int64_t numel() const;
};

struct TensorArchive {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, ArchiveTensor> tensors;

  /// Throws DataError on I/O failure.
  void save(const std::filesystem::path& path) const;
  /// Throws DataError on I/O failure, bad magic, or truncated data.
  static TensorArchive load(const std::filesystem::path& path);
};

}  // namespace sopseg
