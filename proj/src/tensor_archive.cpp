#include "sopseg/tensor_archive.hpp"

#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "sopseg/errors.hpp"

namespace sopseg {

namespace {

constexpr char kMagic[8] = {'S', 'O', 'P', 'S', 'E', 'G', 'T', 'A'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::ostream& out, T v) {
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T get_le(std::istream& in, const std::string& what) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) throw DataError("truncated archive while reading " + what);
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

std::int64_t ArchiveTensor::numel() const {
  return std::accumulate(shape.begin(), shape.end(), std::int64_t{1}, std::multiplies<>());
}

void TensorArchive::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, kVersion);
  const std::string meta = metadata.dump();
  put_le<std::uint64_t>(out, meta.size());
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_le<std::uint64_t>(out, tensors.size());
  for (const auto& [name, t] : tensors) {
    if (t.numel() != static_cast<std::int64_t>(t.values.size())) {
      throw DataError("tensor '" + name + "' shape does not match its value count");
    }
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::int64_t d : t.shape) put_le<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    for (float f : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, sizeof(bits));
      put_le<std::uint32_t>(out, bits);
    }
  }
  if (!out) throw DataError("failed writing " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("archive not found: " + path.string());
  char magic[8];
  if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + ": not a tensor archive");
  }
  const auto version = get_le<std::uint32_t>(in, "version");
  if (version != kVersion) throw DataError(path.string() + ": unsupported archive version " + std::to_string(version));
  TensorArchive ar;
  const auto meta_len = get_le<std::uint64_t>(in, "metadata length");
  std::string meta(meta_len, '\0');
  if (!in.read(meta.data(), static_cast<std::streamsize>(meta_len))) throw DataError("truncated archive metadata");
  try {
    ar.metadata = nlohmann::json::parse(meta);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path.string() + ": bad metadata: " + e.what());
  }
  const auto count = get_le<std::uint64_t>(in, "entry count");
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get_le<std::uint32_t>(in, "name length");
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated archive entry name");
    ArchiveTensor t;
    const auto rank = get_le<std::uint32_t>(in, "rank");
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(static_cast<std::int64_t>(get_le<std::uint64_t>(in, "dims")));
    }
    const std::int64_t n = t.numel();
    if (n < 0 || n > (std::int64_t{1} << 34)) throw DataError("implausible tensor size for '" + name + "'");
    t.values.resize(static_cast<std::size_t>(n));
    for (auto& f : t.values) {
      const auto bits = get_le<std::uint32_t>(in, "values of '" + name + "'");
      std::memcpy(&f, &bits, sizeof(f));
    }
    ar.tensors.emplace(std::move(name), std::move(t));
  }
  return ar;
}

}  // namespace sopseg
