#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "lpca/data/netpbm.hpp"
#include "lpca/layers/module.hpp"

namespace lpca {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline constexpr char kCheckpointMagic[4] = {'L', 'P', 'C', 'A'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::kF32 ? 4 : 8; }

template <class T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
  return std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
}

struct CheckpointEntry {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian element bytes

  bool operator==(const CheckpointEntry&) const = default;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& d, std::size_t end, std::string source)
      : d_(d), end_(end), source_(std::move(source)) {}

  void need(std::size_t n) const {
    if (end_ - pos_ < n) throw DataError(source_ + ": truncated checkpoint at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return d_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(d_[pos_++]) << (8 * i);
    return v;
  }
  std::vector<std::uint8_t> bytes(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(d_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                d_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<std::uint8_t>& d_;
  std::size_t end_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const std::vector<CheckpointEntry>& entries) {
  std::vector<std::uint8_t> out(std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    std::size_t numel = 1;
    for (auto d : e.dims) numel *= d;
    if (e.payload.size() != numel * dtype_size(e.dtype)) {
      throw DataError("checkpoint entry '" + e.name + "': payload size disagrees with dims");
    }
    if (e.dims.size() > 255) throw DataError("checkpoint entry '" + e.name + "': too many dims");
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dtype));
    out.push_back(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) detail::put_u32(out, d);
    out.insert(out.end(), e.payload.begin(), e.payload.end());
  }
  detail::put_u32(out, detail::crc32_of(out.data(), out.size()));
  return out;
}

inline std::vector<CheckpointEntry> decode_checkpoint(const std::vector<std::uint8_t>& data,
                                                      const std::string& source = "<memory>") {
  if (data.size() < 16) throw DataError(source + ": checkpoint too short (" + std::to_string(data.size()) + " bytes)");
  const std::size_t body = data.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(data[body + static_cast<std::size_t>(i)]) << (8 * i);
  if (stored != detail::crc32_of(data.data(), body)) throw DataError(source + ": CRC mismatch, checkpoint corrupt");
  if (std::memcmp(data.data(), kCheckpointMagic, 4) != 0) throw DataError(source + ": bad magic at byte 0");
  detail::ByteReader r(data, body, source);
  r.bytes(4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError(source + ": checkpoint version " + std::to_string(version) + " unsupported (expected " +
                    std::to_string(kCheckpointVersion) + ")");
  }
  const std::uint32_t count = r.u32();
  std::vector<CheckpointEntry> entries;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointEntry e;
    const auto name = r.bytes(r.u32());
    e.name.assign(name.begin(), name.end());
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw DataError(source + ": unknown dtype tag " + std::to_string(tag) + " at byte " + std::to_string(r.pos() - 1));
    e.dtype = static_cast<DType>(tag);
    const std::uint8_t ndim = r.u8();
    std::size_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      e.dims.push_back(r.u32());
      numel *= e.dims.back();
    }
    e.payload = r.bytes(numel * dtype_size(e.dtype));
    entries.push_back(std::move(e));
  }
  if (r.pos() != body) throw DataError(source + ": trailing bytes after last entry at byte " + std::to_string(r.pos()));
  return entries;
}

inline void save_checkpoint(const std::vector<CheckpointEntry>& entries, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_checkpoint(entries));
}

inline std::vector<CheckpointEntry> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(detail::read_file(path), path.string());
}

/// Every parameter and buffer of `m` as a 4-d entry.
template <class T>
std::vector<CheckpointEntry> checkpoint_entries(const Module<T>& m) {
  std::vector<CheckpointEntry> out;
  for (const auto& nt : m.state()) {
    CheckpointEntry e;
    e.name = nt.name;
    e.dtype = dtype_of<T>();
    const Shape& s = nt.tensor.shape();
    e.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
              static_cast<std::uint32_t>(s.w)};
    const auto values = nt.tensor.data();
    e.payload.resize(values.size() * sizeof(T));
    std::memcpy(e.payload.data(), values.data(), e.payload.size());
    out.push_back(std::move(e));
  }
  return out;
}

template <class T>
void save_module(const Module<T>& m, const std::filesystem::path& path) {
  save_checkpoint(checkpoint_entries(m), path);
}

/// Copies matching entries into `m`. The name sets must agree exactly and
/// every shape and dtype must match; otherwise nothing is modified.
template <class T>
void load_into(Module<T>& m, const std::vector<CheckpointEntry>& entries) {
  std::map<std::string, const CheckpointEntry*> by_name;
  for (const auto& e : entries) by_name[e.name] = &e;
  std::set<std::string> model_names;
  for (const auto& nt : m.state()) model_names.insert(nt.name);
  std::string diff;
  for (const auto& n : model_names)
    if (!by_name.count(n)) diff += " -" + n;
  for (const auto& [n, e] : by_name)
    if (!model_names.count(n)) diff += " +" + n;
  std::string shape_diff;
  for (const auto& nt : m.state()) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end()) continue;
    const CheckpointEntry& e = *it->second;
    const Shape& s = nt.tensor.shape();
    const std::vector<std::uint32_t> want{static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c),
                                          static_cast<std::uint32_t>(s.h), static_cast<std::uint32_t>(s.w)};
    if (e.dims != want || e.dtype != dtype_of<T>()) shape_diff += " " + nt.name + to_string(s);
  }
  if (!diff.empty() || !shape_diff.empty()) {
    std::string msg = "checkpoint does not match model:";
    if (!diff.empty()) msg += " names (- missing in checkpoint, + unknown to model):" + diff + ";";
    if (!shape_diff.empty()) msg += " shape or dtype differs for:" + shape_diff;
    throw DataError(msg);
  }
  for (const auto& nt : m.state()) {
    Tensor<T> t = nt.tensor;
    const auto& e = *by_name.at(nt.name);
    std::memcpy(t.mutable_data().data(), e.payload.data(), e.payload.size());
  }
}

template <class T>
void load_module(Module<T>& m, const std::filesystem::path& path) {
  load_into(m, load_checkpoint(path));
}

}  // namespace lpca
