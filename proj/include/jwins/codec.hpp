#pragma once

// Wire format of one sparse update (all integers little-endian):
//
//   offset  size  field
//   0       4     round (u32)
//   4       4     sender (u32)
//   8       1     kind (u8, see UpdateKind)
//   9       4     K (u32): number of values that follow
//   13      ...   metadata, by kind:
//                   jwins_indices  Elias-gamma stream of index gaps, MSB-first,
//                                  zero-padded to a byte boundary
//                   random_seed    u64 seed
//                   full           nothing (K is the coefficient count)
//                   raw_indices    K x u32 indices
//   ...     4K    values (IEEE-754 binary32)
//
// Gaps are g[0] = i[0] + 1 and g[k] = i[k] - i[k-1], so every gap is >= 1.
// Message dumps are a sequence of records, each a u32 length then the bytes.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "jwins/error.hpp"
#include "jwins/sparsifier.hpp"

namespace jwins {

enum class UpdateKind : std::uint8_t {
  jwins_indices = 0,
  random_seed = 1,
  full = 2,
  raw_indices = 3,
};

enum class CodecErrc {
  gamma_non_positive,
  truncated_stream,
  corrupt_codeword,
  non_monotone,
  inconsistent_update,
  unknown_kind,
  length_overrun,
  trailing_bytes,
  io,
};

class CodecError : public Error {
 public:
  CodecError(CodecErrc code, const std::string& what) : Error(what), code_(code) {}
  CodecErrc code() const { return code_; }

 private:
  CodecErrc code_;
};

inline constexpr std::size_t kHeaderBytes = 13;

struct SparseUpdate {
  std::uint32_t round = 0;
  std::uint32_t sender = 0;
  UpdateKind kind = UpdateKind::full;
  std::vector<Index> indices;  // jwins_indices and raw_indices only
  std::uint64_t seed = 0;      // random_seed only
  std::vector<float> values;

  std::uint32_t k() const { return static_cast<std::uint32_t>(values.size()); }
  bool operator==(const SparseUpdate&) const = default;
};

struct ByteBreakdown {
  std::size_t header = kHeaderBytes;
  std::size_t metadata = 0;  // index stream, raw indices or seed
  std::size_t payload = 0;   // coefficient values

  std::size_t total() const { return header + metadata + payload; }
};

std::vector<std::uint8_t> elias_gamma_encode(std::span<const std::uint64_t> gaps);

struct GammaDecoded {
  std::vector<std::uint64_t> gaps;
  std::size_t bytes_used = 0;  // including the final partial byte
};

/// Decodes exactly k codewords; bits after the k-th are ignored.
GammaDecoded elias_gamma_decode(std::span<const std::uint8_t> bits, std::size_t k);

std::vector<std::uint64_t> indices_to_gaps(std::span<const Index> indices);
std::vector<Index> gaps_to_indices(std::span<const std::uint64_t> gaps);

std::vector<std::uint8_t> serialize(const SparseUpdate& update);
SparseUpdate deserialize(std::span<const std::uint8_t> bytes);

/// Sizes of the serialized form without building it.
ByteBreakdown byte_breakdown(const SparseUpdate& update);

/// 32 bits per raw index over the Elias-gamma stream size. +inf for K = 0.
double compression_ratio(std::size_t coeff_len, std::span<const Index> indices);

void write_message_dump(const std::filesystem::path& path, std::span<const std::vector<std::uint8_t>> records);
void append_message_dump(std::ostream& out, std::span<const std::uint8_t> record);
std::vector<std::vector<std::uint8_t>> read_message_dump(const std::filesystem::path& path);

}  // namespace jwins
