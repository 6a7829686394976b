#include "jwins/codec.hpp"

#include <bit>
#include <fstream>
#include <limits>

namespace jwins {
namespace {

class BitWriter {
 public:
  void put(bool bit) {
    if (used_ % 8 == 0) bytes_.push_back(0);
    if (bit) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (used_ % 8));
    ++used_;
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t used_ = 0;
};

class BitReader {
 public:
  explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  bool exhausted() const { return pos_ >= bytes_.size() * 8; }
  bool get() {
    const bool bit = (bytes_[pos_ / 8] >> (7 - pos_ % 8)) & 1u;
    ++pos_;
    return bit;
  }
  std::size_t position() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() * 8 - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::size_t gamma_bits(std::uint64_t gap) { return 2 * static_cast<std::size_t>(std::bit_width(gap)) - 1; }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int s = 0; s < 64; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

std::uint64_t get_u64(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint64_t v = 0;
  for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(in[at + b]) << (8 * b);
  return v;
}

bool has_index_list(UpdateKind kind) {
  return kind == UpdateKind::jwins_indices || kind == UpdateKind::raw_indices;
}

void check_consistent(const SparseUpdate& u) {
  if (u.values.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw CodecError(CodecErrc::inconsistent_update, "too many values for a u32 count");
  }
  if (has_index_list(u.kind)) {
    if (u.indices.size() != u.values.size()) {
      throw CodecError(CodecErrc::inconsistent_update, "index and value counts differ");
    }
  } else if (!u.indices.empty()) {
    throw CodecError(CodecErrc::inconsistent_update, "index list present on a kind that carries none");
  }
}

}  // namespace

std::vector<std::uint8_t> elias_gamma_encode(std::span<const std::uint64_t> gaps) {
  BitWriter writer;
  for (std::uint64_t g : gaps) {
    if (g == 0) {
      throw CodecError(CodecErrc::gamma_non_positive, "gamma undefined for non-positive");
    }
    const int width = std::bit_width(g);
    for (int i = 1; i < width; ++i) writer.put(false);
    for (int i = width - 1; i >= 0; --i) writer.put((g >> i) & 1u);
  }
  return writer.take();
}

GammaDecoded elias_gamma_decode(std::span<const std::uint8_t> bits, std::size_t k) {
  GammaDecoded out;
  BitReader reader(bits);
  // Every codeword takes at least one bit.
  if (k > reader.remaining()) {
    throw CodecError(CodecErrc::truncated_stream, "truncated stream");
  }
  out.gaps.reserve(k);
  for (std::size_t n = 0; n < k; ++n) {
    int zeros = 0;
    for (;;) {
      if (reader.exhausted()) throw CodecError(CodecErrc::truncated_stream, "truncated stream");
      if (reader.get()) break;
      if (++zeros >= 64) throw CodecError(CodecErrc::corrupt_codeword, "corrupt codeword");
    }
    std::uint64_t value = 1;
    for (int i = 0; i < zeros; ++i) {
      if (reader.exhausted()) throw CodecError(CodecErrc::truncated_stream, "truncated stream");
      value = (value << 1) | static_cast<std::uint64_t>(reader.get());
    }
    out.gaps.push_back(value);
  }
  out.bytes_used = (reader.position() + 7) / 8;
  return out;
}

std::vector<std::uint64_t> indices_to_gaps(std::span<const Index> indices) {
  std::vector<std::uint64_t> gaps;
  gaps.reserve(indices.size());
  std::uint64_t previous = 0;
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const std::uint64_t current = indices[n];
    if (n == 0) {
      gaps.push_back(current + 1);
    } else {
      if (current <= previous) {
        throw CodecError(CodecErrc::non_monotone, "indices must be strictly increasing");
      }
      gaps.push_back(current - previous);
    }
    previous = current;
  }
  return gaps;
}

std::vector<Index> gaps_to_indices(std::span<const std::uint64_t> gaps) {
  std::vector<Index> indices;
  indices.reserve(gaps.size());
  std::uint64_t position = 0;
  for (std::size_t n = 0; n < gaps.size(); ++n) {
    if (gaps[n] == 0) {
      throw CodecError(CodecErrc::non_monotone, "gaps must be positive");
    }
    const std::uint64_t next = (n == 0) ? gaps[n] - 1 : position + gaps[n];
    if (next < position || next > std::numeric_limits<Index>::max()) {
      throw CodecError(CodecErrc::corrupt_codeword, "index exceeds the u32 range");
    }
    position = next;
    indices.push_back(static_cast<Index>(position));
  }
  return indices;
}

ByteBreakdown byte_breakdown(const SparseUpdate& update) {
  check_consistent(update);
  ByteBreakdown sizes;
  sizes.payload = 4 * update.values.size();
  switch (update.kind) {
    case UpdateKind::jwins_indices: {
      std::size_t bits = 0;
      for (std::uint64_t g : indices_to_gaps(update.indices)) bits += gamma_bits(g);
      sizes.metadata = (bits + 7) / 8;
      break;
    }
    case UpdateKind::random_seed:
      sizes.metadata = 8;
      break;
    case UpdateKind::full:
      sizes.metadata = 0;
      break;
    case UpdateKind::raw_indices:
      sizes.metadata = 4 * update.indices.size();
      break;
    default:
      throw CodecError(CodecErrc::unknown_kind, "unknown update kind");
  }
  return sizes;
}

std::vector<std::uint8_t> serialize(const SparseUpdate& update) {
  const auto sizes = byte_breakdown(update);
  std::vector<std::uint8_t> out;
  out.reserve(sizes.total());
  put_u32(out, update.round);
  put_u32(out, update.sender);
  out.push_back(static_cast<std::uint8_t>(update.kind));
  put_u32(out, update.k());
  switch (update.kind) {
    case UpdateKind::jwins_indices: {
      const auto stream = elias_gamma_encode(indices_to_gaps(update.indices));
      out.insert(out.end(), stream.begin(), stream.end());
      break;
    }
    case UpdateKind::random_seed:
      put_u64(out, update.seed);
      break;
    case UpdateKind::full:
      break;
    case UpdateKind::raw_indices:
      (void)indices_to_gaps(update.indices);  // monotonicity check
      for (Index i : update.indices) put_u32(out, i);
      break;
  }
  for (float v : update.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  return out;
}

SparseUpdate deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw CodecError(CodecErrc::length_overrun, "message shorter than its header");
  }
  SparseUpdate u;
  u.round = get_u32(bytes, 0);
  u.sender = get_u32(bytes, 4);
  const std::uint8_t kind = bytes[8];
  if (kind > static_cast<std::uint8_t>(UpdateKind::raw_indices)) {
    throw CodecError(CodecErrc::unknown_kind, "unknown update kind " + std::to_string(kind));
  }
  u.kind = static_cast<UpdateKind>(kind);
  const std::uint64_t k = get_u32(bytes, 9);

  std::size_t at = kHeaderBytes;
  auto rest = [&] { return bytes.size() - at; };
  auto need = [&](std::uint64_t n) {
    if (n > rest()) throw CodecError(CodecErrc::length_overrun, "message shorter than its declared contents");
  };

  switch (u.kind) {
    case UpdateKind::jwins_indices: {
      need((k + 7) / 8 + 4 * k);
      auto decoded = elias_gamma_decode(bytes.subspan(at), static_cast<std::size_t>(k));
      at += decoded.bytes_used;
      u.indices = gaps_to_indices(decoded.gaps);
      break;
    }
    case UpdateKind::random_seed:
      need(8);
      u.seed = get_u64(bytes, at);
      at += 8;
      break;
    case UpdateKind::full:
      break;
    case UpdateKind::raw_indices: {
      need(8 * k);
      u.indices.reserve(static_cast<std::size_t>(k));
      for (std::uint64_t n = 0; n < k; ++n, at += 4) u.indices.push_back(get_u32(bytes, at));
      (void)indices_to_gaps(u.indices);
      break;
    }
  }

  need(4 * k);
  if (rest() != 4 * k) {
    throw CodecError(CodecErrc::trailing_bytes, "unexpected bytes after the value payload");
  }
  u.values.reserve(static_cast<std::size_t>(k));
  for (std::uint64_t n = 0; n < k; ++n, at += 4) u.values.push_back(std::bit_cast<float>(get_u32(bytes, at)));
  return u;
}

double compression_ratio(std::size_t coeff_len, std::span<const Index> indices) {
  if (indices.empty()) {
    return std::numeric_limits<double>::infinity();
  }
  if (indices.back() >= coeff_len) {
    throw CodecError(CodecErrc::inconsistent_update, "index outside the coefficient space");
  }
  std::size_t bits = 0;
  for (std::uint64_t g : indices_to_gaps(indices)) bits += gamma_bits(g);
  const double payload_bytes = static_cast<double>((bits + 7) / 8);
  return 32.0 * static_cast<double>(indices.size()) / (8.0 * payload_bytes);
}

void append_message_dump(std::ostream& out, std::span<const std::uint8_t> record) {
  std::vector<std::uint8_t> length;
  put_u32(length, static_cast<std::uint32_t>(record.size()));
  out.write(reinterpret_cast<const char*>(length.data()), 4);
  out.write(reinterpret_cast<const char*>(record.data()), static_cast<std::streamsize>(record.size()));
}

void write_message_dump(const std::filesystem::path& path, std::span<const std::vector<std::uint8_t>> records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CodecError(CodecErrc::io, "cannot open " + path.string());
  for (const auto& r : records) append_message_dump(out, r);
  if (!out) throw CodecError(CodecErrc::io, "write failed for " + path.string());
}

std::vector<std::vector<std::uint8_t>> read_message_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CodecError(CodecErrc::io, "cannot open " + path.string());
  std::vector<std::uint8_t> all((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<std::vector<std::uint8_t>> records;
  std::size_t at = 0;
  while (at < all.size()) {
    if (all.size() - at < 4) throw CodecError(CodecErrc::length_overrun, "truncated dump record length");
    const std::size_t len = get_u32(all, at);
    at += 4;
    if (all.size() - at < len) throw CodecError(CodecErrc::length_overrun, "truncated dump record");
    records.emplace_back(all.begin() + static_cast<std::ptrdiff_t>(at),
                         all.begin() + static_cast<std::ptrdiff_t>(at + len));
    at += len;
  }
  return records;
}

}  // namespace jwins
