#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace jwins {

/// A model's parameters, or a coefficient vector, as one dense array.
using FlatVector = std::vector<double>;

inline constexpr std::size_t kFilterLength = 4;

/// Orthogonal 4-tap decomposition filter pair. Boundaries are always handled
/// with half-sample symmetric extension (x[-1] = x[0], x[n] = x[n-1]).
struct WaveletSpec {
  std::array<double, kFilterLength> filter_lo{};
  std::array<double, kFilterLength> filter_hi{};
  int levels = 4;

  /// Throws WaveletError if the filters or level count are unusable.
  void validate() const;
};

/// Symlet-2 filters; filter_hi[k] = (-1)^k * filter_lo[3 - k].
WaveletSpec sym2_filters(int levels = 4);

enum class Band { approximation, detail };

struct BandLayout {
  Band band;
  int level;  // 1 = finest detail
  std::size_t length;

  bool operator==(const BandLayout&) const = default;
};

/// Coefficients ordered [A_J, D_J, D_{J-1}, ..., D_1] where J is the number
/// of levels actually applied (levels stop once an input is shorter than
/// the filter).
struct WaveletCoeffs {
  FlatVector data;
  std::vector<BandLayout> layout;
  std::size_t source_len = 0;
};

/// Band layout for a source length; depends only on (source_len, levels).
std::vector<BandLayout> coefficient_layout(std::size_t source_len, int levels);

/// Total coefficient count, i.e. the sum of coefficient_layout lengths.
std::size_t coefficient_count(std::size_t source_len, int levels);

WaveletCoeffs dwt(std::span<const double> x, const WaveletSpec& spec);
FlatVector idwt(const WaveletCoeffs& coeffs, const WaveletSpec& spec);

/// Coefficient-only inverse for callers that keep the layout implicit.
FlatVector idwt(std::span<const double> data, std::size_t source_len, const WaveletSpec& spec);

/// Space in which nodes rank, select and average: either the wavelet domain
/// of a fixed-length parameter vector, or the raw parameters themselves.
class CoefficientSpace {
 public:
  static CoefficientSpace wavelet(const WaveletSpec& spec, std::size_t source_len);
  static CoefficientSpace identity(std::size_t source_len);

  FlatVector forward(std::span<const double> params) const;
  FlatVector inverse(std::span<const double> coeffs) const;

  std::size_t size() const { return coeff_len_; }
  std::size_t source_size() const { return source_len_; }
  bool is_wavelet() const { return is_wavelet_; }

 private:
  CoefficientSpace() = default;

  WaveletSpec spec_{};
  bool is_wavelet_ = false;
  std::size_t source_len_ = 0;
  std::size_t coeff_len_ = 0;
};

}  // namespace jwins
