#include "jwins/wavelet.hpp"

#include <cmath>
#include <numeric>

#include "jwins/error.hpp"

namespace jwins {
namespace {

constexpr std::size_t L = kFilterLength;

// Input length of each applied level, finest first. The size of the
// returned vector is the number of levels actually applied.
std::vector<std::size_t> level_inputs(std::size_t source_len, int levels) {
  std::vector<std::size_t> inputs;
  std::size_t len = source_len;
  for (int level = 0; level < levels && len >= L; ++level) {
    inputs.push_back(len);
    len = (len + L - 1) / 2;
  }
  return inputs;
}

inline std::size_t output_len(std::size_t n) { return (n + L - 1) / 2; }

// One analysis step: out[o] = sum_j h[j] * x_ext[2o + 1 - j].
void analyze(std::span<const double> x, const WaveletSpec& spec, double* approx, double* detail) {
  const auto n = static_cast<std::ptrdiff_t>(x.size());
  const auto m = static_cast<std::ptrdiff_t>(output_len(x.size()));
  const auto& lo = spec.filter_lo;
  const auto& hi = spec.filter_hi;
  for (std::ptrdiff_t o = 0; o < m; ++o) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t j = 0; j < L; ++j) {
      std::ptrdiff_t idx = 2 * o + 1 - static_cast<std::ptrdiff_t>(j);
      if (idx < 0) {
        idx = -idx - 1;
      } else if (idx >= n) {
        idx = 2 * n - 1 - idx;
      }
      a += lo[j] * x[static_cast<std::size_t>(idx)];
      d += hi[j] * x[static_cast<std::size_t>(idx)];
    }
    approx[o] = a;
    detail[o] = d;
  }
}

// One synthesis step producing out_len samples:
// y[m] = sum_o a[o] * lo[2o + 1 - m] + d[o] * hi[2o + 1 - m].
FlatVector synthesize(std::span<const double> approx, std::span<const double> detail,
                      std::size_t out_len, const WaveletSpec& spec) {
  FlatVector y(out_len, 0.0);
  const auto m_count = static_cast<std::ptrdiff_t>(approx.size());
  const auto n = static_cast<std::ptrdiff_t>(out_len);
  for (std::ptrdiff_t o = 0; o < m_count; ++o) {
    const double a = approx[static_cast<std::size_t>(o)];
    const double d = detail[static_cast<std::size_t>(o)];
    for (std::size_t j = 0; j < L; ++j) {
      std::ptrdiff_t m = 2 * o + 1 - static_cast<std::ptrdiff_t>(j);
      if (m >= 0 && m < n) {
        y[static_cast<std::size_t>(m)] += a * spec.filter_lo[j] + d * spec.filter_hi[j];
      }
    }
  }
  return y;
}

}  // namespace

void WaveletSpec::validate() const {
  if (levels < 1) {
    throw WaveletError("wavelet levels must be >= 1");
  }
  const double sum = std::accumulate(filter_lo.begin(), filter_lo.end(), 0.0);
  if (std::abs(sum - std::sqrt(2.0)) > 1e-12) {
    throw WaveletError("low-pass filter must sum to sqrt(2)");
  }
  for (std::size_t k = 0; k < L; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    if (filter_hi[k] != sign * filter_lo[L - 1 - k]) {
      throw WaveletError("high-pass filter is not the quadrature mirror of the low-pass filter");
    }
  }
}

WaveletSpec sym2_filters(int levels) {
  const double s3 = std::sqrt(3.0);
  const double norm = 4.0 * std::sqrt(2.0);
  WaveletSpec spec;
  spec.filter_lo = {(1.0 - s3) / norm, (3.0 - s3) / norm, (3.0 + s3) / norm, (1.0 + s3) / norm};
  for (std::size_t k = 0; k < L; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    spec.filter_hi[k] = sign * spec.filter_lo[L - 1 - k];
  }
  spec.levels = levels;
  return spec;
}

std::vector<BandLayout> coefficient_layout(std::size_t source_len, int levels) {
  const auto inputs = level_inputs(source_len, levels);
  const int applied = static_cast<int>(inputs.size());
  std::vector<BandLayout> layout;
  if (applied == 0) {
    layout.push_back({Band::approximation, 0, source_len});
    return layout;
  }
  layout.push_back({Band::approximation, applied, output_len(inputs.back())});
  for (int level = applied; level >= 1; --level) {
    layout.push_back({Band::detail, level, output_len(inputs[static_cast<std::size_t>(level - 1)])});
  }
  return layout;
}

std::size_t coefficient_count(std::size_t source_len, int levels) {
  std::size_t total = 0;
  for (const auto& band : coefficient_layout(source_len, levels)) {
    total += band.length;
  }
  return total;
}

WaveletCoeffs dwt(std::span<const double> x, const WaveletSpec& spec) {
  if (x.empty()) {
    throw WaveletError("empty vector");
  }
  WaveletCoeffs out;
  out.source_len = x.size();
  out.layout = coefficient_layout(x.size(), spec.levels);
  out.data.resize(coefficient_count(x.size(), spec.levels));

  const auto inputs = level_inputs(x.size(), spec.levels);
  if (inputs.empty()) {
    out.data.assign(x.begin(), x.end());
    return out;
  }

  // Details are written back to front: D_1 occupies the tail.
  std::size_t tail = out.data.size();
  FlatVector current(x.begin(), x.end());
  FlatVector approx;
  for (std::size_t n : inputs) {
    const std::size_t m = output_len(n);
    approx.assign(m, 0.0);
    tail -= m;
    analyze(current, spec, approx.data(), out.data.data() + tail);
    current.swap(approx);
  }
  std::copy(current.begin(), current.end(), out.data.begin());
  return out;
}

FlatVector idwt(std::span<const double> data, std::size_t source_len, const WaveletSpec& spec) {
  if (source_len == 0 || data.size() != coefficient_count(source_len, spec.levels)) {
    throw WaveletError("corrupt layout");
  }
  const auto inputs = level_inputs(source_len, spec.levels);
  if (inputs.empty()) {
    return FlatVector(data.begin(), data.end());
  }

  std::size_t offset = output_len(inputs.back());
  FlatVector approx(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(offset));
  for (auto it = inputs.rbegin(); it != inputs.rend(); ++it) {
    const std::size_t m = output_len(*it);
    auto detail = data.subspan(offset, m);
    offset += m;
    approx = synthesize(approx, detail, *it, spec);
  }
  return approx;
}

FlatVector idwt(const WaveletCoeffs& coeffs, const WaveletSpec& spec) {
  if (coeffs.layout != coefficient_layout(coeffs.source_len, spec.levels)) {
    throw WaveletError("corrupt layout");
  }
  return idwt(coeffs.data, coeffs.source_len, spec);
}

CoefficientSpace CoefficientSpace::wavelet(const WaveletSpec& spec, std::size_t source_len) {
  spec.validate();
  CoefficientSpace space;
  space.spec_ = spec;
  space.is_wavelet_ = true;
  space.source_len_ = source_len;
  space.coeff_len_ = coefficient_count(source_len, spec.levels);
  return space;
}

CoefficientSpace CoefficientSpace::identity(std::size_t source_len) {
  CoefficientSpace space;
  space.source_len_ = source_len;
  space.coeff_len_ = source_len;
  return space;
}

FlatVector CoefficientSpace::forward(std::span<const double> params) const {
  if (params.size() != source_len_) {
    throw WaveletError("parameter vector length does not match coefficient space");
  }
  if (!is_wavelet_) {
    return FlatVector(params.begin(), params.end());
  }
  return dwt(params, spec_).data;
}

FlatVector CoefficientSpace::inverse(std::span<const double> coeffs) const {
  if (coeffs.size() != coeff_len_) {
    throw WaveletError("corrupt layout");
  }
  if (!is_wavelet_) {
    return FlatVector(coeffs.begin(), coeffs.end());
  }
  return idwt(coeffs, source_len_, spec_);
}

}  // namespace jwins
