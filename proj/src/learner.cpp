#include "jwins/learner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

#include "jwins/error.hpp"

namespace jwins {
namespace {

// Views into the flat parameter vector.
template <class T>
struct Layers {
  T* w1 = nullptr;
  T* b1 = nullptr;
  T* w2 = nullptr;
  T* b2 = nullptr;
};

template <class T>
Layers<T> layers(const Architecture& a, T* p) {
  Layers<T> l;
  if (a.hidden == 0) {
    l.w2 = p;
    l.b2 = p + a.classes * a.inputs;
  } else {
    l.w1 = p;
    l.b1 = l.w1 + a.hidden * a.inputs;
    l.w2 = l.b1 + a.hidden;
    l.b2 = l.w2 + a.classes * a.hidden;
  }
  return l;
}

// Returns log-sum-exp of z and overwrites z with softmax(z).
double softmax_in_place(std::vector<double>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : z) v /= total;
  return peak + std::log(total);
}

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw DataError("length mismatch");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | b[3];
}

}  // namespace

std::size_t Architecture::param_count() const {
  if (hidden == 0) return classes * inputs + classes;
  return hidden * inputs + hidden + classes * hidden + classes;
}

Model::Model(Architecture arch, FlatVector params) : arch_(arch), params_(std::move(params)) {
  if (params_.size() != arch_.param_count()) throw DataError("parameter count does not match architecture");
}

Model Model::initialize(const Architecture& arch, std::uint64_t seed) {
  if (arch.inputs == 0 || arch.classes == 0) throw DataError("architecture needs inputs and classes");
  Rng rng(seed);
  FlatVector p(arch.param_count(), 0.0);
  auto fill = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) p[offset + i] = limit * (2.0 * uniform01(rng) - 1.0);
  };
  if (arch.hidden == 0) {
    fill(0, arch.classes, arch.inputs);
  } else {
    fill(0, arch.hidden, arch.inputs);
    fill(arch.hidden * arch.inputs + arch.hidden, arch.classes, arch.hidden);
  }
  return Model(arch, std::move(p));
}

void Model::set_flat(std::span<const double> params) {
  if (params.size() != params_.size()) throw DataError("parameter count does not match architecture");
  std::copy(params.begin(), params.end(), params_.begin());
}

std::vector<double> Model::logits(std::span<const double> x) const {
  const auto l = layers(arch_, params_.data());
  std::vector<double> input(x.begin(), x.end());
  std::size_t width = arch_.inputs;
  if (arch_.hidden > 0) {
    std::vector<double> h(arch_.hidden);
    for (std::size_t j = 0; j < arch_.hidden; ++j) {
      double s = l.b1[j];
      const double* row = l.w1 + j * arch_.inputs;
      for (std::size_t f = 0; f < arch_.inputs; ++f) s += row[f] * input[f];
      h[j] = s > 0.0 ? s : 0.0;
    }
    input.swap(h);
    width = arch_.hidden;
  }
  std::vector<double> z(arch_.classes);
  for (std::size_t c = 0; c < arch_.classes; ++c) {
    double s = l.b2[c];
    const double* row = l.w2 + c * width;
    for (std::size_t f = 0; f < width; ++f) s += row[f] * input[f];
    z[c] = s;
  }
  return z;
}

std::uint32_t Model::predict(std::span<const double> x) const {
  const auto z = logits(x);
  return static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
}

double Model::loss_and_gradient(const Dataset& data, std::span<const SampleIndex> batch, std::span<double> grad) const {
  if (batch.empty()) throw DataError("empty batch");
  if (data.dims != arch_.inputs) throw DataError("dataset dimension does not match model inputs");
  const bool want_grad = !grad.empty();
  if (want_grad && grad.size() != params_.size()) throw DataError("gradient buffer has the wrong size");

  const auto l = layers(arch_, params_.data());
  const std::size_t width = arch_.hidden > 0 ? arch_.hidden : arch_.inputs;
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  const auto g = want_grad ? layers(arch_, grad.data()) : Layers<double>{};

  std::vector<double> pre(arch_.hidden);
  std::vector<double> act(width);
  std::vector<double> dz(arch_.classes);
  std::vector<double> dh(arch_.hidden);
  double loss = 0.0;

  for (SampleIndex idx : batch) {
    const auto x = data.sample(idx);
    const std::uint32_t y = data.labels[idx];
    if (arch_.hidden > 0) {
      for (std::size_t j = 0; j < arch_.hidden; ++j) {
        double s = l.b1[j];
        const double* row = l.w1 + j * arch_.inputs;
        for (std::size_t f = 0; f < arch_.inputs; ++f) s += row[f] * x[f];
        pre[j] = s;
        act[j] = s > 0.0 ? s : 0.0;
      }
    } else {
      std::copy(x.begin(), x.end(), act.begin());
    }
    for (std::size_t c = 0; c < arch_.classes; ++c) {
      double s = l.b2[c];
      const double* row = l.w2 + c * width;
      for (std::size_t f = 0; f < width; ++f) s += row[f] * act[f];
      dz[c] = s;
    }
    const double z_y = dz[y];
    loss += softmax_in_place(dz) - z_y;
    if (!want_grad) continue;

    dz[y] -= 1.0;
    for (auto& v : dz) v *= inv_batch;
    for (std::size_t c = 0; c < arch_.classes; ++c) {
      double* row = g.w2 + c * width;
      for (std::size_t f = 0; f < width; ++f) row[f] += dz[c] * act[f];
      g.b2[c] += dz[c];
    }
    if (arch_.hidden > 0) {
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < arch_.classes; ++c) {
        const double* row = l.w2 + c * width;
        for (std::size_t j = 0; j < arch_.hidden; ++j) dh[j] += row[j] * dz[c];
      }
      for (std::size_t j = 0; j < arch_.hidden; ++j) {
        if (pre[j] <= 0.0) continue;
        double* row = g.w1 + j * arch_.inputs;
        for (std::size_t f = 0; f < arch_.inputs; ++f) row[f] += dh[j] * x[f];
        g.b1[j] += dh[j];
      }
    }
  }
  return loss * inv_batch;
}

void SgdConfig::validate() const {
  if (!(eta >= 0.0) || tau == 0 || batch_size == 0) {
    throw DataError("sgd config: eta must be >= 0, tau and batch_size positive");
  }
}

void local_sgd(Model& model, const Dataset& data, std::span<const SampleIndex> local, const SgdConfig& cfg,
               Rng& rng) {
  if (local.empty()) throw DataError("empty partition");
  cfg.validate();
  const std::size_t batch_len = std::min<std::size_t>(cfg.batch_size, local.size());
  std::vector<SampleIndex> pool(local.begin(), local.end());
  std::vector<SampleIndex> batch(batch_len);
  FlatVector grad(model.size());
  FlatVector params = model.flat();
  for (std::uint32_t step = 0; step < cfg.tau; ++step) {
    if (batch_len == pool.size()) {
      std::copy(pool.begin(), pool.end(), batch.begin());
    } else {
      // Partial Fisher-Yates: the first batch_len entries become the batch.
      for (std::size_t i = 0; i < batch_len; ++i) {
        std::swap(pool[i], pool[i + uniform_below(rng, pool.size() - i)]);
        batch[i] = pool[i];
      }
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    model.loss_and_gradient(data, batch, grad);
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= cfg.eta * grad[i];
    model.set_flat(params);
  }
}

Evaluation evaluate(const Model& model, const Dataset& test) {
  if (test.size() == 0) throw DataError("empty test set");
  Evaluation e;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    auto z = model.logits(test.sample(i));
    const auto y = test.labels[i];
    const auto best = static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin());
    if (best == y) ++correct;
    const double z_y = z[y];
    e.loss += softmax_in_place(z) - z_y;
  }
  e.loss /= static_cast<double>(test.size());
  e.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  return e;
}

Partition shard_partition(const Dataset& data, std::uint32_t n, std::uint32_t shards_per_node, std::uint64_t seed) {
  if (n == 0 || shards_per_node == 0) throw DataError("partition needs at least one node and one shard");
  const std::size_t shards = static_cast<std::size_t>(n) * shards_per_node;
  if (data.size() < shards) throw DataError("too few samples for the requested shards");

  std::vector<SampleIndex> by_label(data.size());
  std::iota(by_label.begin(), by_label.end(), SampleIndex{0});
  std::stable_sort(by_label.begin(), by_label.end(),
                   [&](SampleIndex a, SampleIndex b) { return data.labels[a] < data.labels[b]; });

  std::vector<std::size_t> order(shards);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = shards; i > 1; --i) std::swap(order[i - 1], order[uniform_below(rng, i)]);

  Partition part(n);
  const std::size_t total = data.size();
  for (std::uint32_t node = 0; node < n; ++node) {
    for (std::uint32_t s = 0; s < shards_per_node; ++s) {
      const std::size_t shard = order[static_cast<std::size_t>(node) * shards_per_node + s];
      const std::size_t begin = shard * total / shards;
      const std::size_t end = (shard + 1) * total / shards;
      part[node].insert(part[node].end(), by_label.begin() + static_cast<std::ptrdiff_t>(begin),
                        by_label.begin() + static_cast<std::ptrdiff_t>(end));
    }
    std::sort(part[node].begin(), part[node].end());
  }
  return part;
}

Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  std::ifstream img(images, std::ios::binary);
  if (!img) throw DataError("cannot open " + images.string());
  std::ifstream lab(labels, std::ios::binary);
  if (!lab) throw DataError("cannot open " + labels.string());

  if (read_be32(img) != 0x00000803) throw DataError("bad magic in image file " + images.string());
  if (read_be32(lab) != 0x00000801) throw DataError("bad magic in label file " + labels.string());
  const std::uint32_t count = read_be32(img);
  const std::uint32_t rows = read_be32(img);
  const std::uint32_t cols = read_be32(img);
  const std::uint32_t label_count = read_be32(lab);
  if (count != label_count) throw DataError("length mismatch");

  Dataset d;
  d.dims = static_cast<std::size_t>(rows) * cols;
  std::vector<unsigned char> pixels(static_cast<std::size_t>(count) * d.dims);
  if (!img.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()))) {
    throw DataError("length mismatch");
  }
  std::vector<unsigned char> raw_labels(count);
  if (!lab.read(reinterpret_cast<char*>(raw_labels.data()), static_cast<std::streamsize>(raw_labels.size()))) {
    throw DataError("length mismatch");
  }
  d.features.resize(pixels.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) d.features[i] = pixels[i] / 255.0;
  d.labels.assign(raw_labels.begin(), raw_labels.end());
  d.classes = d.labels.empty() ? 0 : *std::max_element(d.labels.begin(), d.labels.end()) + 1u;
  return d;
}

Dataset synth_blobs(const SynthSpec& spec, std::uint64_t sample_stream) {
  if (spec.classes == 0 || spec.dims == 0 || spec.per_class == 0) {
    throw DataError("synthetic dataset needs positive classes, dims and per_class");
  }
  constexpr int kHarmonics = 4;
  Rng mean_rng(spec.seed);
  std::vector<double> means(spec.classes * spec.dims, 0.0);
  for (std::size_t c = 0; c < spec.classes; ++c) {
    for (int k = 1; k <= kHarmonics; ++k) {
      const double amplitude = standard_normal(mean_rng) / k;
      const double phase = 2.0 * std::numbers::pi * uniform01(mean_rng);
      for (std::size_t f = 0; f < spec.dims; ++f) {
        const double t = static_cast<double>(f) / static_cast<double>(spec.dims);
        means[c * spec.dims + f] += amplitude * std::sin(2.0 * std::numbers::pi * k * t + phase);
      }
    }
  }

  // Gaussian smoothing kernel with unit output variance; width 0 keeps white noise.
  std::vector<double> kernel{1.0};
  if (spec.correlation > 0.0) {
    const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * spec.correlation));
    kernel.clear();
    double energy = 0.0;
    for (std::ptrdiff_t j = -radius; j <= radius; ++j) {
      const double g = std::exp(-0.5 * static_cast<double>(j * j) / (spec.correlation * spec.correlation));
      kernel.push_back(g);
      energy += g * g;
    }
    for (double& g : kernel) g /= std::sqrt(energy);
  }
  const std::size_t pad = kernel.size() - 1;

  Rng rng(derive_seed({spec.seed, sample_stream}));
  Dataset d;
  d.dims = spec.dims;
  d.classes = spec.classes;
  d.features.reserve(spec.classes * spec.per_class * spec.dims);
  std::vector<double> white(spec.dims + pad);
  for (std::size_t i = 0; i < spec.per_class; ++i) {
    for (std::size_t c = 0; c < spec.classes; ++c) {
      for (double& z : white) z = standard_normal(rng);
      for (std::size_t f = 0; f < spec.dims; ++f) {
        double noise = 0.0;
        for (std::size_t j = 0; j < kernel.size(); ++j) noise += kernel[j] * white[f + j];
        d.features.push_back(means[c * spec.dims + f] + spec.noise * noise);
      }
      d.labels.push_back(static_cast<std::uint32_t>(c));
    }
  }
  return d;
}

}  // namespace jwins
