// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "fvsrn/common.hpp"

namespace fvsrn {

// ===========================================================================
// Activations
// ===========================================================================

enum class Activation { ReLU, Sigmoid, Softplus, Snake, SnakeAlt };

inline Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::ReLU;
  if (s == "sigmoid") return Activation::Sigmoid;
  if (s == "softplus") return Activation::Softplus;
  if (s == "snake") return Activation::Snake;
  if (s == "snake_alt" || s == "snakealt") return Activation::SnakeAlt;
  throw ConfigError("unknown activation '" + std::string(s) + "'");
}

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Softplus: return "softplus";
    case Activation::Snake: return "snake";
    case Activation::SnakeAlt: return "snake_alt";
  }
  return "?";
}

namespace detail {

// Branch-free single-precision sine: Cody-Waite reduction by pi followed by
// an odd Taylor polynomial on [-pi/2, pi/2]. Max abs error ~1e-7 for |x| < 1e4.
// Written so `omp simd` loops vectorize it.
inline float sin_fast(float x) {
  constexpr float kInvPi = 0.318309886183790671538f;
  constexpr float kPiA = 3.140625f;
  constexpr float kPiB = 9.67502593994140625e-4f;
  constexpr float kPiC = 1.509957990978376432e-7f;
  const float k = std::nearbyint(x * kInvPi);
  float r = x - k * kPiA;
  r -= k * kPiB;
  r -= k * kPiC;
  const float r2 = r * r;
  float q = -2.5052108385441718775e-8f;
  q = q * r2 + 2.7557319223985890653e-6f;
  q = q * r2 - 1.9841269841269841270e-4f;
  q = q * r2 + 8.3333333333333333333e-3f;
  q = q * r2 - 1.6666666666666666667e-1f;
  const float sin_r = r + r * r2 * q;
  const int ki = static_cast<int>(k);
  return (ki & 1) ? -sin_r : sin_r;
}

template <class T>
inline T sin_t(T x) {
  if constexpr (std::is_same_v<T, float>)
    return sin_fast(x);
  else
    return std::sin(x);
}

template <class T>
inline T cos_t(T x) {
  if constexpr (std::is_same_v<T, float>)
    return sin_fast(x + 1.57079632679489661923f);
  else
    return std::cos(x);
}

template <class T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
inline T softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace detail

template <class T>
inline T act_eval(Activation a, T x) {
  switch (a) {
    case Activation::ReLU: return x > T(0) ? x : T(0);
    case Activation::Sigmoid: return detail::sigmoid(x);
    case Activation::Softplus: return detail::softplus(x);
    case Activation::Snake: {
      const T s = detail::sin_t(x);
      return x + s * s;
    }
    case Activation::SnakeAlt: {
      const T s = detail::sin_t(x);
      return T(0.5) * x + s * s;
    }
  }
  throw ConfigError("unknown activation");
}

template <class T>
inline T act_grad(Activation a, T x) {
  switch (a) {
    case Activation::ReLU: return x > T(0) ? T(1) : T(0);
    case Activation::Sigmoid: {
      const T s = detail::sigmoid(x);
      return s * (T(1) - s);
    }
    case Activation::Softplus: return detail::sigmoid(x);
    case Activation::Snake: return T(1) + detail::sin_t(T(2) * x);
    case Activation::SnakeAlt: return T(0.5) + detail::sin_t(T(2) * x);
  }
  throw ConfigError("unknown activation");
}

/// y[i] = act(z[i]) over a contiguous range.
template <class T>
inline void act_apply(Activation a, const T* z, T* y, std::size_t n) {
  switch (a) {
    case Activation::SnakeAlt:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        const T s = detail::sin_t(z[i]);
        y[i] = T(0.5) * z[i] + s * s;
      }
      return;
    case Activation::Snake:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) {
        const T s = detail::sin_t(z[i]);
        y[i] = z[i] + s * s;
      }
      return;
    case Activation::ReLU:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) y[i] = z[i] > T(0) ? z[i] : T(0);
      return;
    default:
      for (std::size_t i = 0; i < n; ++i) y[i] = act_eval(a, z[i]);
  }
}

/// g[i] *= act'(z[i]).
template <class T>
inline void act_backprop(Activation a, const T* z, T* g, std::size_t n) {
  switch (a) {
    case Activation::SnakeAlt:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) g[i] *= T(0.5) + detail::sin_t(T(2) * z[i]);
      return;
    case Activation::Snake:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) g[i] *= T(1) + detail::sin_t(T(2) * z[i]);
      return;
    case Activation::ReLU:
#pragma omp simd
      for (std::size_t i = 0; i < n; ++i) g[i] = z[i] > T(0) ? g[i] : T(0);
      return;
    default:
      for (std::size_t i = 0; i < n; ++i) g[i] *= act_grad(a, z[i]);
  }
}

// ===========================================================================
// Fourier features
// ===========================================================================

enum class FourierMode { Off, Nerf, Random };

inline FourierMode fourier_mode_from_string(std::string_view s) {
  if (s == "off" || s == "none") return FourierMode::Off;
  if (s == "nerf") return FourierMode::Nerf;
  if (s == "random") return FourierMode::Random;
  throw ConfigError("unknown fourier mode '" + std::string(s) + "'");
}

inline const char* to_string(FourierMode m) {
  switch (m) {
    case FourierMode::Off: return "off";
    case FourierMode::Nerf: return "nerf";
    case FourierMode::Random: return "random";
  }
  return "?";
}

/// Frozen Fourier matrix B (m x d_in, row-major). Encodes v as [v | sin(Bv) | cos(Bv)].
template <class T>
struct FourierEncoder {
  FourierMode mode = FourierMode::Off;
  int d_in = 3;
  int m = 0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
  std::vector<T> B;

  int output_width() const { return d_in + 2 * m; }

  void encode(const T* v, T* out) const {
    for (int i = 0; i < d_in; ++i) out[i] = v[i];
    for (int r = 0; r < m; ++r) {
      T arg = 0;
      const T* row = B.data() + static_cast<std::size_t>(r) * d_in;
      for (int i = 0; i < d_in; ++i) arg += row[i] * v[i];
      out[d_in + r] = detail::sin_t(arg);
      out[d_in + m + r] = detail::cos_t(arg);
    }
  }

  std::vector<T> encode(std::span<const T> v) const {
    if (static_cast<int>(v.size()) != d_in)
      throw ShapeError("fourier_encode: expected " + std::to_string(d_in) + " inputs, got " + std::to_string(v.size()));
    std::vector<T> out(static_cast<std::size_t>(output_width()));
    encode(v.data(), out.data());
    return out;
  }
};

/// nerf rows: 2pi * 2^j * e_axis for j = 0..m/d_in-1; random rows ~ N(0, (2 pi sigma)^2).
template <class T = float>
FourierEncoder<T> fourier_make(FourierMode mode, int m, int d_in, double sigma = 1.0, std::uint64_t seed = 0) {
  if (m < 0) throw ConfigError("fourier feature count must be non-negative");
  if (d_in <= 0) throw ConfigError("fourier input width must be positive");
  FourierEncoder<T> enc;
  enc.mode = mode;
  enc.d_in = d_in;
  enc.sigma = sigma;
  enc.seed = seed;
  if (mode == FourierMode::Off) return enc;
  enc.m = m;
  enc.B.assign(static_cast<std::size_t>(m) * d_in, T(0));
  if (mode == FourierMode::Nerf) {
    if (m % d_in != 0)
      throw ConfigError("nerf fourier features need m divisible by the input width (m=" + std::to_string(m) +
                        ", d_in=" + std::to_string(d_in) + ")");
    for (int r = 0; r < m; ++r)
      enc.B[static_cast<std::size_t>(r) * d_in + r % d_in] = static_cast<T>(2.0 * kPi * std::ldexp(1.0, r / d_in));
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 2.0 * kPi * sigma);
    for (auto& b : enc.B) b = static_cast<T>(normal(rng));
  }
  return enc;
}

/// NeRF matrix with the first m rows of the next full octave set, for m not
/// divisible by d_in (e.g. m = 14 for three inputs: octaves 0..3 complete,
/// octave 4 on x and y only).
template <class T = float>
FourierEncoder<T> fourier_make_nerf_prefix(int m, int d_in) {
  const int full = (m + d_in - 1) / d_in * d_in;
  FourierEncoder<T> enc = fourier_make<T>(FourierMode::Nerf, full, d_in);
  enc.m = m;
  enc.B.resize(static_cast<std::size_t>(m) * d_in);
  return enc;
}

// ===========================================================================
// Multilayer perceptron
// ===========================================================================

/// One fully connected layer, y = W x + b with W stored out x in, row-major.
template <class T>
struct Dense {
  int in = 0;
  int out = 0;
  std::vector<T> weight;
  std::vector<T> bias;

  Dense() = default;
  Dense(int in_width, int out_width)
      : in(in_width), out(out_width), weight(static_cast<std::size_t>(in_width) * out_width, T(0)),
        bias(static_cast<std::size_t>(out_width), T(0)) {}

  T& w(int o, int i) { return weight[static_cast<std::size_t>(o) * in + i]; }
  T w(int o, int i) const { return weight[static_cast<std::size_t>(o) * in + i]; }
};

/// Hidden layers use `activation`; the final layer is linear.
template <class T>
struct MlpParams {
  std::vector<Dense<T>> layers;
  Activation activation = Activation::SnakeAlt;

  int input_width() const { return layers.empty() ? 0 : layers.front().in; }
  int output_width() const { return layers.empty() ? 0 : layers.back().out; }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }
  void validate() const {
    if (layers.empty()) throw ShapeError("MLP has no layers");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out || l.bias.size() != static_cast<std::size_t>(l.out))
        throw ShapeError("MLP layer " + std::to_string(i) + " has inconsistent storage");
      if (i > 0 && layers[i - 1].out != l.in) throw ShapeError("MLP layer " + std::to_string(i) + " does not chain");
    }
  }
};

/// Layer widths for l layers: d_in -> c -> ... -> c -> d_out.
inline std::vector<std::pair<int, int>> mlp_layer_shapes(int layers, int channels, int d_in, int d_out) {
  if (layers < 1) throw ConfigError("an MLP needs at least one layer");
  if (channels < 1 || d_in < 1 || d_out < 1) throw ConfigError("MLP widths must be positive");
  std::vector<std::pair<int, int>> shapes;
  for (int i = 0; i < layers; ++i)
    shapes.emplace_back(i == 0 ? d_in : channels, i == layers - 1 ? d_out : channels);
  return shapes;
}

/// Xavier-uniform weights, zero biases.
template <class T = float>
MlpParams<T> init_params(int layers, int channels, int d_in, int d_out, std::uint64_t seed,
                         Activation activation = Activation::SnakeAlt) {
  MlpParams<T> p;
  p.activation = activation;
  std::mt19937_64 rng(seed);
  for (const auto& [in, out] : mlp_layer_shapes(layers, channels, d_in, d_out)) {
    Dense<T> d(in, out);
    const double bound = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : d.weight) w = static_cast<T>(u(rng));
    p.layers.push_back(std::move(d));
  }
  return p;
}

/// Everything mlp_backward needs: the input of every layer and every pre-activation.
template <class T>
struct MlpCache {
  std::vector<Matrix<T>> inputs;
  std::vector<Matrix<T>> pre;
  std::size_t batch = 0;

  const Matrix<T>& output() const { return pre.back(); }
};

namespace detail {

template <class T>
inline void dense_forward(const Dense<T>& layer, const Matrix<T>& x, Matrix<T>& z) {
  z.resize(x.rows, static_cast<std::size_t>(layer.out));
  const int in = layer.in;
  for (std::size_t n = 0; n < x.rows; ++n) {
    const T* xr = x.row(n);
    T* zr = z.row(n);
    for (int o = 0; o < layer.out; ++o) {
      const T* wr = layer.weight.data() + static_cast<std::size_t>(o) * in;
      T acc = 0;
#pragma omp simd reduction(+ : acc)
      for (int k = 0; k < in; ++k) acc += wr[k] * xr[k];
      zr[o] = acc + layer.bias[o];
    }
  }
}

}  // namespace detail

/// Layer-by-layer evaluation of the full batch; fills `cache` and returns a reference to the output.
template <class T>
const Matrix<T>& mlp_forward(const MlpParams<T>& params, const Matrix<T>& X, MlpCache<T>& cache) {
  if (params.layers.empty()) throw ShapeError("MLP has no layers");
  if (static_cast<int>(X.cols) != params.input_width())
    throw ShapeError("mlp_forward: input width " + std::to_string(X.cols) + " != " +
                     std::to_string(params.input_width()));
  const std::size_t L = params.layers.size();
  cache.inputs.resize(L);
  cache.pre.resize(L);
  cache.batch = X.rows;
  cache.inputs[0] = X;
  for (std::size_t i = 0; i < L; ++i) {
    detail::dense_forward(params.layers[i], cache.inputs[i], cache.pre[i]);
    if (i + 1 < L) {
      auto& next = cache.inputs[i + 1];
      next.resize(cache.pre[i].rows, cache.pre[i].cols);
      act_apply(params.activation, cache.pre[i].data.data(), next.data.data(), next.data.size());
    }
  }
  return cache.pre.back();
}

template <class T>
struct ForwardResult {
  Matrix<T> Y;
  MlpCache<T> cache;
};

template <class T>
ForwardResult<T> mlp_forward(const MlpParams<T>& params, const Matrix<T>& X) {
  ForwardResult<T> r;
  r.Y = mlp_forward(params, X, r.cache);
  return r;
}

/// Gradient storage congruent with a parameter set: MLP layers plus optional latent grids.
template <class T>
struct GradientBuffer {
  std::vector<Dense<T>> layers;
  std::vector<std::vector<T>> grids;

  GradientBuffer() = default;
  explicit GradientBuffer(const MlpParams<T>& params) {
    for (const auto& l : params.layers) layers.emplace_back(l.in, l.out);
  }

  void zero() {
    for (auto& l : layers) {
      std::fill(l.weight.begin(), l.weight.end(), T(0));
      std::fill(l.bias.begin(), l.bias.end(), T(0));
    }
    for (auto& g : grids) std::fill(g.begin(), g.end(), T(0));
  }

  void add(const GradientBuffer& o) {
    if (o.layers.size() != layers.size() || o.grids.size() != grids.size())
      throw ShapeError("GradientBuffer::add: shape mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      for (std::size_t k = 0; k < layers[i].weight.size(); ++k) layers[i].weight[k] += o.layers[i].weight[k];
      for (std::size_t k = 0; k < layers[i].bias.size(); ++k) layers[i].bias[k] += o.layers[i].bias[k];
    }
    for (std::size_t g = 0; g < grids.size(); ++g)
      for (std::size_t k = 0; k < grids[g].size(); ++k) grids[g][k] += o.grids[g][k];
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      for (T v : l.weight) if (!std::isfinite(v)) return false;
      for (T v : l.bias) if (!std::isfinite(v)) return false;
    }
    for (const auto& g : grids)
      for (T v : g) if (!std::isfinite(v)) return false;
    return true;
  }
};

/// Accumulates gradients of sum(dY * Y) into `grads`; writes input adjoints to
/// `dX` when non-null.
template <class T>
void mlp_backward(const MlpParams<T>& params, const MlpCache<T>& cache, const Matrix<T>& dY,
                  GradientBuffer<T>& grads, Matrix<T>* dX) {
  const std::size_t L = params.layers.size();
  if (cache.pre.size() != L || cache.inputs.size() != L || cache.batch != dY.rows)
    throw ShapeError("mlp_backward: cache does not match parameters or adjoint batch");
  if (static_cast<int>(dY.cols) != params.output_width()) throw ShapeError("mlp_backward: adjoint width mismatch");
  if (grads.layers.size() != L) throw ShapeError("mlp_backward: gradient buffer shape mismatch");
  for (std::size_t i = 0; i < L; ++i)
    if (cache.pre[i].cols != static_cast<std::size_t>(params.layers[i].out) ||
        cache.inputs[i].cols != static_cast<std::size_t>(params.layers[i].in))
      throw ShapeError("mlp_backward: stale cache");

  Matrix<T> dz = dY;
  Matrix<T> dprev;
  for (std::size_t li = L; li-- > 0;) {
    const Dense<T>& layer = params.layers[li];
    Dense<T>& g = grads.layers[li];
    const Matrix<T>& x = cache.inputs[li];
    const int in = layer.in;
    const bool need_dx = li > 0 || dX != nullptr;
    if (need_dx) {
      dprev.resize(x.rows, static_cast<std::size_t>(in));
      std::fill(dprev.data.begin(), dprev.data.end(), T(0));
    }
    for (std::size_t n = 0; n < x.rows; ++n) {
      const T* xr = x.row(n);
      const T* dzr = dz.row(n);
      T* dxr = need_dx ? dprev.row(n) : nullptr;
      for (int o = 0; o < layer.out; ++o) {
        const T go = dzr[o];
        if (go == T(0)) continue;
        g.bias[o] += go;
        T* gw = g.weight.data() + static_cast<std::size_t>(o) * in;
        const T* wr = layer.weight.data() + static_cast<std::size_t>(o) * in;
#pragma omp simd
        for (int k = 0; k < in; ++k) gw[k] += go * xr[k];
        if (dxr) {
#pragma omp simd
          for (int k = 0; k < in; ++k) dxr[k] += go * wr[k];
        }
      }
    }
    if (li > 0) {
      act_backprop(params.activation, cache.pre[li - 1].data.data(), dprev.data.data(), dprev.data.size());
      std::swap(dz, dprev);
    } else if (dX) {
      *dX = std::move(dprev);
    }
  }
}

template <class T>
struct BackwardResult {
  Matrix<T> dX;
  GradientBuffer<T> grads;
};

template <class T>
BackwardResult<T> mlp_backward(const MlpParams<T>& params, const MlpCache<T>& cache, const Matrix<T>& dY) {
  BackwardResult<T> r;
  r.grads = GradientBuffer<T>(params);
  mlp_backward(params, cache, dY, r.grads, &r.dX);
  return r;
}

// ===========================================================================
// Adam
// ===========================================================================

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update over a list of parameter tensors.
template <class T>
void adam_step(const std::vector<std::span<T>>& params, const std::vector<std::span<const T>>& grads,
               AdamState<T>& state, double lr) {
  if (params.size() != grads.size()) throw ShapeError("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), T(0));
      state.v.emplace_back(p.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].size() != grads[i].size() || state.m[i].size() != params[i].size())
      throw ShapeError("adam_step: tensor " + std::to_string(i) + " shape mismatch");
    for (T g : grads[i])
      if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient in tensor " + std::to_string(i));
  }
  state.t += 1;
  const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta1, static_cast<double>(state.t))));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(state.beta2, static_cast<double>(state.t))));
  const T step = static_cast<T>(lr), eps = static_cast<T>(state.eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i].data();
    const T* g = grads[i].data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const std::size_t n = params[i].size();
#pragma omp simd
    for (std::size_t k = 0; k < n; ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      p[k] -= step * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
    }
  }
}

template <class T>
std::vector<std::span<T>> parameter_views(MlpParams<T>& p) {
  std::vector<std::span<T>> out;
  for (auto& l : p.layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  return out;
}

template <class T>
std::vector<std::span<const T>> gradient_views(const GradientBuffer<T>& g) {
  std::vector<std::span<const T>> out;
  for (const auto& l : g.layers) {
    out.emplace_back(l.weight);
    out.emplace_back(l.bias);
  }
  for (const auto& grid : g.grids) out.emplace_back(grid);
  return out;
}

}  // namespace fvsrn
