// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <chrono>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "fvsrn/common.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/neural.hpp"

namespace fvsrn {

inline constexpr int kFusedBlock = 16;
inline constexpr int kFusedTileSamples = 32;
inline constexpr std::size_t kFusedBudgetBytes = 49152;
/// Bytes per stored entry in the capacity accounting (half precision).
inline constexpr std::size_t kFusedAccountingBytes = 2;

inline int pad16(int n) { return (n + kFusedBlock - 1) / kFusedBlock * kFusedBlock; }

struct FusedLayerShape {
  int in = 0;
  int out = 0;
  int in_pad = 0;
  int out_pad = 0;
};

/// Blocking and capacity plan. m_w covers all padded weights and biases,
/// m_s one tile of activations at the widest padded layer.
struct FusedPlan {
  std::vector<FusedLayerShape> layers;
  std::size_t budget = kFusedBudgetBytes;
  std::size_t m_w = 0;
  std::size_t m_s = 0;
  std::size_t w = 0;
  int max_width = 0;

  /// The same quantities at the f32 storage actually used for compute.
  std::size_t m_w_f32() const { return m_w / kFusedAccountingBytes * 4; }
  std::size_t m_s_f32() const { return m_s / kFusedAccountingBytes * 4; }
};

inline FusedPlan plan_build(const std::vector<std::pair<int, int>>& shapes, std::size_t budget = kFusedBudgetBytes) {
  if (shapes.empty()) throw ConfigError("plan_build: network has no layers");
  FusedPlan plan;
  plan.budget = budget;
  for (const auto& [in, out] : shapes) {
    if (in < 1 || out < 1) throw ConfigError("plan_build: layer widths must be positive");
    FusedLayerShape s{in, out, pad16(in), pad16(out)};
    plan.m_w += (static_cast<std::size_t>(s.in_pad) * s.out_pad + s.out_pad) * kFusedAccountingBytes;
    plan.max_width = std::max({plan.max_width, s.in_pad, s.out_pad});
    plan.layers.push_back(s);
  }
  plan.m_s = static_cast<std::size_t>(plan.max_width) * kFusedTileSamples * kFusedAccountingBytes;
  if (plan.m_w + plan.m_s > budget)
    throw CapacityError("plan_build: m_w + m_s = " + std::to_string(plan.m_w) + " + " + std::to_string(plan.m_s) +
                        " bytes exceeds the budget of " + std::to_string(budget) + " bytes");
  plan.w = (budget - plan.m_w) / plan.m_s;
  return plan;
}

inline FusedPlan plan_build(int layers, int channels, int d_in, int d_out, std::size_t budget = kFusedBudgetBytes) {
  return plan_build(mlp_layer_shapes(layers, channels, d_in, d_out), budget);
}

inline FusedPlan plan_build(const FvsrnModel& model, std::size_t budget = kFusedBudgetBytes) {
  std::vector<std::pair<int, int>> shapes;
  for (const auto& l : model.mlp.layers) shapes.emplace_back(l.in, l.out);
  return plan_build(shapes, budget);
}

/// Tile-at-a-time evaluator: weights are packed once into zero-padded,
/// transposed (in_pad x out_pad) blocks; each tile of 32 samples lives in a
/// scratch of 32 rows of the widest layer and is updated in place.
class FusedEvaluator {
 public:
  FusedEvaluator(FusedPlan plan, const MlpParams<float>& params, Head head)
      : plan_(std::move(plan)), activation_(params.activation), head_(head) {
    if (plan_.layers.size() != params.layers.size()) throw ShapeError("fused plan/model mismatch: layer count");
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
      const auto& l = params.layers[i];
      const auto& s = plan_.layers[i];
      if (l.in != s.in || l.out != s.out) throw ShapeError("fused plan/model mismatch at layer " + std::to_string(i));
      std::vector<float> wt(static_cast<std::size_t>(s.in_pad) * s.out_pad, 0.f);
      for (int o = 0; o < l.out; ++o)
        for (int k = 0; k < l.in; ++k) wt[static_cast<std::size_t>(k) * s.out_pad + o] = l.w(o, k);
      std::vector<float> b(static_cast<std::size_t>(s.out_pad), 0.f);
      std::copy(l.bias.begin(), l.bias.end(), b.begin());
      weights_.push_back(std::move(wt));
      biases_.push_back(std::move(b));
    }
    out_width_ = plan_.layers.back().out;
  }

  FusedEvaluator(const FvsrnModel& model, std::size_t budget = kFusedBudgetBytes)
      : FusedEvaluator(plan_build(model, budget), model.mlp, model.config.head) {}

  const FusedPlan& plan() const { return plan_; }
  int input_width() const { return plan_.layers.front().in; }
  int output_width() const { return out_width_; }

  /// Per-worker scratch: one tile of activations plus the block outputs of one sample group.
  std::size_t scratch_bytes() const {
    return static_cast<std::size_t>(kFusedTileSamples + kGroup) * plan_.max_width * sizeof(float);
  }

  /// Head-applied outputs for rows of assembled inputs.
  /// `scratch_peak`, when given, receives the largest per-worker scratch allocation.
  Matrix<float> eval(const Matrix<float>& X, int workers = 1, std::size_t* scratch_peak = nullptr) const {
    if (static_cast<int>(X.cols) != input_width())
      throw ShapeError("fused_eval: input width " + std::to_string(X.cols) + " != " + std::to_string(input_width()));
    Matrix<float> Y(X.rows, static_cast<std::size_t>(out_width_));
    run_tiles(X.rows, workers, [&](std::size_t n, float* row) {
      std::copy(X.row(n), X.row(n) + X.cols, row);
    }, Y, scratch_peak);
    return Y;
  }

  /// Assembles inputs tile by tile so no full-batch input matrix is built.
  Matrix<float> eval_queries(const FvsrnModel& model, std::span<const ModelQuery> queries, int workers = 1,
                             std::size_t* scratch_peak = nullptr) const {
    if (model.input_width() != input_width()) throw ShapeError("fused_eval: model does not match the plan");
    Matrix<float> Y(queries.size(), static_cast<std::size_t>(out_width_));
    run_tiles(queries.size(), workers, [&](std::size_t n, float* row) { assemble_input(model, queries[n], row); }, Y, scratch_peak);
    return Y;
  }

 private:
  template <class Fill>
  void run_tiles(std::size_t n, int workers, Fill&& fill, Matrix<float>& Y, std::size_t* scratch_peak) const {
    const std::size_t tiles = (n + kFusedTileSamples - 1) / kFusedTileSamples;
    const int W = plan_.max_width;
    std::vector<std::vector<float>> scratch(static_cast<std::size_t>(std::max(1, workers)));
    parallel_ranges(tiles, workers, [&](std::size_t t0, std::size_t t1, int worker) {
      auto& buf = scratch[static_cast<std::size_t>(worker)];
      buf.assign(scratch_bytes() / sizeof(float), 0.f);
      float* act = buf.data();
      float* tmp = act + static_cast<std::size_t>(kFusedTileSamples) * W;  // kGroup rows
      for (std::size_t t = t0; t < t1; ++t) {
        const std::size_t base = t * kFusedTileSamples;
        const int count = static_cast<int>(std::min<std::size_t>(kFusedTileSamples, n - base));
        for (int s = 0; s < count; ++s) {
          float* row = act + static_cast<std::size_t>(s) * W;
          std::fill(row, row + W, 0.f);
          fill(base + s, row);
        }
        tile_forward(act, tmp, count);
        for (int s = 0; s < count; ++s) {
          float* row = act + static_cast<std::size_t>(s) * W;
          head_apply(head_, row);
          std::copy(row, row + out_width_, Y.row(base + s));
        }
      }
    });
    if (scratch_peak) {
      *scratch_peak = 0;
      for (const auto& b : scratch) *scratch_peak = std::max(*scratch_peak, b.capacity() * sizeof(float));
    }
  }

  // Samples of a tile share each loaded weight row in groups of kGroup, which
  // also gives the FMA units independent accumulators.
  static constexpr int kGroup = 8;

  void tile_forward(float* act, float* tmp, int count) const {
    const int W = plan_.max_width;
    const std::size_t L = plan_.layers.size();
    for (std::size_t li = 0; li < L; ++li) {
      const auto& s = plan_.layers[li];
      const float* wt = weights_[li].data();
      const float* bias = biases_[li].data();
      const bool hidden = li + 1 < L;
      for (int g0 = 0; g0 < count; g0 += kGroup) {
        const int gn = std::min(kGroup, count - g0);
        float* x = act + static_cast<std::size_t>(g0) * W;
        for (int ob = 0; ob < s.out_pad; ob += kFusedBlock) {
          float acc[kGroup][kFusedBlock];
          for (int q = 0; q < kGroup; ++q)
#pragma omp simd
            for (int j = 0; j < kFusedBlock; ++j) acc[q][j] = bias[ob + j];
          for (int k = 0; k < s.in_pad; ++k) {
            const float* wr = wt + static_cast<std::size_t>(k) * s.out_pad + ob;
            for (int q = 0; q < kGroup; ++q) {
              const float xk = x[static_cast<std::size_t>(q) * W + k];
#pragma omp simd
              for (int j = 0; j < kFusedBlock; ++j) acc[q][j] += xk * wr[j];
            }
          }
          for (int q = 0; q < gn; ++q) {
            if (hidden) act_apply(activation_, acc[q], acc[q], kFusedBlock);
            std::copy(acc[q], acc[q] + kFusedBlock, tmp + static_cast<std::size_t>(q) * W + ob);
          }
        }
        for (int q = 0; q < gn; ++q) {
          float* row = x + static_cast<std::size_t>(q) * W;
          std::copy(tmp + static_cast<std::size_t>(q) * W, tmp + static_cast<std::size_t>(q) * W + s.out, row);
          // Padded columns would hold act(0) for hidden layers; keep them zero.
          std::fill(row + s.out, row + W, 0.f);
        }
      }
    }
  }

  FusedPlan plan_;
  Activation activation_;
  Head head_;
  int out_width_ = 0;
  std::vector<std::vector<float>> weights_;
  std::vector<std::vector<float>> biases_;
};

inline Matrix<float> fused_eval(const FusedPlan& plan, const FvsrnModel& model, const Matrix<float>& X,
                                int workers = 1) {
  return FusedEvaluator(plan, model.mlp, model.config.head).eval(X, workers);
}

/// Layer-by-layer reference: full-batch GEMMs through mlp_forward, then the head.
inline Matrix<float> naive_eval(const FvsrnModel& model, const Matrix<float>& X, MlpCache<float>& cache) {
  Matrix<float> Y = mlp_forward(model.mlp, X, cache);
  for (std::size_t n = 0; n < Y.rows; ++n) head_apply(model.config.head, Y.row(n));
  return Y;
}

// ---------------------------------------------------------------------------
// Benchmark
// ---------------------------------------------------------------------------

struct BenchRow {
  std::size_t batch = 0;
  std::string evaluator;
  double samples_per_sec = 0.0;
  std::vector<double> runs;  ///< samples/sec of each timed run
};

struct BenchReport {
  std::vector<BenchRow> rows;

  double speedup(std::size_t batch) const {
    double naive = 0, fused = 0;
    for (const auto& r : rows) {
      if (r.batch != batch) continue;
      (r.evaluator == "naive" ? naive : fused) = r.samples_per_sec;
    }
    if (naive <= 0) throw ConfigError("benchmark report has no naive row for this batch size");
    return fused / naive;
  }

  void write_csv(std::ostream& os) const {
    os << "batch,evaluator,samples_per_sec\n";
    for (const auto& r : rows) os << r.batch << ',' << r.evaluator << ',' << r.samples_per_sec << '\n';
  }
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Random assembled inputs for benchmarking (fixed seed).
inline Matrix<float> bench_inputs(const FvsrnModel& model, std::size_t batch, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  std::vector<ModelQuery> qs(batch);
  const auto [t0, t1] = model.config.resolved_time_range();
  for (auto& q : qs) {
    q.p = {u(rng), u(rng), u(rng)};
    q.d = normalize(Vec3{u(rng) - 0.5f, u(rng) - 0.5f, u(rng) - 0.5f} + Vec3{0, 0, 1e-3f});
    q.t = static_cast<float>(t0 + (t1 - t0) * u(rng));
  }
  Matrix<float> X;
  assemble_inputs(model, qs, X);
  return X;
}

/// Median samples/sec over `runs` timed runs per batch size and evaluator,
/// after one untimed warm-up run. Both evaluators run single-threaded.
inline BenchReport bench_compare(const FvsrnModel& model, const std::vector<std::size_t>& batches, int runs = 5) {
  if (runs < 1) throw ConfigError("bench_compare needs at least one run");
  const FusedEvaluator fused(model);
  BenchReport rep;
  MlpCache<float> cache;
  volatile float sink = 0.f;
  using clock = std::chrono::steady_clock;
  for (std::size_t b : batches) {
    if (b == 0) throw ConfigError("benchmark batch sizes must be positive");
    const Matrix<float> X = bench_inputs(model, b);
    BenchRow naive{b, "naive", 0, {}}, fz{b, "fused", 0, {}};
    for (int r = -1; r < runs; ++r) {
      // Alternate evaluators inside each round so drift affects both alike.
      auto t0 = clock::now();
      const auto Yn = naive_eval(model, X, cache);
      auto t1 = clock::now();
      const auto Yf = fused.eval(X, 1);
      auto t2 = clock::now();
      sink = sink + Yn.data[0] + Yf.data[0];
      if (r < 0) continue;
      naive.runs.push_back(b / std::chrono::duration<double>(t1 - t0).count());
      fz.runs.push_back(b / std::chrono::duration<double>(t2 - t1).count());
    }
    naive.samples_per_sec = median(naive.runs);
    fz.samples_per_sec = median(fz.runs);
    rep.rows.push_back(std::move(naive));
    rep.rows.push_back(std::move(fz));
  }
  (void)sink;
  return rep;
}

}  // namespace fvsrn
