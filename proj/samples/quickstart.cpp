// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
// Compress a synthetic volume into a small network, render it and compare.
#include <iostream>

#include "fvsrn/fvsrn.hpp"

int main() {
  using namespace fvsrn;
  const ScalarVolume volume = synth_field("gaussians", 64);

  ModelConfig config;  // 4 x 32 SnakeAlt network, 32^3 x 16 latent grid
  FvsrnModel model = make_model(config);

  WorldTrainConfig train;
  train.epochs = 20;
  train_world(model, TargetField::of(volume), train,
              [](int epoch, double loss) { std::cout << "epoch " << epoch << " L1 " << loss << "\n"; });

  const auto mem = memory_footprint(model, WeightPrecision::F16, GridPrecision::U8);
  std::cout << "network " << mem.network << " B, grid " << mem.grid << " B\n";

  EvalSettings eval;
  eval.views = 4;
  eval.resolution = 128;
  const auto m = evaluate_views(model, volume, tf_ramp(), eval);
  std::cout << "PSNR " << m.mean.psnr << " dB, SSIM " << m.mean.ssim << "\n";

  Camera cam;
  cam.width = cam.height = 256;
  RenderSettings s;
  s.stepsize = stepsize_from_voxels(1.f, 64);
  image_write_png(render_image(model, cam, s, nullptr), "quickstart.png");
  checkpoint_save(model, "quickstart.fvsrn", WeightPrecision::F16, GridPrecision::U8);
}
