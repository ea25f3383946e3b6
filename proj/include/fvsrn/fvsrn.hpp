// Copyright 2026 The fvsrn Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "fvsrn/camera.hpp"
#include "fvsrn/checkpoint.hpp"
#include "fvsrn/common.hpp"
#include "fvsrn/fused.hpp"
#include "fvsrn/image.hpp"
#include "fvsrn/latent_grid.hpp"
#include "fvsrn/metrics.hpp"
#include "fvsrn/model.hpp"
#include "fvsrn/neural.hpp"
#include "fvsrn/renderer.hpp"
#include "fvsrn/training.hpp"
#include "fvsrn/transfer_function.hpp"
#include "fvsrn/volume.hpp"
