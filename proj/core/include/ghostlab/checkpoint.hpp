// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "ghostlab/dynghost.hpp"
#include "ghostlab/normalize.hpp"
#include "ghostlab/optim.hpp"

namespace ghostlab {

/// Checkpoint layout: a directory holding one GTF tensor per named
/// parameter (dots in names become the file stem) plus manifest.json with
/// {config, step, optimizer hyperparameters, normalizer, loss weights}.
struct Checkpoint {
  DynGhostConfig config;
  ParamStore params;
  Normalizer normalizer;
  LossWeights loss;
  AdamWConfig optimizer;
  int64_t step = 0;
};

void save_checkpoint(const Checkpoint& ck, const std::string& dir);
Checkpoint load_checkpoint(const std::string& dir);

}  // namespace ghostlab
