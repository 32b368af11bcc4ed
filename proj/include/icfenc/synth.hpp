#pragma once

// Seeded synthetic fixtures: caption word states, pooled features, a degraded
// control feature set and voxel responses with planted sparse weights.

#include "icfenc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace icfenc {

struct SynthConfig {
  std::uint64_t seed = 7;
  Index n_train = 1000;
  Index n_test = 113;
  Index voxels = 200;
  Index state_dim = 512;
  int planted_sparsity = 4;
  double snr = 1.0;             // signal variance / noise variance
  double degraded_noise = 1.0;  // feature noise sd (in feature sd units) for the control set
  int min_tokens = 3;
  int max_tokens = 12;

  void validate() const;
};

struct PlantedVoxel {
  std::vector<Index> support;  // sorted
  std::vector<double> weights;  // on standardized training features
  double intercept = 0.0;
  double noise_sd = 0.0;
};

struct SynthBundle {
  std::vector<WordStateSequence> train_states;
  std::vector<WordStateSequence> test_states;
  FeatureMatrix train_icf;
  FeatureMatrix test_icf;
  FeatureMatrix train_degraded;
  FeatureMatrix test_degraded;
  VoxelResponseMatrix train_responses;
  VoxelResponseMatrix test_responses;
  std::vector<PlantedVoxel> truth;
};

SynthBundle make_synthetic(const SynthConfig& cfg);

// Writes train_states.{jsonl,fmat}, test_states.{jsonl,fmat}, {train,test}_icf.fmat,
// {train,test}_degraded.fmat, {train,test}_responses.fmat, voxels.csv and truth.json.
void write_bundle(const SynthBundle& bundle, const SynthConfig& cfg, const std::filesystem::path& dir);

}  // namespace icfenc
