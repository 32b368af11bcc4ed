#pragma once

// Voxel-wise sparse encoding models: one pursuit fit per voxel on a shared,
// once-standardized feature matrix.

#include "icfenc/solver.hpp"
#include "icfenc/types.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace icfenc {

struct EncodingConfig {
  SolverConfig solver;
  bool standardize_features = true;
  bool center_responses = false;
};

struct VoxelEncodingModel {
  VoxelRecord voxel;
  SparseSolution solution;
  std::shared_ptr<const StandardizationParams> standardization;
  FeatureSource feature_source;
  bool failed = false;
  std::string failure;

  // Prediction for one raw (unstandardized) feature row.
  double predict_row(std::span<const double> features) const;
};

struct EncodingModelSet {
  std::vector<VoxelEncodingModel> models;
  FeatureSource feature_source;
  std::vector<std::string> training_ids;
  EncodingConfig config;
  std::shared_ptr<const StandardizationParams> standardization;

  Index feature_dim() const { return standardization ? standardization->dim() : 0; }
  std::size_t failure_count() const;
};

// Inputs must already be aligned (same image ids in the same order).
EncodingModelSet train_voxelwise(const FeatureMatrix& features, const VoxelResponseMatrix& responses,
                                 const EncodingConfig& cfg, int workers = 0);

// n_images x V predictions using the stored training standardization.
Matrix predict(const EncodingModelSet& models, const FeatureMatrix& features, int workers = 0);

std::string serialize_models(const EncodingModelSet& models);
EncodingModelSet parse_models(std::string_view text);
void save_models(const EncodingModelSet& models, const std::filesystem::path& path);
EncodingModelSet load_models(const std::filesystem::path& path);

inline constexpr int kModelFileVersion = 1;

namespace reference {

// Single-threaded versions of the kernels above, kept as the baseline for
// determinism tests and benchmarks.
EncodingModelSet train_voxelwise(const FeatureMatrix& features, const VoxelResponseMatrix& responses,
                                 const EncodingConfig& cfg);
Matrix predict(const EncodingModelSet& models, const FeatureMatrix& features);

}  // namespace reference

}  // namespace icfenc
