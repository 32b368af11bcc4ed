#pragma once

// Fixed-size image features from caption word states (ICF) and layer sets.

#include "icfenc/types.hpp"

#include <string>
#include <utility>
#include <vector>

namespace icfenc {

struct PoolingOptions {
  Index state_dim = 512;
  // Drop a leading start marker row (the CNN-initialized state) if present.
  bool skip_initial_state = true;
  std::string start_token = "<start>";
  // Drop a trailing end-of-sequence row if present.
  bool skip_end_token = true;
  std::string end_token = "<end>";
};

// Half-open row range [first, last) holding word states once the start and end
// marker steps are dropped. Throws if the sequence is malformed or empty.
std::pair<Index, Index> word_state_rows(const WordStateSequence& seq, const PoolingOptions& opts = {});

struct PooledFeature {
  std::string image_id;
  Vector values;
};

// Coordinate-wise maximum over the word-state rows.
PooledFeature pool_max(const WordStateSequence& seq, const PoolingOptions& opts = {});

// One pooled row per sequence, in input order. `workers` <= 0 uses the OpenMP default.
FeatureMatrix build_feature_matrix(const std::vector<WordStateSequence>& seqs,
                                   const PoolingOptions& opts = {}, int workers = 0);

struct Alignment {
  FeatureMatrix features;
  VoxelResponseMatrix responses;
  std::vector<std::string> dropped_feature_ids;
  std::vector<std::string> dropped_response_ids;

  std::size_t warning_count() const { return dropped_feature_ids.size() + dropped_response_ids.size(); }
};

// Keeps the image ids present in both inputs, ordered as in `responses`.
Alignment align(const FeatureMatrix& features, const VoxelResponseMatrix& responses);

// Picks matrices by layer name (FeatureSource::name()), in the requested order.
std::vector<FeatureMatrix> select_layer_sets(const std::vector<FeatureMatrix>& available,
                                             const std::vector<std::string>& names);

namespace reference {
// Serial loop over pool_max.
FeatureMatrix build_feature_matrix(const std::vector<WordStateSequence>& seqs, const PoolingOptions& opts = {});
}  // namespace reference

}  // namespace icfenc
