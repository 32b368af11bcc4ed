#pragma once

// Domain records shared across the pipeline stages.

#include "icfenc/solver.hpp"

#include <string>
#include <vector>

namespace icfenc {

// Decoder output for one image: one hidden state row per caption token.
struct WordStateSequence {
  std::string image_id;
  std::vector<std::string> tokens;
  Matrix states;  // tokens.size() x state_dim
};

// Where a feature matrix came from: pooled caption features or one CNN layer.
struct FeatureSource {
  enum class Kind { icf, cnn };
  Kind kind = Kind::icf;
  std::string layer;

  static FeatureSource icf() { return {}; }
  static FeatureSource cnn(std::string name) { return {Kind::cnn, std::move(name)}; }
  static FeatureSource parse(const std::string& tag);

  // "ICF" or "CNN(<layer>)"
  std::string tag() const;
  // Short label used for layer lists: "ICF" or the bare layer name.
  std::string name() const { return kind == Kind::icf ? std::string("ICF") : layer; }

  bool operator==(const FeatureSource&) const = default;
};

struct FeatureMatrix {
  Matrix values;  // n_images x d
  std::vector<std::string> image_ids;
  FeatureSource source;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

enum class Roi { EV, LOC, OPA, PPA, RSC };
enum class Hemisphere { L, R };

const char* to_string(Roi r);
const char* to_string(Hemisphere h);
Roi parse_roi(const std::string& s);
Hemisphere parse_hemisphere(const std::string& s);

// EV is the low-level group, the other four regions form the high-level group.
inline bool is_high_level(Roi r) { return r != Roi::EV; }

struct VoxelRecord {
  std::string voxel_id;
  std::string subject;
  Roi roi = Roi::EV;
  Hemisphere hemisphere = Hemisphere::L;

  bool operator==(const VoxelRecord&) const = default;
};

struct VoxelResponseMatrix {
  Matrix values;  // n_images x V
  std::vector<std::string> image_ids;
  std::vector<VoxelRecord> voxels;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

// Throws on duplicate ids, size mismatches or non-finite values.
void validate(const FeatureMatrix& f);
void validate(const VoxelResponseMatrix& r);

}  // namespace icfenc
