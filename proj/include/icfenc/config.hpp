#pragma once

// Pipeline settings shared by every CLI stage. Loaded from a TOML-style
// key = value file; command-line flags override file values.

#include "icfenc/evaluation.hpp"
#include "icfenc/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace icfenc {

struct PipelineConfig {
  Index state_dim = 512;
  int sparsity = 16;
  int max_support = 0;  // 0 means 2 * sparsity
  double comparability_ratio = 2.0;
  double residual_tol = 0.0;
  std::string algorithm = "romp";
  bool standardize_features = true;
  bool center_responses = false;
  double threshold = 0.27;
  std::string tails = "two";
  int words_per_image = 2;
  std::vector<std::string> stopwords{default_stopword_list()};
  int histogram_bins = 40;
  std::uint64_t seed = 7;
  int worker_count = 0;  // 0 = all hardware threads

  static std::vector<std::string> default_stopword_list();
  static const std::vector<std::string>& keys();

  SolverConfig solver() const;
  std::set<std::string> stopword_set() const;
  void validate() const;
};

// Unknown keys and malformed values raise validation errors naming the key.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

}  // namespace icfenc
