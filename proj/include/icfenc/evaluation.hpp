#pragma once

// Pearson-correlation evaluation of encoding models, layer profiles and
// two-model comparison statistics.

#include "icfenc/encoding.hpp"
#include "icfenc/types.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace icfenc {

// Product-moment correlation. Returns NaN when either input is constant.
double pearson(std::span<const double> x, std::span<const double> y);

enum class Tails { one, two };
Tails parse_tails(const std::string& s);
const char* to_string(Tails t);

// Critical correlation for a t test with n_test - 2 degrees of freedom.
double significance_threshold(int n_test, double p, Tails tails);

// Region labels: "all"; hemisphere x level groups "LL", "LH", "RL", "RH"
// (low = EV, high = LOC+OPA+PPA+RSC); sub-regions such as "L-EV" or "R-PPA".
std::vector<std::string> region_labels_for(const VoxelRecord& v);
const std::vector<std::string>& canonical_region_order();

struct EvaluationReport {
  std::vector<VoxelRecord> voxels;
  std::vector<double> pc;  // NaN for degenerate voxels
  FeatureSource feature_source;
  Index n_test = 0;
  std::map<std::string, double> region_means;
  std::map<std::string, Index> region_counts;
  Index degenerate_count = 0;
};

EvaluationReport evaluate(const EncodingModelSet& models, const FeatureMatrix& test_features,
                          const VoxelResponseMatrix& test_responses, int workers = 0);

// Scores precomputed predictions (n_test x V) against observed responses.
EvaluationReport evaluate_predictions(const Matrix& predicted, const VoxelResponseMatrix& observed,
                                      const FeatureSource& source, int workers = 0);

struct LayerProfile {
  std::vector<std::string> layers;
  std::vector<std::string> regions;
  Matrix means;  // layers x regions, NaN where a region has no scored voxels
};

LayerProfile layer_profile(const std::vector<EvaluationReport>& reports);
std::string best_layer(const LayerProfile& profile, const std::string& region);

enum class VoxelClass { neither_significant, a_better, b_better, tie };
const char* to_string(VoxelClass c);

struct ComparisonReport {
  std::vector<VoxelRecord> voxels;
  std::vector<double> pc_a;
  std::vector<double> pc_b;
  std::vector<VoxelClass> classes;
  std::string source_a;
  std::string source_b;
  double threshold = 0.0;

  // Over voxels where both correlations reach the threshold.
  Index joint_significant = 0;
  double fraction_a_better = 0.0;
  double fraction_b_better = 0.0;
  double fraction_tie = 0.0;
  std::vector<double> bin_edges;
  std::vector<Index> bin_counts;

  // Mean |pc_a - pc_b| over every scored voxel of each sub-region.
  std::map<std::string, double> mean_abs_distance;
  std::map<std::string, Index> distance_counts;

  std::map<VoxelClass, Index> class_counts() const;
};

ComparisonReport compare(const EvaluationReport& a, const EvaluationReport& b, double threshold, int bins = 40);

namespace reference {
EvaluationReport evaluate_predictions(const Matrix& predicted, const VoxelResponseMatrix& observed,
                                      const FeatureSource& source);
}  // namespace reference

// Report files. Schemas are described in docs/formats.md.
std::string report_to_json(const EvaluationReport& r);
EvaluationReport report_from_json(std::string_view text);
std::string report_to_csv(const EvaluationReport& r);
EvaluationReport report_from_csv(std::string_view text);
std::string profile_to_csv(const LayerProfile& p);
std::string comparison_to_json(const ComparisonReport& c);
std::string comparison_scatter_csv(const ComparisonReport& c);
std::string comparison_histogram_csv(const ComparisonReport& c);
std::string comparison_distance_csv(const ComparisonReport& c);

enum class ReportFormat { csv, json };
void export_report(const EvaluationReport& r, ReportFormat format, const std::filesystem::path& path);
EvaluationReport load_report(const std::filesystem::path& path);

// Shortest decimal text that round-trips to the same double; "nan" for NaN.
std::string format_real(double v);

}  // namespace icfenc
