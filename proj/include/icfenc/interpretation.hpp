#pragma once

// Word-level voxel interpretation: score each caption word's state with a
// voxel model, tally the best-matching words, render word clouds and compare
// word distributions across voxels.

#include "icfenc/encoding.hpp"
#include "icfenc/features.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace icfenc {

struct TokenScore {
  std::string token;
  Index position = 0;  // row in the caption
  double error = 0.0;  // |prediction - observed|
};

struct ImageAttribution {
  std::string image_id;
  std::vector<TokenScore> ranked;  // ascending error, earlier position first on ties
  std::vector<std::string> selected;
};

// Applies the voxel model to each word state as if it were a pooled feature
// and keeps the k words whose prediction lands closest to `observed`.
ImageAttribution attribute_words(const VoxelEncodingModel& model, const WordStateSequence& seq, double observed,
                                 int k, const PoolingOptions& opts = {});

struct WordFrequencyTable {
  std::string voxel_id;
  std::map<std::string, int> counts;
  int total_selections = 0;
  std::vector<std::string> warnings;

  // Entries sorted by count descending, then token.
  std::vector<std::pair<std::string, int>> ranked() const;
};

const std::set<std::string>& default_stopwords();

WordFrequencyTable build_frequency_table(const std::string& voxel_id, const std::vector<ImageAttribution>& attributions,
                                         const std::set<std::string>& stopwords = default_stopwords());

// Attribution over every test image for each voxel; `observed` is n_images x V
// and row i belongs to seqs[i].
std::vector<WordFrequencyTable> interpret_voxels(const EncodingModelSet& models,
                                                 const std::vector<WordStateSequence>& seqs,
                                                 const Matrix& observed, const std::vector<Index>& voxel_columns,
                                                 int k, const std::set<std::string>& stopwords,
                                                 const PoolingOptions& opts = {}, int workers = 0);

std::string frequency_table_csv(const WordFrequencyTable& t);
WordFrequencyTable parse_frequency_table_csv(std::string_view csv, std::string voxel_id = {});

struct WordCloudStyle {
  double min_font = 12.0;
  double max_font = 64.0;
  double padding = 2.0;
  std::uint64_t seed = 0;
  std::string font_family = "monospace";
  std::vector<std::string> palette = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
};

// Glyph box metrics used for layout and documented for SVG consumers:
// advance width 0.6 em per character, ascent 0.8 em, descent 0.2 em.
inline constexpr double kAdvanceEm = 0.6;
inline constexpr double kAscentEm = 0.8;

struct PlacedWord {
  std::string token;
  int count = 0;
  double font_size = 0.0;
  double x = 0.0;  // box left
  double y = 0.0;  // box top
  double width = 0.0;
  double height = 0.0;
  std::string color;
};

std::vector<PlacedWord> layout_wordcloud(const WordFrequencyTable& table, const WordCloudStyle& style);
std::string render_wordcloud_svg(const WordFrequencyTable& table, const WordCloudStyle& style);

// Cosine similarity of count vectors over the union vocabulary.
double word_distribution_similarity(const WordFrequencyTable& a, const WordFrequencyTable& b);

struct LabeledTable {
  std::string group;  // region or subject label
  WordFrequencyTable table;
};

struct SimilarPair {
  std::size_t first;
  std::size_t second;
  double similarity;
};

struct SimilarityResult {
  Matrix matrix;
  std::vector<SimilarPair> top_pairs;  // cross-group pairs, most similar first
};

SimilarityResult similarity_matrix(const std::vector<LabeledTable>& tables, std::size_t top_n = 10);
std::string similarity_csv(const std::vector<LabeledTable>& tables, const SimilarityResult& result);

}  // namespace icfenc
