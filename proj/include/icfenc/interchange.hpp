#pragma once

// On-disk formats shared with the feature extractor and between CLI stages.
//
// FMAT layout (all integers little-endian):
//   bytes 0..3   "FMAT"
//   byte  4      version, 0x01
//   bytes 5..8   header_len (uint32)
//   header_len   UTF-8 JSON: {"dtype": "f32"|"f64", "shape": [rows, cols],
//                "order": "row-major", "ids": [...]?, "source": "..."?}
//   payload      rows * cols values, row-major, little-endian IEEE-754
//
// See docs/formats.md for hex examples.

#include "icfenc/types.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace icfenc::interchange {

enum class Dtype { f32, f64 };

inline constexpr std::uint8_t kFmatVersion = 0x01;

struct Fmat {
  Dtype dtype = Dtype::f32;
  Index rows = 0;
  Index cols = 0;
  std::vector<double> values;  // row-major
  std::optional<std::vector<std::string>> ids;
  std::optional<std::string> source;

  bool operator==(const Fmat&) const = default;
};

std::string encode_fmat(const Fmat& m);
Fmat decode_fmat(std::string_view bytes);

void write_fmat(const Fmat& m, const std::filesystem::path& path);
Fmat read_fmat(const std::filesystem::path& path);

Fmat to_fmat(const Matrix& values, Dtype dtype);
Matrix to_matrix(const Fmat& m);

Fmat from_features(const FeatureMatrix& f, Dtype dtype = Dtype::f32);
FeatureMatrix to_features(const Fmat& m);

struct WordStatesRead {
  std::vector<WordStateSequence> sequences;
  std::vector<std::string> warnings;
};

// JSON-lines index plus the companion FMAT of stacked states. Each line is
// {"image_id": ..., "tokens": [...], "state_rows": [start, end)}.
WordStatesRead read_word_states(const std::filesystem::path& jsonl,
                                const std::filesystem::path& states);
WordStatesRead parse_word_states(std::string_view jsonl, const Fmat& states);
void write_word_states(const std::vector<WordStateSequence>& seqs,
                       const std::filesystem::path& jsonl,
                       const std::filesystem::path& states, Dtype dtype = Dtype::f32);

// CSV with header voxel_id,subject,roi,hemisphere.
std::vector<VoxelRecord> parse_voxel_meta(std::string_view csv);
std::vector<VoxelRecord> read_voxel_meta(const std::filesystem::path& path);
void write_voxel_meta(const std::vector<VoxelRecord>& voxels, const std::filesystem::path& path);

VoxelResponseMatrix assemble_responses(const Fmat& values, std::vector<VoxelRecord> voxels);
VoxelResponseMatrix read_responses(const std::filesystem::path& fmat,
                                   const std::filesystem::path& meta);
void write_responses(const VoxelResponseMatrix& r, const std::filesystem::path& fmat,
                     const std::filesystem::path& meta, Dtype dtype = Dtype::f32);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace icfenc::interchange
