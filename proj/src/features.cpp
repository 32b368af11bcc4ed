#include "icfenc/features.hpp"

#include "icfenc/error.hpp"
#include "parallel.hpp"

#include <map>
#include <set>
#include <unordered_map>

namespace icfenc {

namespace {

struct RowRange {
  Index first;
  Index last;
};

// Rows that carry word states, after dropping start/end marker steps.
RowRange pooled_rows(const WordStateSequence& seq, const PoolingOptions& opts) {
  if (std::ssize(seq.tokens) != seq.states.rows())
    fail(ErrorKind::validation, "image '" + seq.image_id + "': " + std::to_string(seq.tokens.size()) +
                                    " tokens but " + std::to_string(seq.states.rows()) + " state rows");
  if (seq.states.cols() != opts.state_dim)
    fail(ErrorKind::validation, "image '" + seq.image_id + "': state dimension " +
                                    std::to_string(seq.states.cols()) + ", expected " + std::to_string(opts.state_dim));
  RowRange r{0, seq.states.rows()};
  if (r.last > 0 && opts.skip_initial_state && seq.tokens.front() == opts.start_token) ++r.first;
  if (r.last > r.first && opts.skip_end_token && seq.tokens.back() == opts.end_token) --r.last;
  if (r.first >= r.last) fail(ErrorKind::validation, "image '" + seq.image_id + "': no word states to pool");
  return r;
}

void column_max(const Matrix& states, RowRange r, Eigen::Ref<Vector> out) {
  out = states.row(r.first).transpose();
  for (Index i = r.first + 1; i < r.last; ++i) out = out.cwiseMax(states.row(i).transpose());
}

}  // namespace

std::pair<Index, Index> word_state_rows(const WordStateSequence& seq, const PoolingOptions& opts) {
  const RowRange r = pooled_rows(seq, opts);
  return {r.first, r.last};
}

PooledFeature pool_max(const WordStateSequence& seq, const PoolingOptions& opts) {
  const RowRange r = pooled_rows(seq, opts);
  PooledFeature out{seq.image_id, Vector(opts.state_dim)};
  column_max(seq.states, r, out.values);
  return out;
}

FeatureMatrix build_feature_matrix(const std::vector<WordStateSequence>& seqs, const PoolingOptions& opts,
                                   int workers) {
  if (seqs.empty()) fail(ErrorKind::validation, "no word-state sequences to pool");
  std::set<std::string> seen;
  std::string dups;
  std::vector<RowRange> ranges;
  ranges.reserve(seqs.size());
  for (const auto& s : seqs) {
    if (!seen.insert(s.image_id).second) dups += (dups.empty() ? "" : ", ") + s.image_id;
    ranges.push_back(pooled_rows(s, opts));
  }
  if (!dups.empty()) fail(ErrorKind::validation, "duplicate image ids: " + dups);

  FeatureMatrix f;
  f.source = FeatureSource::icf();
  // Pool into columns of a d x n buffer so each worker writes contiguous memory.
  Matrix pooled(opts.state_dim, std::ssize(seqs));
  const auto n = std::ssize(seqs);
#pragma omp parallel for schedule(static) num_threads(detail::resolve_workers(workers))
  for (Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    column_max(seqs[k].states, ranges[k], pooled.col(i));
  }
  f.values = pooled.transpose();
  for (const auto& s : seqs) f.image_ids.push_back(s.image_id);
  return f;
}

Alignment align(const FeatureMatrix& features, const VoxelResponseMatrix& responses) {
  if (features.rows() == 0 || responses.rows() == 0)
    fail(ErrorKind::validation, "alignment needs nonempty features and responses");
  std::unordered_map<std::string, Index> feature_row;
  for (Index i = 0; i < features.rows(); ++i) feature_row.emplace(features.image_ids[static_cast<std::size_t>(i)], i);

  Alignment out;
  std::vector<Index> keep_f, keep_r;
  std::set<std::string> matched;
  for (Index i = 0; i < responses.rows(); ++i) {
    const auto& id = responses.image_ids[static_cast<std::size_t>(i)];
    auto it = feature_row.find(id);
    if (it == feature_row.end()) {
      out.dropped_response_ids.push_back(id);
      continue;
    }
    keep_r.push_back(i);
    keep_f.push_back(it->second);
    matched.insert(id);
  }
  for (const auto& id : features.image_ids)
    if (!matched.count(id)) out.dropped_feature_ids.push_back(id);
  if (keep_r.empty()) fail(ErrorKind::alignment, "features and responses share no image ids");

  const auto n = std::ssize(keep_r);
  out.features.source = features.source;
  out.features.values.resize(n, features.cols());
  out.responses.voxels = responses.voxels;
  out.responses.values.resize(n, responses.cols());
  for (Index k = 0; k < n; ++k) {
    const auto fi = keep_f[static_cast<std::size_t>(k)];
    const auto ri = keep_r[static_cast<std::size_t>(k)];
    out.features.values.row(k) = features.values.row(fi);
    out.responses.values.row(k) = responses.values.row(ri);
    out.features.image_ids.push_back(responses.image_ids[static_cast<std::size_t>(ri)]);
  }
  out.responses.image_ids = out.features.image_ids;
  return out;
}

std::vector<FeatureMatrix> select_layer_sets(const std::vector<FeatureMatrix>& available,
                                             const std::vector<std::string>& names) {
  if (names.empty()) fail(ErrorKind::validation, "no layer names requested");
  std::map<std::string, const FeatureMatrix*> by_name;
  for (const auto& f : available) by_name.emplace(f.source.name(), &f);
  std::vector<FeatureMatrix> out;
  for (const auto& name : names) {
    auto it = by_name.find(name);
    if (it == by_name.end()) fail(ErrorKind::validation, "unknown layer '" + name + "'");
    out.push_back(*it->second);
  }
  return out;
}

namespace reference {

FeatureMatrix build_feature_matrix(const std::vector<WordStateSequence>& seqs, const PoolingOptions& opts) {
  if (seqs.empty()) fail(ErrorKind::validation, "no word-state sequences to pool");
  std::set<std::string> seen;
  FeatureMatrix f;
  f.values.resize(std::ssize(seqs), opts.state_dim);
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    if (!seen.insert(seqs[i].image_id).second) fail(ErrorKind::validation, "duplicate image ids: " + seqs[i].image_id);
    f.values.row(static_cast<Index>(i)) = pool_max(seqs[i], opts).values.transpose();
    f.image_ids.push_back(seqs[i].image_id);
  }
  return f;
}

}  // namespace reference

}  // namespace icfenc
