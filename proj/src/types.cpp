#include "icfenc/types.hpp"

#include "icfenc/error.hpp"

#include <cmath>
#include <set>

namespace icfenc {

namespace {

void check_unique(const std::vector<std::string>& ids, const char* what) {
  std::set<std::string> seen;
  std::string dups;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) dups += (dups.empty() ? "" : ", ") + id;
  }
  if (!dups.empty()) fail(ErrorKind::validation, std::string("duplicate ") + what + ": " + dups);
}

void check_finite(const Matrix& m, const char* what) {
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (!std::isfinite(m(i, j)))
        fail(ErrorKind::validation, std::string("non-finite ") + what + " value at row " +
                                        std::to_string(i) + ", column " + std::to_string(j));
}

}  // namespace

FeatureSource FeatureSource::parse(const std::string& tag) {
  if (tag == "ICF") return icf();
  if (tag.size() > 5 && tag.starts_with("CNN(") && tag.back() == ')') {
    return cnn(tag.substr(4, tag.size() - 5));
  }
  fail(ErrorKind::validation, "unrecognized feature source tag '" + tag + "'");
}

std::string FeatureSource::tag() const {
  return kind == Kind::icf ? std::string("ICF") : "CNN(" + layer + ")";
}

const char* to_string(Roi r) {
  switch (r) {
    case Roi::EV: return "EV";
    case Roi::LOC: return "LOC";
    case Roi::OPA: return "OPA";
    case Roi::PPA: return "PPA";
    case Roi::RSC: return "RSC";
  }
  return "EV";
}

const char* to_string(Hemisphere h) { return h == Hemisphere::L ? "L" : "R"; }

Roi parse_roi(const std::string& s) {
  for (Roi r : {Roi::EV, Roi::LOC, Roi::OPA, Roi::PPA, Roi::RSC})
    if (s == to_string(r)) return r;
  fail(ErrorKind::validation, "unknown roi '" + s + "' (expected EV, LOC, OPA, PPA or RSC)");
}

Hemisphere parse_hemisphere(const std::string& s) {
  if (s == "L") return Hemisphere::L;
  if (s == "R") return Hemisphere::R;
  fail(ErrorKind::validation, "unknown hemisphere '" + s + "' (expected L or R)");
}

void validate(const FeatureMatrix& f) {
  if (std::ssize(f.image_ids) != f.rows())
    fail(ErrorKind::validation, "feature matrix has " + std::to_string(f.rows()) + " rows but " +
                                    std::to_string(f.image_ids.size()) + " image ids");
  check_unique(f.image_ids, "image ids");
  check_finite(f.values, "feature");
}

void validate(const VoxelResponseMatrix& r) {
  if (std::ssize(r.image_ids) != r.rows())
    fail(ErrorKind::validation, "response matrix has " + std::to_string(r.rows()) + " rows but " +
                                    std::to_string(r.image_ids.size()) + " image ids");
  if (std::ssize(r.voxels) != r.cols())
    fail(ErrorKind::validation, "response matrix has " + std::to_string(r.cols()) + " columns but " +
                                    std::to_string(r.voxels.size()) + " voxel records");
  check_unique(r.image_ids, "image ids");
  std::vector<std::string> vids;
  for (const auto& v : r.voxels) vids.push_back(v.voxel_id);
  check_unique(vids, "voxel ids");
  check_finite(r.values, "response");
}

}  // namespace icfenc
