#include "icfenc/evaluation.hpp"

#include "icfenc/error.hpp"
#include "icfenc/interchange.hpp"
#include "json.hpp"
#include "parallel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace icfenc {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void summarize(EvaluationReport& r) {
  r.region_means.clear();
  r.region_counts.clear();
  r.degenerate_count = 0;
  std::map<std::string, double> sums;
  for (std::size_t v = 0; v < r.voxels.size(); ++v) {
    if (std::isnan(r.pc[v])) {
      ++r.degenerate_count;
      continue;
    }
    for (const auto& label : region_labels_for(r.voxels[v])) {
      sums[label] += r.pc[v];
      ++r.region_counts[label];
    }
  }
  for (const auto& [label, sum] : sums) r.region_means[label] = sum / static_cast<double>(r.region_counts[label]);
}

void check_observed(const Matrix& predicted, const VoxelResponseMatrix& observed) {
  validate(observed);
  if (predicted.rows() != observed.rows() || predicted.cols() != observed.cols())
    fail(ErrorKind::validation, "prediction shape does not match observed responses");
  if (observed.rows() < 3) fail(ErrorKind::validation, "evaluation needs at least 3 test samples");
}

EvaluationReport blank_report(const VoxelResponseMatrix& observed, const FeatureSource& source) {
  EvaluationReport r;
  r.voxels = observed.voxels;
  r.feature_source = source;
  r.n_test = observed.rows();
  r.pc.assign(observed.voxels.size(), kNaN);
  return r;
}

double voxel_pc(const Matrix& predicted, const VoxelResponseMatrix& observed, Index v) {
  const auto n = static_cast<std::size_t>(predicted.rows());
  return pearson(std::span<const double>(predicted.col(v).data(), n),
                 std::span<const double>(observed.values.col(v).data(), n));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  for (std::string f; std::getline(ss, f, sep);) out.push_back(f);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_real(const std::string& s) {
  if (s == "nan" || s.empty()) return kNaN;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) fail(ErrorKind::parse, "invalid number '" + s + "'");
  return v;
}

json real_or_null(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

}  // namespace

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) fail(ErrorKind::validation, "pearson inputs differ in length");
  if (x.size() < 3) fail(ErrorKind::validation, "pearson needs at least 3 samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) fail(ErrorKind::validation, "pearson inputs must be finite");
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return kNaN;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

Tails parse_tails(const std::string& s) {
  if (s == "one") return Tails::one;
  if (s == "two") return Tails::two;
  fail(ErrorKind::validation, "tails must be 'one' or 'two', got '" + s + "'");
}

const char* to_string(Tails t) { return t == Tails::one ? "one" : "two"; }

double significance_threshold(int n_test, double p, Tails tails) {
  if (n_test < 4) fail(ErrorKind::validation, "significance threshold needs n_test >= 4");
  if (!(p > 0.0 && p < 1.0)) fail(ErrorKind::validation, "p must lie in (0, 1)");
  const double df = n_test - 2;
  const boost::math::students_t dist(df);
  const double upper = tails == Tails::two ? p / 2.0 : p;
  const double t = boost::math::quantile(boost::math::complement(dist, upper));
  return t / std::sqrt(t * t + df);
}

const std::vector<std::string>& canonical_region_order() {
  static const std::vector<std::string> order = [] {
    std::vector<std::string> o = {"all", "LL", "LH", "RL", "RH"};
    for (const char* h : {"L", "R"})
      for (Roi r : {Roi::EV, Roi::LOC, Roi::OPA, Roi::PPA, Roi::RSC}) o.push_back(std::string(h) + "-" + to_string(r));
    return o;
  }();
  return order;
}

std::vector<std::string> region_labels_for(const VoxelRecord& v) {
  const std::string h = to_string(v.hemisphere);
  return {"all", h + (is_high_level(v.roi) ? "H" : "L"), h + "-" + to_string(v.roi)};
}

EvaluationReport evaluate_predictions(const Matrix& predicted, const VoxelResponseMatrix& observed,
                                      const FeatureSource& source, int workers) {
  check_observed(predicted, observed);
  EvaluationReport r = blank_report(observed, source);
  const Index V = observed.cols();
#pragma omp parallel for schedule(static) num_threads(detail::resolve_workers(workers))
  for (Index v = 0; v < V; ++v) r.pc[static_cast<std::size_t>(v)] = voxel_pc(predicted, observed, v);
  summarize(r);
  return r;
}

EvaluationReport evaluate(const EncodingModelSet& models, const FeatureMatrix& test_features,
                          const VoxelResponseMatrix& test_responses, int workers) {
  if (test_features.image_ids != test_responses.image_ids)
    fail(ErrorKind::alignment, "test features and responses are not aligned; run align() first");
  if (models.models.size() != test_responses.voxels.size())
    fail(ErrorKind::validation, "model set has " + std::to_string(models.models.size()) + " voxels, responses have " +
                                    std::to_string(test_responses.voxels.size()));
  for (std::size_t v = 0; v < models.models.size(); ++v)
    if (models.models[v].voxel.voxel_id != test_responses.voxels[v].voxel_id)
      fail(ErrorKind::validation, "voxel order differs between models and responses at position " + std::to_string(v));
  return evaluate_predictions(predict(models, test_features, workers), test_responses, models.feature_source, workers);
}

namespace reference {

EvaluationReport evaluate_predictions(const Matrix& predicted, const VoxelResponseMatrix& observed,
                                      const FeatureSource& source) {
  check_observed(predicted, observed);
  EvaluationReport r = blank_report(observed, source);
  for (Index v = 0; v < observed.cols(); ++v) r.pc[static_cast<std::size_t>(v)] = voxel_pc(predicted, observed, v);
  summarize(r);
  return r;
}

}  // namespace reference

LayerProfile layer_profile(const std::vector<EvaluationReport>& reports) {
  if (reports.empty()) fail(ErrorKind::validation, "layer profile needs at least one report");
  for (const auto& r : reports)
    if (r.voxels != reports.front().voxels)
      fail(ErrorKind::validation, "report for layer '" + r.feature_source.name() + "' has different voxel metadata");

  LayerProfile p;
  for (const auto& label : canonical_region_order())
    if (std::any_of(reports.begin(), reports.end(), [&](const auto& r) { return r.region_counts.count(label) > 0; }))
      p.regions.push_back(label);
  p.means = Matrix::Constant(std::ssize(reports), std::ssize(p.regions), kNaN);
  for (std::size_t l = 0; l < reports.size(); ++l) {
    p.layers.push_back(reports[l].feature_source.name());
    for (std::size_t c = 0; c < p.regions.size(); ++c) {
      auto it = reports[l].region_means.find(p.regions[c]);
      if (it != reports[l].region_means.end()) p.means(static_cast<Index>(l), static_cast<Index>(c)) = it->second;
    }
  }
  return p;
}

std::string best_layer(const LayerProfile& profile, const std::string& region) {
  if (profile.layers.empty()) fail(ErrorKind::validation, "empty layer profile");
  auto it = std::find(profile.regions.begin(), profile.regions.end(), region);
  if (it == profile.regions.end()) fail(ErrorKind::validation, "region '" + region + "' is not in the profile");
  const Index c = it - profile.regions.begin();
  Index best = -1;
  for (Index l = 0; l < std::ssize(profile.layers); ++l) {
    const double m = profile.means(l, c);
    if (std::isnan(m)) continue;
    if (best < 0 || m > profile.means(best, c)) best = l;
  }
  if (best < 0) fail(ErrorKind::validation, "region '" + region + "' has no scored voxels in any layer");
  return profile.layers[static_cast<std::size_t>(best)];
}

const char* to_string(VoxelClass c) {
  switch (c) {
    case VoxelClass::neither_significant: return "neither_significant";
    case VoxelClass::a_better: return "a_better";
    case VoxelClass::b_better: return "b_better";
    case VoxelClass::tie: return "tie";
  }
  return "neither_significant";
}

std::map<VoxelClass, Index> ComparisonReport::class_counts() const {
  std::map<VoxelClass, Index> out{{VoxelClass::neither_significant, 0}, {VoxelClass::a_better, 0},
                                  {VoxelClass::b_better, 0}, {VoxelClass::tie, 0}};
  for (auto c : classes) ++out[c];
  return out;
}

ComparisonReport compare(const EvaluationReport& a, const EvaluationReport& b, double threshold, int bins) {
  if (a.voxels.size() != b.voxels.size())
    fail(ErrorKind::validation, "reports cover different numbers of voxels");
  for (std::size_t v = 0; v < a.voxels.size(); ++v)
    if (a.voxels[v].voxel_id != b.voxels[v].voxel_id)
      fail(ErrorKind::validation, "reports disagree on voxel at position " + std::to_string(v));
  if (bins < 1) fail(ErrorKind::validation, "histogram needs at least one bin");

  ComparisonReport c;
  c.voxels = a.voxels;
  c.pc_a = a.pc;
  c.pc_b = b.pc;
  c.source_a = a.feature_source.tag();
  c.source_b = b.feature_source.tag();
  c.threshold = threshold;

  // NaN never reaches the threshold, so it behaves as a non-significant score.
  auto significant = [&](double pc) { return !std::isnan(pc) && pc >= threshold; };
  std::vector<double> joint_diffs;
  Index a_better = 0, b_better = 0, ties = 0;
  std::map<std::string, double> dist_sum;
  for (std::size_t v = 0; v < c.voxels.size(); ++v) {
    const double pa = a.pc[v], pb = b.pc[v];
    const bool sa = significant(pa), sb = significant(pb);
    VoxelClass cls;
    if (!sa && !sb) cls = VoxelClass::neither_significant;
    else if (!sb || (sa && pa > pb)) cls = VoxelClass::a_better;
    else if (!sa || pb > pa) cls = VoxelClass::b_better;
    else cls = VoxelClass::tie;
    c.classes.push_back(cls);

    if (sa && sb) {
      joint_diffs.push_back(pa - pb);
      if (cls == VoxelClass::a_better) ++a_better;
      else if (cls == VoxelClass::b_better) ++b_better;
      else ++ties;
    }
    if (!std::isnan(pa) && !std::isnan(pb)) {
      const std::string sub = region_labels_for(c.voxels[v])[2];
      dist_sum[sub] += std::abs(pa - pb);
      ++c.distance_counts[sub];
    }
  }
  for (const auto& [sub, sum] : dist_sum) c.mean_abs_distance[sub] = sum / static_cast<double>(c.distance_counts[sub]);

  c.joint_significant = std::ssize(joint_diffs);
  if (c.joint_significant > 0) {
    const double n = static_cast<double>(c.joint_significant);
    c.fraction_a_better = static_cast<double>(a_better) / n;
    c.fraction_b_better = static_cast<double>(b_better) / n;
    c.fraction_tie = static_cast<double>(ties) / n;
  }

  double half = 0.0;
  for (double d : joint_diffs) half = std::max(half, std::abs(d));
  if (half == 0.0) half = 1.0;
  c.bin_counts.assign(static_cast<std::size_t>(bins), 0);
  for (int k = 0; k <= bins; ++k) c.bin_edges.push_back(-half + 2.0 * half * k / bins);
  for (double d : joint_diffs) {
    auto k = static_cast<Index>(std::floor((d + half) / (2.0 * half) * bins));
    k = std::clamp<Index>(k, 0, bins - 1);
    ++c.bin_counts[static_cast<std::size_t>(k)];
  }
  return c;
}

std::string report_to_json(const EvaluationReport& r) {
  json voxels = json::array();
  for (std::size_t v = 0; v < r.voxels.size(); ++v) {
    const auto& m = r.voxels[v];
    voxels.push_back({{"voxel_id", m.voxel_id},
                      {"subject", m.subject},
                      {"roi", to_string(m.roi)},
                      {"hemisphere", to_string(m.hemisphere)},
                      {"pc", real_or_null(r.pc[v])}});
  }
  json doc = {{"format", "icfenc-report"},
              {"version", 1},
              {"feature_source", r.feature_source.tag()},
              {"n_test", r.n_test},
              {"degenerate_count", r.degenerate_count},
              {"region_means", r.region_means},
              {"region_counts", r.region_counts},
              {"voxels", std::move(voxels)}};
  return doc.dump(2) + "\n";
}

EvaluationReport report_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::parse, "report is malformed at byte " + std::to_string(e.byte) + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "icfenc-report") throw Error(ErrorKind::parse, "not an evaluation report");
    if (doc.at("version").get<int>() != 1) throw Error(ErrorKind::unsupported_version, "unsupported report version");
    EvaluationReport r;
    r.feature_source = FeatureSource::parse(doc.at("feature_source").get<std::string>());
    r.n_test = doc.at("n_test").get<Index>();
    for (const auto& jv : doc.at("voxels")) {
      VoxelRecord m;
      m.voxel_id = jv.at("voxel_id").get<std::string>();
      m.subject = jv.at("subject").get<std::string>();
      m.roi = parse_roi(jv.at("roi").get<std::string>());
      m.hemisphere = parse_hemisphere(jv.at("hemisphere").get<std::string>());
      r.voxels.push_back(std::move(m));
      r.pc.push_back(jv.at("pc").is_null() ? kNaN : jv.at("pc").get<double>());
    }
    summarize(r);
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::parse, std::string("report has an invalid field: ") + e.what());
  }
}

std::string report_to_csv(const EvaluationReport& r) {
  std::string out = "voxel_id,subject,roi,hemisphere,feature_source,n_test,pc\n";
  for (std::size_t v = 0; v < r.voxels.size(); ++v) {
    const auto& m = r.voxels[v];
    out += m.voxel_id + "," + m.subject + "," + to_string(m.roi) + "," + to_string(m.hemisphere) + "," +
           r.feature_source.tag() + "," + std::to_string(r.n_test) + "," + format_real(r.pc[v]) + "\n";
  }
  return out;
}

EvaluationReport report_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "voxel_id,subject,roi,hemisphere,feature_source,n_test,pc")
    fail(ErrorKind::parse, "report CSV has an unexpected header");
  EvaluationReport r;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) fail(ErrorKind::parse, "report CSV line " + std::to_string(line_no) + ": expected 7 fields");
    r.voxels.push_back({f[0], f[1], parse_roi(f[2]), parse_hemisphere(f[3])});
    r.feature_source = FeatureSource::parse(f[4]);
    r.n_test = std::stoll(f[5]);
    r.pc.push_back(parse_real(f[6]));
  }
  summarize(r);
  return r;
}

std::string profile_to_csv(const LayerProfile& p) {
  std::string out = "layer";
  for (const auto& r : p.regions) out += "," + r;
  out += "\n";
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out += p.layers[l];
    for (std::size_t c = 0; c < p.regions.size(); ++c)
      out += "," + format_real(p.means(static_cast<Index>(l), static_cast<Index>(c)));
    out += "\n";
  }
  return out;
}

std::string comparison_to_json(const ComparisonReport& c) {
  json counts = json::object();
  for (const auto& [cls, n] : c.class_counts()) counts[to_string(cls)] = n;
  json doc = {{"format", "icfenc-comparison"},
              {"version", 1},
              {"source_a", c.source_a},
              {"source_b", c.source_b},
              {"threshold", c.threshold},
              {"voxel_count", c.voxels.size()},
              {"class_counts", counts},
              {"joint_significant", c.joint_significant},
              {"fraction_a_better", c.fraction_a_better},
              {"fraction_b_better", c.fraction_b_better},
              {"fraction_tie", c.fraction_tie},
              {"histogram", {{"bin_edges", c.bin_edges}, {"counts", c.bin_counts}}},
              {"mean_abs_distance", c.mean_abs_distance},
              {"distance_counts", c.distance_counts}};
  return doc.dump(2) + "\n";
}

std::string comparison_scatter_csv(const ComparisonReport& c) {
  std::string out = "voxel_id,subject,roi,hemisphere,pc_a,pc_b,class\n";
  for (std::size_t v = 0; v < c.voxels.size(); ++v) {
    const auto& m = c.voxels[v];
    out += m.voxel_id + "," + m.subject + "," + to_string(m.roi) + "," + to_string(m.hemisphere) + "," +
           format_real(c.pc_a[v]) + "," + format_real(c.pc_b[v]) + "," + to_string(c.classes[v]) + "\n";
  }
  return out;
}

std::string comparison_histogram_csv(const ComparisonReport& c) {
  std::string out = "bin_low,bin_high,count\n";
  for (std::size_t k = 0; k < c.bin_counts.size(); ++k)
    out += format_real(c.bin_edges[k]) + "," + format_real(c.bin_edges[k + 1]) + "," + std::to_string(c.bin_counts[k]) + "\n";
  return out;
}

std::string comparison_distance_csv(const ComparisonReport& c) {
  std::string out = "sub_region,voxels,mean_abs_distance\n";
  for (const auto& [sub, d] : c.mean_abs_distance)
    out += sub + "," + std::to_string(c.distance_counts.at(sub)) + "," + format_real(d) + "\n";
  return out;
}

void export_report(const EvaluationReport& r, ReportFormat format, const std::filesystem::path& path) {
  interchange::write_file(path, format == ReportFormat::csv ? report_to_csv(r) : report_to_json(r));
}

EvaluationReport load_report(const std::filesystem::path& path) {
  const std::string text = interchange::read_file(path);
  if (path.extension() == ".csv") return report_from_csv(text);
  return report_from_json(text);
}

}  // namespace icfenc
