#pragma once

// Slow, independent reimplementations used to check the library kernels.
// None of these call into icfenc beyond its plain data types.

#include "icfenc/encoding.hpp"
#include "icfenc/features.hpp"
#include "icfenc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <regex>
#include <string>
#include <vector>

namespace oracle {

using icfenc::Index;
using icfenc::Matrix;
using icfenc::Vector;

struct Selection {
  std::vector<Index> indices;
  bool degenerate = false;
};

// Every subset of the candidates is tried; comparable means no zero member and
// max <= ratio * min.
inline Selection regularize_select(const std::vector<icfenc::Candidate>& cand, double ratio) {
  const std::size_t m = cand.size();
  double top = 0.0;
  for (const auto& c : cand) top = std::max(top, c.magnitude);
  if (top == 0.0) {
    Index lowest = cand[0].index;
    for (const auto& c : cand) lowest = std::min(lowest, c.index);
    return {{lowest}, true};
  }

  bool have = false;
  double best_energy = 0.0;
  bool best_top = false;
  std::vector<Index> best;
  for (unsigned long mask = 1; mask < (1UL << m); ++mask) {
    double lo = INFINITY, hi = 0.0;
    std::vector<double> mags;
    std::vector<Index> idx;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(mask & (1UL << i))) continue;
      lo = std::min(lo, cand[i].magnitude);
      hi = std::max(hi, cand[i].magnitude);
      mags.push_back(cand[i].magnitude);
      idx.push_back(cand[i].index);
    }
    if (lo == 0.0 || hi > ratio * lo) continue;
    // Summation order: largest first, matching how any sorted scan would add them.
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double energy = 0.0;
    for (double v : mags) energy += v * v;
    std::sort(idx.begin(), idx.end());
    const bool has_top = hi == top;

    bool better;
    if (!have || energy != best_energy) better = !have || energy > best_energy;
    else if (has_top != best_top) better = has_top;
    else if (idx.size() != best.size()) better = idx.size() < best.size();
    else better = idx < best;
    if (better) {
      have = true;
      best_energy = energy;
      best_top = has_top;
      best = idx;
    }
  }
  return {best, false};
}

// Dense Gaussian elimination with partial pivoting on the normal equations of
// [1, X_S]. Returns intercept followed by the support coefficients.
inline std::vector<double> normal_equations(const Matrix& X, const Vector& y, const std::vector<Index>& support) {
  const std::size_t p = support.size() + 1;
  const Index n = X.rows();
  std::vector<std::vector<double>> A(p, std::vector<double>(p + 1, 0.0));
  auto col = [&](std::size_t a, Index i) { return a == 0 ? 1.0 : X(i, support[a - 1]); };
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = 0; b < p; ++b)
      for (Index i = 0; i < n; ++i) A[a][b] += col(a, i) * col(b, i);
    for (Index i = 0; i < n; ++i) A[a][p] += col(a, i) * y[i];
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(A[r][c]) > std::abs(A[piv][c])) piv = r;
    std::swap(A[c], A[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const double f = A[r][c] / A[c][c];
      for (std::size_t k = c; k <= p; ++k) A[r][k] -= f * A[c][k];
    }
  }
  std::vector<double> out(p);
  for (std::size_t a = 0; a < p; ++a) out[a] = A[a][p] / A[a][a];
  return out;
}

// Student t density integrated with composite Simpson, inverted by bisection.
inline double t_cdf(double t, double df) {
  const double logc = std::lgamma((df + 1) / 2) - std::lgamma(df / 2) - 0.5 * std::log(df * M_PI);
  auto pdf = [&](double x) { return std::exp(logc - (df + 1) / 2 * std::log1p(x * x / df)); };
  const int steps = 20000;
  const double h = t / steps;
  double s = pdf(0) + pdf(t);
  for (int i = 1; i < steps; ++i) s += (i % 2 ? 4.0 : 2.0) * pdf(i * h);
  return 0.5 + s * h / 3.0;
}

inline double critical_r(int n, double p, bool two_tailed) {
  const double df = n - 2;
  const double target = 1.0 - (two_tailed ? p / 2 : p);
  double lo = 0.0, hi = 100.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (t_cdf(mid, df) < target ? lo : hi) = mid;
  }
  const double t = 0.5 * (lo + hi);
  return t / std::sqrt(t * t + df);
}

inline std::vector<double> columnwise_max(const Matrix& states, Index first, Index last) {
  std::vector<double> out(static_cast<std::size_t>(states.cols()), -INFINITY);
  for (Index j = 0; j < states.cols(); ++j)
    for (Index i = first; i < last; ++i) out[static_cast<std::size_t>(j)] = std::max(out[static_cast<std::size_t>(j)], states(i, j));
  return out;
}

// Scores every word row directly from the model's coefficients and its stored
// standardization, then takes the k lowest errors (earlier row wins ties).
inline std::vector<std::string> rank_all_words(const icfenc::VoxelEncodingModel& model,
                                               const icfenc::WordStateSequence& seq, double observed, int k,
                                               Index first, Index last) {
  const auto& sol = model.solution;
  const auto& st = *model.standardization;
  std::vector<std::pair<double, Index>> scored;
  for (Index i = first; i < last; ++i) {
    double pred = sol.intercept;
    for (std::size_t q = 0; q < sol.support.size(); ++q) {
      const Index j = sol.support[q];
      pred += sol.coefficients[q] * ((seq.states(i, j) - st.means[j]) / st.stds[j]);
    }
    scored.emplace_back(std::abs(pred - observed), i);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<std::string> out;
  for (std::size_t q = 0; q < scored.size() && q < static_cast<std::size_t>(k); ++q)
    out.push_back(seq.tokens[static_cast<std::size_t>(scored[q].second)]);
  return out;
}

inline double cosine(const std::map<std::string, int>& a, const std::map<std::string, int>& b) {
  double dot = 0, na = 0, nb = 0;
  for (const auto& [w, c] : a) {
    na += double(c) * c;
    auto it = b.find(w);
    if (it != b.end()) dot += double(c) * it->second;
  }
  for (const auto& [w, c] : b) nb += double(c) * c;
  if (na == 0 || nb == 0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

struct Box {
  std::string text;
  double x0, y0, x1, y1;
};

// Glyph boxes recovered from emitted <text> elements: advance 0.6 em per
// character, 0.8 em above the baseline and 0.2 em below.
inline std::vector<Box> svg_text_boxes(const std::string& svg) {
  static const std::regex text_re(R"re(<text x="([-0-9.]+)" y="([-0-9.]+)"[^>]*font-size="([0-9.]+)"[^>]*>([^<]*)</text>)re");
  std::vector<Box> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), text_re); it != std::sregex_iterator(); ++it) {
    const double x = std::stod((*it)[1]), y = std::stod((*it)[2]), fs = std::stod((*it)[3]);
    std::string t = (*it)[4];
    for (const auto& [ent, ch] : std::vector<std::pair<std::string, std::string>>{
             {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&apos;", "'"}, {"&amp;", "&"}}) {
      for (std::size_t p = t.find(ent); p != std::string::npos; p = t.find(ent, p + 1)) t.replace(p, ent.size(), ch);
    }
    std::size_t chars = 0;
    for (unsigned char c : t) chars += (c & 0xC0) != 0x80;
    out.push_back({t, x, y - 0.8 * fs, x + 0.6 * fs * static_cast<double>(chars), y + 0.2 * fs});
  }
  return out;
}

// Number of box pairs whose interiors intersect.
inline int overlapping_pairs(const std::vector<Box>& boxes) {
  int n = 0;
  for (std::size_t i = 0; i < boxes.size(); ++i)
    for (std::size_t j = i + 1; j < boxes.size(); ++j) {
      const auto& a = boxes[i];
      const auto& b = boxes[j];
      const double eps = 1e-9;
      n += a.x0 < b.x1 - eps && b.x0 < a.x1 - eps && a.y0 < b.y1 - eps && b.y0 < a.y1 - eps;
    }
  return n;
}

inline Matrix gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = g(rng);
  return m;
}

}  // namespace oracle
