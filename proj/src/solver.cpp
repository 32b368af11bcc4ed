#include "icfenc/solver.hpp"

#include "icfenc/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace icfenc {

namespace {

// Correlations at or below this fraction of ||c_j|| * ||y - mean(y)|| count as zero.
constexpr double kZeroCorrelation = 1e-12;

void validate_response(const Matrix& X, const Vector& y) {
  if (y.size() != X.rows()) {
    fail(ErrorKind::validation, "response length " + std::to_string(y.size()) +
                                    " does not match design rows " + std::to_string(X.rows()));
  }
  for (Index i = 0; i < y.size(); ++i) {
    if (!std::isfinite(y[i])) {
      fail(ErrorKind::validation, "non-finite response at row " + std::to_string(i));
    }
  }
}

Vector centered_column_norms(const Matrix& X) {
  Vector norms(X.cols());
  for (Index j = 0; j < X.cols(); ++j) {
    const double m = X.col(j).mean();
    norms[j] = (X.col(j).array() - m).matrix().norm();
  }
  return norms;
}

// Orders candidates by magnitude descending, then index ascending.
bool stronger(const Candidate& a, const Candidate& b) {
  if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
  return a.index < b.index;
}

// Shared state for the re-projecting pursuits (ROMP, OMP).
struct PursuitState {
  const Matrix& X;
  const Vector& y;
  const SolverConfig& cfg;
  Vector col_norms;
  double zero_scale;
  std::vector<char> in_support;
  std::vector<Index> support;
  Vector residual;
  LeastSquaresResult fit;

  PursuitState(const Matrix& X_, const Vector& y_, const SolverConfig& cfg_)
      : X(X_), y(y_), cfg(cfg_), col_norms(centered_column_norms(X_)),
        in_support(static_cast<std::size_t>(X_.cols()), 0) {
    const double mean = y.mean();
    residual = (y.array() - mean).matrix();
    zero_scale = kZeroCorrelation * residual.norm();
    fit.intercept = mean;
    fit.residual = residual;
  }

  // Columns outside the support with a nonzero correlation to the residual.
  std::vector<Candidate> candidates() const {
    const Vector u = X.transpose() * residual;
    std::vector<Candidate> out;
    for (Index j = 0; j < X.cols(); ++j) {
      if (in_support[static_cast<std::size_t>(j)]) continue;
      const double mag = std::abs(u[j]);
      if (col_norms[j] > 0.0 && mag > zero_scale * col_norms[j]) out.push_back({j, mag});
    }
    return out;
  }

  bool merge(const std::vector<Index>& picked) {
    bool grew = false;
    for (Index j : picked) {
      auto& flag = in_support[static_cast<std::size_t>(j)];
      if (!flag) {
        flag = 1;
        support.push_back(j);
        grew = true;
      }
    }
    std::sort(support.begin(), support.end());
    return grew;
  }

  void reproject() {
    fit = least_squares_on_support(X, y, support);
    residual = fit.residual;
  }

  SparseSolution finish(StopReason stop, int iterations) const {
    SparseSolution sol;
    sol.support = support;
    sol.coefficients = fit.coefficients;
    sol.intercept = fit.intercept;
    sol.residual_norm = residual.norm();
    sol.iterations = iterations;
    sol.stop = stop;
    sol.rank_deficient = fit.rank_deficient;
    return sol;
  }
};

template <typename Pick>
SparseSolution run_pursuit(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                           const IterationObserver& observer, Pick pick) {
  PursuitState st(X, y, cfg);
  int iterations = 0;
  for (;;) {
    if (std::ssize(st.support) >= cfg.max_support) return st.finish(StopReason::max_support, iterations);
    if (st.residual.norm() <= cfg.residual_tol) return st.finish(StopReason::residual_tol, iterations);
    if (iterations >= cfg.max_iterations) return st.finish(StopReason::max_iterations, iterations);

    std::vector<Candidate> cand = st.candidates();
    if (cand.empty()) return st.finish(StopReason::zero_correlation, iterations);

    std::vector<Index> picked = pick(cand);
    const auto capacity = static_cast<std::size_t>(cfg.max_support) - st.support.size();
    if (picked.size() > capacity) {
      // Keep the strongest members; any subset of a comparable set stays comparable.
      std::vector<Candidate> ranked;
      for (Index j : picked) {
        auto it = std::find_if(cand.begin(), cand.end(), [j](const Candidate& c) { return c.index == j; });
        ranked.push_back(*it);
      }
      std::sort(ranked.begin(), ranked.end(), stronger);
      ranked.resize(capacity);
      picked.clear();
      for (const auto& c : ranked) picked.push_back(c.index);
    }

    if (!st.merge(picked)) return st.finish(StopReason::no_progress, iterations);
    st.reproject();
    ++iterations;
    if (observer) observer(IterationState{iterations, st.support, st.residual});
  }
}

void check_solver_inputs(const Matrix& X, const Vector& y, const SolverConfig& cfg) {
  validate_design(X);
  validate_response(X, y);
  cfg.validate();
  if (X.rows() <= cfg.sparsity) {
    fail(ErrorKind::validation, "need more samples (" + std::to_string(X.rows()) +
                                    ") than sparsity (" + std::to_string(cfg.sparsity) + ")");
  }
}

// Runs `inner` on a standardized copy when requested and maps the solution
// back to the original column scale.
template <typename Inner>
SparseSolution with_standardization(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                                    Inner inner) {
  if (!cfg.standardize_internally) return inner(X);
  const StandardizationParams params = fit_standardization(X);
  SparseSolution sol = inner(params.apply(X));
  for (std::size_t k = 0; k < sol.support.size(); ++k) {
    const Index j = sol.support[k];
    sol.coefficients[k] /= params.stds[j];
    sol.intercept -= sol.coefficients[k] * params.means[j];
  }
  sol.residual_norm = (y - predict_solution(sol, X)).norm();
  return sol;
}

}  // namespace

void validate_design(const Matrix& X) {
  if (X.rows() < 1 || X.cols() < 1) {
    fail(ErrorKind::validation, "design matrix must have at least one row and one column");
  }
  for (Index j = 0; j < X.cols(); ++j) {
    for (Index i = 0; i < X.rows(); ++i) {
      if (!std::isfinite(X(i, j))) {
        fail(ErrorKind::validation,
             "non-finite value at row " + std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
}

Matrix StandardizationParams::apply(const Matrix& X) const {
  if (X.cols() != means.size()) {
    fail(ErrorKind::validation, "standardization expects " + std::to_string(means.size()) +
                                    " columns, got " + std::to_string(X.cols()));
  }
  Matrix Z(X.rows(), X.cols());
  for (Index j = 0; j < X.cols(); ++j) Z.col(j) = (X.col(j).array() - means[j]) / stds[j];
  return Z;
}

Vector StandardizationParams::apply_row(std::span<const double> row) const {
  if (std::ssize(row) != means.size()) {
    fail(ErrorKind::validation, "standardization expects " + std::to_string(means.size()) +
                                    " values, got " + std::to_string(row.size()));
  }
  Vector z(means.size());
  for (Index j = 0; j < z.size(); ++j) z[j] = (row[static_cast<std::size_t>(j)] - means[j]) / stds[j];
  return z;
}

Matrix StandardizationParams::invert(const Matrix& Z) const {
  Matrix X(Z.rows(), Z.cols());
  for (Index j = 0; j < Z.cols(); ++j) X.col(j) = Z.col(j).array() * stds[j] + means[j];
  return X;
}

StandardizationParams fit_standardization(const Matrix& X) {
  validate_design(X);
  StandardizationParams p;
  p.means.resize(X.cols());
  p.stds.resize(X.cols());
  const double n = static_cast<double>(X.rows());
  for (Index j = 0; j < X.cols(); ++j) {
    const auto col = X.col(j);
    if (col.minCoeff() == col.maxCoeff()) {
      p.means[j] = col[0];
      p.stds[j] = 1.0;
      continue;
    }
    const double m = col.mean();
    const double var = (col.array() - m).square().sum() / n;
    p.means[j] = m;
    p.stds[j] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return p;
}

StandardizedDesign standardize_columns(const DesignMatrix& X) {
  StandardizedDesign out;
  out.params = fit_standardization(X.values);
  out.design.values = out.params.apply(X.values);
  out.design.column_ids = X.column_ids;
  return out;
}

const char* to_string(Algorithm a) {
  switch (a) {
    case Algorithm::romp: return "romp";
    case Algorithm::omp: return "omp";
    case Algorithm::mp: return "mp";
  }
  return "romp";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "romp") return Algorithm::romp;
  if (name == "omp") return Algorithm::omp;
  if (name == "mp") return Algorithm::mp;
  fail(ErrorKind::validation, "unknown solver algorithm '" + name + "' (expected romp, omp or mp)");
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::max_support: return "max_support";
    case StopReason::residual_tol: return "residual_tol";
    case StopReason::zero_correlation: return "zero_correlation";
    case StopReason::no_progress: return "no_progress";
    case StopReason::max_iterations: return "max_iterations";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (sparsity < 1) fail(ErrorKind::validation, "sparsity must be positive");
  if (!(comparability_ratio >= 1.0)) fail(ErrorKind::validation, "comparability ratio must be >= 1");
  if (!(residual_tol >= 0.0)) fail(ErrorKind::validation, "residual tolerance must be nonnegative");
  if (max_support < sparsity) fail(ErrorKind::validation, "max_support must be >= sparsity");
  if (max_iterations < 1) fail(ErrorKind::validation, "max_iterations must be positive");
}

LeastSquaresResult least_squares_on_support(const Matrix& X, const Vector& y,
                                            std::span<const Index> support) {
  validate_response(X, y);
  const Index n = X.rows();
  const auto k = static_cast<Index>(support.size());
  if (k > n) fail(ErrorKind::validation, "support larger than sample count");
  std::vector<char> seen(static_cast<std::size_t>(X.cols()), 0);
  for (Index j : support) {
    if (j < 0 || j >= X.cols()) fail(ErrorKind::validation, "support index " + std::to_string(j) + " out of range");
    if (seen[static_cast<std::size_t>(j)]++) fail(ErrorKind::validation, "duplicate support index " + std::to_string(j));
  }

  LeastSquaresResult out;
  const double ymean = y.mean();
  const Vector yc = (y.array() - ymean).matrix();
  if (k == 0) {
    out.intercept = ymean;
    out.residual = yc;
    return out;
  }

  Matrix Xs(n, k);
  Vector col_means(k);
  for (Index c = 0; c < k; ++c) {
    const auto j = support[static_cast<std::size_t>(c)];
    col_means[c] = X.col(j).mean();
    Xs.col(c) = (X.col(j).array() - col_means[c]).matrix();
  }

  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(Xs);
  const Vector beta = cod.solve(yc);
  out.rank_deficient = cod.rank() < k;
  out.coefficients.assign(beta.data(), beta.data() + k);
  out.intercept = ymean - col_means.dot(beta);
  out.residual = yc - Xs * beta;
  return out;
}

RegularizedSelection regularize_select(std::span<const Candidate> candidates, double ratio) {
  if (candidates.empty()) fail(ErrorKind::validation, "regularize_select needs at least one candidate");
  if (!(ratio >= 1.0)) fail(ErrorKind::validation, "comparability ratio must be >= 1");
  for (const auto& c : candidates) {
    if (!std::isfinite(c.magnitude) || c.magnitude < 0.0) {
      fail(ErrorKind::validation, "candidate magnitudes must be finite and nonnegative");
    }
  }

  std::vector<Candidate> sorted(candidates.begin(), candidates.end());
  std::sort(sorted.begin(), sorted.end(), stronger);
  const double top = sorted.front().magnitude;

  RegularizedSelection best;
  if (top == 0.0) {
    Index lowest = sorted.front().index;
    for (const auto& c : sorted) lowest = std::min(lowest, c.index);
    best.indices = {lowest};
    best.degenerate = true;
    return best;
  }

  bool have = false;
  bool best_has_top = false;
  const std::size_t m = sorted.size();
  for (std::size_t a = 0; a < m; ++a) {
    double energy = 0.0;
    for (std::size_t b = a; b < m; ++b) {
      if (sorted[b].magnitude == 0.0 || sorted[a].magnitude > ratio * sorted[b].magnitude) break;
      energy += sorted[b].magnitude * sorted[b].magnitude;

      const bool has_top = sorted[a].magnitude == top;
      const std::size_t size = b - a + 1;
      std::vector<Index> idx;
      bool better = !have || energy > best.energy;
      if (have && energy == best.energy) {
        if (has_top != best_has_top) {
          better = has_top;
        } else if (size != best.indices.size()) {
          better = size < best.indices.size();
        } else {
          for (std::size_t t = a; t <= b; ++t) idx.push_back(sorted[t].index);
          std::sort(idx.begin(), idx.end());
          better = idx < best.indices;
        }
      }
      if (better) {
        if (idx.empty()) {
          for (std::size_t t = a; t <= b; ++t) idx.push_back(sorted[t].index);
          std::sort(idx.begin(), idx.end());
        }
        best.indices = std::move(idx);
        best.energy = energy;
        best_has_top = has_top;
        have = true;
      }
    }
  }
  return best;
}

SparseSolution romp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                          const IterationObserver& observer) {
  check_solver_inputs(X, y, cfg);
  return with_standardization(X, y, cfg, [&](const Matrix& Xw) {
    return run_pursuit(Xw, y, cfg, observer, [&](std::vector<Candidate>& cand) {
      const auto keep = std::min<std::size_t>(cand.size(), static_cast<std::size_t>(cfg.sparsity));
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), stronger);
      cand.resize(keep);
      return regularize_select(cand, cfg.comparability_ratio).indices;
    });
  });
}

SparseSolution omp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                         const IterationObserver& observer) {
  check_solver_inputs(X, y, cfg);
  return with_standardization(X, y, cfg, [&](const Matrix& Xw) {
    return run_pursuit(Xw, y, cfg, observer, [](const std::vector<Candidate>& cand) {
      return std::vector<Index>{std::min_element(cand.begin(), cand.end(), stronger)->index};
    });
  });
}

SparseSolution mp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                        const IterationObserver& observer) {
  check_solver_inputs(X, y, cfg);
  return with_standardization(X, y, cfg, [&](const Matrix& Xw) {
    const Index d = Xw.cols();
    Vector col_means(d);
    for (Index j = 0; j < d; ++j) col_means[j] = Xw.col(j).mean();
    const Vector norms = centered_column_norms(Xw);

    const double ymean = y.mean();
    Vector r = (y.array() - ymean).matrix();
    const double zero_scale = kZeroCorrelation * r.norm();
    Vector coef = Vector::Zero(d);
    std::vector<char> used(static_cast<std::size_t>(d), 0);
    std::vector<Index> support;

    StopReason stop = StopReason::max_iterations;
    int iterations = 0;
    while (iterations < cfg.max_iterations) {
      if (r.norm() <= cfg.residual_tol) {
        stop = StopReason::residual_tol;
        break;
      }
      const Vector u = Xw.transpose() * r;
      Index best = -1;
      double best_score = 0.0;
      for (Index j = 0; j < d; ++j) {
        if (norms[j] == 0.0 || std::abs(u[j]) <= zero_scale * norms[j]) continue;
        const double score = std::abs(u[j]) / norms[j];
        if (score > best_score) {
          best_score = score;
          best = j;
        }
      }
      if (best < 0) {
        stop = StopReason::zero_correlation;
        break;
      }
      if (!used[static_cast<std::size_t>(best)]) {
        if (std::ssize(support) >= cfg.max_support) {
          stop = StopReason::max_support;
          break;
        }
        used[static_cast<std::size_t>(best)] = 1;
        support.insert(std::upper_bound(support.begin(), support.end(), best), best);
      }
      const double step = u[best] / (norms[best] * norms[best]);
      coef[best] += step;
      r -= step * (Xw.col(best).array() - col_means[best]).matrix();
      ++iterations;
      if (observer) observer(IterationState{iterations, support, r});
    }

    SparseSolution sol;
    sol.support = support;
    sol.intercept = ymean;
    for (Index j : support) {
      sol.coefficients.push_back(coef[j]);
      sol.intercept -= coef[j] * col_means[j];
    }
    sol.iterations = iterations;
    sol.stop = stop;
    sol.residual_norm = (y - predict_solution(sol, Xw)).norm();
    return sol;
  });
}

SparseSolution solve(const Matrix& X, const Vector& y, const SolverConfig& cfg) {
  switch (cfg.algorithm) {
    case Algorithm::romp: return romp_solve(X, y, cfg);
    case Algorithm::omp: return omp_solve(X, y, cfg);
    case Algorithm::mp: return mp_solve(X, y, cfg);
  }
  fail(ErrorKind::internal, "unhandled solver algorithm");
}

Vector predict_solution(const SparseSolution& sol, const Matrix& X) {
  Vector out = Vector::Constant(X.rows(), sol.intercept);
  for (std::size_t k = 0; k < sol.support.size(); ++k) out += sol.coefficients[k] * X.col(sol.support[k]);
  return out;
}

}  // namespace icfenc
