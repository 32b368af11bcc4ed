#pragma once

// Greedy sparse recovery: matching pursuit (MP), orthogonal matching pursuit
// (OMP) and regularized OMP (ROMP), plus the least-squares and column
// standardization primitives they share.
//
// All solvers fit y ~ intercept + X_S * beta. The intercept is handled by
// centering y and the selected columns, so supports only ever name feature
// columns.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace icfenc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = std::ptrdiff_t;

struct DesignMatrix {
  Matrix values;                        // n_samples x d
  std::vector<std::string> column_ids;  // empty or size d

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
};

// Throws a validation error naming the first non-finite cell, or an empty shape.
void validate_design(const Matrix& X);

struct StandardizationParams {
  Vector means;
  Vector stds;  // population convention, zero variance replaced by 1

  Matrix apply(const Matrix& X) const;
  Vector apply_row(std::span<const double> row) const;
  Matrix invert(const Matrix& Z) const;
  Index dim() const { return means.size(); }
};

struct StandardizedDesign {
  DesignMatrix design;
  StandardizationParams params;
};

StandardizedDesign standardize_columns(const DesignMatrix& X);
StandardizationParams fit_standardization(const Matrix& X);

enum class Algorithm { romp, omp, mp };

const char* to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct SolverConfig {
  int sparsity = 16;
  double comparability_ratio = 2.0;
  double residual_tol = 0.0;
  int max_support = 32;  // 2 * sparsity unless set otherwise
  int max_iterations = 1000;
  bool standardize_internally = false;
  Algorithm algorithm = Algorithm::romp;

  static SolverConfig with_sparsity(int s) {
    SolverConfig c;
    c.sparsity = s;
    c.max_support = 2 * s;
    return c;
  }
  void validate() const;
};

enum class StopReason {
  max_support,
  residual_tol,
  zero_correlation,
  no_progress,
  max_iterations,
};

const char* to_string(StopReason r);

struct SparseSolution {
  std::vector<Index> support;  // sorted, unique
  std::vector<double> coefficients;
  double intercept = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  StopReason stop = StopReason::zero_correlation;
  bool rank_deficient = false;

  bool operator==(const SparseSolution&) const = default;
};

struct LeastSquaresResult {
  std::vector<double> coefficients;  // aligned with the support as given
  double intercept = 0.0;
  Vector residual;
  bool rank_deficient = false;
};

// Minimum-norm least squares of y on the centered columns X[:, support] plus
// an intercept. The residual is orthogonal to every selected column and to the
// all-ones vector.
LeastSquaresResult least_squares_on_support(const Matrix& X, const Vector& y,
                                            std::span<const Index> support);

struct Candidate {
  Index index;
  double magnitude;
};

struct RegularizedSelection {
  std::vector<Index> indices;  // sorted ascending
  double energy = 0.0;
  bool degenerate = false;
};

// Maximal-energy subset in which every pair satisfies |u_i| <= ratio * |u_j|.
// Ties prefer the subset holding the largest magnitude, then the smaller
// subset, then the lexicographically lowest index list.
RegularizedSelection regularize_select(std::span<const Candidate> candidates, double ratio);

// Snapshot after each support update, for tracing and property checks.
struct IterationState {
  int iteration;
  std::span<const Index> support;
  const Vector& residual;
};
using IterationObserver = std::function<void(const IterationState&)>;

SparseSolution romp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                          const IterationObserver& observer = {});
SparseSolution omp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                         const IterationObserver& observer = {});
SparseSolution mp_solve(const Matrix& X, const Vector& y, const SolverConfig& cfg,
                        const IterationObserver& observer = {});

// Dispatches on cfg.algorithm.
SparseSolution solve(const Matrix& X, const Vector& y, const SolverConfig& cfg);

// intercept + X[:, support] * coefficients
Vector predict_solution(const SparseSolution& sol, const Matrix& X);

}  // namespace icfenc
