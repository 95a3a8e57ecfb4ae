#pragma once

// Ground-truth frame bounds at desk scale: finite discretizations with
// extremal eigenvalues, dual Gramian fibers, and the snug-chain verdict.

#include "framebound/estimators.hpp"

#include <Eigen/Sparse>

#include <string>
#include <vector>

namespace framebound {

/// Finite surrogate of a system. On Z: delta elements restricted to the window
/// [-n/2, n/2) (no periodization). On R^d: periodization on [0, L)^d with L = n / rate,
/// compressed to the frequencies (1/L)Z^d inside [-rate/2, rate/2)^d.
struct FiniteModel {
  Domain domain = Domain::real;
  int n = 0;
  double rate = 1.0;
  int dim = 1;
  std::size_t elements = 0;

  /// Z: rows are system elements (0/1 entries).
  Eigen::SparseMatrix<double, Eigen::RowMajor> synthesis;
  /// Frame operator; sparse on Z, dense on R^d.
  Eigen::SparseMatrix<double> frame_sparse;
  Eigen::MatrixXcd frame;
  /// Frequencies indexing the rows of `frame` (R^d).
  std::vector<Point> frequencies;
  /// Offsets recomputed inside the window (N-adic systems).
  std::vector<std::int64_t> window_tau;

  std::string provenance;
  std::vector<std::string> notes;

  Eigen::Index size() const;
  bool sparse() const { return domain == Domain::integer; }
  /// max |S - S^*|.
  double symmetry_residue() const;
};

struct DiscretizeOptions {
  /// Use the dense V V^* assembly while rows * cosets * rows stays below this budget.
  double brute_force_budget = 2e8;
  bool force_closed_form = false;
};

FiniteModel discretize(const SystemSpec& sys, int n, double rate = 1.0, const DiscretizeOptions& opt = {});

/// Gram matrix of the synthesis rows (Z models).
Eigen::SparseMatrix<double> gram(const FiniteModel& model);

struct OptimalBounds {
  double A = 0.0;
  double B = 0.0;
  double residual = 0.0;
  std::string method;
};

/// Extremal eigenvalues of the frame operator: dense solver for small models,
/// Lanczos with full reorthogonalization otherwise. Throws std::runtime_error
/// when the residual stays above 1e-8 relative.
OptimalBounds optimal_bounds(const FiniteModel& model);

/// Extremal eigenvalues of a Hermitian operator given by its action.
OptimalBounds lanczos_extremes(Eigen::Index n, const std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>& op,
                               int max_steps = 400, double tol = 1e-10);

struct FiberMatrix {
  Point omega;
  std::vector<Point> index;  // alpha in Gamma^perp, alpha = 0 first
  Eigen::MatrixXcd G;
};

/// Dual Gramian G(w)[a, b] = sum_layers prefix sum_p w_p conj(g^(w + a)) g^(w + b) over |alpha| <= radius.
FiberMatrix fiber_matrix(const SystemSpec& sys, const Point& omega, double radius);

struct FiberBounds {
  double A = 0.0;
  double B = 0.0;
  /// Same extremes with the index window halved.
  double A_half = 0.0;
  double B_half = 0.0;
  std::size_t window = 0;
};

/// radius <= 0 picks half the largest generator reach, keeping the window inside the
/// region the finitely many components cover.
FiberBounds fiber_bounds(const SystemSpec& sys, const Grid& grid, double radius = -1.0, unsigned threads = 0);

struct ChainVerdict {
  bool ok = false;
  bool hypotheses_violated = false;
  std::vector<std::string> violations;
  std::string summary;
};

/// A1 <= A_opt <= Ainf <= B2 <= B_opt <= B1 with relative tolerance; the Ainf <= B2 link
/// only when A_opt > 0. Infinite sentinels report the hypotheses as violated.
ChainVerdict verify_chain(const BoundsReport& report, const OptimalBounds& oracle, double tol = 0.02);

}  // namespace framebound
