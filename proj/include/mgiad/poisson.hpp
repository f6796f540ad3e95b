#pragma once

// Classical geometric multigrid on 1-D/2-D Poisson model problems, in plain
// double-precision dense algebra. Serves as the independent reference the
// network's linear-mode execution is checked against.

#include <cstdint>
#include <string>
#include <vector>

#include "mgiad/dense.hpp"

namespace mgiad::mg {

using Vec = std::vector<double>;

struct PoissonProblem {
  int dimension = 1;
  int n = 0;  // interior points per dimension
  dense::Matrix A;
  Vec rhs;
  Vec exact;  // dense direct solve of A x = rhs
};

// Unit-stencil discretizations: [-1, 2, -1] in 1-D, the five-point stencil
// in 2-D, homogeneous Dirichlet boundaries.
PoissonProblem make_poisson(int dimension, int n, std::uint64_t rhs_seed = 1);

dense::Matrix poisson_matrix(int dimension, int n);
dense::Matrix full_weighting(int dimension, int n_fine);       // n -> (n-1)/2
dense::Matrix linear_interpolation(int dimension, int n_fine); // (n-1)/2 -> n

struct GridHierarchy {
  int dimension = 1;
  std::vector<int> sizes;          // per level, fine to coarse
  std::vector<dense::Matrix> A;    // Galerkin coarse operators R A P
  std::vector<dense::Matrix> R;    // A.size()-1 transfers
  std::vector<dense::Matrix> P;
};

// levels == 1 means pure smoothing (no coarse grids). With levels >= 2 the
// coarsest grid must not exceed 3 points per dimension so the direct solve
// eliminates coarse-level error entirely.
GridHierarchy build_hierarchy(int dimension, int n_fine, int levels);

// u <- u + omega D^{-1} (f - A u), `steps` times.
Vec jacobi(const dense::Matrix& A, Vec u, const Vec& f, double omega, int steps);

Vec vcycle(const GridHierarchy& h, std::size_t level, Vec u, const Vec& f, double omega,
           int eta_pre, int eta_post);

struct CycleReport {
  std::vector<double> residual_norms;  // [0] is the initial residual
  double contraction = 0.0;            // geometric mean over cycles 3..10
  std::string to_csv() const;
};

CycleReport run_vcycles(const GridHierarchy& h, const Vec& f, int cycles, double omega,
                        int eta_pre, int eta_post);

// Asymptotic contraction of the damped Jacobi smoother on one Fourier mode,
// measured by iterating the error-propagation operator on that mode.
double mode_contraction(const dense::Matrix& A, int n, int mode, double omega, int steps = 20);

// Two-grid error propagation S^post (I - P Ac^{-1} R A) S^pre with
// S = I - omega D^{-1} A, assembled explicitly.
dense::Matrix two_grid_error_matrix(const GridHierarchy& h, double omega, int eta_pre,
                                    int eta_post);

// One linear FAS two-grid cycle on explicit operators: pre-smoothing with
// (A1,B1), coarse state Pi u, coarse data R(f - A1 u) + A2 (Pi u), coarse
// smoothing with (A2,B2), correction through P, post-smoothing. This is the
// dense mirror of the network's two-stage in-channel cycle.
Vec fas_two_grid(const dense::Matrix& A1, const dense::Matrix& B1, const dense::Matrix& A2,
                 const dense::Matrix& B2, const dense::Matrix& R, const dense::Matrix& Pi,
                 const dense::Matrix& P, Vec u, const Vec& f, int eta_pre, int eta_post);

}  // namespace mgiad::mg
