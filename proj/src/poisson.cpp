#include "mgiad/poisson.hpp"

#include <cmath>

#include "mgiad/errors.hpp"
#include "mgiad/rng.hpp"

namespace mgiad::mg {

namespace {

dense::Matrix kron(const dense::Matrix& a, const dense::Matrix& b) {
  dense::Matrix k(a.rows() * b.rows(), a.cols() * b.cols());
  for (std::int64_t i = 0; i < a.rows(); ++i)
    for (std::int64_t j = 0; j < a.cols(); ++j) {
      const double v = a(i, j);
      if (v == 0.0) continue;
      for (std::int64_t p = 0; p < b.rows(); ++p)
        for (std::int64_t q = 0; q < b.cols(); ++q)
          k(i * b.rows() + p, j * b.cols() + q) = v * b(p, q);
    }
  return k;
}

dense::Matrix poisson_1d(int n) {
  dense::Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i > 0) a(i, i - 1) = -1.0;
    if (i + 1 < n) a(i, i + 1) = -1.0;
  }
  return a;
}

dense::Matrix fw_1d(int n_fine) {
  const int nc = (n_fine - 1) / 2;
  dense::Matrix r(nc, n_fine);
  for (int i = 0; i < nc; ++i) {
    r(i, 2 * i) = 0.25;
    r(i, 2 * i + 1) = 0.5;
    r(i, 2 * i + 2) = 0.25;
  }
  return r;
}

Vec residual(const dense::Matrix& a, const Vec& u, const Vec& f) {
  Vec r = dense::matvec(a, u);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = f[i] - r[i];
  return r;
}

}  // namespace

dense::Matrix poisson_matrix(int dimension, int n) {
  if (n < 1) throw ConfigError("poisson: n must be positive");
  if (dimension == 1) return poisson_1d(n);
  if (dimension == 2) {
    auto a1 = poisson_1d(n);
    auto id = dense::Matrix::identity(n);
    return dense::add(kron(a1, id), kron(id, a1));
  }
  throw ConfigError("poisson: dimension must be 1 or 2");
}

dense::Matrix full_weighting(int dimension, int n_fine) {
  if (n_fine < 3 || n_fine % 2 == 0)
    throw ConfigError("full weighting needs an odd fine grid >= 3, got " + std::to_string(n_fine));
  auto r = fw_1d(n_fine);
  return dimension == 1 ? r : kron(r, r);
}

dense::Matrix linear_interpolation(int dimension, int n_fine) {
  // P = 2 R^T in 1-D (and 4 R^T in 2-D)
  auto p1 = dense::scale(dense::transpose(fw_1d(n_fine)), 2.0);
  return dimension == 1 ? p1 : kron(p1, p1);
}

PoissonProblem make_poisson(int dimension, int n, std::uint64_t rhs_seed) {
  PoissonProblem p;
  p.dimension = dimension;
  p.n = n;
  p.A = poisson_matrix(dimension, n);
  Rng rng = Rng::stream(rhs_seed, "poisson-rhs");
  p.rhs.resize(static_cast<std::size_t>(p.A.rows()));
  for (auto& v : p.rhs) v = rng.normal();
  p.exact = dense::solve(p.A, p.rhs);
  const Vec r = residual(p.A, p.exact, p.rhs);
  if (dense::norm2(r) > 1e-10 * std::max(1.0, dense::norm2(p.rhs)))
    throw UsageError("poisson: dense solve failed to reach 1e-10 residual");
  return p;
}

GridHierarchy build_hierarchy(int dimension, int n_fine, int levels) {
  if (levels < 1) throw ConfigError("hierarchy needs at least one level");
  GridHierarchy h;
  h.dimension = dimension;
  h.sizes.push_back(n_fine);
  h.A.push_back(poisson_matrix(dimension, n_fine));
  for (int l = 1; l < levels; ++l) {
    const int nf = h.sizes.back();
    if (nf < 3 || nf % 2 == 0)
      throw ConfigError("cannot coarsen grid of size " + std::to_string(nf) +
                        "; use n = 2^k - 1 and a compatible level count");
    h.R.push_back(full_weighting(dimension, nf));
    h.P.push_back(linear_interpolation(dimension, nf));
    h.sizes.push_back((nf - 1) / 2);
    h.A.push_back(dense::matmul(h.R.back(), dense::matmul(h.A[h.A.size() - 1], h.P.back())));
  }
  if (levels >= 2 && h.sizes.back() > 3)
    throw ConfigError("coarsest grid has " + std::to_string(h.sizes.back()) +
                      " points per dimension; must recurse to <= 3 for the direct solve");
  return h;
}

Vec jacobi(const dense::Matrix& a, Vec u, const Vec& f, double omega, int steps) {
  for (int s = 0; s < steps; ++s) {
    Vec r = residual(a, u, f);
    for (std::size_t i = 0; i < u.size(); ++i)
      u[i] += omega * r[i] / a(static_cast<std::int64_t>(i), static_cast<std::int64_t>(i));
  }
  return u;
}

Vec vcycle(const GridHierarchy& h, std::size_t level, Vec u, const Vec& f, double omega,
           int eta_pre, int eta_post) {
  if (level + 1 == h.A.size()) return dense::solve(h.A[level], f);
  u = jacobi(h.A[level], std::move(u), f, omega, eta_pre);
  const Vec r = residual(h.A[level], u, f);
  const Vec rc = dense::matvec(h.R[level], r);
  const Vec ec = vcycle(h, level + 1, Vec(rc.size(), 0.0), rc, omega, eta_pre, eta_post);
  const Vec corr = dense::matvec(h.P[level], ec);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += corr[i];
  return jacobi(h.A[level], std::move(u), f, omega, eta_post);
}

CycleReport run_vcycles(const GridHierarchy& h, const Vec& f, int cycles, double omega,
                        int eta_pre, int eta_post) {
  CycleReport rep;
  Vec u(f.size(), 0.0);
  rep.residual_norms.push_back(dense::norm2(residual(h.A[0], u, f)));
  for (int c = 0; c < cycles; ++c) {
    u = vcycle(h, 0, std::move(u), f, omega, eta_pre, eta_post);
    rep.residual_norms.push_back(dense::norm2(residual(h.A[0], u, f)));
  }
  // asymptotic regime: geometric mean over cycles 3..10 (or what exists)
  double logsum = 0.0;
  int count = 0;
  for (std::size_t c = 3; c < rep.residual_norms.size() && c <= 10; ++c) {
    if (rep.residual_norms[c - 1] <= 1e-300) break;
    logsum += std::log(rep.residual_norms[c] / rep.residual_norms[c - 1]);
    ++count;
  }
  rep.contraction = count ? std::exp(logsum / count) : 0.0;
  return rep;
}

std::string CycleReport::to_csv() const {
  std::string out = "cycle,residual\n";
  for (std::size_t i = 0; i < residual_norms.size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%zu,%.12e\n", i, residual_norms[i]);
    out += buf;
  }
  return out;
}

double mode_contraction(const dense::Matrix& a, int n, int mode, double omega, int steps) {
  Vec u(static_cast<std::size_t>(n));
  const double pi = std::acos(-1.0);
  for (int j = 0; j < n; ++j)
    u[static_cast<std::size_t>(j)] = std::sin(mode * (j + 1) * pi / (n + 1));
  double prev = dense::norm2(u);
  double ratio = 0.0;
  for (int s = 0; s < steps; ++s) {
    u = jacobi(a, std::move(u), Vec(u.size(), 0.0), omega, 1);
    const double cur = dense::norm2(u);
    ratio = cur / prev;
    prev = cur;
  }
  return ratio;
}

dense::Matrix two_grid_error_matrix(const GridHierarchy& h, double omega, int eta_pre,
                                    int eta_post) {
  if (h.A.size() < 2) throw UsageError("two_grid_error_matrix needs at least two levels");
  const auto& a = h.A[0];
  const std::int64_t n = a.rows();
  auto s = dense::Matrix::identity(n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) s(i, j) -= omega * a(i, j) / a(i, i);
  auto spre = dense::Matrix::identity(n);
  for (int i = 0; i < eta_pre; ++i) spre = dense::matmul(s, spre);
  auto spost = dense::Matrix::identity(n);
  for (int i = 0; i < eta_post; ++i) spost = dense::matmul(s, spost);
  auto cgc = dense::sub(dense::Matrix::identity(n),
                        dense::matmul(h.P[0], dense::matmul(dense::inverse(h.A[1]),
                                                            dense::matmul(h.R[0], a))));
  return dense::matmul(spost, dense::matmul(cgc, spre));
}

Vec fas_two_grid(const dense::Matrix& a1, const dense::Matrix& b1, const dense::Matrix& a2,
                 const dense::Matrix& b2, const dense::Matrix& r, const dense::Matrix& pi,
                 const dense::Matrix& p, Vec u, const Vec& f, int eta_pre, int eta_post) {
  auto smooth = [](const dense::Matrix& a, const dense::Matrix& b, Vec u_in, const Vec& f_in,
                   int steps) {
    for (int s = 0; s < steps; ++s) {
      Vec res = dense::matvec(a, u_in);
      for (std::size_t i = 0; i < res.size(); ++i) res[i] = f_in[i] - res[i];
      Vec corr = dense::matvec(b, res);
      for (std::size_t i = 0; i < u_in.size(); ++i) u_in[i] += corr[i];
    }
    return u_in;
  };
  u = smooth(a1, b1, std::move(u), f, eta_pre);
  Vec uc = dense::matvec(pi, u);
  Vec res = dense::matvec(a1, u);
  for (std::size_t i = 0; i < res.size(); ++i) res[i] = f[i] - res[i];
  Vec fc = dense::matvec(r, res);
  const Vec adjust = dense::matvec(a2, uc);
  for (std::size_t i = 0; i < fc.size(); ++i) fc[i] += adjust[i];
  Vec uhat = smooth(a2, b2, uc, fc, eta_pre);
  uhat = smooth(a2, b2, std::move(uhat), fc, eta_post);
  const Vec corr = dense::matvec(p, uhat);
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += corr[i];
  return smooth(a1, b1, std::move(u), f, eta_post);
}

}  // namespace mgiad::mg
