#pragma once

// Quadrature on S^3 in Hopf coordinates z = e^{i alpha} cos s, w = e^{i beta}
// sin s: uniform grids in alpha, beta and Gauss-Legendre nodes in u = cos 2s.
// Weights are normalized to total measure 1. A grid of exact degree D
// integrates every polynomial of total degree <= D exactly.
//
// Each basis element e_{p,q,a} factors as e^{i mu alpha} e^{i nu beta} rho(s)
// with charges (mu, nu) = (a - q, p - a); the spectral transform exploits this
// to evaluate and project in separable passes.

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "crsphere/harmonics.hpp"

namespace crsphere {

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct GridTooCoarse : GridError {
  using GridError::GridError;
};

// Gauss-Legendre nodes/weights on [-1, 1]; weights sum to 2.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * pp * pp);
  }
}

struct QuadratureGrid {
  int na = 0, nb = 0, nu = 0;
  int exact_degree = 0;
  std::vector<double> u_nodes, u_weights;  // on [-1,1], weights sum 2

  static QuadratureGrid for_degree(int D) {
    QuadratureGrid g;
    g.exact_degree = D;
    g.na = D + 1;
    g.nb = D + 1;
    g.nu = D / 4 + 1;  // Gauss exactness 2*nu - 1 >= D/2
    gauss_legendre(g.nu, g.u_nodes, g.u_weights);
    return g;
  }

  std::size_t size() const {
    return static_cast<std::size_t>(na) * nb * nu;
  }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * nb + j) * nu + k;
  }
  double alpha(int i) const { return 2.0 * std::numbers::pi * i / na; }
  double beta(int j) const { return 2.0 * std::numbers::pi * j / nb; }
  double s_of_u(double u) const { return 0.5 * std::acos(u); }
  double s(int k) const { return s_of_u(u_nodes[k]); }
  double weight(int i, int j, int k) const {
    (void)i;
    (void)j;
    return u_weights[k] / (2.0 * na * nb);
  }
  std::complex<double> z(int i, int k) const { return std::polar(std::cos(s(k)), alpha(i)); }
  std::complex<double> w(int j, int k) const { return std::polar(std::sin(s(k)), beta(j)); }
};

// Forward (coefficients -> grid values) and projection (grid values ->
// coefficients) transforms for expansions of degree <= N on a given grid.
class SpectralTransform {
 public:
  SpectralTransform(QuadratureGrid grid, int N) : grid_(std::move(grid)), N_(N) {
    if (grid_.na <= 2 * N || grid_.nb <= 2 * N)
      throw GridTooCoarse("angular grid too coarse for requested degree");
    build();
  }

  const QuadratureGrid& grid() const { return grid_; }
  int degree() const { return N_; }

  std::vector<std::complex<double>> evaluate(const SphereFunctionD& f) const {
    const int nc = 2 * N_ + 1;
    const int nu = grid_.nu;
    std::vector<std::complex<double>> charge(static_cast<std::size_t>(nc) * nc * nu, 0.0);
    for (const auto& [pq, coeffs] : f.blocks) {
      auto [p, q] = pq;
      if (p + q > N_) continue;
      for (int a = 0; a <= p + q; ++a) {
        if (coeffs[a] == std::complex<double>(0.0)) continue;
        const auto& entry = entries_[entry_index(p, q, a)];
        std::complex<double>* dst = &charge[charge_index(entry.mu, entry.nu, 0)];
        for (int k = 0; k < nu; ++k) dst[k] += coeffs[a] * entry.radial[k];
      }
    }
    // angular synthesis: beta then alpha
    const int na = grid_.na, nb = grid_.nb;
    std::vector<std::complex<double>> mid(static_cast<std::size_t>(nc) * nb * nu, 0.0);
    for (int mi = 0; mi < nc; ++mi)
      for (int ni = 0; ni < nc; ++ni) {
        const std::complex<double>* src = &charge[(static_cast<std::size_t>(mi) * nc + ni) * nu];
        bool any = false;
        for (int k = 0; k < nu; ++k)
          if (src[k] != std::complex<double>(0.0)) {
            any = true;
            break;
          }
        if (!any) continue;
        for (int j = 0; j < nb; ++j) {
          std::complex<double> e = eb_[static_cast<std::size_t>(j) * nc + ni];
          std::complex<double>* dst = &mid[(static_cast<std::size_t>(mi) * nb + j) * nu];
          for (int k = 0; k < nu; ++k) dst[k] += e * src[k];
        }
      }
    std::vector<std::complex<double>> values(grid_.size(), 0.0);
    for (int i = 0; i < na; ++i)
      for (int mi = 0; mi < nc; ++mi) {
        std::complex<double> e = ea_[static_cast<std::size_t>(i) * nc + mi];
        const std::complex<double>* src = &mid[static_cast<std::size_t>(mi) * nb * nu];
        std::complex<double>* dst = &values[static_cast<std::size_t>(i) * nb * nu];
        for (std::size_t t = 0; t < static_cast<std::size_t>(nb) * nu; ++t) dst[t] += e * src[t];
      }
    return values;
  }

  // L2-orthogonal projection of grid values onto degree <= N (exact for
  // functions of degree <= exact_degree - N).
  SphereFunctionD project(const std::vector<std::complex<double>>& values, int weight) const {
    if (values.size() != grid_.size()) throw std::invalid_argument("values/grid size mismatch");
    const int nc = 2 * N_ + 1;
    const int na = grid_.na, nb = grid_.nb, nu = grid_.nu;
    // adjoint angular analysis: alpha then beta, with uniform weights folded in
    std::vector<std::complex<double>> mid(static_cast<std::size_t>(nc) * nb * nu, 0.0);
    for (int mi = 0; mi < nc; ++mi) {
      std::complex<double>* dst = &mid[static_cast<std::size_t>(mi) * nb * nu];
      for (int i = 0; i < na; ++i) {
        std::complex<double> e = std::conj(ea_[static_cast<std::size_t>(i) * nc + mi]) /
                                 static_cast<double>(na);
        const std::complex<double>* src = &values[static_cast<std::size_t>(i) * nb * nu];
        for (std::size_t t = 0; t < static_cast<std::size_t>(nb) * nu; ++t) dst[t] += e * src[t];
      }
    }
    std::vector<std::complex<double>> charge(static_cast<std::size_t>(nc) * nc * nu, 0.0);
    for (int mi = 0; mi < nc; ++mi)
      for (int ni = 0; ni < nc; ++ni) {
        std::complex<double>* dst = &charge[charge_index(mi - N_, ni - N_, 0)];
        for (int j = 0; j < nb; ++j) {
          std::complex<double> e = std::conj(eb_[static_cast<std::size_t>(j) * nc + ni]) /
                                   static_cast<double>(nb);
          const std::complex<double>* src = &mid[(static_cast<std::size_t>(mi) * nb + j) * nu];
          for (int k = 0; k < nu; ++k) dst[k] += e * src[k];
        }
      }
    SphereFunctionD f = SphereFunctionD::zero(weight, N_);
    for (int p = 0; p <= N_; ++p)
      for (int q = 0; p + q <= N_; ++q) {
        std::vector<std::complex<double>> coeffs(block_dim(p, q), 0.0);
        bool any = false;
        for (int a = 0; a <= p + q; ++a) {
          const auto& entry = entries_[entry_index(p, q, a)];
          const std::complex<double>* src = &charge[charge_index(entry.mu, entry.nu, 0)];
          std::complex<double> b = 0.0;
          for (int k = 0; k < nu; ++k) b += 0.5 * grid_.u_weights[k] * entry.radial[k] * src[k];
          coeffs[a] = b / entry.gram;
          if (std::abs(coeffs[a]) > 0.0) any = true;
        }
        if (any) f.blocks.emplace(BlockKey{p, q}, std::move(coeffs));
      }
    return f;
  }

 private:
  struct Entry {
    int mu = 0, nu = 0;
    double gram = 1.0;
    std::vector<double> radial;  // rho(s_k), real by integer basis coefficients
  };

  std::size_t entry_index(int p, int q, int a) const {
    return block_offset_[static_cast<std::size_t>(p) * (N_ + 1) + q] + a;
  }
  std::size_t charge_index(int mu, int nu, int k) const {
    const int nc = 2 * N_ + 1;
    return (static_cast<std::size_t>(mu + N_) * nc + (nu + N_)) * grid_.nu + k;
  }

  void build() {
    const int nc = 2 * N_ + 1;
    block_offset_.assign(static_cast<std::size_t>(N_ + 1) * (N_ + 1), 0);
    std::size_t total = 0;
    for (int p = 0; p <= N_; ++p)
      for (int q = 0; p + q <= N_; ++q) {
        block_offset_[static_cast<std::size_t>(p) * (N_ + 1) + q] = total;
        total += block_dim(p, q);
      }
    entries_.resize(total);
    for (int p = 0; p <= N_; ++p)
      for (int q = 0; p + q <= N_; ++q) {
        const auto& data = HarmonicTable::block(p, q);
        for (int a = 0; a <= p + q; ++a) {
          Entry& e = entries_[entry_index(p, q, a)];
          e.mu = a - q;
          e.nu = p - a;
          e.gram = data.gram_d[a];
          e.radial.assign(grid_.nu, 0.0);
          for (const auto& [m, c] : data.basis[a].terms()) {
            double coef = c.re.get_d();  // basis coefficients are real integers
            for (int k = 0; k < grid_.nu; ++k) {
              double cs = std::cos(grid_.s(k)), sn = std::sin(grid_.s(k));
              e.radial[k] += coef * std::pow(cs, m.a + m.b) * std::pow(sn, m.c + m.d);
            }
          }
        }
      }
    ea_.resize(static_cast<std::size_t>(grid_.na) * nc);
    for (int i = 0; i < grid_.na; ++i)
      for (int mi = 0; mi < nc; ++mi)
        ea_[static_cast<std::size_t>(i) * nc + mi] =
            std::polar(1.0, (mi - N_) * grid_.alpha(i));
    eb_.resize(static_cast<std::size_t>(grid_.nb) * nc);
    for (int j = 0; j < grid_.nb; ++j)
      for (int ni = 0; ni < nc; ++ni)
        eb_[static_cast<std::size_t>(j) * nc + ni] =
            std::polar(1.0, (ni - N_) * grid_.beta(j));
  }

  QuadratureGrid grid_;
  int N_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> block_offset_;
  std::vector<std::complex<double>> ea_, eb_;
};

// One-off grid evaluation without a prebuilt transform.
template <class S>
std::vector<std::complex<double>> evaluate_grid(const SphereFunction<S>& u,
                                                const QuadratureGrid& grid) {
  std::vector<std::complex<double>> values(grid.size(), 0.0);
  for (int i = 0; i < grid.na; ++i)
    for (int j = 0; j < grid.nb; ++j)
      for (int k = 0; k < grid.nu; ++k)
        values[grid.index(i, j, k)] = evaluate(u, grid.alpha(i), grid.beta(j), grid.s(k));
  return values;
}

// Least-squares/exact projection onto degree <= N; requires exact_degree >= 2N.
inline SphereFunctionD grid_project(const std::vector<std::complex<double>>& values,
                                    const QuadratureGrid& grid, int N, int weight = 0) {
  if (grid.exact_degree < 2 * N)
    throw GridTooCoarse("grid exact_degree below 2N; projection not exact");
  SpectralTransform t(grid, N);
  return t.project(values, weight);
}

}  // namespace crsphere
