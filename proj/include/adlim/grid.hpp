#pragma once
// Discrete calculus on the base circle and fibre function bases.
//
// Base circle: n uniform nodes x_i = i L/n (n even).  First derivatives are
// trigonometric-interpolation derivatives.  On an even grid the plain
// node-to-node derivative matrix annihilates the Nyquist mode, so quadratic
// forms D^T W D built from it would hand the Nyquist mode a spurious zero
// kinetic energy.  We therefore differentiate onto the *staggered* grid
// y_j = (j + 1/2) L/n: that map keeps every nonconstant mode, the composite
// L = D_s^T D_s has the exact symbol (2 pi m / L)^2 including m = n/2, and
// variable coefficients are sampled at the staggered nodes.
//
// Fibre bases: Dirichlet sine basis on (0, 1) (reference coordinate) with
// closed-form kinetic/coupling matrices, and a real Fourier basis on the unit
// circle parameterised by angle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace adlim {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPiConst = 3.14159265358979323846;

// Gauss-Legendre nodes/weights on [0, 1]; exact for polynomials of degree
// 2n - 1.  Deterministic Newton iteration on Legendre polynomials.
struct Quadrature {
  Vec nodes;
  Vec weights;
};
Quadrature gauss_legendre_01(int n);

class CircleGrid {
 public:
  CircleGrid(double circumference, int n_nodes);

  double L() const { return L_; }
  int n() const { return n_; }
  double dx() const { return L_ / n_; }

  const Vec& nodes() const { return x_; }            // x_i = i L/n
  const Vec& staggered_nodes() const { return xs_; } // y_j = (j+1/2) L/n

  // Derivative from primary nodes onto staggered nodes (exact on all
  // trigonometric modes |m| <= n/2; invertible on mean-free functions).
  const Mat& deriv_staggered() const { return Ds_; }

  // Midpoint interpolation from primary onto staggered nodes (modes
  // |m| < n/2 exact; the Nyquist mode vanishes at midpoints by symmetry).
  const Mat& interp_staggered() const { return S_; }

  // Antisymmetric node-to-node derivative (annihilates the Nyquist mode);
  // used only to differentiate smooth sampled data, never in quadratic forms.
  const Mat& deriv_primary() const { return Dp_; }

  // Minus the periodic Laplacian: Ds^T Ds, with exact symbol (2 pi m / L)^2.
  const Mat& laplacian() const { return Lap_; }

  // Squared derivative symbol (2 pi m_k / L)^2 per real Fourier mode, paired
  // with the orthonormal discrete trig transform in fourier_basis(); used by
  // separable preconditioners.
  Vec fourier_symbol_sq() const;
  // Columns: orthonormal real trig modes on the primary grid, matching
  // fourier_symbol_sq() ordering.
  Mat fourier_basis() const;

 private:
  double L_;
  int n_;
  Vec x_, xs_;
  Mat Ds_, S_, Dp_, Lap_;
};

// Dirichlet sine basis e_k(z) = sqrt(2) sin(k pi z) on (0, 1), k = 1..n.
// All matrices are exact closed forms in the L^2(0,1) inner product.
class SineBasis {
 public:
  explicit SineBasis(int n_modes);

  int n() const { return n_; }

  // <e_j, e_k''> sign-flipped: diag((k pi)^2).
  const Vec& kinetic_diag() const { return k2_; }

  // G[j,k] = <e_j, z e_k'>.
  const Mat& z_dz() const { return G_; }

  // S2[j,k] = <e_j' z, z e_k'> = int z^2 e_j' e_k'.
  const Mat& z_dz_gram() const { return S2_; }

  // m[k] = int_0^1 e_k dz.
  const Vec& mean() const { return mean_; }

  // Galerkin matrix of multiplication by v(z), z in (0,1), via cosine-moment
  // expansion: V[j,k] = C_{|j-k|} - C_{j+k}, C_m = int_0^1 v(z) cos(m pi z) dz
  // evaluated with Gauss-Legendre of order max(64, 2 n + 16).
  template <class F>
  Mat potential_matrix(F&& v) const {
    const int q = std::max(64, 2 * n_ + 16);
    Quadrature quad = gauss_legendre_01(q);
    std::vector<double> c(static_cast<std::size_t>(2 * n_ + 1), 0.0);
    for (int m = 0; m <= 2 * n_; ++m) {
      double acc = 0.0;
      for (int i = 0; i < q; ++i) {
        acc += quad.weights[i] * v(quad.nodes[i]) *
               std::cos(m * kPiConst * quad.nodes[i]);
      }
      c[static_cast<std::size_t>(m)] = acc;
    }
    Mat V(n_, n_);
    for (int j = 1; j <= n_; ++j) {
      for (int k = 1; k <= n_; ++k) {
        V(j - 1, k - 1) = c[static_cast<std::size_t>(std::abs(j - k))] -
                          c[static_cast<std::size_t>(j + k)];
      }
    }
    return V;
  }

 private:
  int n_;
  Vec k2_, mean_;
  Mat G_, S2_;
};

// Real Fourier basis on a circle of circumference 2 pi in the angle variable:
// slot 0 <-> 1/sqrt(2 pi); slot 2p-1 <-> cos(p t)/sqrt(pi); slot 2p <->
// sin(p t)/sqrt(pi).  Only the integer mode numbers matter downstream.
class FourierFibre {
 public:
  explicit FourierFibre(int n_slots);
  int n() const { return n_; }
  const Vec& mode_sq() const { return m2_; }  // m_k^2 per slot

 private:
  int n_;
  Vec m2_;
};

}  // namespace adlim
