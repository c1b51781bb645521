#pragma once
// Full operator on the total space, discretized without adiabatic
// approximations: the reference every effective operator is tested against.
//
// Discretization.  Base: spectral circle calculus (staggered first
// derivative, midpoint interpolation).  Fibre: reference basis per model.
// Global index is node-major: component (i, k) = base node i, fibre slot k.
// The operator is expressed in weighted coordinates u~ = M^(1/2) u with the
// node mass M = diag(w * weight_i) (w = L/n_x the base quadrature weight), so
// the matrix is plainly symmetric and plain-orthonormal eigenvectors
// correspond to metric-orthonormal functions.
//
// Structure.  The quadratic form of the horizontal kinetic part at a
// staggered node j is, in fibre-slot coordinates,
//   |C Ds^T|^2 - 2 gamma_j (C Ds^T)^T G (C S^T) + gamma_j^2 (C S^T)^T S2 (C S^T)
// (strip; gamma = a'/a; the warped model has no cross terms), which yields
// the Kronecker form
//   H~ = Kxx (x) I + Kxc (x) G-sym + Kcc (x) S2 + blockdiag(fibre blocks),
// where Kxx/Kxc/Kcc are mass-conjugated staggered quadrature matrices that
// already include eps^2 and the eps^3 perturbation weight.  The exact fibre
// gram S2 is used directly (never G^T G), so fibre integrals carry no
// truncation error beyond the basis itself.

#include <vector>

#include "adlim/fibre.hpp"
#include "adlim/geometry.hpp"

namespace adlim {

class FullOperator {
 public:
  int n_x = 0;
  int n_z = 0;
  Eigen::Index dim = 0;
  double eps = 0.0;
  double shift = 0.0;  // energy offset subtracted from the diagonal
  ModelKind kind = ModelKind::DirichletStrip;

  Mat Kxx;                 // (x) I_z
  Mat Kxc;                 // (x) G and transpose (strip only; empty otherwise)
  Mat Kcc;                 // (x) S2 (strip only; empty otherwise)
  Mat G, S2;               // fibre coupling matrices (strip only)
  std::vector<Mat> fibre;  // per-node diagonal blocks (fibre operator,
                           // eps^2 h1 potential, shift already folded in)

  // Separable-preconditioner ingredients for matrix-free solvers.
  Vec fourier_symbol_sq;   // base derivative symbol squared
  Mat fourier_basis;       // orthonormal trig transform on the base grid
  Vec fibre_diag_mean;     // node-averaged fibre block diagonal

  Mat dense() const;                 // materializes the full matrix
  Mat apply(const Mat& X) const;     // H * X, matrix-free
  Vec apply_vec(const Vec& x) const;

  // Strict lower bound for the spectrum: min over nodes of the fibre block
  // bottom (the horizontal part is positive semidefinite).
  double spectral_lower_bound() const;
};

// Assembles the full operator at the model's eps.  `shift` subtracts a
// recorded energy offset (used by the low-energy studies).
FullOperator assemble_full(const ModelGeometry& model, const FibreProblem& fp,
                           double shift = 0.0);

// Lift of weighted base functions to the full space through the band section:
// column j of the result is the section-weighted lift of base_vecs.col(j).
// With base_vecs = I this is the orthonormal band frame Phi (P0 = Phi Phi^T).
Mat lift_band(const FibreBand& band, const Mat& base_vecs);
Mat band_frame(const FibreBand& band);  // lift_band(band, I)

// Rebuilds the same model at a different resolution (profiles re-sampled).
ModelGeometry with_resolution(const ModelGeometry& model, int n_x);

// --- Spectral comparison utilities -----------------------------------------

// Symmetric Hausdorff distance between {a} and {b} truncated to (-inf, cap].
// Throws NumericalError when either truncation is empty.
double hausdorff_below(const Vec& a, const Vec& b, double cap);

struct Pairing {
  std::vector<int> index;  // index[j] = position in `target` nearest to ref[j]
  bool collision = false;  // two reference values claimed the same target
};

// Greedy nearest-neighbour pairing in ascending order with collision audit.
Pairing pair_nearest(const Vec& ref, const Vec& target);

}  // namespace adlim
