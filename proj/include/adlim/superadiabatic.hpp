// Superadiabatic projections and the intertwined effective operator.
//
// Everything here lives in an exact low-rank representation P = F C F^T with
// F orthonormal (dim x r) whose leading n_x columns are the band frame Phi.
// The iterative correction, the idempotency rounding, the Sz.-Nagy
// intertwiner, and every invariant check then reduce to tall matrix products
// plus r x r algebra, so no full-dimension dense matrix is ever formed.
//
// Construction: starting from the band projector P^0 = Phi Phi^T, each step
// removes the leading commutator and idempotency defects,
//   P^{k+1} = P^k + (D - P0 D - D P0) - W Phi^T - Phi W^T,
//   D = (P^k)^2 - P^k,    W = R_F([H, P^k] Phi),
// which improves ||[H, P^k] rho(H)|| by one power of eps on low-energy
// states.  The result is only approximately idempotent; `round_projection`
// pushes it onto the nearest true projector, and `sz_nagy` produces the
// orthogonal map U with U P0 U^T = P that carries the band frame to the
// moving frame Theta = U Phi.

#pragma once

#include <Eigen/Dense>

#include "adlim/fibre.hpp"
#include "adlim/reference.hpp"

namespace adlim {

// Spectral norm (largest singular value) of a small dense matrix.
double spectral_norm(const Mat& a);

struct SuperProjector {
  Mat F;  // dim x r, orthonormal; leading n_band columns are the band frame
  Mat C;  // r x r symmetric coefficient matrix: P = F C F^T
  int n_band = 0;
  int order = 0;  // number of correction steps applied

  Eigen::Index rank_bound() const { return C.rows(); }

  // ||P^2 - P||_2, exact in the subspace representation.
  double idempotency_defect() const;
  // ||P - P0||_2 against the band projector.
  double distance_to_band() const;

  Mat apply(const Mat& x) const;  // P * x
};

// Runs `order` correction steps on top of the band projector.  The frame
// grows by at most n_x columns per step; directions that the correction does
// not actually excite (structurally decoupled models) are dropped, so exact
// commutation stays exact in floating point.
SuperProjector build_projector(const FullOperator& op, const FibreBand& band,
                               int order);

// Rounds C onto the nearest spectral projector by the cubic iteration
// C <- 3C^2 - 2C^3.  Requires ||C^2 - C||_2 < 1/4 (guaranteed basin);
// throws NumericalError otherwise or when the target defect is not reached.
void round_projection(SuperProjector& p, double tol = 1e-13);

// Orthogonal intertwiner U with U P0 U^T = P (after rounding), stored through
// its subspace increment: U = I + F u F^T.
struct Intertwiner {
  Mat u;  // r x r

  double identity_defect() const { return spectral_norm(u); }  // ||U - I||_2
};

// Sz.-Nagy construction; requires ||P - P0||_2 < 1 (throws NumericalError).
// The inverse square root is computed by a Newton-Schulz iteration on the
// r x r block, which is exact on the orthogonal complement of range(F).
Intertwiner sz_nagy(const SuperProjector& p);

// ||U^T U - I||_2 — unitarity audit of the intertwiner.
double orthogonality_defect(const SuperProjector& p, const Intertwiner& w);
// ||(I - P) U P0||_2 — range-mapping audit.
double intertwining_defect(const SuperProjector& p, const Intertwiner& w);

// Moving frame Theta = U Phi (dim x n_band, orthonormal columns spanning
// range(P) when the audits above pass).
Mat moving_frame(const SuperProjector& p, const Intertwiner& w);

// Effective operator in the moving frame: Theta^T H Theta, symmetrized.
Mat effective_matrix(const FullOperator& op, const Mat& theta);

// Second-order band correction M = -B^T R_F B with B = (I - P0) H Phi;
// negative semidefinite by construction.  Added to the adiabatic matrix it
// removes the leading adiabatic spectral error.
Mat band_correction(const FullOperator& op, const FibreBand& band);

// ||[H, P] V||_2 for an orthonormal window frame V (columns spanning the
// range of the spectral cutoff): the windowed commutator norm driving the
// superadiabatic convergence rates.
double windowed_commutator_norm(const FullOperator& op,
                                const SuperProjector& p, const Mat& v);

}  // namespace adlim
