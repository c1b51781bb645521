#pragma once
// Berry one-form, adiabatic (band) potential, projected perturbation, and the
// assembled effective operator on the base circle.
//
// Conventions.  The ground band is trivialized by the positive fibre section
// phi_0(x), so band functions are scalar functions on the base.  All base
// matrices act on weighted grid values (mass already folded in), making every
// operator plainly symmetric.
//
// The one-form is omega(x) = <phi_0, d^h_x phi_0>_{F_x} in the metric fibre
// measure; the band potential is
//     V_a(x) = -omega'(x) + int_{F_x} |d^h_x phi_0|^2,
// which reproduces the closed-fibre form (1/2)(log Vol)'' + (1/4)((log Vol)')^2
// when phi_0 is fibre-constant, and reduces to the pure gradient energy for
// straight strips where omega vanishes identically.

#include <string>

#include "adlim/fibre.hpp"
#include "adlim/geometry.hpp"

namespace adlim {

struct BerryData {
  Vec omega;          // omega(x_i)
  Vec v_a;            // V_a(x_i)
  std::string route;  // "general-quadrature" or "closed-fibre-formula"
};

// omega(x_i) from the band section: the section-derivative term c^T c' plus
// the model's volume-variation term.  Real by construction.
Vec berry_one_form(const ModelGeometry& model, const FibreBand& band);

// V_a by the general route (spectral derivative of omega + exact fibre
// quadrature of the horizontal gradient energy).  For warped models with a
// fibre-constant ground state the analytic closed-fibre formula is evaluated
// as an independent cross-check; disagreement beyond cross_tol raises
// NumericalError.
BerryData adiabatic_potential(const ModelGeometry& model, const FibreBand& band,
                              double cross_tol = 1e-8);

// Horizontal gradient energy kappa(x_i) = int |d^h_x phi_0|^2 (exact fibre
// quadrature); also the band-curvature weight of project_h1.
Vec band_gradient_energy(const ModelGeometry& model, const FibreBand& band);

// P0 H1 P0 as a symmetric base matrix, with H1's internal eps factors:
//   eps^2 * [ (Ds + Omega S)^T diag(s_stag) (Ds + Omega S)
//             + diag(s * (kappa - omega^2)) ]  +  eps * diag(v).
// The assembler adds the overall eps of the eps*H1 coupling.
Mat project_h1(const ModelGeometry& model, const FibreBand& band);

struct EffectiveOperator {
  Mat matrix;         // n_x x n_x, symmetric
  double eps = 0.0;
  bool with_correction = false;  // true once the superadiabatic M is added
  double shift = 0.0;            // energy offset subtracted (0 = none)
};

// H_a = eps^2 * (-Delta_B, spectral) + diag(lambda_0) + eps * h1_proj
//       + eps^2 * diag(V_a) - shift * I, plus `correction` when supplied.
// h1_proj / correction may be null.  Verifies symmetry to 1e-12.
EffectiveOperator assemble_adiabatic(const ModelGeometry& model,
                                     const FibreBand& band,
                                     const BerryData& berry,
                                     const Mat* h1_proj = nullptr,
                                     const Mat* correction = nullptr,
                                     double shift = 0.0);

}  // namespace adlim
