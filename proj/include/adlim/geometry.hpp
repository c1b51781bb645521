#pragma once
// Model geometries: a circle base with one of two fibre types.
//
//  * DirichletStrip: fibre (0, a(x)) with Dirichlet ends; the fibre is pulled
//    back to the reference interval (0, 1) by z = y / a(x).  In reference
//    coordinates the horizontal derivative acquires the shift term
//    d/dx|_y = d/dx|_z - (a'/a) z d/dz.
//  * WarpedCircleFibre: fibre a circle of circumference l(x) parameterised by
//    a fixed angle; the metric volume element is f(x) = l(x) / (2 pi).
//
// The full operator on the total space is
//    H = -eps^2 Lap_base (metric-weighted) + fibre operator + eps * H1,
// with H1 a base-horizontal second-order perturbation described by H1Spec.
// All sampled coefficient caches live here so downstream modules never
// re-evaluate profiles.

#include <optional>

#include "adlim/grid.hpp"
#include "adlim/profile.hpp"

namespace adlim {

enum class ModelKind { DirichletStrip, WarpedCircleFibre };

struct BaseCircle {
  double L = 2.0 * kPiConst;  // circumference
  int n_x = 256;              // even, >= 16
};

// Perturbation eps*H1 with quadratic form
//   eps^2 int s(x) |du/dx|_h|^2 + eps int v(x) |u|^2
// (the eps factors are applied by the assemblers, not stored here).
struct H1Spec {
  Profile s;  // horizontal kinetic weight; empty = 0
  Profile v;  // scalar potential; empty = 0
  bool trivial() const { return s.is_zero() && v.is_zero(); }
};

struct ModelGeometry {
  ModelKind kind = ModelKind::DirichletStrip;
  BaseCircle base;
  Profile profile;   // strip width a(x) / fibre circumference l(x)
  Profile v_base;    // base potential factor v_b(x)
  Profile v_fibre;   // strip: fibre potential factor v_f(y); unused for warped
  H1Spec h1;
  double eps = 0.1;

  CircleGrid grid;   // primary + staggered calculus for base.L, base.n_x

  // Sampled caches on the primary grid ...
  Vec prof, dprof, d2prof;   // profile and derivatives
  Vec vb;                    // v_b(x_i)
  Vec h1_s, h1_v;            // s(x_i), v(x_i)
  // ... and on the staggered grid (for quadratic-form weights).
  Vec prof_stag, h1_s_stag;

  // Metric volume weight per node: strip a(x_i), warped l(x_i)/(2 pi).
  Vec weight, weight_stag;

  ModelGeometry(ModelKind k, BaseCircle b, Profile prof_in, Profile vb_in,
                Profile vf_in, H1Spec h1_in, double eps_in);
};

// Validated constructors.  Both check: n_x even >= 16, L > 0, eps in (0, 1],
// profile strictly positive on a dense sample, every profile L-periodic.
ModelGeometry build_strip_model(const BaseCircle& base, const Profile& width,
                                const Profile& v_base, const Profile& v_fibre,
                                const H1Spec& h1, double eps);
ModelGeometry build_warped_model(const BaseCircle& base, const Profile& length,
                                 const Profile& v_base, const H1Spec& h1,
                                 double eps);

// Trivialization shift coefficient c(x_i) = profile'(x_i) / profile(x_i),
// evaluated analytically from the expression tree.  For strips this is the
// a'/a factor in the horizontal derivative; for warped fibres it equals the
// logarithmic derivative of the fibre volume.
Vec shift_field_coefficient(const ModelGeometry& model);

// d/dx log Vol(F_x) computed by the independent numeric route: spectral
// differentiation (primary-grid derivative) of the sampled log volume.
// Agreement with shift_field_coefficient is a standing cross-check.
Vec log_volume_derivative(const ModelGeometry& model);

}  // namespace adlim
