#include "adlim/adiabatic.hpp"

#include <cmath>
#include <sstream>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

// d/dx of the band section coefficients, column i = c'(x_i).  The section is
// smooth and periodic by the sign conventions of solve_band, so the primary
// spectral derivative is exact to machine precision for resolved profiles.
Mat section_derivative(const ModelGeometry& model, const FibreBand& band) {
  return band.band_vec[0] * model.grid.deriv_primary().transpose();
}

}  // namespace

Vec berry_one_form(const ModelGeometry& model, const FibreBand& band) {
  const int n = model.base.n_x;
  Mat dc = section_derivative(model, band);
  Vec omega(n);
  if (model.kind == ModelKind::DirichletStrip) {
    const SineBasis basis(band.n_z);
    const Mat& G = basis.z_dz();
    for (int i = 0; i < n; ++i) {
      const Vec c = band.band_vec[0].col(i);
      const double gamma = model.dprof[i] / model.prof[i];
      // <phi, d^h phi> = c^T c' - gamma c^T G c - gamma/2; the two profile
      // terms cancel exactly for any normalized c because sym(G) = -I/2.
      omega[i] = c.dot(dc.col(i)) - gamma * c.dot(G * c) - 0.5 * gamma;
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const Vec c = band.band_vec[0].col(i);
      const double gamma = model.dprof[i] / model.prof[i];  // (log f)' = (log l)'
      omega[i] = c.dot(dc.col(i)) - 0.5 * gamma;
    }
  }
  return omega;
}

Vec band_gradient_energy(const ModelGeometry& model, const FibreBand& band) {
  const int n = model.base.n_x;
  Mat dc = section_derivative(model, band);
  Vec kappa(n);
  if (model.kind == ModelKind::DirichletStrip) {
    const SineBasis basis(band.n_z);
    const Mat& G = basis.z_dz();
    const Mat& S2 = basis.z_dz_gram();
    for (int i = 0; i < n; ++i) {
      const Vec c = band.band_vec[0].col(i);
      const Vec d = dc.col(i);
      const double gamma = model.dprof[i] / model.prof[i];
      // int |d^h phi|^2 = |c'|^2 - 2 gamma c'^T G c + gamma^2 (c^T S2 c - 1/4)
      // for normalized c (the -1/4 collects the weight-variation terms; the
      // z-weighted gram S2 is exact, never approximated by G^T G).
      kappa[i] = d.squaredNorm() - 2.0 * gamma * d.dot(G * c) +
                 gamma * gamma * (c.dot(S2 * c) - 0.25);
    }
  } else {
    for (int i = 0; i < n; ++i) {
      const Vec d = dc.col(i);
      const double gamma = model.dprof[i] / model.prof[i];
      // |c' - (gamma/2) c|^2 = |c'|^2 + gamma^2/4 for normalized c.
      kappa[i] = d.squaredNorm() + 0.25 * gamma * gamma;
    }
  }
  return kappa;
}

BerryData adiabatic_potential(const ModelGeometry& model, const FibreBand& band,
                              double cross_tol) {
  BerryData data;
  data.omega = berry_one_form(model, band);
  Vec domega = model.grid.deriv_primary() * data.omega;
  data.v_a = band_gradient_energy(model, band) - domega;
  data.route = "general-quadrature";

  if (model.kind == ModelKind::WarpedCircleFibre &&
      (model.v_fibre.is_zero())) {
    // Fibre-constant ground state: the closed-fibre formula
    // (1/2)(log l)'' + (1/4)((log l)')^2 must agree with the general route.
    const int n = model.base.n_x;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      double lp = model.dprof[i] / model.prof[i];
      double lpp = model.d2prof[i] / model.prof[i] - lp * lp;
      double closed = 0.5 * lpp + 0.25 * lp * lp;
      worst = std::max(worst, std::abs(closed - data.v_a[i]));
    }
    if (worst > cross_tol) {
      std::ostringstream os;
      os << "band potential cross-check failed: general quadrature and "
            "closed-fibre formula differ by "
         << worst;
      throw NumericalError(os.str());
    }
    data.route = "closed-fibre-formula";
  }
  return data;
}

Mat project_h1(const ModelGeometry& model, const FibreBand& band) {
  const int n = model.base.n_x;
  const double eps = model.eps;
  if (model.h1.trivial()) return Mat::Zero(n, n);

  const Mat& Ds = model.grid.deriv_staggered();
  const Mat& S = model.grid.interp_staggered();
  Vec omega = berry_one_form(model, band);
  Vec kappa = band_gradient_energy(model, band);

  // Staggered samples: s analytically, omega by spectral interpolation.
  Vec s_stag = model.h1_s_stag;
  Vec omega_stag = S * omega;

  Mat A = Ds + omega_stag.asDiagonal() * S;
  Mat H1 = eps * eps * (A.transpose() * s_stag.asDiagonal() * A);
  H1 = 0.5 * (H1 + H1.transpose()).eval();
  for (int i = 0; i < n; ++i) {
    double curv = model.h1_s[i] * (kappa[i] - omega[i] * omega[i]);
    H1(i, i) += eps * eps * curv + eps * model.h1_v[i];
  }
  return H1;
}

EffectiveOperator assemble_adiabatic(const ModelGeometry& model,
                                     const FibreBand& band,
                                     const BerryData& berry,
                                     const Mat* h1_proj, const Mat* correction,
                                     double shift) {
  const int n = model.base.n_x;
  if (band.n_x != n || berry.v_a.size() != n) {
    throw ConfigError("band/berry data does not match the base grid");
  }
  const double eps = model.eps;
  EffectiveOperator op;
  op.eps = eps;
  op.shift = shift;
  op.matrix = eps * eps * model.grid.laplacian();
  for (int i = 0; i < n; ++i) {
    op.matrix(i, i) +=
        band.lambda(0, i) + eps * eps * berry.v_a[i] - shift;
  }
  if (h1_proj != nullptr && h1_proj->size() != 0) {
    if (h1_proj->rows() != n) throw ConfigError("h1 projection grid mismatch");
    // The full operator carries eps * H1; the projected block inherits it.
    op.matrix += eps * (*h1_proj);
  }
  if (correction != nullptr && correction->size() != 0) {
    if (correction->rows() != n) throw ConfigError("correction grid mismatch");
    op.matrix += *correction;
    op.with_correction = true;
  }
  double asym = (op.matrix - op.matrix.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12) {
    throw NumericalError("assembled effective operator asymmetric by " +
                         std::to_string(asym));
  }
  return op;
}

}  // namespace adlim
