#include "doctest.h"

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "adlim/adiabatic.hpp"
#include "adlim/eigensolve.hpp"
#include "adlim/errors.hpp"
#include "adlim/rates.hpp"
#include "adlim/reference.hpp"
#include "adlim/superadiabatic.hpp"

using adlim::adiabatic_potential;
using adlim::assemble_adiabatic;
using adlim::assemble_full;
using adlim::band_correction;
using adlim::band_frame;
using adlim::BaseCircle;
using adlim::BerryData;
using adlim::build_projector;
using adlim::build_strip_model;
using adlim::build_warped_model;
using adlim::DetRng;
using adlim::effective_matrix;
using adlim::eigenpairs_below;
using adlim::FibreBand;
using adlim::FibreProblem;
using adlim::fit_rate;
using adlim::FullOperator;
using adlim::H1Spec;
using adlim::Intertwiner;
using adlim::intertwining_defect;
using adlim::kPiConst;
using adlim::Mat;
using adlim::ModelGeometry;
using adlim::moving_frame;
using adlim::NumericalError;
using adlim::orthogonality_defect;
using adlim::Profile;
using adlim::project_h1;
using adlim::round_projection;
using adlim::solve_band;
using adlim::spectral_norm;
using adlim::SuperProjector;
using adlim::sz_nagy;
using adlim::Vec;
using adlim::windowed_commutator_norm;

namespace {

struct Setup {
  ModelGeometry model;
  FibreBand band;
  FullOperator op;
};

Setup strip_setup(int n_x, int n_z, double eps, bool with_h1) {
  H1Spec h1;
  if (with_h1) {
    h1.s = Profile::parse("1 + 0.3*cos(1*x)");
    h1.v = Profile::parse("0.2*cos(2*x)");
  }
  ModelGeometry m = build_strip_model(BaseCircle{2.0 * kPiConst, n_x},
                                      Profile::parse("1.25 + 0.1*cos(1*x)"),
                                      Profile(), Profile(), h1, eps);
  FibreProblem fp(m, n_z);
  FibreBand band = solve_band(fp);
  FullOperator op = assemble_full(m, fp, band.Lambda0);
  return {std::move(m), std::move(band), std::move(op)};
}

}  // namespace

TEST_CASE("order zero is the band projector, and the sandwich identity holds") {
  const Setup s = strip_setup(16, 6, 0.1, false);
  const SuperProjector p0 = build_projector(s.op, s.band, 0);
  CHECK(p0.n_band == 16);
  CHECK(p0.order == 0);
  CHECK(p0.idempotency_defect() <= 1e-14);
  CHECK(p0.distance_to_band() <= 1e-14);

  const Mat phi = band_frame(s.band);
  DetRng rng(99);
  Mat X(s.op.dim, 3);
  for (int c = 0; c < 3; ++c) X.col(c) = rng.vector(s.op.dim);
  CHECK((p0.apply(X) - phi * (phi.transpose() * X)).cwiseAbs().maxCoeff() <=
        1e-13);

  // P0 [A, P0] P0 = 0 for any symmetric A: the diagonal block of a
  // commutator vanishes, which is why the first correction is off-diagonal.
  Mat A = rng.vector(s.op.dim * s.op.dim).reshaped(s.op.dim, s.op.dim);
  A = 0.5 * (A + A.transpose());
  const Mat P = phi * phi.transpose();
  const Mat sandwich = P * (A * P - P * A) * P;
  CHECK(spectral_norm(sandwich) <= 1e-12 * spectral_norm(A));
}

TEST_CASE("superadiabatic hierarchy on the strip: defects gain powers of eps") {
  const std::vector<double> eps_list = {0.2, 0.141, 0.1, 0.071, 0.05};
  const int n = static_cast<int>(eps_list.size());
  const double cap = 2.0;  // above the band bottom, far below the second band

  Vec eps(n), comm0(n), comm1(n), idem1(n), idem2(n), dist(n), iddef(n),
      mnorm(n), effdiff(n);

  for (int i = 0; i < n; ++i) {
    const Setup s = strip_setup(96, 12, eps_list[i], true);
    eps[i] = eps_list[i];

    // Orthonormal frame of the spectral window below the cap.
    const auto win = eigenpairs_below(s.op, cap);
    int n_below = 0;
    while (n_below < static_cast<int>(win.values.size()) &&
           win.values[n_below] <= cap) {
      ++n_below;
    }
    REQUIRE(n_below >= 3);
    const Mat V = win.vectors.leftCols(n_below);

    const SuperProjector p0 = build_projector(s.op, s.band, 0);
    SuperProjector p1 = build_projector(s.op, s.band, 1);
    SuperProjector p2 = build_projector(s.op, s.band, 2);

    comm0[i] = windowed_commutator_norm(s.op, p0, V);
    comm1[i] = windowed_commutator_norm(s.op, p1, V);
    idem1[i] = p1.idempotency_defect();
    idem2[i] = p2.idempotency_defect();

    round_projection(p2);
    CHECK(p2.idempotency_defect() <= 1e-12);
    // Rounding preserves the band rank.
    CHECK(std::abs(p2.C.trace() - 96.0) <= 1e-8);
    dist[i] = p2.distance_to_band();

    const Intertwiner u = sz_nagy(p2);
    CHECK(orthogonality_defect(p2, u) <= 1e-10);
    CHECK(intertwining_defect(p2, u) <= 1e-10);
    iddef[i] = u.identity_defect();

    // Second-order band correction: symmetric, negative semidefinite.
    const Mat M = band_correction(s.op, s.band);
    CHECK((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> em(M);
    CHECK(em.eigenvalues().maxCoeff() <= 1e-12);
    mnorm[i] = spectral_norm(M);

    // Intertwined effective operator vs adiabatic + correction, compared on
    // the low-energy block of the latter.
    const Mat theta = moving_frame(p2, u);
    const Mat heff = effective_matrix(s.op, theta);
    const BerryData berry = adiabatic_potential(s.model, s.band);
    const Mat h1p = project_h1(s.model, s.band);
    const Mat ham = assemble_adiabatic(s.model, s.band, berry, &h1p, &M,
                                       s.band.Lambda0)
                        .matrix;
    Eigen::SelfAdjointEigenSolver<Mat> ea(ham);
    int k = 0;
    while (k < 96 && ea.eigenvalues()[k] <= cap) ++k;
    REQUIRE(k >= 3);
    const Mat W = ea.eigenvectors().leftCols(k);
    effdiff[i] = spectral_norm(W.transpose() * (heff - ham) * W);
  }

  CHECK(fit_rate(eps, comm0).slope >= 0.9);
  CHECK(fit_rate(eps, comm1).slope >= 1.8);
  CHECK(fit_rate(eps, idem1).slope >= 1.8);
  CHECK(fit_rate(eps, idem2).slope >= 2.5);
  CHECK(fit_rate(eps, dist).slope >= 0.9);
  CHECK(fit_rate(eps, iddef).slope >= 0.9);
  CHECK(fit_rate(eps, mnorm).slope >= 1.8);
  CHECK(fit_rate(eps, effdiff).slope >= 2.7);
}

TEST_CASE("structurally decoupled models: everything collapses to the band") {
  // Straight strip of constant width: the band is exactly invariant, so
  // every correction vanishes identically.
  const ModelGeometry m = build_strip_model(BaseCircle{2.0 * kPiConst, 32},
                                            Profile::parse("1.25"), Profile(),
                                            Profile(), H1Spec{}, 0.2);
  const FibreProblem fp(m, 8);
  const FibreBand band = solve_band(fp);
  const FullOperator op = assemble_full(m, fp);

  SuperProjector p = build_projector(op, band, 2);
  CHECK(p.distance_to_band() <= 1e-13);
  CHECK(p.idempotency_defect() <= 1e-13);
  CHECK(spectral_norm(band_correction(op, band)) <= 1e-15);

  round_projection(p);
  const Intertwiner u = sz_nagy(p);
  CHECK(u.identity_defect() <= 1e-13);

  // Effective operator in the (identity) moving frame: the shifted circle
  // Laplacian plus the flat band energy pi^2 / 1.25^2.
  const Mat theta = moving_frame(p, u);
  const Mat heff = effective_matrix(op, theta);
  const double e0 = kPiConst * kPiConst / (1.25 * 1.25);
  const Mat expect =
      0.04 * m.grid.laplacian() + e0 * Mat::Identity(32, 32);
  CHECK((heff - expect).cwiseAbs().maxCoeff() <= 1e-12);

  const auto low = eigenpairs_below(op, e0 + 0.5);
  int nb = 0;
  while (nb < static_cast<int>(low.values.size()) &&
         low.values[nb] <= e0 + 0.5) {
    ++nb;
  }
  CHECK(windowed_commutator_norm(op, p, low.vectors.leftCols(nb)) <= 1e-13);

  // Warped fibre: the constant sector decouples exactly as well.
  const ModelGeometry w = build_warped_model(
      BaseCircle{2.0 * kPiConst, 32}, Profile::parse("2*pi*(1 + 0.2*cos(1*x))"),
      Profile(), H1Spec{}, 0.1);
  const FibreProblem wfp(w, 9);
  const FibreBand wband = solve_band(wfp);
  const FullOperator wop = assemble_full(w, wfp);

  SuperProjector wp = build_projector(wop, wband, 2);
  CHECK(wp.distance_to_band() <= 1e-13);
  CHECK(spectral_norm(band_correction(wop, wband)) <= 1e-15);
  round_projection(wp);
  const Intertwiner wu = sz_nagy(wp);
  CHECK(wu.identity_defect() <= 1e-13);

  // The moving-frame effective operator is unitarily a gauge away from the
  // adiabatic assembly: their spectra agree to solver precision.
  const Mat wtheta = moving_frame(wp, wu);
  const Mat wheff = effective_matrix(wop, wtheta);
  const BerryData wberry = adiabatic_potential(w, wband);
  const Mat wham = assemble_adiabatic(w, wband, wberry).matrix;
  Eigen::SelfAdjointEigenSolver<Mat> e1(wheff), e2(wham);
  CHECK((e1.eigenvalues() - e2.eigenvalues()).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("projection rounding: fixed points, basin, and rank preservation") {
  const Setup s = strip_setup(32, 8, 0.1, false);
  SuperProjector p0 = build_projector(s.op, s.band, 0);
  const Mat c_before = p0.C;
  round_projection(p0);
  CHECK((p0.C - c_before).cwiseAbs().maxCoeff() <= 1e-12);

  // A small symmetric perturbation is rounded away without changing rank.
  SuperProjector p1 = build_projector(s.op, s.band, 1);
  DetRng rng(5);
  Mat E = rng.vector(p1.C.rows() * p1.C.cols())
              .reshaped(p1.C.rows(), p1.C.cols());
  E = 0.5e-3 * (E + E.transpose());
  p1.C += E;
  round_projection(p1);
  CHECK(p1.idempotency_defect() <= 1e-12);
  CHECK(std::abs(p1.C.trace() - 32.0) <= 1e-8);

  // Half-way spectra sit outside the contraction basin and are rejected.
  SuperProjector bad;
  bad.F = Mat::Identity(20, 4);
  bad.C = 0.5 * Mat::Identity(4, 4);
  bad.n_band = 2;
  CHECK_THROWS_AS(round_projection(bad), NumericalError);
}

TEST_CASE("intertwiner requires the projector to stay near the band") {
  const Setup s = strip_setup(16, 6, 0.1, false);
  SuperProjector p = build_projector(s.op, s.band, 0);
  p.C.setZero();  // now ||P - P0|| = 1: the construction must refuse
  CHECK_THROWS_AS(sz_nagy(p), NumericalError);
}
