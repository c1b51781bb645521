#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "adlim/eigensolve.hpp"
#include "adlim/errors.hpp"
#include "adlim/fibre.hpp"
#include "adlim/geometry.hpp"
#include "adlim/propagate.hpp"
#include "adlim/reference.hpp"

using adlim::assemble_full;
using adlim::band_frame;
using adlim::BaseCircle;
using adlim::build_strip_model;
using adlim::build_warped_model;
using adlim::ConfigError;
using adlim::CVec;
using adlim::DetRng;
using adlim::eigenpairs_below;
using adlim::evolve_dense;
using adlim::FibreBand;
using adlim::FibreProblem;
using adlim::FullOperator;
using adlim::H1Spec;
using adlim::hausdorff_below;
using adlim::kPiConst;
using adlim::lift_band;
using adlim::lowest_eigenpairs;
using adlim::Mat;
using adlim::ModelGeometry;
using adlim::NumericalError;
using adlim::pair_nearest;
using adlim::Profile;
using adlim::propagate_cayley;
using adlim::propagate_cayley_sampled;
using adlim::solve_band;
using adlim::SolveOpts;
using adlim::Vec;
using adlim::with_resolution;

namespace {

// A strip with every operator term active: varying width, separable
// potential, and a second-order perturbation.  Small enough for dense
// oracles.
ModelGeometry busy_strip(int n_x, int n_z_unused, double eps) {
  (void)n_z_unused;
  return build_strip_model(
      BaseCircle{2.0 * kPiConst, n_x}, Profile::parse("1.25 + 0.1*cos(1*x)"),
      Profile::parse("0.5 + 0.2*cos(1*x)"), Profile::parse("cos(pi*x - pi/2)"),
      H1Spec{Profile::parse("1 + 0.3*cos(1*x)"), Profile::parse("0.1*cos(2*x)")},
      eps);
}

ModelGeometry flat_strip(int n_x, double eps) {
  return build_strip_model(BaseCircle{2.0 * kPiConst, n_x}, Profile::parse("1"),
                           Profile(), Profile(), H1Spec{}, eps);
}

FullOperator op_of(const ModelGeometry& m, int n_z, double shift = 0.0) {
  return assemble_full(m, FibreProblem(m, n_z), shift);
}

}  // namespace

TEST_CASE("separable models reproduce their exact spectra") {
  const double eps = 0.1;

  // Straight unit strip: eigenvalues eps^2 m^2 + k^2 pi^2.
  const ModelGeometry s = flat_strip(32, eps);
  const FullOperator H = op_of(s, 8);
  const auto pairs = lowest_eigenpairs(H, 10);
  std::vector<double> exact;
  for (int m = -16; m <= 16; ++m) {
    for (int k = 1; k <= 8; ++k) {
      exact.push_back(eps * eps * m * m + k * k * kPiConst * kPiConst);
    }
  }
  std::sort(exact.begin(), exact.end());
  for (int j = 0; j < 10; ++j) {
    CHECK(std::abs(pairs.values[j] - exact[static_cast<std::size_t>(j)]) <=
          1e-10 * std::max(1.0, std::abs(exact[static_cast<std::size_t>(j)])));
  }

  // Flat torus (constant warped circumference 2 pi): eps^2 m^2 + j^2.
  const ModelGeometry w = build_warped_model(BaseCircle{2.0 * kPiConst, 32},
                                             Profile::parse("2*pi"), Profile(),
                                             H1Spec{}, eps);
  const FullOperator Hw = op_of(w, 9);
  const auto wpairs = lowest_eigenpairs(Hw, 10);
  std::vector<double> wexact;
  for (int m = -16; m <= 16; ++m) {
    for (int j : {0, 1, 1, 4, 4, 9, 9, 16, 16}) {
      wexact.push_back(eps * eps * m * m + j);
    }
  }
  std::sort(wexact.begin(), wexact.end());
  for (int j = 0; j < 10; ++j) {
    CHECK(std::abs(wpairs.values[j] - wexact[static_cast<std::size_t>(j)]) <=
          1e-10 * std::max(1.0, std::abs(wexact[static_cast<std::size_t>(j)])));
  }
}

TEST_CASE("matrix-free application agrees with the materialized matrix") {
  const ModelGeometry m = busy_strip(24, 0, 0.15);
  const FullOperator op = op_of(m, 8, 1.0);
  const Mat H = op.dense();
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() == 0.0);

  DetRng rng(12345);
  Mat X(op.dim, 3);
  for (int c = 0; c < 3; ++c) X.col(c) = rng.vector(op.dim);
  const Mat AX = op.apply(X);
  const double scale = H.cwiseAbs().maxCoeff();
  CHECK((AX - H * X).cwiseAbs().maxCoeff() <= 1e-12 * scale);
  CHECK((op.apply_vec(X.col(0)) - AX.col(0)).cwiseAbs().maxCoeff() <=
        1e-13 * scale);

  // The recorded shift subtracts exactly from the diagonal.
  const Mat H0 = op_of(m, 8, 0.0).dense();
  CHECK((H - (H0 - Mat::Identity(op.dim, op.dim))).cwiseAbs().maxCoeff() <=
        1e-13 * scale);

  // Lower bound really bounds the dense spectrum.
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  CHECK(op.spectral_lower_bound() <= es.eigenvalues()[0] + 1e-12);
}

TEST_CASE("iterative eigensolvers match a dense oracle and certify residuals") {
  const ModelGeometry m = busy_strip(64, 0, 0.15);
  const FullOperator op = op_of(m, 16);  // dim 1024: above the direct cutoff
  const Mat H = op.dense();
  Eigen::SelfAdjointEigenSolver<Mat> es(H);

  const auto pairs = lowest_eigenpairs(op, 12);
  REQUIRE(pairs.values.size() >= 12);
  for (int j = 0; j < 12; ++j) {
    const double lam = pairs.values[j];
    CHECK(std::abs(lam - es.eigenvalues()[j]) <=
          1e-9 * std::max(1.0, std::abs(lam)));
    const Vec r = op.apply_vec(pairs.vectors.col(j)) - lam * pairs.vectors.col(j);
    CHECK(r.norm() <= 1e-9 * std::max(1.0, std::abs(lam)));
  }
  const Mat gram = pairs.vectors.transpose() * pairs.vectors;
  CHECK((gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() <=
        1e-10);

  // Deterministic: a repeated solve returns the same bits.
  const auto again = lowest_eigenpairs(op, 12);
  CHECK((pairs.values - again.values).norm() == 0.0);
  CHECK((pairs.vectors - again.vectors).norm() == 0.0);

  // The windowed request certifies completeness below its cap.
  const double cap = es.eigenvalues()[9] + 1e-6;
  const auto windowed = eigenpairs_below(op, cap);
  CHECK(windowed.complete_below);
  CHECK(windowed.values.size() >= 10);
  for (int j = 0; j < 10; ++j) {
    CHECK(std::abs(windowed.values[j] - es.eigenvalues()[j]) <=
          1e-9 * std::max(1.0, std::abs(windowed.values[j])));
  }

  // Forcing the subspace-iteration path at this size must not change physics.
  SolveOpts opts;
  opts.dense_limit = 500;
  const auto lob = lowest_eigenpairs(op, 8, opts);
  for (int j = 0; j < 8; ++j) {
    CHECK(std::abs(lob.values[j] - es.eigenvalues()[j]) <=
          5e-9 * std::max(1.0, std::abs(lob.values[j])));
  }
}

TEST_CASE("band frame: orthonormal lift whose projector fixes band states") {
  const ModelGeometry m = busy_strip(32, 0, 0.1);
  const FibreBand band = solve_band(FibreProblem(m, 10));
  const Mat phi = band_frame(band);
  CHECK(phi.rows() == 320);
  CHECK(phi.cols() == 32);
  CHECK((phi.transpose() * phi - Mat::Identity(32, 32)).cwiseAbs().maxCoeff() <=
        1e-13);

  DetRng rng(7);
  const Mat B = rng.vector(32 * 4).reshaped(32, 4);
  CHECK((lift_band(band, B) - phi * B).cwiseAbs().maxCoeff() <= 1e-14);

  // P0 acts as the identity on lifted states.
  const Mat lifted = phi * B;
  CHECK((phi * (phi.transpose() * lifted) - lifted).cwiseAbs().maxCoeff() <=
        1e-13);
}

TEST_CASE("complement block sits at the second band up to order eps") {
  const ModelGeometry m = busy_strip(32, 0, 0.2);
  const FullOperator op = op_of(m, 8);
  const FibreBand band = solve_band(FibreProblem(m, 8));
  const Mat phi = band_frame(band);
  const Mat H = op.dense();

  Eigen::HouseholderQR<Mat> qr(phi);
  const Mat Qfull = qr.householderQ() * Mat::Identity(op.dim, op.dim);
  const Mat Q = Qfull.rightCols(op.dim - 32);
  Eigen::SelfAdjointEigenSolver<Mat> es(Q.transpose() * H * Q);
  // Lambda1 with room C * eps, C = 5: the coupling is first order.
  CHECK(es.eigenvalues()[0] >= band.Lambda1 - 5.0 * 0.2);
}

TEST_CASE("resolution rebuild resamples the same model") {
  const ModelGeometry m = busy_strip(32, 0, 0.1);
  const ModelGeometry fine = with_resolution(m, 64);
  CHECK(fine.base.n_x == 64);
  CHECK(fine.eps == m.eps);
  CHECK(fine.kind == m.kind);
  for (int i = 0; i < 32; ++i) {
    // Coarse node i coincides with fine node 2i.
    CHECK(fine.prof[2 * i] == doctest::Approx(m.prof[i]).epsilon(1e-14));
    CHECK(fine.vb[2 * i] == doctest::Approx(m.vb[i]).epsilon(1e-14));
  }
}

TEST_CASE("Hausdorff distance below a cap, with audited truncation") {
  Vec a(3), b(3);
  a << 1.0, 2.0, 7.0;
  b << 1.0, 2.0, 7.0;
  CHECK(hausdorff_below(a, b, 10.0) == 0.0);

  Vec c(2), d(2);
  c << 1.0, 2.0;
  d << 1.1, 2.0;
  CHECK(hausdorff_below(c, d, 3.0) == doctest::Approx(0.1).epsilon(1e-14));
  // The cap removes 7.0 from one side only; the remaining sets coincide.
  Vec e(2);
  e << 1.0, 2.0;
  CHECK(hausdorff_below(a, e, 3.0) == 0.0);
  // An empty truncation cannot be compared.
  CHECK_THROWS_AS(hausdorff_below(a, b, 0.5), NumericalError);
}

TEST_CASE("nearest pairing reports double-claimed targets") {
  Vec ref(2), tgt(2);
  ref << 1.0, 1.04;
  tgt << 1.0, 2.0;
  const auto clash = pair_nearest(ref, tgt);
  CHECK(clash.index[0] == 0);
  CHECK(clash.index[1] == 0);
  CHECK(clash.collision);

  Vec ref2(3), tgt2(4);
  ref2 << 1.0, 2.0, 3.0;
  tgt2 << 0.9, 2.2, 3.3, 8.0;
  const auto ok = pair_nearest(ref2, tgt2);
  CHECK(ok.index[0] == 0);
  CHECK(ok.index[1] == 1);
  CHECK(ok.index[2] == 2);
  CHECK_FALSE(ok.collision);
}

TEST_CASE("Cayley propagation: unitary steps, exact eigenphase rotation") {
  const ModelGeometry m = build_strip_model(
      BaseCircle{2.0 * kPiConst, 32}, Profile::parse("1.25 + 0.1*cos(1*x)"),
      Profile(), Profile(), H1Spec{}, 0.2);
  const FibreProblem fp(m, 8);
  const FibreBand band = solve_band(fp);
  // Shift by the band bottom so the ground state's phase winds slowly and
  // the quadratic phase defect of the scheme stays far below tolerance.
  const FullOperator op = assemble_full(m, fp, band.Lambda0);

  const auto ground = lowest_eigenpairs(op, 1);
  const double lam = ground.values[0];
  CVec psi0 = ground.vectors.col(0).cast<std::complex<double>>();

  const double T = 1.0;
  const int steps = 1000;
  const auto run = propagate_cayley(op, psi0, T, steps);
  CHECK(run.steps == steps);
  CHECK(run.max_norm_drift <= 1e-12);
  CHECK(std::abs(run.psi.norm() - 1.0) <= 1e-10);

  const CVec expect = std::exp(std::complex<double>(0.0, -lam * T)) * psi0;
  CHECK((run.psi - expect).norm() <= 1e-8);

  // Sampling the trajectory does not change the arithmetic.
  const auto sampled = propagate_cayley_sampled(op, psi0, T, steps, 4);
  CHECK((sampled.states.col(0) - psi0).norm() == 0.0);
  CHECK((sampled.states.col(4) - run.psi).norm() == 0.0);

  // A superposition keeps its norm even though it dephases.
  const auto two = lowest_eigenpairs(op, 2);
  CVec mix = (two.vectors.col(0) + two.vectors.col(1))
                 .cast<std::complex<double>>() /
             std::sqrt(2.0);
  const auto run2 = propagate_cayley(op, mix, 0.5, 400);
  CHECK(std::abs(run2.psi.norm() - 1.0) <= 1e-10);

  CHECK_THROWS_AS(propagate_cayley(op, psi0, T, 0), ConfigError);
  CHECK_THROWS_AS(propagate_cayley_sampled(op, psi0, T, 10, 3), ConfigError);
  CHECK_THROWS_AS(propagate_cayley(op, CVec::Ones(5), T, 10), ConfigError);
}

TEST_CASE("dense evolution: eigendecomposition semigroup") {
  DetRng rng(42);
  Mat A = rng.vector(36).reshaped(6, 6);
  const Mat H = 0.5 * (A + A.transpose());
  CVec psi0 = CVec::Zero(6);
  psi0[0] = std::complex<double>(0.6, 0.0);
  psi0[3] = std::complex<double>(0.0, 0.8);

  const CVec full = evolve_dense(H, psi0, 1.0);
  CHECK(std::abs(full.norm() - psi0.norm()) <= 1e-13);
  const CVec part = evolve_dense(H, evolve_dense(H, psi0, 0.3), 0.7);
  CHECK((full - part).norm() <= 1e-12);

  // Short-time derivative check against -i H psi.
  const double h = 1e-6;
  const CVec dpsi = (evolve_dense(H, psi0, h) - psi0) / h;
  const CVec hpsi =
      (H * psi0.real()).cast<std::complex<double>>() +
      std::complex<double>(0.0, 1.0) *
          (H * psi0.imag()).cast<std::complex<double>>();
  const CVec ref = std::complex<double>(0.0, -1.0) * hpsi;
  CHECK((dpsi - ref).norm() <= 1e-5);
}
