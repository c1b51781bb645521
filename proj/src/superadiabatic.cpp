#include "adlim/superadiabatic.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <string>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

// E = coefficient matrix of the band projector in the frame: leading n_band
// identity block (the frame's leading columns are Phi by construction).
Mat band_block(Eigen::Index r, int n_band) {
  Mat e = Mat::Zero(r, r);
  e.topLeftCorner(n_band, n_band).setIdentity();
  return e;
}

double symmetric_spectral_norm(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw NumericalError("small symmetric eigensolve failed");
  }
  return std::max(std::abs(es.eigenvalues().minCoeff()),
                  std::abs(es.eigenvalues().maxCoeff()));
}

}  // namespace

double spectral_norm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() <= a.cols()) {
    Mat g = a * a.transpose();
    return std::sqrt(std::max(0.0, symmetric_spectral_norm(0.5 * (g + g.transpose()))));
  }
  Mat g = a.transpose() * a;
  return std::sqrt(std::max(0.0, symmetric_spectral_norm(0.5 * (g + g.transpose()))));
}

double SuperProjector::idempotency_defect() const {
  Mat d = C * C - C;
  return symmetric_spectral_norm(0.5 * (d + d.transpose()));
}

double SuperProjector::distance_to_band() const {
  Mat d = C - band_block(C.rows(), n_band);
  return symmetric_spectral_norm(0.5 * (d + d.transpose()));
}

Mat SuperProjector::apply(const Mat& x) const {
  return F * (C * (F.transpose() * x));
}

SuperProjector build_projector(const FullOperator& op, const FibreBand& band,
                               int order) {
  if (order < 0) throw ConfigError("projector order must be >= 0");
  SuperProjector p;
  p.n_band = band.n_x;
  p.F = band_frame(band);
  p.C = Mat::Identity(p.n_band, p.n_band);
  p.order = 0;

  for (int step = 0; step < order; ++step) {
    const Eigen::Index r = p.C.rows();
    const Mat e = band_block(r, p.n_band);

    // Idempotency defect, pushed off the band diagonal blocks.
    Mat d = p.C * p.C - p.C;
    Mat c_new = p.C + d - e * d - d * e;

    // Commutator correction: W = R_F([H, P] Phi).  With J = F^T Phi = [I; 0],
    // [H, P] Phi = (HF) (C J) - F (C F^T (HF) J).
    Mat hf = op.apply(p.F);
    Mat cj = p.C.leftCols(p.n_band);
    Mat comm = hf * cj - p.F * (p.C * (p.F.transpose() * hf.leftCols(p.n_band)));
    Mat w = apply_reduced_resolvent(band, comm);

    // Grow the frame by the genuinely new directions of W (two-pass
    // Gram-Schmidt against F, then rank-revealing QR: structurally
    // decoupled models excite nothing and the frame stays put).
    Mat w_res = w;
    for (int pass = 0; pass < 2; ++pass) {
      w_res.noalias() -= p.F * (p.F.transpose() * w_res);
    }
    Eigen::ColPivHouseholderQR<Mat> qr(w_res);
    qr.setThreshold(1e-10);
    const Eigen::Index m = qr.rank();

    Mat f_next(p.F.rows(), r + m);
    f_next.leftCols(r) = p.F;
    if (m > 0) {
      f_next.rightCols(m) =
          qr.householderQ() * Mat::Identity(p.F.rows(), m);
    }

    // New coefficient matrix: carry the corrected block, then subtract
    // K J^T + J K^T with K = F_next^T W.
    Mat c_next = Mat::Zero(r + m, r + m);
    c_next.topLeftCorner(r, r) = c_new;
    Mat k = f_next.transpose() * w;  // (r+m) x n_band
    c_next.leftCols(p.n_band) -= k;
    c_next.topRows(p.n_band) -= k.transpose();

    p.F = std::move(f_next);
    p.C = 0.5 * (c_next + c_next.transpose());
    p.order = step + 1;
  }
  return p;
}

void round_projection(SuperProjector& p, double tol) {
  Mat d = p.C * p.C - p.C;
  double defect = symmetric_spectral_norm(0.5 * (d + d.transpose()));
  if (defect >= 0.25) {
    throw NumericalError(
        "projection rounding outside its basin: ||C^2 - C|| = " +
        std::to_string(defect) + " >= 0.25 (eps too large for this order)");
  }
  for (int it = 0; it < 60; ++it) {
    if (defect <= tol) return;
    Mat c2 = p.C * p.C;
    p.C = 3.0 * c2 - 2.0 * (c2 * p.C);
    p.C = 0.5 * (p.C + p.C.transpose()).eval();
    d = p.C * p.C - p.C;
    defect = symmetric_spectral_norm(0.5 * (d + d.transpose()));
  }
  throw NumericalError("projection rounding failed to reach defect " +
                       std::to_string(tol));
}

Intertwiner sz_nagy(const SuperProjector& p) {
  const Eigen::Index r = p.C.rows();
  const Mat e = band_block(r, p.n_band);
  Mat delta = e - p.C;
  delta = 0.5 * (delta + delta.transpose()).eval();
  double dist = symmetric_spectral_norm(delta);
  if (dist >= 0.999) {
    throw NumericalError("projectors too far apart for the intertwiner: "
                         "||P - P0|| = " +
                         std::to_string(dist));
  }

  // Inverse square root of Y = I - delta^2 by Newton-Schulz; every iterate is
  // a polynomial in Y, hence symmetric and commuting with Y.
  Mat y = Mat::Identity(r, r) - delta * delta;
  y = 0.5 * (y + y.transpose()).eval();
  Mat x = Mat::Identity(r, r);
  bool converged = false;
  for (int it = 0; it < 150; ++it) {
    Mat resid = x * y * x - Mat::Identity(r, r);
    if (resid.cwiseAbs().maxCoeff() < 1e-14) {
      converged = true;
      break;
    }
    x = (0.5 * x * (3.0 * Mat::Identity(r, r) - y * x * x)).eval();
    x = 0.5 * (x + x.transpose()).eval();
  }
  if (!converged) {
    throw NumericalError("Newton-Schulz inverse square root did not converge");
  }

  // G0 = I - P0 - P + 2 P P0 = I + F g F^T;  U = G0 (I - (P0-P)^2)^{-1/2}
  // collapses to I + F ((I+g) X - I) F^T.
  Mat g = -e - p.C + 2.0 * p.C * e;
  Intertwiner w;
  w.u = (Mat::Identity(r, r) + g) * x - Mat::Identity(r, r);
  return w;
}

double orthogonality_defect(const SuperProjector& p, const Intertwiner& w) {
  (void)p;
  Mat d = w.u + w.u.transpose() + w.u.transpose() * w.u;
  return symmetric_spectral_norm(0.5 * (d + d.transpose()));
}

double intertwining_defect(const SuperProjector& p, const Intertwiner& w) {
  const Eigen::Index r = p.C.rows();
  const Mat e = band_block(r, p.n_band);
  Mat iu = Mat::Identity(r, r) + w.u;
  Mat d = (Mat::Identity(r, r) - p.C) * iu * e;
  return spectral_norm(d);
}

Mat moving_frame(const SuperProjector& p, const Intertwiner& w) {
  Mat iu_cols = w.u.leftCols(p.n_band);
  iu_cols.topRows(p.n_band) += Mat::Identity(p.n_band, p.n_band);
  return p.F * iu_cols;
}

Mat effective_matrix(const FullOperator& op, const Mat& theta) {
  Mat h = theta.transpose() * op.apply(theta);
  return 0.5 * (h + h.transpose());
}

Mat band_correction(const FullOperator& op, const FibreBand& band) {
  Mat phi = band_frame(band);
  Mat hphi = op.apply(phi);
  Mat b = hphi - phi * (phi.transpose() * hphi);
  Mat rb = apply_reduced_resolvent(band, b);
  Mat m = -(b.transpose() * rb);
  return 0.5 * (m + m.transpose());
}

double windowed_commutator_norm(const FullOperator& op,
                                const SuperProjector& p, const Mat& v) {
  // [H, P] V = (HF) C (F^T V) - F C ((HF)^T V), and ||A (V V^T)|| = ||A V||
  // for orthonormal V.
  Mat hf = op.apply(p.F);
  Mat fv = p.F.transpose() * v;
  Mat hv = hf.transpose() * v;
  Mat a = hf * (p.C * fv) - p.F * (p.C * hv);
  return spectral_norm(a);
}

}  // namespace adlim
