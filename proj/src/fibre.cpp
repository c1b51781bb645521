#include "adlim/fibre.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "adlim/errors.hpp"

namespace adlim {

FibreProblem::FibreProblem(const ModelGeometry& model, int n_z)
    : model_(&model), nz_(n_z) {
  if (model.kind == ModelKind::DirichletStrip) {
    sine_.emplace(n_z);
    mean_ = sine_->mean();
    if (model.v_fibre.is_zero()) {
      vf_matrix_ = Mat::Zero(n_z, n_z);
    } else {
      vf_matrix_ = sine_->potential_matrix(
          [&](double z) { return model.v_fibre.value(z); });
    }
  } else {
    fourier_.emplace(n_z);
    // Fibre means: only the constant slot integrates to a nonzero value,
    // sqrt(2 pi) in the angle measure.
    mean_ = Vec::Zero(n_z);
    mean_[0] = std::sqrt(2.0 * kPiConst);
    if (model.v_fibre.is_zero()) {
      vf_matrix_ = Mat::Zero(n_z, n_z);
    } else {
      // Galerkin matrix of v_f(theta) in the real Fourier basis via uniform
      // trapezoid quadrature (spectrally exact for smooth periodic v_f).
      const int q = std::max(512, 8 * n_z);
      Mat B(q, n_z);
      Vec vq(q);
      for (int i = 0; i < q; ++i) {
        double t = 2.0 * kPiConst * i / q;
        vq[i] = model.v_fibre.value(t);
        B(i, 0) = 1.0 / std::sqrt(2.0 * kPiConst);
        for (int s = 1; s < n_z; ++s) {
          int p = (s + 1) / 2;
          B(i, s) = (s % 2 == 1 ? std::cos(p * t) : std::sin(p * t)) /
                    std::sqrt(kPiConst);
        }
      }
      vf_matrix_ = B.transpose() * vq.asDiagonal() * B * (2.0 * kPiConst / q);
    }
  }
}

Mat FibreProblem::matrix(int node) const {
  const ModelGeometry& m = *model_;
  Mat H;
  if (sine_) {
    const double a = m.prof[node];
    H = (sine_->kinetic_diag() / (a * a)).asDiagonal();
  } else {
    const double ell = m.prof[node];
    const double c = 2.0 * kPiConst / ell;
    H = (c * c * fourier_->mode_sq()).asDiagonal();
  }
  if (!m.v_fibre.is_zero()) {
    H += m.vb[node] * vf_matrix_;
  } else if (!m.v_base.is_zero()) {
    // Potential depending on the base point only.
    H += m.vb[node] * Mat::Identity(nz_, nz_);
  }
  return H;
}

double FibreProblem::fibre_mean(const Vec& coeffs) const {
  return mean_.dot(coeffs);
}

FibreBand solve_band(const FibreProblem& fp, int n_bands) {
  const ModelGeometry& m = fp.model();
  const int n_x = m.base.n_x;
  const int n_z = fp.n_z();
  if (n_bands < 2) throw ConfigError("band solve needs n_bands >= 2");
  if (n_bands > n_z) throw ConfigError("band count exceeds fibre basis size");

  FibreBand band;
  band.n_x = n_x;
  band.n_z = n_z;
  band.n_bands = n_bands;
  band.lambda.resize(n_bands, n_x);
  band.band_vec.assign(n_bands, Mat(n_z, n_x));
  band.evals.resize(n_x);
  band.evecs.resize(n_x);

  Eigen::SelfAdjointEigenSolver<Mat> es;
  for (int i = 0; i < n_x; ++i) {
    es.compute(fp.matrix(i));
    if (es.info() != Eigen::Success) {
      throw NumericalError("fibre eigensolve failed at node " + std::to_string(i));
    }
    band.evals[i] = es.eigenvalues();
    band.evecs[i] = es.eigenvectors();
  }

  for (int k = 0; k < n_bands; ++k) {
    for (int i = 0; i < n_x; ++i) {
      Vec v = band.evecs[i].col(k);
      if (k == 0) {
        // Ground band: positive fibre mean pins a global smooth section.
        double mean = fp.fibre_mean(v);
        if (std::abs(mean) < 1e-12 * v.norm()) {
          throw NumericalError(
              "ground-band fibre mean is degenerate at node " +
              std::to_string(i) + "; sign convention undefined");
        }
        if (mean < 0.0) v = -v;
      } else if (i == 0) {
        // Higher bands: anchor the first node at its largest component ...
        int imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
      } else {
        // ... then chain signs by overlap with the previous node.
        if (v.dot(band.band_vec[k].col(i - 1)) < 0.0) v = -v;
      }
      band.band_vec[k].col(i) = v;
      band.lambda(k, i) = band.evals[i][k];
      // Keep the stored full eigenbasis consistent with the band section.
      band.evecs[i].col(k) = v;
    }
  }

  for (int i = 0; i < n_x; ++i) {
    int prev = (i + n_x - 1) % n_x;
    double ov = band.band_vec[0].col(i).dot(band.band_vec[0].col(prev));
    band.min_band_overlap = std::min(band.min_band_overlap, ov);
  }

  band.delta = (band.lambda.row(1) - band.lambda.row(0)).minCoeff();
  band.Lambda0 = band.lambda.row(0).minCoeff();
  band.Lambda1 = band.lambda.row(1).minCoeff();
  return band;
}

GapCertificate check_gap(const FibreBand& band, const ModelGeometry& model,
                         double floor) {
  int worst = 0;
  double gap = std::numeric_limits<double>::infinity();
  for (int i = 0; i < band.n_x; ++i) {
    double g = band.lambda(1, i) - band.lambda(0, i);
    if (g < gap) {
      gap = g;
      worst = i;
    }
  }
  if (!(gap > floor)) {
    std::ostringstream os;
    os << "fibre spectral gap " << gap << " at x = "
       << model.grid.nodes()[worst] << " is below the floor " << floor;
    throw NumericalError(os.str());
  }
  return GapCertificate{band.delta, band.Lambda0, band.Lambda1};
}

Mat reduced_resolvent(const FibreBand& band, int node) {
  const Vec& ev = band.evals[node];
  const Mat& V = band.evecs[node];
  const double l0 = ev[0];
  Mat R = Mat::Zero(band.n_z, band.n_z);
  for (int j = 1; j < band.n_z; ++j) {
    R.noalias() += (1.0 / (ev[j] - l0)) * V.col(j) * V.col(j).transpose();
  }
  return R;
}

Mat apply_reduced_resolvent(const FibreBand& band, const Mat& X) {
  const int n_z = band.n_z;
  if (X.rows() != static_cast<Eigen::Index>(band.n_x) * n_z) {
    throw ConfigError("row count does not match the node-major fibre layout");
  }
  Mat Y(X.rows(), X.cols());
  for (int i = 0; i < band.n_x; ++i) {
    const Vec& ev = band.evals[i];
    const Mat& V = band.evecs[i];
    // Coefficients in the local eigenbasis, band component zeroed.
    Mat C = V.transpose() * X.middleRows(static_cast<Eigen::Index>(i) * n_z, n_z);
    C.row(0).setZero();
    for (int j = 1; j < n_z; ++j) C.row(j) /= (ev[j] - ev[0]);
    Y.middleRows(static_cast<Eigen::Index>(i) * n_z, n_z).noalias() = V * C;
  }
  return Y;
}

}  // namespace adlim
