#include "adlim/reference.hpp"

#include <algorithm>
#include <cmath>

#include "adlim/errors.hpp"

namespace adlim {

FullOperator assemble_full(const ModelGeometry& model, const FibreProblem& fp,
                           double shift) {
  const int n_x = model.base.n_x;
  const int n_z = fp.n_z();
  const double eps = model.eps;
  const double w = model.grid.dx();

  FullOperator op;
  op.n_x = n_x;
  op.n_z = n_z;
  op.dim = static_cast<Eigen::Index>(n_x) * n_z;
  op.eps = eps;
  op.shift = shift;
  op.kind = model.kind;

  // Mass conjugation: R = diag(1/sqrt(w * weight_i)).  The strip keeps its
  // x-dependent fibre-volume weight here; warped models are assembled in the
  // flat-measure gauge instead (see below), so only the uniform dx falls out.
  const bool strip = model.kind == ModelKind::DirichletStrip;
  Vec rinv(n_x);
  for (int i = 0; i < n_x; ++i) {
    rinv[i] = 1.0 / std::sqrt(strip ? w * model.weight[i] : w);
  }

  // Staggered quadrature weights: the main kinetic term (weight eps^2) plus
  // the perturbation's kinetic term (eps * eps^2 * s, per its internal form).
  Vec W(n_x), Wg(n_x), Wgg(n_x);
  for (int j = 0; j < n_x; ++j) {
    double y = model.grid.staggered_nodes()[j];
    double gamma = model.profile.deriv(y) / model.profile.value(y);
    double base = w * (strip ? model.weight_stag[j] : 1.0) * eps * eps *
                  (1.0 + eps * model.h1_s_stag[j]);
    W[j] = base;
    Wg[j] = base * gamma;
    Wgg[j] = base * gamma * gamma;
  }

  // Flat-measure gauge for the warped model: conjugating the x-kinetic term
  // by the fibre-volume density costs the exact multiplication potential
  //   (1/2)(S gamma)' + (1/4) S gamma^2,  gamma = (log l)',
  // with S(x) the full x-kinetic density (including the perturbation's
  // eps * s part).  Carrying this potential analytically instead of
  // conjugating the assembled matrix keeps the fibre-constant sector exactly
  // unitarily equivalent to the adiabatic operator: a numerical conjugation
  // leaves an aliasing residue in the top grid modes that no resolution
  // removes.
  Vec vgeom = Vec::Zero(n_x);
  if (!strip) {
    for (int i = 0; i < n_x; ++i) {
      const double x = model.grid.nodes()[i];
      const double gamma = model.dprof[i] / model.prof[i];
      const double dgamma =
          model.d2prof[i] / model.prof[i] - gamma * gamma;
      const double dens = eps * eps * (1.0 + eps * model.h1_s[i]);
      const double ddens = eps * eps * eps * model.h1.s.deriv(x);
      vgeom[i] = 0.5 * (ddens * gamma + dens * dgamma) +
                 0.25 * dens * gamma * gamma;
    }
  }

  const Mat& Ds = model.grid.deriv_staggered();
  const Mat& S = model.grid.interp_staggered();
  auto conj = [&](Mat m) {
    for (int i = 0; i < n_x; ++i) m.row(i) *= rinv[i];
    for (int j = 0; j < n_x; ++j) m.col(j) *= rinv[j];
    return m;
  };
  op.Kxx = conj(Ds.transpose() * W.asDiagonal() * Ds);
  op.Kxx = 0.5 * (op.Kxx + op.Kxx.transpose()).eval();
  if (model.kind == ModelKind::DirichletStrip) {
    op.Kxc = conj(Ds.transpose() * Wg.asDiagonal() * S);
    op.Kcc = conj(S.transpose() * Wgg.asDiagonal() * S);
    op.Kcc = 0.5 * (op.Kcc + op.Kcc.transpose()).eval();
    op.G = fp.sine()->z_dz();
    op.S2 = fp.sine()->z_dz_gram();
  }

  op.fibre.reserve(n_x);
  for (int i = 0; i < n_x; ++i) {
    Mat block = fp.matrix(i);
    double pot = eps * eps * model.h1_v[i] + vgeom[i] - shift;
    if (pot != 0.0) block += pot * Mat::Identity(n_z, n_z);
    op.fibre.push_back(std::move(block));
  }

  op.fourier_symbol_sq = model.grid.fourier_symbol_sq();
  op.fourier_basis = model.grid.fourier_basis();
  op.fibre_diag_mean = Vec::Zero(n_z);
  for (int i = 0; i < n_x; ++i) op.fibre_diag_mean += op.fibre[i].diagonal();
  op.fibre_diag_mean /= n_x;
  return op;
}

Mat FullOperator::dense() const {
  const bool strip_terms = Kxc.size() > 0;
  Mat H(dim, dim);
  for (int j = 0; j < n_x; ++j) {
    for (int i = 0; i < n_x; ++i) {
      auto block = H.block(static_cast<Eigen::Index>(i) * n_z,
                           static_cast<Eigen::Index>(j) * n_z, n_z, n_z);
      if (strip_terms) {
        block.noalias() = (-Kxc(i, j)) * G;
        block.noalias() += (-Kxc(j, i)) * G.transpose();
        block.noalias() += Kcc(i, j) * S2;
        block.diagonal().array() += Kxx(i, j);
      } else {
        block.setZero();
        block.diagonal().array() += Kxx(i, j);
      }
      if (i == j) block += fibre[i];
    }
  }
  // The blocks are symmetric in exact arithmetic, but fused multiply-adds
  // round the (i,j) and (j,i) accumulations differently by an ulp; averaging
  // restores bitwise symmetry.
  H = 0.5 * (H + H.transpose()).eval();
  return H;
}

Mat FullOperator::apply(const Mat& X) const {
  if (X.rows() != dim) throw ConfigError("operand does not match operator size");
  const bool strip_terms = Kxc.size() > 0;
  Mat Y(dim, X.cols());
  Mat C(n_z, n_x), T(n_z, n_x);
  for (Eigen::Index v = 0; v < X.cols(); ++v) {
    // Column v reshaped node-major: C(:, i) = fibre slots at node i.
    C = Eigen::Map<const Mat>(X.col(v).data(), n_z, n_x);
    T.noalias() = C * Kxx;
    if (strip_terms) {
      Mat GC = G * C;
      Mat GtC = G.transpose() * C;
      T.noalias() -= GC * Kxc.transpose();
      T.noalias() -= GtC * Kxc;
      T.noalias() += (S2 * C) * Kcc;
    }
    for (int i = 0; i < n_x; ++i) {
      T.col(i).noalias() += fibre[i] * C.col(i);
    }
    Y.col(v) = Eigen::Map<const Vec>(T.data(), dim);
  }
  return Y;
}

Vec FullOperator::apply_vec(const Vec& x) const {
  return apply(Mat(x)).col(0);
}

double FullOperator::spectral_lower_bound() const {
  Eigen::SelfAdjointEigenSolver<Mat> es;
  double lo = std::numeric_limits<double>::infinity();
  for (const Mat& block : fibre) {
    es.compute(block, Eigen::EigenvaluesOnly);
    lo = std::min(lo, es.eigenvalues()[0]);
  }
  return lo;
}

Mat lift_band(const FibreBand& band, const Mat& base_vecs) {
  if (base_vecs.rows() != band.n_x) {
    throw ConfigError("base vector count does not match the band grid");
  }
  Mat out(static_cast<Eigen::Index>(band.n_x) * band.n_z, base_vecs.cols());
  for (Eigen::Index j = 0; j < base_vecs.cols(); ++j) {
    for (int i = 0; i < band.n_x; ++i) {
      out.col(j).segment(static_cast<Eigen::Index>(i) * band.n_z, band.n_z) =
          base_vecs(i, j) * band.band_vec[0].col(i);
    }
  }
  return out;
}

Mat band_frame(const FibreBand& band) {
  return lift_band(band, Mat::Identity(band.n_x, band.n_x));
}

ModelGeometry with_resolution(const ModelGeometry& model, int n_x) {
  BaseCircle base{model.base.L, n_x};
  if (model.kind == ModelKind::DirichletStrip) {
    return build_strip_model(base, model.profile, model.v_base, model.v_fibre,
                             model.h1, model.eps);
  }
  return build_warped_model(base, model.profile, model.v_base, model.h1,
                            model.eps);
}

double hausdorff_below(const Vec& a, const Vec& b, double cap) {
  std::vector<double> ta, tb;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a[i] <= cap) ta.push_back(a[i]);
  }
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    if (b[i] <= cap) tb.push_back(b[i]);
  }
  if (ta.empty() || tb.empty()) {
    throw NumericalError("spectral truncation below cap is empty");
  }
  auto one_sided = [](const std::vector<double>& from,
                      const std::vector<double>& to) {
    double worst = 0.0;
    for (double x : from) {
      double best = std::numeric_limits<double>::infinity();
      for (double y : to) best = std::min(best, std::abs(x - y));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(ta, tb), one_sided(tb, ta));
}

Pairing pair_nearest(const Vec& ref, const Vec& target) {
  Pairing p;
  p.index.resize(ref.size());
  std::vector<bool> taken(static_cast<std::size_t>(target.size()), false);
  for (Eigen::Index j = 0; j < ref.size(); ++j) {
    int best = -1;
    double bestd = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      double d = std::abs(ref[j] - target[i]);
      if (d < bestd) {
        bestd = d;
        best = static_cast<int>(i);
      }
    }
    p.index[static_cast<std::size_t>(j)] = best;
    if (best >= 0) {
      if (taken[static_cast<std::size_t>(best)]) p.collision = true;
      taken[static_cast<std::size_t>(best)] = true;
    }
  }
  return p;
}

}  // namespace adlim
