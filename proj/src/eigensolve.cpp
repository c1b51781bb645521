#include "adlim/eigensolve.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

struct Request {
  // Exactly one of the two modes:
  bool below_mode = false;
  double cap = 0.0;  // below-mode: return every pair <= cap
  int count = 0;     // count-mode: return the `count` lowest pairs
};

EigenPairs finalize(const FullOperator& op, const Request& req, Vec values,
                    Mat vectors, double tol) {
  // Certify with explicit residuals on the full operator.
  Mat HV = op.apply(vectors);
  for (Eigen::Index j = 0; j < values.size(); ++j) {
    double r = (HV.col(j) - values[j] * vectors.col(j)).norm();
    if (r > tol * std::max(1.0, std::abs(values[j]))) {
      throw NumericalError("eigenpair residual " + std::to_string(r) +
                           " exceeds tolerance at eigenvalue " +
                           std::to_string(values[j]));
    }
  }
  EigenPairs out;
  if (req.below_mode) {
    // Keep everything below cap plus the certified pair above it.
    Eigen::Index keep = 0;
    while (keep < values.size() && values[keep] <= req.cap) ++keep;
    out.complete_below = keep < values.size();
    Eigen::Index total = std::min(values.size(), keep + 1);
    out.values = values.head(total);
    out.vectors = vectors.leftCols(total);
  } else {
    if (values.size() < req.count) {
      throw NumericalError("eigensolver returned fewer pairs than requested");
    }
    out.values = values.head(req.count);
    out.vectors = vectors.leftCols(req.count);
    out.complete_below = true;
  }
  return out;
}

// Dense direct solve for small problems (unit-test scale).
EigenPairs solve_direct(const FullOperator& op, const Request& req,
                        const SolveOpts& opts) {
  Eigen::SelfAdjointEigenSolver<Mat> es(op.dense());
  if (es.info() != Eigen::Success) {
    throw NumericalError("dense eigensolve failed");
  }
  return finalize(op, req, es.eigenvalues(), es.eigenvectors(), opts.tol);
}

// Block Lanczos with full reorthogonalization on (H - sigma)^{-1}.  The block
// form resolves degenerate eigenvalues (the separable models have exactly
// degenerate pairs) that single-vector Lanczos can only find through rounding
// noise.
EigenPairs solve_lanczos(const FullOperator& op, const Request& req,
                         const SolveOpts& opts) {
  const Eigen::Index n = op.dim;
  const int block = 4;
  const double sigma = op.spectral_lower_bound() - 0.5;

  Mat A = op.dense();
  A.diagonal().array() -= sigma;
  Eigen::LLT<Eigen::Ref<Mat>> llt(A);  // factor in place
  if (llt.info() != Eigen::Success) {
    throw NumericalError("shift-invert factorization failed (shift not below spectrum?)");
  }

  DetRng rng(opts.seed);
  const int kmax = static_cast<int>(
      std::min<Eigen::Index>(opts.max_basis, n));
  Mat V(n, kmax);
  Mat T = Mat::Zero(kmax, kmax);
  int k = 0;  // columns in use

  auto orthonormalize_block = [&](Mat& W, int against) {
    // Two passes of classical Gram-Schmidt against V[:, 0:against], then QR;
    // rank-deficient directions are replaced by fresh random vectors.
    for (int pass = 0; pass < 2; ++pass) {
      if (against > 0) {
        W.noalias() -= V.leftCols(against) * (V.leftCols(against).transpose() * W);
      }
    }
    Eigen::HouseholderQR<Mat> qr(W);
    Mat Q = qr.householderQ() * Mat::Identity(n, W.cols());
    Mat R = qr.matrixQR().topRows(W.cols()).triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < W.cols(); ++c) {
      if (std::abs(R(c, c)) < 1e-12) {
        // Deflated direction: restart it from noise, orthogonalized.
        Vec f = rng.vector(n);
        if (against > 0) {
          f -= V.leftCols(against) * (V.leftCols(against).transpose() * f);
        }
        f -= Q.leftCols(c) * (Q.leftCols(c).transpose() * f);
        Q.col(c) = f.normalized();
        R.row(c).setZero();
      }
    }
    W = Q;
    return R;
  };

  // Initial block.
  {
    Mat W(n, block);
    for (int c = 0; c < block; ++c) W.col(c) = rng.vector(n);
    orthonormalize_block(W, 0);
    V.leftCols(block) = W;
    k = block;
  }

  Vec prev_candidates;
  int stable_checks = 0;

  for (;;) {
    const int j0 = k - block;  // current block start
    Mat W = llt.solve(V.middleCols(j0, block));
    // Projected diagonal block.
    Mat Aj = V.middleCols(j0, block).transpose() * W;
    T.block(j0, j0, block, block) = 0.5 * (Aj + Aj.transpose());
    if (k + block > kmax) {
      throw NumericalError("Lanczos basis exhausted before convergence");
    }
    Mat R = orthonormalize_block(W, k);
    V.middleCols(k, block) = W;
    T.block(k, j0, block, block) = R;
    T.block(j0, k, block, block) = R.transpose();
    k += block;

    // Checkpoint every few block steps (and near the basis cap).
    if ((k / block) % 4 != 0 && k + block <= kmax) continue;

    Eigen::SelfAdjointEigenSolver<Mat> es(
        T.topLeftCorner(k - block, k - block));
    // Shift-invert Ritz values, largest mu = lowest lambda.
    Vec mu = es.eigenvalues();
    std::vector<int> order(static_cast<std::size_t>(mu.size()));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return mu[a] > mu[b]; });

    int want;
    if (req.below_mode) {
      want = 0;
      for (int idx : order) {
        if (mu[idx] <= 0.0) break;
        double lam = sigma + 1.0 / mu[idx];
        ++want;
        if (lam > req.cap) break;  // first value above the cap included
      }
    } else {
      want = std::min<int>(req.count, static_cast<int>(mu.size()));
    }
    if (want == 0 || want > k - block - 2) continue;  // need more basis

    Vec cand(want);
    for (int i = 0; i < want; ++i) cand[i] = sigma + 1.0 / mu[order[i]];

    bool stable = prev_candidates.size() == cand.size() &&
                  (prev_candidates - cand).cwiseAbs().maxCoeff() <
                      0.01 * opts.tol;
    prev_candidates = cand;
    if (stable) {
      ++stable_checks;
    } else {
      stable_checks = 0;
    }
    if (stable_checks < 1) {
      if (k + block > kmax) {
        throw NumericalError("Lanczos basis exhausted before convergence");
      }
      continue;
    }

    // Extract Ritz vectors and verify true residuals.
    Mat Y(n, want);
    for (int i = 0; i < want; ++i) {
      Y.col(i) = V.leftCols(k - block) * es.eigenvectors().col(order[i]);
      Y.col(i).normalize();
    }
    Mat HY = op.apply(Y);
    bool all_ok = true;
    for (int i = 0; i < want; ++i) {
      double r = (HY.col(i) - cand[i] * Y.col(i)).norm();
      if (r > 0.5 * opts.tol * std::max(1.0, std::abs(cand[i]))) {
        all_ok = false;
        break;
      }
    }
    if (!all_ok) {
      stable_checks = 0;
      if (k + block > kmax) {
        throw NumericalError("Lanczos residuals stalled above tolerance");
      }
      continue;
    }
    return finalize(op, req, cand, Y, opts.tol);
  }
}

// Matrix-free LOBPCG with a separable (base symbol + averaged fibre diagonal)
// preconditioner; used above the dense-factor limit.
EigenPairs solve_lobpcg(const FullOperator& op, const Request& req,
                        const SolveOpts& opts) {
  const Eigen::Index n = op.dim;
  const double sigma_pre = op.spectral_lower_bound() - 0.25;

  auto precondition = [&](const Mat& Rm) {
    Mat Out(Rm.rows(), Rm.cols());
    Mat C(op.n_z, op.n_x);
    for (Eigen::Index v = 0; v < Rm.cols(); ++v) {
      C = Eigen::Map<const Mat>(Rm.col(v).data(), op.n_z, op.n_x);
      Mat Chat = C * op.fourier_basis;
      for (int k = 0; k < op.n_z; ++k) {
        for (int m = 0; m < op.n_x; ++m) {
          double d = op.eps * op.eps * op.fourier_symbol_sq[m] +
                     op.fibre_diag_mean[k] - sigma_pre;
          Chat(k, m) /= std::max(d, 1e-8);
        }
      }
      Mat Cout = Chat * op.fourier_basis.transpose();
      Out.col(v) = Eigen::Map<const Vec>(Cout.data(), n);
    }
    return Out;
  };

  int want_hint = req.below_mode ? std::max(4, opts.window_hint) : req.count;
  for (int attempt = 0; attempt < 4; ++attempt) {
    const int b = want_hint + 8;
    DetRng rng(opts.seed + static_cast<std::uint64_t>(attempt));
    Mat X(n, b);
    for (int c = 0; c < b; ++c) X.col(c) = rng.vector(n);
    // Orthonormalize.
    Eigen::HouseholderQR<Mat> qr0(X);
    X = qr0.householderQ() * Mat::Identity(n, b);

    Mat P;  // previous search directions
    Mat HX = op.apply(X);
    Vec theta;
    for (int it = 0; it < opts.max_iter; ++it) {
      // Rayleigh-Ritz on span[X].
      Mat xtx = X.transpose() * HX;
      Eigen::SelfAdjointEigenSolver<Mat> rr(0.5 * (xtx + xtx.transpose()));
      theta = rr.eigenvalues();
      X = (X * rr.eigenvectors()).eval();
      HX = (HX * rr.eigenvectors()).eval();

      Mat Rres = HX - X * theta.asDiagonal();
      // Convergence: residuals of the pairs we actually need.  The block can
      // shrink if the trial basis loses rank, so bound by the live size.
      const int live = static_cast<int>(theta.size());
      int need = req.below_mode
                     ? [&] {
                         int c = 0;
                         while (c < live && theta[c] <= req.cap) ++c;
                         return std::min(c + 1, live - 2);
                       }()
                     : std::min(req.count, live - 2);
      bool done = need > 0;
      for (int i = 0; i < need; ++i) {
        if (Rres.col(i).norm() > opts.tol * std::max(1.0, std::abs(theta[i]))) {
          done = false;
          break;
        }
      }
      if (done) {
        if (req.below_mode && theta[need - 1] <= req.cap) {
          break;  // block too small to certify completeness; enlarge
        }
        return finalize(op, req, theta.head(need), X.leftCols(need), opts.tol);
      }

      Mat W = precondition(Rres);
      // Basis [X, W, P] -> orthonormalize -> Rayleigh-Ritz.
      Mat B(n, X.cols() + W.cols() + (P.size() ? P.cols() : 0));
      B.leftCols(X.cols()) = X;
      B.middleCols(X.cols(), W.cols()) = W;
      if (P.size()) B.rightCols(P.cols()) = P;
      // Rank-revealing orthonormalization.
      Eigen::ColPivHouseholderQR<Mat> qr(B);
      qr.setThreshold(1e-12);
      Eigen::Index rank = qr.rank();
      Mat Q = qr.householderQ() * Mat::Identity(n, rank);
      Mat HQ = op.apply(Q);
      Mat h = Q.transpose() * HQ;
      Eigen::SelfAdjointEigenSolver<Mat> rr2(0.5 * (h + h.transpose()));
      Mat Z = rr2.eigenvectors().leftCols(std::min<Eigen::Index>(b, rank));
      Mat Xnew = Q * Z;
      P = Xnew - X * (X.transpose() * Xnew);
      // Re-orthonormalize P cheaply.
      if (P.cols() > 0) {
        Eigen::HouseholderQR<Mat> qrp(P);
        P = qrp.householderQ() * Mat::Identity(n, P.cols());
      }
      X = Xnew;
      HX = HQ * Z;
    }
    // Either not converged or completeness not certified: grow the block.
    want_hint += 8;
  }
  throw NumericalError("LOBPCG failed to converge within the iteration budget");
}

EigenPairs solve(const FullOperator& op, const Request& req,
                 const SolveOpts& opts) {
  if (op.dim <= 600) return solve_direct(op, req, opts);
  if (op.dim <= opts.dense_limit) return solve_lanczos(op, req, opts);
  return solve_lobpcg(op, req, opts);
}

}  // namespace

EigenPairs eigenpairs_below(const FullOperator& op, double cap,
                            const SolveOpts& opts) {
  Request req;
  req.below_mode = true;
  req.cap = cap;
  return solve(op, req, opts);
}

EigenPairs lowest_eigenpairs(const FullOperator& op, int count,
                             const SolveOpts& opts) {
  if (count < 1) throw ConfigError("eigenpair count must be positive");
  Request req;
  req.count = count;
  return solve(op, req, opts);
}

}  // namespace adlim
