#include "adlim/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace adlim {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

Quadrature gauss_legendre_01(int n) {
  if (n < 1) throw std::invalid_argument("quadrature order must be >= 1");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  // Roots of P_n on (-1, 1) by Newton iteration from the Chebyshev guess.
  for (int i = 0; i < n; ++i) {
    double t = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dP = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Evaluate P_n(t) and P_n'(t) by the three-term recurrence.
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dP = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dP;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    // Map (-1,1) -> (0,1); reverse order so nodes ascend.
    q.nodes[n - 1 - i] = 0.5 * (1.0 + t);
    q.weights[n - 1 - i] = 1.0 / ((1.0 - t * t) * dP * dP);
  }
  return q;
}

CircleGrid::CircleGrid(double circumference, int n_nodes)
    : L_(circumference), n_(n_nodes) {
  if (!(L_ > 0.0)) throw std::invalid_argument("circle circumference must be positive");
  if (n_ < 16 || n_ % 2 != 0) {
    throw std::invalid_argument("circle grid size must be even and >= 16");
  }
  x_.resize(n_);
  xs_.resize(n_);
  for (int i = 0; i < n_; ++i) {
    x_[i] = L_ * i / n_;
    xs_[i] = L_ * (i + 0.5) / n_;
  }

  // All three difference operators are circulant: precompute one column of
  // each by trigonometric mode summation, then fill by index difference.
  const int half = n_ / 2;
  const double scale = 2.0 * kPi / (L_ * n_);
  Vec ds(n_), s(n_), dp(n_);
  for (int d = 0; d < n_; ++d) {
    double acc_ds = 0.0, acc_s = 1.0, acc_dp = 0.0;
    const double th_s = 2.0 * kPi * (d + 0.5) / n_;  // staggered offset
    const double th_p = 2.0 * kPi * d / n_;          // primary offset
    for (int m = 1; m < half; ++m) {
      acc_ds -= 2.0 * m * std::sin(m * th_s);
      acc_s += 2.0 * std::cos(m * th_s);
      acc_dp -= 2.0 * m * std::sin(m * th_p);
    }
    // Nyquist mode: contributes to the staggered derivative (sin(pi(d+1/2))
    // = (-1)^d up to sign), vanishes at midpoints for interpolation, and is
    // annihilated by the antisymmetric primary derivative.
    acc_ds -= half * std::sin(half * th_s);
    ds[d] = scale * acc_ds;
    s[d] = acc_s / n_;
    dp[d] = scale * acc_dp;
  }
  Ds_.resize(n_, n_);
  S_.resize(n_, n_);
  Dp_.resize(n_, n_);
  for (int j = 0; j < n_; ++j) {
    for (int i = 0; i < n_; ++i) {
      int d = j - i;
      if (d < 0) d += n_;
      Ds_(j, i) = ds[d];
      S_(j, i) = s[d];
      Dp_(j, i) = dp[d];
    }
  }
  Lap_ = Ds_.transpose() * Ds_;
  Lap_ = 0.5 * (Lap_ + Lap_.transpose()).eval();
}

Vec CircleGrid::fourier_symbol_sq() const {
  Vec sym(n_);
  const double base = 2.0 * kPi / L_;
  sym[0] = 0.0;
  for (int p = 1; p < n_ / 2; ++p) {
    double s = base * p;
    sym[2 * p - 1] = s * s;
    sym[2 * p] = s * s;
  }
  double s = base * (n_ / 2);
  sym[n_ - 1] = s * s;
  return sym;
}

Mat CircleGrid::fourier_basis() const {
  Mat E(n_, n_);
  const double c0 = 1.0 / std::sqrt(static_cast<double>(n_));
  const double c1 = std::sqrt(2.0 / n_);
  for (int i = 0; i < n_; ++i) E(i, 0) = c0;
  for (int p = 1; p < n_ / 2; ++p) {
    for (int i = 0; i < n_; ++i) {
      double t = 2.0 * kPi * p * i / n_;
      E(i, 2 * p - 1) = c1 * std::cos(t);
      E(i, 2 * p) = c1 * std::sin(t);
    }
  }
  for (int i = 0; i < n_; ++i) {
    E(i, n_ - 1) = c0 * (i % 2 == 0 ? 1.0 : -1.0);
  }
  return E;
}

SineBasis::SineBasis(int n_modes) : n_(n_modes) {
  if (n_ < 4) throw std::invalid_argument("sine basis needs at least 4 modes");
  k2_.resize(n_);
  mean_.resize(n_);
  G_.resize(n_, n_);
  S2_.resize(n_, n_);
  const double sqrt2 = std::sqrt(2.0);
  for (int k = 1; k <= n_; ++k) {
    k2_[k - 1] = (k * kPi) * (k * kPi);
    mean_[k - 1] = sqrt2 * (1.0 - (k % 2 == 0 ? 1.0 : -1.0)) / (k * kPi);
  }
  for (int j = 1; j <= n_; ++j) {
    for (int k = 1; k <= n_; ++k) {
      double sgn = ((j + k) % 2 == 0) ? 1.0 : -1.0;
      if (j == k) {
        G_(j - 1, k - 1) = -0.5;
        S2_(j - 1, k - 1) = k * k * kPi * kPi / 3.0 + 0.5;
      } else {
        G_(j - 1, k - 1) =
            2.0 * static_cast<double>(j) * k * sgn /
            (static_cast<double>(k) * k - static_cast<double>(j) * j);
        double dm = static_cast<double>(j - k);
        double dp = static_cast<double>(j + k);
        S2_(j - 1, k - 1) =
            2.0 * static_cast<double>(j) * k * sgn * (1.0 / (dm * dm) + 1.0 / (dp * dp));
      }
    }
  }
}

FourierFibre::FourierFibre(int n_slots) : n_(n_slots) {
  if (n_ < 5) throw std::invalid_argument("fourier fibre basis needs at least 5 slots");
  m2_.resize(n_);
  m2_[0] = 0.0;
  for (int s = 1; s < n_; ++s) {
    int p = (s + 1) / 2;
    m2_[s] = static_cast<double>(p) * p;
  }
}

}  // namespace adlim
