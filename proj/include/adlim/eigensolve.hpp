#pragma once
// Symmetric eigensolvers for the full operator.
//
// Two regimes, selected by dimension:
//  * dense shift-invert Lanczos: materialize the matrix, Cholesky-factor
//    H - sigma with sigma strictly below the spectrum (the fibre-block lower
//    bound makes sigma safe a priori), run Lanczos with full
//    reorthogonalization on the inverse, and certify every returned pair by
//    an explicit matrix-free residual check.
//  * LOBPCG with a separable preconditioner (base Fourier symbol + averaged
//    fibre diagonal), for dimensions where a dense factor does not fit in
//    memory; used by the resolution-doubling guard.
//
// Both paths are deterministic: start vectors come from a seeded xorshift
// generator, never from global entropy.

#include <cstdint>

#include "adlim/reference.hpp"

namespace adlim {

// Deterministic xorshift64* stream mapped to (-1, 1).
class DetRng {
 public:
  explicit DetRng(std::uint64_t seed) : s_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double next() {
    s_ ^= s_ >> 12;
    s_ ^= s_ << 25;
    s_ ^= s_ >> 27;
    std::uint64_t r = s_ * 0x2545f4914f6cdd1dull;
    return 2.0 * (static_cast<double>(r >> 11) / 9007199254740992.0) - 1.0;
  }
  Vec vector(Eigen::Index n) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = next();
    return v;
  }

 private:
  std::uint64_t s_;
};

struct SolveOpts {
  double tol = 1e-9;          // residual tolerance ||Hv - lv|| <= tol*max(1,|l|)
  Eigen::Index dense_limit = 13000;  // largest dimension for the dense path
  std::uint64_t seed = 0x5eed5eedULL;
  int max_basis = 520;        // Lanczos basis cap
  int max_iter = 250;         // LOBPCG iteration cap
  int window_hint = 12;       // expected count below cap (LOBPCG block sizing)
};

struct EigenPairs {
  Vec values;   // ascending
  Mat vectors;  // orthonormal columns matching values
  // True when the list provably contains every eigenvalue <= the request's
  // cap (a converged pair above the cap certifies completeness).
  bool complete_below = false;
};

// All eigenpairs with value <= cap (plus one certified pair above it).
EigenPairs eigenpairs_below(const FullOperator& op, double cap,
                            const SolveOpts& opts = {});

// The `count` lowest eigenpairs.
EigenPairs lowest_eigenpairs(const FullOperator& op, int count,
                             const SolveOpts& opts = {});

}  // namespace adlim
