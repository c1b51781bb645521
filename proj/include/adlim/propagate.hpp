// Unitary time evolution for the comparison of full and effective dynamics.
//
// The full operator is propagated with the Cayley (Crank-Nicolson) scheme,
// which is unconditionally stable and exactly norm-preserving up to the
// residual of one linear solve per step; the step size is chosen by the
// caller, which halves it until the observable of interest stops moving.
// Small dense Hamiltonians (the effective operators) are evolved exactly
// through their eigendecomposition.

#pragma once

#include <Eigen/Dense>

#include "adlim/reference.hpp"

namespace adlim {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

struct PropagationResult {
  CVec psi;
  double max_norm_drift = 0.0;  // worst per-step change of the vector norm
  int steps = 0;
};

// Propagate psi0 over total_time in `steps` equal Cayley steps:
//   (I + i dt/2 H) psi_{n+1} = (I - i dt/2 H) psi_n.
// Each step is reduced to the symmetric positive definite system
// (I + (dt/2)^2 H^2) u = psi_n, solved matrix-free by conjugate gradients
// with a separable spectral preconditioner and warm starts along the
// trajectory; since I + (dt/2)^2 H^2 >= I, the inner residual bounds the
// state error, keeping the per-step norm drift below drift_tol.  Drift
// above drift_tol aborts, since the scheme is algebraically unitary and
// drift signals a broken solve.
PropagationResult propagate_cayley(const FullOperator& op, const CVec& psi0,
                                   double total_time, int steps,
                                   double drift_tol = 1e-12);

// As propagate_cayley, but records the state at samples+1 equally spaced
// times 0, T/samples, ..., T.  `steps` must be a positive multiple of
// `samples`; sampling a trajectory costs the same as propagating straight
// to T.
struct SampledPropagation {
  CMat states;  // dim x (samples + 1), column k = state at k * T / samples
  double max_norm_drift = 0.0;
  int steps = 0;
};

SampledPropagation propagate_cayley_sampled(const FullOperator& op,
                                            const CVec& psi0,
                                            double total_time, int steps,
                                            int samples,
                                            double drift_tol = 1e-12);

// Exact evolution exp(-i H t) psi0 for a small dense symmetric H.
CVec evolve_dense(const Mat& H, const CVec& psi0, double total_time);

}  // namespace adlim
