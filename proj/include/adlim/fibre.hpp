#pragma once
// Fibre-wise operator family H_F(x) and its eigenband data.
//
// At each base node x_i the fibre operator is a small symmetric matrix in the
// reference basis (sine basis on (0,1) for strips, real Fourier basis for
// warped circle fibres).  Plain l2-normalized coefficient vectors correspond
// to fibre functions normalized in the metric fibre measure, so all
// downstream modules can work with plain matrix algebra.
//
// Band continuity conventions: the ground band eigenvector is normalized to
// have positive fibre mean at every node (the ground state never changes
// sign, so this pins a globally smooth periodic section).  Higher bands are
// sign-chained by overlap with the previous node.

#include <vector>

#include "adlim/geometry.hpp"
#include "adlim/grid.hpp"

namespace adlim {

// Assembles H_F(x_i) in the reference basis.
class FibreProblem {
 public:
  FibreProblem(const ModelGeometry& model, int n_z);

  int n_z() const { return nz_; }
  const ModelGeometry& model() const { return *model_; }

  // Symmetric n_z x n_z matrix of H_F at base node i.
  Mat matrix(int node) const;

  // Fibre mean of a coefficient vector (integral of the represented function
  // over the reference fibre); sign anchor for the ground band.
  double fibre_mean(const Vec& coeffs) const;

  const SineBasis* sine() const { return sine_ ? &*sine_ : nullptr; }
  const FourierFibre* fourier() const { return fourier_ ? &*fourier_ : nullptr; }

 private:
  const ModelGeometry* model_;
  int nz_;
  std::optional<SineBasis> sine_;       // strip
  std::optional<FourierFibre> fourier_; // warped
  Mat vf_matrix_;  // Galerkin matrix of v_f in the reference basis
  Vec mean_;       // fibre means of basis functions
};

struct FibreBand {
  int n_x = 0;
  int n_z = 0;
  int n_bands = 0;

  Mat lambda;                 // (n_bands, n_x): band k eigenvalue at node i
  std::vector<Mat> band_vec;  // band k: (n_z, n_x) unit columns, sign-fixed

  // Complete per-node eigendata (ascending), for resolvents and oracles.
  std::vector<Vec> evals;  // node i: n_z eigenvalues
  std::vector<Mat> evecs;  // node i: orthonormal columns

  double delta = 0.0;    // min over nodes of lambda_1 - lambda_0
  double Lambda0 = 0.0;  // min over nodes of lambda_0
  double Lambda1 = 0.0;  // min over nodes of lambda_1
  double min_band_overlap = 1.0;  // min node-to-node ground overlap (diagnostic)
};

// Solves the fibre eigenproblem at every node and fixes band signs.
// n_bands >= 2 so the gap data is always available.
FibreBand solve_band(const FibreProblem& fp, int n_bands = 2);

struct GapCertificate {
  double delta;
  double Lambda0;
  double Lambda1;
};

// Verifies the uniform gap above the ground band; throws NumericalError
// naming the offending node when the gap is below `floor`.
GapCertificate check_gap(const FibreBand& band, const ModelGeometry& model,
                         double floor = 1e-8);

// Reduced resolvent of H_F(x_i) at the ground band energy:
//   R_F = sum_{j >= 1} (lambda_j - lambda_0)^{-1} v_j v_j^T,
// i.e. the inverse of (H_F - lambda_0) restricted off the band.
Mat reduced_resolvent(const FibreBand& band, int node);

// Applies the block-diagonal reduced resolvent to a full-space matrix whose
// rows are indexed node-major (node i block = fibre slots).  Column count is
// arbitrary.
Mat apply_reduced_resolvent(const FibreBand& band, const Mat& X);

}  // namespace adlim
