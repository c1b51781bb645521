// Experiment orchestration: builds the model at each sweep point, runs the
// solvers, fits rates, writes CSV, and audits the self-convergence guard.
//
// Every experiment writes `#`-prefixed metadata (tool version, model hash,
// resolutions, tolerances, shift, window) followed by one header row and
// %.17g data rows — deterministic byte-for-byte for a fixed config and build.
//
// Energy bookkeeping: ground-regime experiments subtract shift = Lambda0 from
// the operator (recorded in metadata) and report absolute energies with the
// shift added back, so CSV values are directly comparable across runs.
//
// Self-convergence guard: rate-bearing experiments recompute the windowed
// eigenvalues with (n_x, n_z) doubled at the largest sweep eps; a change of
// any reported eigenvalue by >= 1e-9 voids the run (NumericalError, exit 2).

#pragma once

#include <string>
#include <vector>

#include "adlim/adiabatic.hpp"
#include "adlim/config.hpp"
#include "adlim/fibre.hpp"
#include "adlim/rates.hpp"
#include "adlim/reference.hpp"

namespace adlim {

inline constexpr const char* kToolVersion = "adlim 1.0";
inline constexpr double kGuardTol = 1e-9;

// FNV-1a over the model's canonical description (kind, circumference,
// profiles); resolution-independent so refinements of one model share a hash.
std::string model_hash(const ExperimentConfig& cfg);

// Eigenvalues (absolute; the operator's shift added back) of the
// fibre-constant sector of a warped-model operator.  The warped assembly
// decouples that sector exactly; this certifies the decoupling (throws
// NumericalError if any coupling to nonconstant fibre modes appears) and
// dense-solves the n_x x n_x block.
Vec fibre_constant_sector_eigs(const FullOperator& op);

struct BandReport {
  Vec x, lambda0, lambda1, delta_x;
  GapCertificate gap;
  std::string csv_path;
};

struct EffectiveReport {
  Vec x, lambda0, berry, v_a;
  std::string route;      // which V_a evaluation path ran
  std::vector<double> eps;
  std::vector<Vec> spectra;  // H_a eigenvalues <= Lambda (absolute) per eps
  double lambda_abs = 0.0;
  double shift = 0.0;
  std::vector<std::string> csv_paths;
};

struct ProjectionRow {
  double eps = 0.0;
  int window_size = 0;      // eigenpairs below Lambda
  double comm_p0 = 0.0;     // ||[H, P^0] rho(H)||
  double comm_p1 = 0.0;     // ||[H, P^1] rho(H)||
  double comm_pn = 0.0;     // ||[H, P^N] rho(H)|| at the configured N
  double idem_raw = 0.0;    // ||(P^N)^2 - P^N|| before rounding
  double idem_rounded = 0.0;
  double dist_band = 0.0;   // ||P_eps - P0||
  double unitary_defect = 0.0;     // ||U^T U - I||
  double intertwine_defect = 0.0;  // ||(I - P_eps) U P0||
  double identity_defect = 0.0;    // ||U - I||
  int rank = 0;             // trace of the rounded projector
};

struct ProjectionReport {
  std::vector<ProjectionRow> rows;
  RateFit fit_comm_p0, fit_comm_p1, fit_dist;
  double lambda_abs = 0.0;
  double shift = 0.0;
  double guard_shift = -1.0;  // max eigenvalue change under doubling; -1 = off
  std::string csv_path;
};

struct ConvergenceRow {
  double eps = 0.0;
  int n_below = 0;        // full eigenvalues <= Lambda
  double haus_a = 0.0;    // Hausdorff dist, sigma(H) vs sigma(H_a)
  double haus_am = 0.0;   // same against sigma(H_a + M)
  Vec gaps;               // |lambda_j - mu_j| for the tracked pairs
  Vec r_l2, r_w1;         // eigenfunction residuals for the tracked pairs
  bool collision = false;     // pairing audit
  bool window_ok = true;      // tracked states inside Lambda0 + C eps^alpha
};

struct ConvergenceReport {
  std::vector<ConvergenceRow> rows;
  RateFit fit_haus_a, fit_haus_am;
  std::vector<RateFit> fit_gaps;  // one per tracked pair
  RateFit fit_rl2, fit_rw1;       // on the worst tracked residual
  double lambda_abs = 0.0;
  double shift = 0.0;
  double guard_shift = -1.0;
  std::string csv_path;
};

struct DynamicsRow {
  double eps = 0.0;
  int steps = 0;             // accepted step count (after halving)
  double err_final = 0.0;    // comparison error at T
  double step_guard_rel = 0.0;  // relative change under the last halving
  Vec times, errors;
};

struct DynamicsReport {
  std::vector<DynamicsRow> rows;
  RateFit fit_err;
  double lambda_abs = 0.0;
  double shift = 0.0;
  double guard_shift = -1.0;
  std::string csv_path;
  std::string summary_csv_path;
};

struct FullReport {
  std::vector<double> eps;
  std::vector<Vec> spectra;  // absolute eigenvalues <= Lambda per eps
  double lambda_abs = 0.0;
  double shift = 0.0;
  double guard_shift = -1.0;
  std::string csv_path;
};

struct VerifyCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyReport {
  std::vector<VerifyCheck> checks;
  bool passed = true;
};

BandReport run_bands(const ExperimentConfig& cfg);
EffectiveReport run_effective(const ExperimentConfig& cfg);
ProjectionReport run_projections(const ExperimentConfig& cfg);
ConvergenceReport run_convergence(const ExperimentConfig& cfg);
DynamicsReport run_dynamics(const ExperimentConfig& cfg);
FullReport run_full(const ExperimentConfig& cfg);
VerifyReport run_verify(const ExperimentConfig& cfg);

// Dispatch by kind name; returns printable result lines.  `passed` is false
// when a documented rate threshold is missed (CLI exit 3) — hard numerical
// failures throw instead (exit 2).
struct SpectralReport {
  std::string kind;
  std::vector<std::string> lines;
  bool passed = true;
};

SpectralReport run_experiment(const ExperimentConfig& cfg,
                              const std::string& kind);

}  // namespace adlim
