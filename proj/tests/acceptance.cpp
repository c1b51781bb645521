// Acceptance gate: ten pinned checks at desk scale, one [PASS]/[FAIL] line
// each, with the measured values and the tolerances they are held to.  Exit
// codes: 0 all criteria met, 1 at least one criterion missed, 2 a
// resolution-doubling guard voided a run.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adlim/adiabatic.hpp"
#include "adlim/config.hpp"
#include "adlim/eigensolve.hpp"
#include "adlim/errors.hpp"
#include "adlim/fibre.hpp"
#include "adlim/geometry.hpp"
#include "adlim/harness.hpp"
#include "adlim/profile.hpp"
#include "adlim/rates.hpp"
#include "adlim/reference.hpp"
#include "adlim/superadiabatic.hpp"

using namespace adlim;

namespace {

int g_failures = 0;
bool g_guard_void = false;

std::string fmt(double v) {
  std::ostringstream os;
  os.setf(std::ios::scientific);
  os.precision(2);
  os << v;
  return os.str();
}

std::string fmts(double v) {  // fixed, for slopes
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(3);
  os << v;
  return os.str();
}

void line(int id, bool ok, const std::string& name, const std::string& detail) {
  if (!ok) ++g_failures;
  std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << id << " ("
            << name << "): " << detail << std::endl;
}

// Runs one computation block; on failure every criterion it carries gets its
// own [FAIL] line, so the gate always prints exactly ten verdicts.
template <typename Fn>
void block(std::initializer_list<std::pair<int, const char*>> ids, Fn&& fn) {
  try {
    fn();
  } catch (const std::exception& err) {
    const std::string what = err.what();
    if (what.find("guard") != std::string::npos) g_guard_void = true;
    for (const auto& [id, name] : ids) {
      line(id, false, name, std::string("aborted: ") + what);
    }
  }
}

// Largest singular value of a tall matrix (via the small Gram block).
double tall_norm(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a.transpose() * a);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

Vec dense_spectrum(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  return es.eigenvalues();
}

// The 2pi-separable exact levels eps^2 m^2 + k^2 pi^2, lowest `count`.
Vec separable_levels(double eps, int k_min, int k_max, int count) {
  std::vector<double> all;
  for (int k = k_min; k <= k_max; ++k) {
    for (int m = 0; m <= 80; ++m) {
      const double v = eps * eps * m * m + k * k * kPiConst * kPiConst;
      all.push_back(v);
      if (m > 0) all.push_back(v);
    }
  }
  std::sort(all.begin(), all.end());
  Vec out(count);
  for (int i = 0; i < count; ++i) out[i] = all[static_cast<std::size_t>(i)];
  return out;
}

double max_rel_err(const Vec& got, const Vec& want) {
  double worst = 0.0;
  for (int i = 0; i < want.size(); ++i) {
    worst = std::max(worst, std::abs(got[i] - want[i]) / std::abs(want[i]));
  }
  return worst;
}

// ---------------------------------------------------------------------------

void criterion1() {
  const double eps = 0.1;
  const int n_x = 256, n_z = 32;
  const ModelGeometry m = build_strip_model(
      BaseCircle{2.0 * kPiConst, n_x}, Profile::parse("1"), Profile(),
      Profile(), H1Spec{}, eps);
  const FibreProblem fp(m, n_z);
  const FibreBand band = solve_band(fp);
  const FullOperator op = assemble_full(m, fp);

  const EigenPairs full = lowest_eigenpairs(op, 20);
  const double full_err = max_rel_err(full.values, separable_levels(eps, 1, 3, 20));

  const Vec k1 = separable_levels(eps, 1, 1, 20);
  const BerryData berry = adiabatic_potential(m, band);
  const Mat ha = assemble_adiabatic(m, band, berry).matrix;
  const double ha_err = max_rel_err(dense_spectrum(ha).head(20), k1);

  SuperProjector p = build_projector(op, band, 2);
  round_projection(p);
  const Intertwiner w = sz_nagy(p);
  const double dist = p.distance_to_band();
  const double idef = w.identity_defect();
  const Mat heff = effective_matrix(op, moving_frame(p, w));
  const double heff_err = max_rel_err(dense_spectrum(heff).head(20), k1);

  const bool ok = full_err <= 1e-10 && ha_err <= 1e-10 && heff_err <= 1e-10 &&
                  dist <= 1e-11 && idef <= 1e-11;
  line(1, ok, "separable exactness",
       "max rel eigenvalue err: full " + fmt(full_err) + ", adiabatic " +
           fmt(ha_err) + ", effective " + fmt(heff_err) +
           " (tol 1e-10); ||P_eps - P0|| = " + fmt(dist) +
           ", ||U - I|| = " + fmt(idef) + " (tol 1e-11)");
}

void criterion2() {
  const int n_x = 256, n_z = 33;
  double worst_comm = 0.0, worst_spec = 0.0, worst_va = 0.0;
  const Profile ell = Profile::parse("2*pi*(1 + 0.2*cos(1*x))");
  for (double eps : {0.2, 0.1, 0.05}) {
    const ModelGeometry m = build_warped_model(BaseCircle{2.0 * kPiConst, n_x},
                                               ell, Profile(), H1Spec{}, eps);
    const FibreProblem fp(m, n_z);
    const FibreBand band = solve_band(fp);
    const FullOperator op = assemble_full(m, fp);

    // ||[H, P0]|| = ||(I - P0) H P0||: both blocks of the commutator have
    // the same singular values, and the range of P0 is spanned by Phi.
    const Mat phi = band_frame(band);
    Mat b = op.apply(phi);
    b -= phi * (phi.transpose() * b);
    worst_comm = std::max(worst_comm, tall_norm(b));

    const BerryData berry = adiabatic_potential(m, band, 1e-8);
    const Mat ha = assemble_adiabatic(m, band, berry).matrix;
    const Vec sector = fibre_constant_sector_eigs(op);
    const Vec ha_eigs = dense_spectrum(ha);
    worst_spec =
        std::max(worst_spec, (ha_eigs - sector).cwiseAbs().maxCoeff());

    for (int i = 0; i < n_x; ++i) {
      const double x = m.grid.nodes()[i];
      const double u = 1.0 + 0.2 * std::cos(x);
      const double d1 = -0.2 * std::sin(x) / u;
      const double d2 = (-0.2 * std::cos(x) * u -
                         0.04 * std::sin(x) * std::sin(x)) /
                        (u * u);
      const double exact = 0.5 * d2 + 0.25 * d1 * d1;
      worst_va = std::max(worst_va, std::abs(berry.v_a[i] - exact));
    }
  }
  const bool ok = worst_comm <= 1e-12 && worst_spec <= 1e-9 && worst_va <= 1e-8;
  line(2, ok, "warped pipeline collapse",
       "max over eps in {0.2, 0.1, 0.05}: ||[H, P0]|| = " + fmt(worst_comm) +
           " (tol 1e-12), |sigma(H_a) - constant-sector| = " + fmt(worst_spec) +
           " (tol 1e-9), |V_a - (log l)''/2 - ((log l)')^2/4| = " +
           fmt(worst_va) + " (tol 1e-8, general-quadrature route cross-checked)");
}

void criterion3() {
  const int n_x = 256, n_z = 32;
  const ModelGeometry m = build_strip_model(
      BaseCircle{2.0 * kPiConst, n_x}, Profile::parse("1.25 + 0.1*cos(1*x)"),
      Profile(), Profile(), H1Spec{}, 0.1);
  const FibreBand band = solve_band(FibreProblem(m, n_z));
  const BerryData berry = adiabatic_potential(m, band);
  double worst = 0.0;
  for (int i = 0; i < n_x; ++i) {
    const double x = m.grid.nodes()[i];
    const double a = 1.25 + 0.1 * std::cos(x);
    const double da = -0.1 * std::sin(x);
    const double exact =
        (kPiConst * kPiConst / 3.0 + 0.25) * (da / a) * (da / a);
    worst = std::max(worst, std::abs(berry.v_a[i] - exact));
  }
  line(3, worst <= 1e-8, "strip adiabatic potential closed form",
       "max node error vs (pi^2/3 + 1/4)(a'/a)^2 = " + fmt(worst) +
           " (tol 1e-8, route " + berry.route + ")");
}

// Criteria 4 and 7 share one projection sweep.  The window Lambda1 - 0.5
// needs base modes up to eps_min^-1 sqrt(Lambda1 - 0.5 - Lambda0) ~ 77, so
// n_x = 192 (Nyquist 96) is the smallest grid that resolves every sweep
// point; 128 would saturate at eps = 0.05 and flatten the fitted rates.
void criteria_4_and_7(double* guard_out) {
  const ExperimentConfig cfg = parse_config(
      "[model]\n"
      "kind = strip\n"
      "[numerics]\n"
      "n_x = 192\n"
      "n_z = 24\n"
      "[sweep]\n"
      "epsilon = 0.2, 0.141, 0.1, 0.071, 0.05\n"
      "order = 2\n"
      "window_anchor = band1\n"
      "window_offset = -0.5\n"
      "[output]\n"
      "dir = acceptance_out/projections\n");
  const ProjectionReport rep = run_projections(cfg);
  *guard_out = rep.guard_shift;

  const bool ok4 = rep.fit_comm_p0.slope >= 0.9 && rep.fit_comm_p1.slope >= 1.8 &&
                   rep.fit_comm_p0.residual <= 0.15 &&
                   rep.fit_comm_p1.residual <= 0.15;
  line(4, ok4, "commutator hierarchy",
       "slope ||[H,P0]rho|| = " + fmts(rep.fit_comm_p0.slope) +
           " (>= 0.9), slope ||[H,P1]rho|| = " + fmts(rep.fit_comm_p1.slope) +
           " (>= 1.8); residuals " + fmts(rep.fit_comm_p0.residual) + ", " +
           fmts(rep.fit_comm_p1.residual) + " (<= 0.15)");

  double idem = 0.0, unit = 0.0, inter = 0.0;
  for (const auto& row : rep.rows) {
    idem = std::max(idem, row.idem_rounded);
    unit = std::max(unit, row.unitary_defect);
    inter = std::max(inter, row.intertwine_defect);
  }
  const bool ok7 = idem <= 1e-12 && unit <= 1e-10 && inter <= 1e-10 &&
                   rep.fit_dist.slope >= 0.9;
  line(7, ok7, "projection and unitary invariants",
       "max over sweep: ||P^2 - P|| = " + fmt(idem) +
           " (tol 1e-12), ||U^T U - I|| = " + fmt(unit) +
           ", ||(I-P)UP0|| = " + fmt(inter) +
           " (tol 1e-10); slope ||P - P0|| = " + fmts(rep.fit_dist.slope) +
           " (>= 0.9)");
}

// Criteria 5, 6 and 9 share one convergence sweep below Lambda0 + 2.
void criteria_5_6_9(double* guard_out) {
  const ExperimentConfig cfg = parse_config(
      "[model]\n"
      "kind = strip\n"
      "[numerics]\n"
      "n_x = 256\n"
      "n_z = 32\n"
      "[sweep]\n"
      "epsilon = 0.2, 0.141, 0.1, 0.071, 0.05\n"
      "window_anchor = band0\n"
      "window_offset = 2\n"
      "count = 3\n"
      "[output]\n"
      "dir = acceptance_out/convergence\n");
  const ConvergenceReport rep = run_convergence(cfg);
  *guard_out = rep.guard_shift;

  bool ok5 = rep.fit_gaps.size() == 3;
  std::string gap_txt;
  for (std::size_t j = 0; j < rep.fit_gaps.size(); ++j) {
    const double s = rep.fit_gaps[j].slope;
    ok5 = ok5 && s >= 2.7 && s <= 3.5;
    gap_txt += (j ? ", " : "") + fmts(s);
  }
  line(5, ok5, "paired eigenvalue gaps",
       "slopes |lambda_j - mu_j| = {" + gap_txt +
           "} (band [2.7, 3.5]); the profile's critical points force an "
           "eps^4 gap here, so slopes near 4 sit above the band");

  const double impr = rep.fit_haus_am.slope - rep.fit_haus_a.slope;
  const bool ok6 = rep.fit_haus_a.slope >= 1.8 && rep.fit_haus_am.slope >= 2.6 &&
                   impr >= 0.5;
  line(6, ok6, "Hausdorff rates with correction",
       "slope dist(sigma(H), sigma(H_a)) = " + fmts(rep.fit_haus_a.slope) +
           " (>= 1.8), with correction " + fmts(rep.fit_haus_am.slope) +
           " (>= 2.6), improvement " + fmts(impr) + " (>= 0.5)");

  const bool ok9 = rep.fit_rw1.slope >= 0.3 && rep.fit_rl2.slope >= 1.2;
  line(9, ok9, "eigenfunction residuals",
       "slope r_W1 = " + fmts(rep.fit_rw1.slope) +
           " (>= 0.3), slope r_L2 = " + fmts(rep.fit_rl2.slope) + " (>= 1.2)");
}

void criterion8(double* guard_out) {
  const ExperimentConfig cfg = parse_config(
      "[model]\n"
      "kind = strip\n"
      "[numerics]\n"
      "n_x = 128\n"
      "n_z = 24\n"
      "[sweep]\n"
      "epsilon = 0.2, 0.141, 0.1, 0.071, 0.05\n"
      "order = 1\n"
      "window_anchor = band0\n"
      "window_offset = 2\n"
      "time = 1\n"
      "[output]\n"
      "dir = acceptance_out/dynamics\n");
  const DynamicsReport rep = run_dynamics(cfg);
  *guard_out = rep.guard_shift;
  double step_guard = 0.0;
  for (const auto& row : rep.rows) {
    step_guard = std::max(step_guard, row.step_guard_rel);
  }
  const bool ok = rep.fit_err.slope >= 1.8 && step_guard < 0.01;
  line(8, ok, "propagator comparison dynamics",
       "slope of ||(e^{-iHT} - U e^{-iH_eff T} U^T) P rho(H) psi0|| = " +
           fmts(rep.fit_err.slope) +
           " (>= 1.8); dt-halving guard max rel change = " + fmt(step_guard) +
           " (< 1e-2)");
}

void criterion10(double proj_guard, double conv_guard, double dyn_guard) {
  std::string txt;
  bool ok = true;
  auto add = [&](const char* name, double v) {
    if (v < 0.0) {  // guard did not run for this sweep
      ok = false;
      txt += std::string(txt.empty() ? "" : ", ") + name + " missing";
      return;
    }
    ok = ok && v < kGuardTol;
    txt += std::string(txt.empty() ? "" : ", ") + name + " " + fmt(v);
  };
  add("projections", proj_guard);
  add("convergence", conv_guard);
  add("dynamics", dyn_guard);
  line(10, ok, "resolution-doubling guards",
       "max eigenvalue shift under doubling: " + txt + " (tol 1e-9)");
}

}  // namespace

int main() {
  std::cout << "acceptance gate (" << kToolVersion << ")" << std::endl;
  double proj_guard = -1.0, conv_guard = -1.0, dyn_guard = -1.0;

  block({{1, "separable exactness"}}, [] { criterion1(); });
  block({{2, "warped pipeline collapse"}}, [] { criterion2(); });
  block({{3, "strip adiabatic potential closed form"}}, [] { criterion3(); });
  block({{4, "commutator hierarchy"},
         {7, "projection and unitary invariants"}},
        [&] { criteria_4_and_7(&proj_guard); });
  block({{5, "paired eigenvalue gaps"},
         {6, "Hausdorff rates with correction"},
         {9, "eigenfunction residuals"}},
        [&] { criteria_5_6_9(&conv_guard); });
  block({{8, "propagator comparison dynamics"}}, [&] { criterion8(&dyn_guard); });
  block({{10, "resolution-doubling guards"}},
        [&] { criterion10(proj_guard, conv_guard, dyn_guard); });

  const int total = 10;
  std::cout << "SUMMARY: " << (total - g_failures) << "/" << total
            << " criteria passed" << std::endl;
  if (g_guard_void) return 2;
  return g_failures == 0 ? 0 : 1;
}
