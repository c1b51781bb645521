// Experiment configuration: a small sectioned key = value text format, strict
// about unknown keys so that archived configs stay trustworthy.
//
// Sections and keys (defaults in parentheses):
//
//   [model]
//     kind      = strip | warped            (strip)
//     profile   = expression in x           (strip "1.25 + 0.1*cos(1*x)",
//                                            warped "2*pi*(1 + 0.2*cos(1*x))")
//     v_base    = expression in x           (0; base factor of the potential)
//     v_fibre   = expression in x           (0; fibre factor, reference coord)
//     h1_s      = expression in x           (0; perturbation kinetic density)
//     h1_v      = expression in x           (0; perturbation potential)
//     length    = base circumference        (2*pi)
//
//   [numerics]
//     n_x        = base grid size, even     (256)
//     n_z        = fibre basis size         (32)
//     solver_tol = eigensolver residual     (1e-9)
//     dense_limit= largest dense-factor dim (13000)
//     dim_cap    = refuse n_x*n_z above this(40000)
//     seed       = RNG seed                 (0x5eed5eed)
//
//   [sweep]
//     epsilon       = decreasing list       (0.2, 0.141, 0.1, 0.071, 0.05)
//     order         = superadiabatic steps N(2)
//     alpha         = energy-window scaling (1)
//     window_const  = C in the shrinking window C*eps^alpha (8)
//     window_anchor = band0 | band1 | absolute   (band1)
//     window_offset = Lambda = anchor + offset   (-0.5)
//     count         = paired eigenvalues tracked (3)
//     time          = propagation horizon T     (1)
//     guard         = auto | on | off       (auto: on for rate-bearing kinds)
//
//   [output]
//     dir     = output directory            (out)
//     format  = csv                         (csv)
//
// `#` starts a comment.  Values may be double-quoted.  Every parse or
// validation problem is reported with its line number and token.

#pragma once

#include <string>
#include <vector>

#include "adlim/geometry.hpp"

namespace adlim {

enum class GuardMode { Auto, On, Off };
enum class WindowAnchor { Band0, Band1, Absolute };

struct ExperimentConfig {
  // [model]
  ModelKind kind = ModelKind::DirichletStrip;
  std::string profile_text;  // empty -> per-kind default
  std::string v_base_text;
  std::string v_fibre_text;
  std::string h1_s_text;
  std::string h1_v_text;
  double length = 2.0 * kPiConst;

  // [numerics]
  int n_x = 256;
  int n_z = 32;
  double solver_tol = 1e-9;
  int dense_limit = 13000;
  int dim_cap = 40000;
  std::uint64_t seed = 0x5eed5eedull;

  // [sweep]
  std::vector<double> epsilons = {0.2, 0.141, 0.1, 0.071, 0.05};
  int order = 2;
  double alpha = 1.0;
  double window_const = 8.0;
  WindowAnchor window_anchor = WindowAnchor::Band1;
  double window_offset = -0.5;
  int count = 3;
  double time_horizon = 1.0;
  GuardMode guard = GuardMode::Auto;

  // [output]
  std::string out_dir = "out";
  std::string format = "csv";

  // The profile expression actually in force (per-kind default when unset).
  std::string effective_profile_text() const;

  // Builds the model geometry at one sweep point (profiles parsed and
  // validated; throws ConfigError on bad expressions).
  ModelGeometry make_model(double eps) const;

  // Rate fits need >= 4 sweep points; single-point experiments don't.
  void require_rate_sweep() const;
};

// Parses and validates; throws ConfigError listing every problem with line
// and token.
ExperimentConfig parse_config(const std::string& text);

// Convenience: read a file, then parse_config.
ExperimentConfig load_config(const std::string& path);

}  // namespace adlim
