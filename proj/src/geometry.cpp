#include "adlim/geometry.hpp"

#include <cmath>

#include "adlim/errors.hpp"

namespace adlim {

namespace {

void check_base(const BaseCircle& base) {
  if (!(base.L > 0.0)) throw ConfigError("base circumference must be positive");
  if (base.n_x < 16 || base.n_x % 2 != 0) {
    throw ConfigError("base grid size must be even and at least 16");
  }
}

void check_eps(double eps) {
  if (!(eps > 0.0) || eps > 1.0) {
    throw ConfigError("eps must lie in (0, 1]");
  }
}

void check_periodic(const Profile& p, double L, const char* what) {
  if (!p.periodic_on(L)) {
    throw ConfigError(std::string(what) +
                      " profile is not periodic on the base circle (" +
                      p.describe() + ")");
  }
}

void check_positive(const Profile& p, double L, const char* what) {
  double lo = p.min_on_grid(L);
  if (!(lo > 0.0)) {
    throw ConfigError(std::string(what) + " profile must be strictly positive; " +
                      "sampled minimum is " + std::to_string(lo));
  }
}

}  // namespace

ModelGeometry::ModelGeometry(ModelKind k, BaseCircle b, Profile prof_in,
                             Profile vb_in, Profile vf_in, H1Spec h1_in,
                             double eps_in)
    : kind(k),
      base(b),
      profile(std::move(prof_in)),
      v_base(std::move(vb_in)),
      v_fibre(std::move(vf_in)),
      h1(std::move(h1_in)),
      eps(eps_in),
      grid(b.L, b.n_x) {
  // Separable potential v_b(x) * v_f(z): a lone v_f means v_b == 1, and a
  // lone v_b means v_f == 1 (handled downstream as a base-only potential).
  if (!v_fibre.is_zero() && v_base.is_zero()) {
    v_base = Profile::constant(1.0);
  }
  const int n = base.n_x;
  prof.resize(n);
  dprof.resize(n);
  d2prof.resize(n);
  vb.resize(n);
  h1_s.resize(n);
  h1_v.resize(n);
  prof_stag.resize(n);
  h1_s_stag.resize(n);
  weight.resize(n);
  weight_stag.resize(n);
  const double vol_factor =
      kind == ModelKind::WarpedCircleFibre ? 1.0 / (2.0 * kPiConst) : 1.0;
  for (int i = 0; i < n; ++i) {
    double x = grid.nodes()[i];
    double y = grid.staggered_nodes()[i];
    prof[i] = profile.value(x);
    dprof[i] = profile.deriv(x);
    d2prof[i] = profile.deriv2(x);
    vb[i] = v_base.value(x);
    h1_s[i] = h1.s.value(x);
    h1_v[i] = h1.v.value(x);
    prof_stag[i] = profile.value(y);
    h1_s_stag[i] = h1.s.value(y);
    weight[i] = vol_factor * prof[i];
    weight_stag[i] = vol_factor * prof_stag[i];
  }
}

ModelGeometry build_strip_model(const BaseCircle& base, const Profile& width,
                                const Profile& v_base, const Profile& v_fibre,
                                const H1Spec& h1, double eps) {
  check_base(base);
  check_eps(eps);
  check_periodic(width, base.L, "strip width");
  check_positive(width, base.L, "strip width");
  check_periodic(v_base, base.L, "base potential");
  check_periodic(h1.s, base.L, "perturbation weight");
  check_periodic(h1.v, base.L, "perturbation potential");
  return ModelGeometry(ModelKind::DirichletStrip, base, width, v_base, v_fibre,
                       h1, eps);
}

ModelGeometry build_warped_model(const BaseCircle& base, const Profile& length,
                                 const Profile& v_base, const H1Spec& h1,
                                 double eps) {
  check_base(base);
  check_eps(eps);
  check_periodic(length, base.L, "fibre circumference");
  check_positive(length, base.L, "fibre circumference");
  check_periodic(v_base, base.L, "base potential");
  check_periodic(h1.s, base.L, "perturbation weight");
  check_periodic(h1.v, base.L, "perturbation potential");
  return ModelGeometry(ModelKind::WarpedCircleFibre, base, length, v_base,
                       Profile(), h1, eps);
}

Vec shift_field_coefficient(const ModelGeometry& model) {
  const int n = model.base.n_x;
  Vec c(n);
  for (int i = 0; i < n; ++i) {
    c[i] = model.dprof[i] / model.prof[i];
  }
  return c;
}

Vec log_volume_derivative(const ModelGeometry& model) {
  const int n = model.base.n_x;
  Vec logv(n);
  for (int i = 0; i < n; ++i) {
    logv[i] = std::log(model.weight[i]);
  }
  return model.grid.deriv_primary() * logv;
}

}  // namespace adlim
