#include "balcons.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "json.hpp"

#include "balcons/expr.hpp"
#include "balcons/runner.hpp"
#include "balcons/systems.hpp"
#include "balcons/transforms.hpp"

using namespace balcons;

namespace {

thread_local std::string g_last_error;

bc_status status_from(const Error& e) {
  g_last_error = e.what();
  switch (e.kind()) {
    case ErrorKind::Parse: return BC_ERR_PARSE;
    case ErrorKind::Domain: return BC_ERR_DOMAIN;
    case ErrorKind::Invalid: return BC_ERR_INVALID;
    case ErrorKind::SingularMap: return BC_ERR_SINGULAR;
    case ErrorKind::Solver: return BC_ERR_SOLVER;
    case ErrorKind::Io: return BC_ERR_IO;
  }
  return BC_ERR_INTERNAL;
}

template <typename Fn>
bc_status guarded(Fn&& fn) {
  try {
    fn();
    return BC_OK;
  } catch (const Error& e) {
    return status_from(e);
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BC_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return BC_ERR_INTERNAL;
  }
}

bc_status invalid(const char* message) {
  g_last_error = message;
  return BC_ERR_INVALID;
}

}  // namespace

struct bc_expr {
  ScalarExpr expr;
};

struct bc_system {
  ConservationSystem sys;
};

struct bc_transform {
  TransformResult t;
};

extern "C" {

const char* bc_version(void) { return "0.1.0"; }

const char* bc_last_error(void) { return g_last_error.c_str(); }

bc_status bc_expr_parse(const char* text, const char* const* vars, int nvars,
                        bc_expr** out) {
  if (!text || !out || (nvars > 0 && !vars))
    return invalid("bc_expr_parse: null argument");
  return guarded([&] {
    std::set<std::string> allowed;
    for (int i = 0; i < nvars; ++i) allowed.insert(vars[i]);
    *out = new bc_expr{parse_expr(text, allowed)};
  });
}

bc_status bc_expr_eval(const bc_expr* e, const char* const* names,
                       const double* values, int n, double* out) {
  if (!e || !out || (n > 0 && (!names || !values)))
    return invalid("bc_expr_eval: null argument");
  return guarded([&] {
    Bindings bindings;
    for (int i = 0; i < n; ++i) bindings[names[i]] = values[i];
    *out = eval_expr(e->expr, bindings);
  });
}

bc_status bc_expr_diff(const bc_expr* e, const char* var, bc_expr** out) {
  if (!e || !var || !out) return invalid("bc_expr_diff: null argument");
  return guarded([&] { *out = new bc_expr{diff_expr(e->expr, var)}; });
}

bc_status bc_expr_print(const bc_expr* e, char* buf, size_t bufsize,
                        size_t* needed) {
  if (!e) return invalid("bc_expr_print: null expression");
  return guarded([&] {
    const std::string text = e->expr.str();
    if (needed) *needed = text.size() + 1;
    if (buf) {
      if (bufsize < text.size() + 1)
        fail(ErrorKind::Invalid, "bc_expr_print: buffer too small");
      std::memcpy(buf, text.c_str(), text.size() + 1);
    }
  });
}

void bc_expr_free(bc_expr* e) { delete e; }

bc_status bc_system_euler(const char* pressure, bc_system** out) {
  if (!pressure || !out) return invalid("bc_system_euler: null argument");
  return guarded([&] {
    const ScalarExpr p =
        parse_expr(pressure, {"U1", "U5"});
    *out = new bc_system{build_euler_system(p)};
  });
}

bc_status bc_system_custom(const char* const* fluxes, bc_system** out) {
  if (!fluxes || !out) return invalid("bc_system_custom: null argument");
  return guarded([&] {
    const std::set<std::string> caps = {"U1", "U2", "U3", "U4", "U5"};
    ConservationSystem sys;
    for (int k = 0; k < 12; ++k) {
      if (!fluxes[k]) fail(ErrorKind::Invalid, "null flux expression");
      sys.flux[k] = parse_expr(fluxes[k], caps);
    }
    validate_conservation(sys);
    *out = new bc_system{sys};
  });
}

bc_status bc_system_flux_eval(const bc_system* sys, int k, const double U[5],
                              double* out) {
  if (!sys || !U || !out) return invalid("bc_system_flux_eval: null argument");
  if (k < 1 || k > 12) return invalid("bc_system_flux_eval: k must be 1..12");
  return guarded([&] {
    Bindings b;
    for (int i = 0; i < 5; ++i) b["U" + std::to_string(i + 1)] = U[i];
    *out = eval_expr(sys->sys.flux[k - 1], b);
  });
}

void bc_system_free(bc_system* sys) { delete sys; }

bc_status bc_transform_create(const char* spec_json, const bc_system* sys,
                              bc_transform** out) {
  if (!spec_json || !sys || !out)
    return invalid("bc_transform_create: null argument");
  return guarded([&] {
    const nlohmann::json spec = nlohmann::json::parse(spec_json);
    *out = new bc_transform{transform_from_config(spec, sys->sys)};
  });
}

bc_status bc_transform_apply(const bc_transform* t, const double X[4],
                             const double U[5], double x[4], double u[5]) {
  if (!t || !X || !U || !x || !u)
    return invalid("bc_transform_apply: null argument");
  return guarded([&] {
    const auto [xx, uu] = t->t.map.apply({X[0], X[1], X[2], X[3]},
                                         {U[0], U[1], U[2], U[3], U[4]});
    for (int k = 0; k < 4; ++k) x[k] = xx[k];
    for (int k = 0; k < 5; ++k) u[k] = uu[k];
  });
}

bc_status bc_transform_apply_inverse(const bc_transform* t, const double x[4],
                                     const double u[5], double X[4],
                                     double U[5]) {
  if (!t || !x || !u || !X || !U)
    return invalid("bc_transform_apply_inverse: null argument");
  return guarded([&] {
    const auto [XX, UU] = t->t.map.apply_inverse(
        {x[0], x[1], x[2], x[3]}, {u[0], u[1], u[2], u[3], u[4]});
    for (int k = 0; k < 4; ++k) X[k] = XX[k];
    for (int k = 0; k < 5; ++k) U[k] = UU[k];
  });
}

bc_status bc_transform_element(const bc_transform* t, int k, const double x[4],
                               const double u[5], double* out) {
  if (!t || !x || !u || !out)
    return invalid("bc_transform_element: null argument");
  if (k < 1 || k > 16)
    return invalid("bc_transform_element: k must be 1..16");
  return guarded([&] {
    const Vec4 xx{x[0], x[1], x[2], x[3]};
    const Vec5 uu{u[0], u[1], u[2], u[3], u[4]};
    *out = (k <= 12) ? t->t.system.flux[k - 1](xx, uu)
                     : t->t.system.source[k - 13](xx, uu);
  });
}

void bc_transform_free(bc_transform* t) { delete t; }

bc_status bc_run_command(const char* command, const char* config_json,
                         const char* overrides_json, const char* out_dir,
                         char** report_json, int* pass) {
  if (!command || !config_json || !out_dir)
    return invalid("bc_run_command: null argument");
  return guarded([&] {
    bool ok = false;
    const std::string report = run_command_json(
        command, config_json, overrides_json ? overrides_json : "", out_dir,
        &ok);
    if (report_json) {
      *report_json = static_cast<char*>(std::malloc(report.size() + 1));
      if (!*report_json) fail(ErrorKind::Io, "out of memory");
      std::memcpy(*report_json, report.c_str(), report.size() + 1);
    }
    if (pass) *pass = ok ? 1 : 0;
  });
}

void bc_string_free(char* s) { std::free(s); }

}  // extern "C"
