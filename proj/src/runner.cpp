#include "balcons/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "balcons/verify.hpp"

namespace balcons {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kCapSet = {"U1", "U2", "U3", "U4", "U5"};
const std::set<std::string> kSpaceSet = {"x1", "x2", "x3", "x4"};

// Strict schema helper: every present key must be listed.
void check_keys(const json& j, const char* where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object())
    fail(ErrorKind::Invalid, std::string("config section '") + where +
                                 "' must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const char* name : allowed)
      if (key == name) {
        ok = true;
        break;
      }
    if (!ok)
      fail(ErrorKind::Invalid, std::string("unknown key '") + key + "' in '" +
                                   where + "'");
  }
}

const json& need(const json& j, const char* key, const char* where) {
  auto it = j.find(key);
  if (it == j.end())
    fail(ErrorKind::Invalid,
         std::string("missing key '") + key + "' in '" + where + "'");
  return *it;
}

double number_or(const json& j, const char* key, double fallback) {
  auto it = j.find(key);
  return it == j.end() ? fallback : it->get<double>();
}

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config fragment builders
// ---------------------------------------------------------------------------

ConservationSystem system_from_config(const json& j) {
  check_keys(j, "system", {"kind", "pressure", "fluxes", "gamma"});
  const std::string kind = need(j, "kind", "system").get<std::string>();
  if (kind == "euler") {
    const ScalarExpr pressure =
        parse_expr(need(j, "pressure", "system").get<std::string>(), kCapSet);
    return build_euler_system(pressure);
  }
  if (kind == "euler-energy") {
    const double gamma = number_or(j, "gamma", 1.4);
    const ScalarExpr g1 = ScalarExpr::constant(gamma - 1.0);
    const ScalarExpr half = ScalarExpr::constant(0.5);
    auto U = [](int k) {
      return ScalarExpr::variable("U" + std::to_string(k));
    };
    const ScalarExpr p =
        g1 * (U(5) - half * (U(2) * U(2) + U(3) * U(3) + U(4) * U(4)) / U(1));
    ConservationSystem sys;
    sys.flux[0] = U(2) * U(2) / U(1) + p;
    sys.flux[1] = U(2) * U(3) / U(1);
    sys.flux[2] = U(2) * U(4) / U(1);
    sys.flux[3] = U(2) * U(3) / U(1);
    sys.flux[4] = U(3) * U(3) / U(1) + p;
    sys.flux[5] = U(3) * U(4) / U(1);
    sys.flux[6] = U(2) * U(4) / U(1);
    sys.flux[7] = U(3) * U(4) / U(1);
    sys.flux[8] = U(4) * U(4) / U(1) + p;
    sys.flux[9] = U(2) * (U(5) + p) / U(1);
    sys.flux[10] = U(3) * (U(5) + p) / U(1);
    sys.flux[11] = U(4) * (U(5) + p) / U(1);
    return sys;
  }
  if (kind == "custom") {
    const json& fluxes = need(j, "fluxes", "system");
    if (!fluxes.is_array() || fluxes.size() != 12)
      fail(ErrorKind::Invalid, "system.fluxes must list the 12 flux strings");
    ConservationSystem sys;
    for (int k = 0; k < 12; ++k)
      sys.flux[k] = parse_expr(fluxes[k].get<std::string>(), kCapSet);
    validate_conservation(sys);
    return sys;
  }
  fail(ErrorKind::Invalid, "system.kind must be euler, euler-energy or custom");
}

GeneratorSpec transform_spec_from_config(const json& j) {
  check_keys(j, "transform",
             {"family", "a", "payload", "source_mode", "flow_steps"});
  GeneratorSpec spec;
  spec.family =
      family_from_name(need(j, "family", "transform").get<std::string>());
  spec.a = number_or(j, "a", 0.0);
  const json payload = j.value("payload", json::object());
  switch (spec.family) {
    case GeneratorFamily::Xi1:
    case GeneratorFamily::Xi2:
    case GeneratorFamily::Xi3:
    case GeneratorFamily::Xi4:
    case GeneratorFamily::Xi5:
    case GeneratorFamily::Xi6:
    case GeneratorFamily::Xi7:
    case GeneratorFamily::Xi8:
    case GeneratorFamily::Xi9:
    case GeneratorFamily::Xi10:
      check_keys(payload, "transform.payload", {"f"});
      spec.f = parse_expr(
          need(payload, "f", "transform.payload").get<std::string>(), kSpaceSet);
      break;
    case GeneratorFamily::Xi11: {
      check_keys(payload, "transform.payload", {"g"});
      const json& g = need(payload, "g", "transform.payload");
      if (!g.is_array() || g.size() != 4)
        fail(ErrorKind::Invalid, "transform.payload.g must list 4 expressions");
      for (int k = 0; k < 4; ++k)
        spec.g[k] = parse_expr(g[k].get<std::string>(), kSpaceSet);
      break;
    }
    case GeneratorFamily::Xi12:
      check_keys(payload, "transform.payload", {});
      break;
    case GeneratorFamily::EulerComposed: {
      check_keys(payload, "transform.payload",
                 {"mode", "m1", "m2", "m3", "time_shift_rate", "f1", "n1",
                  "n2", "n3"});
      const std::string mode = payload.value("mode", "profiles");
      auto expr_or_zero = [&](const char* key) {
        auto it = payload.find(key);
        return it == payload.end()
                   ? ScalarExpr::constant(0.0)
                   : parse_expr(it->get<std::string>(), {"x1"});
      };
      if (mode == "profiles") {
        spec.euler.mode = EulerComposedPayload::Mode::Profiles;
        spec.euler.time_shift_rate = number_or(payload, "time_shift_rate", 0.0);
        spec.euler.m1 = expr_or_zero("m1");
        spec.euler.m2 = expr_or_zero("m2");
        spec.euler.m3 = expr_or_zero("m3");
      } else if (mode == "generators") {
        spec.euler.mode = EulerComposedPayload::Mode::Generators;
        spec.euler.f1 = parse_expr(
            need(payload, "f1", "transform.payload").get<std::string>(), {"x1"});
        spec.euler.n1 = expr_or_zero("n1");
        spec.euler.n2 = expr_or_zero("n2");
        spec.euler.n3 = expr_or_zero("n3");
      } else {
        fail(ErrorKind::Invalid,
             "transform.payload.mode must be profiles or generators");
      }
      break;
    }
  }
  return spec;
}

TransformResult transform_from_config(const json& j,
                                      const ConservationSystem& sys) {
  const GeneratorSpec spec = transform_spec_from_config(j);
  switch (spec.family) {
    case GeneratorFamily::Xi1:
      return xi1_transform(sys, spec.f, spec.a);
    case GeneratorFamily::Xi2:
    case GeneratorFamily::Xi3:
    case GeneratorFamily::Xi4: {
      Xi234Options opts;
      opts.flow_steps = static_cast<int>(number_or(j, "flow_steps", 256));
      const std::string mode = j.value("source_mode", "frozen-state");
      if (mode == "frozen-state")
        opts.source_mode = Xi234SourceMode::FrozenState;
      else if (mode == "mixed-partial")
        opts.source_mode = Xi234SourceMode::MixedPartial;
      else
        fail(ErrorKind::Invalid,
             "transform.source_mode must be frozen-state or mixed-partial");
      const int axis = 2 + static_cast<int>(spec.family) -
                       static_cast<int>(GeneratorFamily::Xi2);
      return xi234_transform(sys, spec.f, axis, spec.a, opts);
    }
    case GeneratorFamily::Xi5:
    case GeneratorFamily::Xi6:
    case GeneratorFamily::Xi7:
    case GeneratorFamily::Xi8: {
      const int i = 1 + static_cast<int>(spec.family) -
                    static_cast<int>(GeneratorFamily::Xi5);
      return xi5to10_transform(sys, Xi5to10Kind::AddScaledU, i, spec.f, spec.a);
    }
    case GeneratorFamily::Xi9:
      return xi5to10_transform(sys, Xi5to10Kind::ExpScale, 0, spec.f, spec.a);
    case GeneratorFamily::Xi10:
      return xi5to10_transform(sys, Xi5to10Kind::AddFunction, 0, spec.f,
                               spec.a);
    case GeneratorFamily::Xi11:
      return xi11_transform(sys, spec.g, spec.a);
    case GeneratorFamily::Xi12: {
      auto [map, scaled] = xi12_transform(sys, spec.a);
      TransformResult out;
      out.map = map;
      out.system = conservation_to_balance(scaled);
      return out;
    }
    case GeneratorFamily::EulerComposed:
      return euler_composed_transform(sys, spec.euler, spec.a);
  }
  fail(ErrorKind::Invalid, "unhandled transform family");
}

SolverConfig solver_from_config(const json& j) {
  check_keys(j, "solver",
             {"cells", "domain", "cfl", "start_time", "end_time", "bc",
              "scheme", "snapshot_interval", "wave_speed_bound", "max_dt",
              "positivity_guard"});
  SolverConfig cfg;
  const json& cells = need(j, "cells", "solver");
  if (!cells.is_array() || cells.size() != 3)
    fail(ErrorKind::Invalid, "solver.cells must hold 3 integers");
  for (int d = 0; d < 3; ++d) cfg.cells[d] = cells[d].get<int>();
  const json& domain = need(j, "domain", "solver");
  check_keys(domain, "solver.domain", {"lo", "hi"});
  for (int d = 0; d < 3; ++d) {
    cfg.lo[d] = need(domain, "lo", "solver.domain")[d].get<double>();
    cfg.hi[d] = need(domain, "hi", "solver.domain")[d].get<double>();
  }
  cfg.cfl = number_or(j, "cfl", 0.45);
  cfg.start_time = number_or(j, "start_time", 0.0);
  cfg.end_time = number_or(j, "end_time", 0.0);
  const std::string bc = j.value("bc", "periodic");
  if (bc == "periodic")
    cfg.bc = SolverConfig::Bc::Periodic;
  else if (bc == "zero-gradient")
    cfg.bc = SolverConfig::Bc::ZeroGradient;
  else
    fail(ErrorKind::Invalid, "solver.bc must be periodic or zero-gradient");
  const std::string scheme = j.value("scheme", "euler");
  if (scheme == "euler")
    cfg.scheme = SolverConfig::Scheme::ForwardEuler;
  else if (scheme == "ssp-rk2")
    cfg.scheme = SolverConfig::Scheme::SspRk2;
  else
    fail(ErrorKind::Invalid, "solver.scheme must be euler or ssp-rk2");
  cfg.snapshot_interval = number_or(j, "snapshot_interval", 0.0);
  cfg.wave_speed_bound = number_or(j, "wave_speed_bound", 0.0);
  cfg.max_dt = number_or(j, "max_dt", 0.0);
  cfg.euler_positivity_guard = j.value("positivity_guard", false);
  validate_config(cfg);
  return cfg;
}

Field ic_from_config(const json& j) {
  check_keys(j, "ic",
             {"kind", "value", "center", "strength", "background", "gamma",
              "diaphragm", "left", "right", "components"});
  const std::string kind = need(j, "kind", "ic").get<std::string>();
  if (kind == "constant") {
    const json& v = need(j, "value", "ic");
    if (!v.is_array() || v.size() != 5)
      fail(ErrorKind::Invalid, "ic.value must hold 5 numbers");
    Vec5 state;
    for (int k = 0; k < 5; ++k) state[k] = v[k].get<double>();
    return Field::constant(state);
  }
  if (kind == "vortex") {
    const json center = j.value("center", json::array({0.0, 0.0}));
    const json bg = j.value("background", json::array({0.0, 0.0}));
    return isentropic_vortex_field(
        center[0].get<double>(), center[1].get<double>(),
        number_or(j, "strength", 1.0), bg[0].get<double>(),
        bg[1].get<double>(), number_or(j, "gamma", 1.4));
  }
  if (kind == "sod") {
    const double gamma = number_or(j, "gamma", 1.4);
    const double diaphragm = number_or(j, "diaphragm", 0.5);
    auto state = [&](const char* key, double rho0, double p0) {
      const json s = j.value(key, json::object());
      check_keys(s, "ic.left/right", {"rho", "u", "p"});
      return RiemannState{number_or(s, "rho", rho0), number_or(s, "u", 0.0),
                          number_or(s, "p", p0)};
    };
    const RiemannState L = state("left", 1.0, 1.0);
    const RiemannState R = state("right", 0.125, 0.1);
    return Field::analytic([=](const Vec4& x) {
      const RiemannState& s = (x[1] < diaphragm) ? L : R;
      const double E = s.p / (gamma - 1.0) + 0.5 * s.rho * s.u * s.u;
      return Vec5{s.rho, s.rho * s.u, 0.0, 0.0, E};
    });
  }
  if (kind == "expressions") {
    const json& comps = need(j, "components", "ic");
    if (!comps.is_array() || comps.size() != 5)
      fail(ErrorKind::Invalid, "ic.components must list 5 expressions");
    std::array<ScalarExpr, 5> exprs;
    for (int k = 0; k < 5; ++k)
      exprs[k] = parse_expr(comps[k].get<std::string>(), kSpaceSet);
    return Field::analytic(exprs);
  }
  fail(ErrorKind::Invalid,
       "ic.kind must be constant, vortex, sod or expressions");
}

// ---------------------------------------------------------------------------
// Report helpers
// ---------------------------------------------------------------------------

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string());
  out << text;
}

void write_json_file(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) fail(ErrorKind::Io, "cannot open " + path.string());
  out << j.dump(2) << '\n';
}

std::string check_table(const json& checks) {
  std::ostringstream os;
  os << std::left;
  os.width(30);
  os << "check";
  os.width(16);
  os << "value";
  os.width(16);
  os << "threshold";
  os << "result\n";
  os << std::string(68, '-') << '\n';
  for (const auto& c : checks) {
    os.width(30);
    os << c.value("name", "?");
    char vb[32], tb[32];
    std::snprintf(vb, sizeof vb, "%.6e", c.value("value", 0.0));
    std::snprintf(tb, sizeof tb, "%.6e", c.value("threshold", 0.0));
    os.width(16);
    os << vb;
    os.width(16);
    os << tb;
    os << (c.value("pass", false) ? "pass" : "FAIL") << '\n';
  }
  return os.str();
}

json convergence_json(const ConvergenceReport& rep) {
  json j;
  j["steps"] = rep.steps;
  j["norms"] = rep.norms;
  j["observed_order"] = rep.observed_order;
  j["window"] = {rep.window_lo, rep.window_hi};
  j["exact"] = rep.exact;
  j["pass"] = rep.pass;
  j["seed"] = rep.seed;
  return j;
}

void append_convergence_csv(std::string& csv, const std::string& name,
                            const ConvergenceReport& rep) {
  if (csv.empty()) csv = "check,step,norm\n";
  for (std::size_t i = 0; i < rep.steps.size(); ++i)
    csv += name + "," + format_g(rep.steps[i]) + "," + format_g(rep.norms[i]) +
           "\n";
}

SampleBox sample_box_from_config(const json& j) {
  SampleBox box;
  if (!j.contains("box")) return box;
  const json& b = j["box"];
  check_keys(b, "check.box", {"x_lo", "x_hi", "u_lo", "u_hi"});
  if (b.contains("x_lo"))
    for (int k = 0; k < 4; ++k) box.x_lo[k] = b["x_lo"][k].get<double>();
  if (b.contains("x_hi"))
    for (int k = 0; k < 4; ++k) box.x_hi[k] = b["x_hi"][k].get<double>();
  if (b.contains("u_lo"))
    for (int k = 0; k < 5; ++k) box.u_lo[k] = b["u_lo"][k].get<double>();
  if (b.contains("u_hi"))
    for (int k = 0; k < 5; ++k) box.u_hi[k] = b["u_hi"][k].get<double>();
  return box;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

CommandResult cmd_derive_system(const json& config,
                                const std::string& out_dir) {
  const ConservationSystem sys =
      system_from_config(need(config, "system", "config"));
  const json& tj = need(config, "transform", "config");

  json report;
  report["command"] = "derive-system";
  report["family"] = tj.value("family", "");
  report["a"] = tj.value("a", 0.0);

  const GeneratorSpec spec = transform_spec_from_config(tj);
  json elements;
  std::ostringstream human;

  if (spec.family == GeneratorFamily::Xi12) {
    auto [map, scaled] = xi12_transform(sys, spec.a);
    (void)map;
    human << "rescaled autonomous conservation system (no production terms)\n";
    for (int k = 0; k < 12; ++k) {
      elements["P" + std::to_string(k + 1)] = scaled.flux[k].str();
      human << "  P" << k + 1 << " = " << scaled.flux[k].str() << '\n';
    }
    for (int k = 13; k <= 16; ++k) elements["p" + std::to_string(k)] = "0";
  } else {
    const TransformResult t = transform_from_config(tj, sys);
    if (!t.system.closed_form())
      fail(ErrorKind::Invalid,
           "this transform has no closed-form induced elements; use the "
           "numeric evaluators through the verify/pipeline commands instead");
    human << "induced balance-law elements over (x1..x4, u1..u5)\n";
    for (int k = 0; k < 12; ++k) {
      const std::string text = t.system.flux[k].expression().str();
      elements["p" + std::to_string(k + 1)] = text;
      human << "  p" << k + 1 << " = " << text << '\n';
    }
    for (int m = 0; m < 4; ++m) {
      const std::string text = t.system.source[m].expression().str();
      elements["p" + std::to_string(13 + m)] = text;
      human << "  p" << 13 + m << " = " << text << '\n';
    }
  }
  report["elements"] = elements;
  write_json_file(fs::path(out_dir) / "derived_system.json", report);
  write_text(fs::path(out_dir) / "derived_system.txt", human.str());
  return {true, report};
}

CommandResult cmd_solve(const json& config, const std::string& out_dir) {
  const SolverConfig cfg = solver_from_config(need(config, "solver", "config"));
  const Field ic = ic_from_config(need(config, "ic", "config"));

  Field out;
  std::string label;
  if (config.contains("balance")) {
    const json& bj = config["balance"];
    check_keys(bj, "balance", {"kind", "omega", "g", "signs", "pressure"});
    const std::string kind = need(bj, "kind", "balance").get<std::string>();
    if (kind != "rotating-gravity")
      fail(ErrorKind::Invalid, "balance.kind must be rotating-gravity");
    RotationSigns signs;
    if (bj.contains("signs")) {
      signs.s2 = bj["signs"][0].get<double>();
      signs.s3 = bj["signs"][1].get<double>();
    }
    const BalanceSystem sys = rotating_gravity_system(
        number_or(bj, "omega", 0.0), number_or(bj, "g", 0.0),
        parse_expr(need(bj, "pressure", "balance").get<std::string>(), kCapSet),
        signs);
    out = solve_balance_splitting(sys, ic, cfg);
    label = "balance";
  } else {
    const ConservationSystem sys =
        system_from_config(need(config, "system", "config"));
    out = solve_conservation(sys, ic, cfg);
    label = "autonomous";
  }
  write_field_csv(out, (fs::path(out_dir) / "fields" / label).string());

  json report;
  report["command"] = "solve";
  report["route"] = label;
  report["snapshots"] = out.snapshots().size();
  report["final_time"] = out.snapshots().back().time;
  write_json_file(fs::path(out_dir) / "reports" / "solve.json", report);
  return {true, report};
}

CommandResult cmd_transform(const json& config, const std::string& out_dir) {
  const ConservationSystem sys =
      system_from_config(need(config, "system", "config"));
  const TransformResult t =
      transform_from_config(need(config, "transform", "config"), sys);
  const Field ic = ic_from_config(need(config, "ic", "config"));
  const SolverConfig cfg = solver_from_config(need(config, "solver", "config"));

  const Field pushed = pushforward_field(t.map, ic);
  // Sample the pushed-forward surface on the configured grid/time window.
  const GridSpec grid = cfg.grid();
  std::vector<Field::Snapshot> snaps;
  const double window = cfg.end_time - cfg.start_time;
  const double interval =
      cfg.snapshot_interval > 0.0 ? cfg.snapshot_interval : window;
  double t_s = cfg.start_time;
  for (;;) {
    Field::Snapshot snap;
    snap.time = t_s;
    snap.data.resize(5 * grid.cell_count());
    for (int i4 = 0; i4 < grid.cells[2]; ++i4)
      for (int i3 = 0; i3 < grid.cells[1]; ++i3)
        for (int i2 = 0; i2 < grid.cells[0]; ++i2) {
          const Vec4 x{t_s, grid.center(0, i2), grid.center(1, i3),
                       grid.center(2, i4)};
          const Vec5 u = pushed(x);
          const std::size_t cell =
              (static_cast<std::size_t>(i4) * grid.cells[1] + i3) *
                  grid.cells[0] +
              i2;
          for (int k = 0; k < 5; ++k) snap.data[5 * cell + k] = u[k];
        }
    snaps.push_back(std::move(snap));
    if (interval <= 0.0 || t_s >= cfg.end_time - 1e-12) break;
    t_s = std::min(t_s + interval, cfg.end_time);
  }
  const Field sampled = Field::discrete(grid, std::move(snaps));
  write_field_csv(sampled,
                  (fs::path(out_dir) / "fields" / "pushforward").string());

  json report;
  report["command"] = "transform";
  report["snapshots"] = sampled.snapshots().size();
  write_json_file(fs::path(out_dir) / "reports" / "transform.json", report);
  return {true, report};
}

CommandResult cmd_verify(const json& config, const std::string& out_dir) {
  const json& vj = need(config, "verify", "config");
  check_keys(vj, "verify", {"checks", "seed"});
  const std::uint64_t seed =
      vj.contains("seed") ? vj["seed"].get<std::uint64_t>() : 0x62616c636fULL;

  json checks = json::array();
  std::string conv_csv;
  bool all_pass = true;

  const json& list = need(vj, "checks", "verify");
  int index = 0;
  for (const json& cj : list) {
    check_keys(cj, "verify.checks[]",
               {"type", "name", "samples", "tolerance", "b", "steps", "box",
                "points", "h0", "levels", "order_window", "max_norm"});
    const std::string type = need(cj, "type", "check").get<std::string>();
    const std::string name =
        cj.value("name", type + "#" + std::to_string(index));
    ++index;
    json entry;
    entry["name"] = name;
    entry["type"] = type;
    entry["seed"] = seed;

    if (type == "identity" || type == "round-trip" || type == "group-law" ||
        type == "closed-vs-flow") {
      const GeneratorSpec spec =
          transform_spec_from_config(need(config, "transform", "config"));
      const int samples = static_cast<int>(number_or(cj, "samples", 100));
      const double tol = number_or(cj, "tolerance", 1e-10);
      const SampleBox box = sample_box_from_config(cj);
      double value = 0.0;
      if (type == "identity")
        value = identity_check(spec, samples, seed, box);
      else if (type == "round-trip")
        value = round_trip_check(spec, samples, seed + 1, box);
      else if (type == "group-law")
        value = group_law_check(spec, spec.a, number_or(cj, "b", spec.a * 0.5),
                                samples, seed + 2, box);
      else
        value = closed_vs_flow_check(
            spec, samples, static_cast<int>(number_or(cj, "steps", 256)),
            seed + 3, box);
      entry["value"] = value;
      entry["threshold"] = tol;
      entry["pass"] = value <= tol;
    } else if (type == "divergence-free") {
      const GeneratorSpec spec =
          transform_spec_from_config(need(config, "transform", "config"));
      if (spec.family != GeneratorFamily::Xi11)
        fail(ErrorKind::Invalid,
             "divergence-free check needs an XI11 transform");
      const DivergenceReport rep = check_divergence_free(spec.g);
      entry["value"] = rep.max_abs;
      entry["threshold"] = rep.tolerance;
      entry["pass"] = rep.pass;
    } else if (type == "residual-transfer") {
      const ConservationSystem sys =
          system_from_config(need(config, "system", "config"));
      const TransformResult t =
          transform_from_config(need(config, "transform", "config"), sys);
      const Field ic = ic_from_config(need(config, "ic", "config"));
      const Field pushed = pushforward_field(t.map, ic);
      Vec4 lo{0.0, -1.0, -1.0, -1.0}, hi{0.5, 1.0, 1.0, 1.0};
      if (cj.contains("box")) {
        check_keys(cj["box"], "check.box", {"x_lo", "x_hi", "u_lo", "u_hi"});
        for (int k = 0; k < 4; ++k) {
          lo[k] = cj["box"]["x_lo"][k].get<double>();
          hi[k] = cj["box"]["x_hi"][k].get<double>();
        }
      }
      const int npoints = static_cast<int>(number_or(cj, "points", 200));
      const double h0 = number_or(cj, "h0", 4e-3);
      const int levels = static_cast<int>(number_or(cj, "levels", 3));
      double wlo = 1.7, whi = 2.3;
      if (cj.contains("order_window")) {
        wlo = cj["order_window"][0].get<double>();
        whi = cj["order_window"][1].get<double>();
      }
      const auto pts = sample_points(npoints, lo, hi, seed + 7);
      ConvergenceReport rep = residual_convergence(
          &t.system, pushed, pts, {h0, h0, h0, h0}, levels, wlo, whi);
      rep.seed = seed + 7;
      if (cj.contains("max_norm")) {
        const double bound = cj["max_norm"].get<double>();
        entry["value"] = rep.norms[0];
        entry["threshold"] = bound;
        entry["pass"] = rep.norms[0] <= bound;
      } else {
        entry["value"] = rep.observed_order;
        entry["threshold"] = whi;
        entry["pass"] = rep.pass;
      }
      entry["convergence"] = convergence_json(rep);
      append_convergence_csv(conv_csv, name, rep);
    } else {
      fail(ErrorKind::Invalid, "unknown verify check type '" + type + "'");
    }
    all_pass = all_pass && entry["pass"].get<bool>();
    checks.push_back(entry);
  }

  json report;
  report["command"] = "verify";
  report["seed"] = seed;
  report["checks"] = checks;
  report["pass"] = all_pass;
  write_json_file(fs::path(out_dir) / "reports" / "verify.json", report);
  write_text(fs::path(out_dir) / "reports" / "verify.txt",
             check_table(checks));
  if (!conv_csv.empty())
    write_text(fs::path(out_dir) / "reports" / "convergence.csv", conv_csv);
  return {all_pass, report};
}

CommandResult cmd_compare(const json& config, const std::string& out_dir) {
  const json& cj = need(config, "compare", "config");
  check_keys(cj, "compare",
             {"a_dir", "b_dir", "norm", "time", "region", "threshold"});
  const Field fa =
      read_field_csv(need(cj, "a_dir", "compare").get<std::string>());
  const Field fb =
      read_field_csv(need(cj, "b_dir", "compare").get<std::string>());

  SampleRegion region;
  const GridSpec& g = fa.grid();
  const double t = cj.contains("time") ? cj["time"].get<double>()
                                       : fa.snapshots().back().time;
  region.lo = {t, g.lo[0], g.lo[1], g.lo[2]};
  region.hi = {t, g.hi[0], g.hi[1], g.hi[2]};
  region.counts = {1, g.cells[0], g.cells[1], g.cells[2]};
  if (cj.contains("region")) {
    const json& rj = cj["region"];
    check_keys(rj, "compare.region", {"lo", "hi", "counts"});
    for (int k = 0; k < 4; ++k) {
      region.lo[k] = rj["lo"][k].get<double>();
      region.hi[k] = rj["hi"][k].get<double>();
      region.counts[k] = rj["counts"][k].get<int>();
    }
  }
  const std::string norm_name = cj.value("norm", "L1");
  const Norm norm = norm_name == "Linf" ? Norm::Linf : Norm::L1;
  const double value = compare_fields(fa, fb, norm, region);

  json report;
  report["command"] = "compare";
  report["norm"] = norm_name;
  report["value"] = value;
  bool pass = true;
  if (cj.contains("threshold")) {
    report["threshold"] = cj["threshold"].get<double>();
    pass = value <= cj["threshold"].get<double>();
  }
  report["pass"] = pass;
  write_json_file(fs::path(out_dir) / "reports" / "compare.json", report);
  return {pass, report};
}

CommandResult cmd_pipeline(const json& config, const std::string& out_dir) {
  const json pj = config.value("pipeline", json::object());
  check_keys(pj, "pipeline",
             {"residual", "splitting", "compare_norm", "compare_region"});

  const ConservationSystem sys =
      system_from_config(need(config, "system", "config"));
  const TransformResult t =
      transform_from_config(need(config, "transform", "config"), sys);
  const Field ic = ic_from_config(need(config, "ic", "config"));
  const SolverConfig cfg = solver_from_config(need(config, "solver", "config"));

  json report;
  report["command"] = "pipeline";
  json checks = json::array();
  std::string conv_csv;
  bool all_pass = true;

  // Stage 1: autonomous solve.
  const Field autonomous = solve_conservation(sys, ic, cfg);
  write_field_csv(autonomous,
                  (fs::path(out_dir) / "fields" / "autonomous").string());
  report["stages"]["solve"] = {
      {"snapshots", autonomous.snapshots().size()},
      {"final_time", autonomous.snapshots().back().time}};

  // Stage 2: residual transfer of the exact solution surface through the map.
  // The configured initial condition is taken as a space-time exact solution
  // of the autonomous system (constant states, vortex); the pushed-forward
  // surface must satisfy the induced balance system.
  const Field pushed_exact = pushforward_field(t.map, ic);
  {
    const json rj = pj.value("residual", json::object());
    check_keys(rj, "pipeline.residual",
               {"points", "h0", "levels", "order_window", "box", "max_norm",
                "seed"});
    Vec4 lo{cfg.start_time, cfg.lo[0], cfg.lo[1], cfg.lo[2]};
    Vec4 hi{cfg.end_time, cfg.hi[0], cfg.hi[1], cfg.hi[2]};
    if (rj.contains("box")) {
      for (int k = 0; k < 4; ++k) {
        lo[k] = rj["box"]["x_lo"][k].get<double>();
        hi[k] = rj["box"]["x_hi"][k].get<double>();
      }
    }
    const std::uint64_t seed =
        rj.contains("seed") ? rj["seed"].get<std::uint64_t>() : 0x70697065ULL;
    const auto pts = sample_points(
        static_cast<int>(number_or(rj, "points", 200)), lo, hi, seed);
    const double h0 = number_or(rj, "h0", 4e-3);
    double wlo = 1.7, whi = 2.3;
    if (rj.contains("order_window")) {
      wlo = rj["order_window"][0].get<double>();
      whi = rj["order_window"][1].get<double>();
    }
    ConvergenceReport rep = residual_convergence(
        &t.system, pushed_exact, pts, {h0, h0, h0, h0},
        static_cast<int>(number_or(rj, "levels", 3)), wlo, whi);
    rep.seed = seed;
    json entry;
    entry["name"] = "residual-transfer";
    if (rj.contains("max_norm")) {
      entry["value"] = rep.norms[0];
      entry["threshold"] = rj["max_norm"].get<double>();
      entry["pass"] = rep.norms[0] <= rj["max_norm"].get<double>();
    } else {
      entry["value"] = rep.observed_order;
      entry["threshold"] = whi;
      entry["pass"] = rep.pass;
    }
    entry["convergence"] = convergence_json(rep);
    append_convergence_csv(conv_csv, "residual-transfer", rep);
    all_pass = all_pass && entry["pass"].get<bool>();
    checks.push_back(entry);
  }

  // Stage 3 (optional): splitting route and two-route comparison.
  if (pj.contains("splitting")) {
    const json& sj = pj["splitting"];
    check_keys(sj, "pipeline.splitting",
               {"balance", "omega", "g", "pressure", "signs", "threshold"});
    const std::string kind = sj.value("balance", "induced");
    BalanceSystem balance = t.system;
    if (kind == "rotating-gravity") {
      RotationSigns signs;
      if (sj.contains("signs")) {
        signs.s2 = sj["signs"][0].get<double>();
        signs.s3 = sj["signs"][1].get<double>();
      }
      balance = rotating_gravity_system(
          number_or(sj, "omega", 0.0), number_or(sj, "g", 0.0),
          parse_expr(
              need(sj, "pressure", "pipeline.splitting").get<std::string>(),
              kCapSet),
          signs);
    } else if (kind != "induced") {
      fail(ErrorKind::Invalid,
           "pipeline.splitting.balance must be induced or rotating-gravity");
    }

    // Route (b): splitting from the pushed-forward initial state.
    const Field split = solve_balance_splitting(balance, pushed_exact, cfg);
    write_field_csv(split,
                    (fs::path(out_dir) / "fields" / "splitting").string());

    // Route (a): pushforward of the discrete autonomous solution.
    const Field pushed_numeric = pushforward_field(t.map, autonomous);

    SampleRegion region;
    const double tend = split.snapshots().back().time;
    region.lo = {tend, cfg.lo[0], cfg.lo[1], cfg.lo[2]};
    region.hi = {tend, cfg.hi[0], cfg.hi[1], cfg.hi[2]};
    region.counts = {1, cfg.cells[0], cfg.cells[1], cfg.cells[2]};
    if (pj.contains("compare_region")) {
      const json& rj = pj["compare_region"];
      check_keys(rj, "pipeline.compare_region", {"lo", "hi", "counts"});
      for (int k = 0; k < 4; ++k) {
        region.lo[k] = rj["lo"][k].get<double>();
        region.hi[k] = rj["hi"][k].get<double>();
        region.counts[k] = rj["counts"][k].get<int>();
      }
      region.lo[0] = region.hi[0] = tend;
    }
    const std::string norm_name = pj.value("compare_norm", "L1");
    const double value =
        compare_fields(pushed_numeric, split,
                       norm_name == "Linf" ? Norm::Linf : Norm::L1, region);
    json entry;
    entry["name"] = "two-route-difference";
    entry["value"] = value;
    entry["threshold"] = number_or(sj, "threshold", 0.0);
    entry["pass"] =
        !sj.contains("threshold") || value <= sj["threshold"].get<double>();
    all_pass = all_pass && entry["pass"].get<bool>();
    checks.push_back(entry);
  }

  report["checks"] = checks;
  report["pass"] = all_pass;
  write_json_file(fs::path(out_dir) / "reports" / "pipeline.json", report);
  write_text(fs::path(out_dir) / "reports" / "pipeline.txt",
             check_table(checks));
  if (!conv_csv.empty())
    write_text(fs::path(out_dir) / "reports" / "convergence.csv", conv_csv);
  return {all_pass, report};
}

void validate_top_level(const json& config) {
  check_keys(config, "config",
             {"seed", "system", "transform", "solver", "ic", "balance",
              "verify", "compare", "pipeline", "output"});
  if (config.contains("output"))
    check_keys(config["output"], "output", {"directory", "formats"});
}

}  // namespace

CommandResult run_command(const std::string& command, const json& config,
                          const std::string& out_dir) {
  validate_top_level(config);
  fs::create_directories(out_dir);
  write_json_file(fs::path(out_dir) / "resolved-config.json", config);

  if (command == "derive-system") return cmd_derive_system(config, out_dir);
  if (command == "solve") return cmd_solve(config, out_dir);
  if (command == "transform") return cmd_transform(config, out_dir);
  if (command == "verify") return cmd_verify(config, out_dir);
  if (command == "compare") return cmd_compare(config, out_dir);
  if (command == "pipeline") return cmd_pipeline(config, out_dir);
  fail(ErrorKind::Invalid, "unknown command '" + command + "'");
}

std::string run_command_json(const std::string& command,
                             const std::string& config_json,
                             const std::string& overrides_json,
                             const std::string& out_dir, bool* pass) {
  json config =
      config_json.empty() ? json::object() : json::parse(config_json);
  if (!overrides_json.empty()) {
    const json overrides = json::parse(overrides_json);
    if (!overrides.is_object())
      fail(ErrorKind::Invalid, "overrides must be a JSON object");
    for (const auto& [path, value] : overrides.items()) {
      json* node = &config;
      std::string rest = path;
      for (;;) {
        const auto dot = rest.find('.');
        if (dot == std::string::npos) break;
        node = &(*node)[rest.substr(0, dot)];
        rest = rest.substr(dot + 1);
      }
      (*node)[rest] = value;
    }
  }
  const CommandResult result = run_command(command, config, out_dir);
  if (pass) *pass = result.pass;
  return result.report.dump(2);
}

}  // namespace balcons
