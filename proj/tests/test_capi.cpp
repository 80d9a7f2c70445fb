// Exercises the shared-library C API surface through balcons.h only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>

#include "balcons.h"

TEST_CASE("expression lifecycle through the C API") {
  const char* vars[] = {"x1", "u2"};
  bc_expr* e = nullptr;
  REQUIRE(bc_expr_parse("sin(x1)*u2", vars, 2, &e) == BC_OK);

  const char* names[] = {"x1", "u2"};
  const double values[] = {0.5, 2.0};
  double out = 0.0;
  CHECK(bc_expr_eval(e, names, values, 2, &out) == BC_OK);
  CHECK(out == doctest::Approx(2.0 * std::sin(0.5)));

  bc_expr* de = nullptr;
  REQUIRE(bc_expr_diff(e, "x1", &de) == BC_OK);
  CHECK(bc_expr_eval(de, names, values, 2, &out) == BC_OK);
  CHECK(out == doctest::Approx(2.0 * std::cos(0.5)));

  size_t needed = 0;
  CHECK(bc_expr_print(e, nullptr, 0, &needed) == BC_OK);
  std::string buf(needed, '\0');
  CHECK(bc_expr_print(e, buf.data(), buf.size(), &needed) == BC_OK);
  CHECK(std::strcmp(buf.c_str(), "sin(x1)*u2") == 0);

  bc_expr_free(de);
  bc_expr_free(e);
}

TEST_CASE("parse failures surface codes and messages") {
  const char* vars[] = {"x1"};
  bc_expr* e = nullptr;
  CHECK(bc_expr_parse("x1 +", vars, 1, &e) == BC_ERR_PARSE);
  CHECK(std::strlen(bc_last_error()) > 0);
  CHECK(bc_expr_parse("ln(x9)", vars, 1, &e) == BC_ERR_PARSE);
  CHECK(bc_expr_parse(nullptr, vars, 1, &e) == BC_ERR_INVALID);

  bc_expr* lnx = nullptr;
  REQUIRE(bc_expr_parse("ln(x1)", vars, 1, &lnx) == BC_OK);
  const char* names[] = {"x1"};
  const double bad[] = {-1.0};
  double out = 0.0;
  CHECK(bc_expr_eval(lnx, names, bad, 1, &out) == BC_ERR_DOMAIN);
  bc_expr_free(lnx);
}

TEST_CASE("euler system fluxes") {
  bc_system* sys = nullptr;
  REQUIRE(bc_system_euler("U1", &sys) == BC_OK);
  const double U[5] = {1, 2, 3, 4, 5};
  double out = 0.0;
  CHECK(bc_system_flux_eval(sys, 1, U, &out) == BC_OK);
  CHECK(out == doctest::Approx(5.0));
  CHECK(bc_system_flux_eval(sys, 12, U, &out) == BC_OK);
  CHECK(out == doctest::Approx(20.0));
  CHECK(bc_system_flux_eval(sys, 13, U, &out) == BC_ERR_INVALID);
  bc_system_free(sys);

  CHECK(bc_system_euler("U2", &sys) == BC_ERR_PARSE);
}

TEST_CASE("transform creation, application and induced elements") {
  bc_system* sys = nullptr;
  REQUIRE(bc_system_euler("U5*U1^0.4", &sys) == BC_OK);

  bc_transform* t = nullptr;
  const char* spec =
      R"({"family": "XI10", "a": 0.37, "payload": {"f": "x1"}})";
  REQUIRE(bc_transform_create(spec, sys, &t) == BC_OK);

  const double X[4] = {0.5, 0.1, 0.2, 0.3};
  const double U[5] = {1.0, 0.2, 0.3, 0.4, 1.5};
  double x[4], u[5];
  CHECK(bc_transform_apply(t, X, U, x, u) == BC_OK);
  CHECK(u[4] == doctest::Approx(1.5 + 0.37 * 0.5));

  double Xr[4], Ur[5];
  CHECK(bc_transform_apply_inverse(t, x, u, Xr, Ur) == BC_OK);
  for (int k = 0; k < 5; ++k) CHECK(Ur[k] == doctest::Approx(U[k]));

  double p16 = 0.0;
  CHECK(bc_transform_element(t, 16, x, u, &p16) == BC_OK);
  CHECK(p16 == doctest::Approx(0.37));

  bc_transform_free(t);
  bc_system_free(sys);
}

TEST_CASE("batch command through the C API") {
  const char* config = R"({
    "system": {"kind": "euler", "pressure": "U5*U1^0.4"},
    "transform": {"family": "XI10", "a": 0.25, "payload": {"f": "x1"}}
  })";
  char* report = nullptr;
  int pass = 0;
  REQUIRE(bc_run_command("derive-system", config, nullptr, "capi_test_out",
                         &report, &pass) == BC_OK);
  REQUIRE(report != nullptr);
  CHECK(pass == 1);
  CHECK(std::string(report).find("\"p16\": \"0.25\"") != std::string::npos);
  bc_string_free(report);
  std::filesystem::remove_all("capi_test_out");

  CHECK(bc_run_command("nonsense", config, nullptr, "capi_test_out", &report,
                       &pass) == BC_ERR_INVALID);
  std::filesystem::remove_all("capi_test_out");
}
