/* balcons C API: opaque handles over the core library.
 *
 * Conventions:
 *   - Every function returns a bc_status code (BC_OK on success).
 *   - On failure, bc_last_error() returns a thread-local message describing
 *     what went wrong; output parameters are left untouched.
 *   - Handles are created by bc_*_create/parse functions and released with
 *     the matching bc_*_free; handles are immutable and safe to share across
 *     threads once created.
 */

#ifndef BALCONS_H
#define BALCONS_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bc_status {
  BC_OK = 0,
  BC_ERR_PARSE = 1,     /* malformed expression or JSON */
  BC_ERR_DOMAIN = 2,    /* evaluation outside a function's domain */
  BC_ERR_INVALID = 3,   /* invalid argument or configuration */
  BC_ERR_SINGULAR = 4,  /* singular/degenerate transformation */
  BC_ERR_SOLVER = 5,    /* solver blow-up or failed quadrature */
  BC_ERR_IO = 6,        /* file system failure */
  BC_ERR_INTERNAL = 7
} bc_status;

typedef struct bc_expr bc_expr;           /* scalar expression */
typedef struct bc_system bc_system;       /* autonomous conservation system */
typedef struct bc_transform bc_transform; /* point map + induced elements */

const char* bc_version(void);

/* Thread-local message for the most recent failure in this thread. */
const char* bc_last_error(void);

/* --------------------------------------------------------------------------
 * Expressions
 * ------------------------------------------------------------------------ */

/* vars: array of nvars variable names permitted in the expression. */
bc_status bc_expr_parse(const char* text, const char* const* vars, int nvars,
                        bc_expr** out);
bc_status bc_expr_eval(const bc_expr* e, const char* const* names,
                       const double* values, int n, double* out);
bc_status bc_expr_diff(const bc_expr* e, const char* var, bc_expr** out);
/* Writes the printed form (NUL-terminated) into buf; *needed receives the
 * full length including the terminator.  BC_ERR_INVALID if buf is too small
 * (query with buf == NULL). */
bc_status bc_expr_print(const bc_expr* e, char* buf, size_t bufsize,
                        size_t* needed);
void bc_expr_free(bc_expr* e);

/* --------------------------------------------------------------------------
 * Systems
 * ------------------------------------------------------------------------ */

/* The twelve Euler fluxes with a pressure law over {U1, U5}. */
bc_status bc_system_euler(const char* pressure, bc_system** out);
/* Twelve flux expressions over {U1..U5}, P1..P12. */
bc_status bc_system_custom(const char* const* fluxes, bc_system** out);
/* k in 1..12. */
bc_status bc_system_flux_eval(const bc_system* sys, int k, const double U[5],
                              double* out);
void bc_system_free(bc_system* sys);

/* --------------------------------------------------------------------------
 * Transforms
 * ------------------------------------------------------------------------ */

/* spec_json: {"family": "XI1", "a": 0.25, "payload": {"f": "x1^2"}} —
 * the same schema the CLI configs use.  The induced balance elements are
 * built against the supplied conservation system. */
bc_status bc_transform_create(const char* spec_json, const bc_system* sys,
                              bc_transform** out);
/* Capital -> lower application of the stored point map. */
bc_status bc_transform_apply(const bc_transform* t, const double X[4],
                             const double U[5], double x[4], double u[5]);
bc_status bc_transform_apply_inverse(const bc_transform* t, const double x[4],
                                     const double u[5], double X[4],
                                     double U[5]);
/* Induced balance element p_k (k in 1..16) at a lower-space point. */
bc_status bc_transform_element(const bc_transform* t, int k, const double x[4],
                               const double u[5], double* out);
void bc_transform_free(bc_transform* t);

/* --------------------------------------------------------------------------
 * Batch commands
 * ------------------------------------------------------------------------ */

/* command: derive-system | solve | transform | verify | compare | pipeline.
 * config_json: run configuration (strict schema).
 * overrides_json: optional JSON object of dotted-path overrides
 *                 ({"solver.cfl": 0.3}); pass NULL or "" for none.
 * out_dir: output directory (created if missing).
 * report_json: receives a malloc'd report string (bc_string_free).
 * pass: receives 1 when every enabled check passed, else 0.
 */
bc_status bc_run_command(const char* command, const char* config_json,
                         const char* overrides_json, const char* out_dir,
                         char** report_json, int* pass);
void bc_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* BALCONS_H */
