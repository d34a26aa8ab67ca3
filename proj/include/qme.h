/* qme.h — C interface to the quantum maximum-entropy library.
 *
 * All entry points exchange UTF-8 JSON strings (the formats documented in
 * the README) and return a status code plus an opaque report handle. The
 * strings returned by the accessors stay owned by the report and remain
 * valid until qme_report_free.
 */

#ifndef QME_H
#define QME_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qme_status {
    QME_OK = 0,
    QME_PARSE_ERROR = 1,
    QME_VALIDATION_ERROR = 2,
    QME_DIMENSION_MISMATCH = 3,
    QME_DOMAIN_ERROR = 4,
    QME_DECOMPOSITION_FAILURE = 5,
    QME_AMBIGUOUS_RANK = 6,
    QME_SUPPORT_VIOLATION = 7,
    QME_INFEASIBLE_CONSTRAINT = 8,
    QME_ZERO_EVIDENCE = 9,
    QME_NONCONVERGENCE = 10,
    QME_RANK_DEFICIENT_PRIOR = 11,
    QME_BAD_EPSILON = 12,
    QME_BAD_PROJECTOR_FAMILY = 13,
    QME_COMPLETION_FAILURE = 14,
    QME_INFEASIBLE_TARGET = 15,
    QME_IO_ERROR = 16,
    QME_CHECK_FAILED = 17,
    QME_INTERNAL_ERROR = 18
} qme_status;

typedef struct qme_report qme_report;

/* Library version string, e.g. "0.1.0". */
const char* qme_version(void);

/* Stable machine-readable name of a status code, e.g. "infeasible_constraint". */
const char* qme_status_name(qme_status status);

/* Run a scenario given as a JSON document. overrides_json may be NULL or a
 * JSON object with optional "dual_tol", "max_iter" and "damping" fields.
 * On success *out_report carries the full run report; a report is also
 * produced for most failures (carrying the error code and message). Returns
 * QME_OK only when the scenario ran and every invariant check passed. */
qme_status qme_run_scenario(const char* scenario_json, const char* overrides_json,
                            qme_report** out_report);

qme_status qme_run_scenario_file(const char* path, const char* overrides_json,
                                 qme_report** out_report);

/* Parse and dimension-check a scenario without running it. */
qme_status qme_validate_scenario(const char* scenario_json, qme_report** out_report);
qme_status qme_validate_scenario_file(const char* path, qme_report** out_report);

/* Solve a maximum-entropy request:
 * {"prior": <matrix>, "constraints": [{"observable": <matrix>, "target": t}],
 *  "options": {...}}. */
qme_status qme_solve(const char* request_json, qme_report** out_report);

/* Run the randomized property suite. options_json may be NULL or
 * {"dims": [2,3,4], "trials": 50, "seed": 7}. */
qme_status qme_selftest(const char* options_json, qme_report** out_report);

/* Accessors. NULL-safe; string accessors return "" for absent values. */
const char* qme_report_json(const qme_report* report);
const char* qme_report_text(const qme_report* report);
int qme_report_all_checks_passed(const qme_report* report);
const char* qme_report_error_code(const qme_report* report);
const char* qme_report_error_message(const qme_report* report);
void qme_report_free(qme_report* report);

#ifdef __cplusplus
}
#endif

#endif /* QME_H */
