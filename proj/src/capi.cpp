// capi.cpp — extern-C shim over the scenario engine. Exceptions stop here:
// every qme::Error maps one-to-one onto a qme_status, anything else reports
// QME_INTERNAL_ERROR.

#include "qme.h"

#include <exception>
#include <string>

#include "errors.hpp"
#include "json_io.hpp"
#include "scenario.hpp"

struct qme_report {
    std::string json;
    std::string text;
    std::string error_code;
    std::string error_message;
    bool all_checks_passed = false;
};

namespace {

using qme::json_io::Json;

qme_status status_from_code(qme::ErrorCode code) {
    return static_cast<qme_status>(static_cast<int>(code));
}

qme_report* error_report(const std::string& code, const std::string& message) {
    auto* report = new qme_report;
    Json j;
    j["error"]["code"] = code;
    j["error"]["message"] = message;
    report->json = j.dump(2);
    report->text = "error: " + code + ": " + message + "\n";
    report->error_code = code;
    report->error_message = message;
    report->all_checks_passed = false;
    return report;
}

qme_report* report_from_run(const qme::scenario::RunReport& run) {
    auto* report = new qme_report;
    report->json = run.json.dump(2);
    report->text = qme::scenario::render_text(run.json);
    report->all_checks_passed = run.all_checks_passed;
    if (!run.all_checks_passed) {
        report->error_code = qme::error_code_name(qme::ErrorCode::kCheckFailed);
        report->error_message = "one or more invariant checks failed";
    }
    return report;
}

template <typename Fn>
qme_status guarded(qme_report** out_report, Fn&& fn) {
    if (out_report == nullptr) return QME_INTERNAL_ERROR;
    *out_report = nullptr;
    try {
        qme::scenario::RunReport run = fn();
        *out_report = report_from_run(run);
        return run.all_checks_passed ? QME_OK : QME_CHECK_FAILED;
    } catch (const qme::Error& e) {
        *out_report = error_report(e.code_name(), e.what());
        return status_from_code(e.code());
    } catch (const std::exception& e) {
        *out_report = error_report("internal_error", e.what());
        return QME_INTERNAL_ERROR;
    } catch (...) {
        *out_report = error_report("internal_error", "unknown failure");
        return QME_INTERNAL_ERROR;
    }
}

qme::scenario::Overrides parse_overrides(const char* overrides_json) {
    qme::scenario::Overrides overrides;
    if (overrides_json == nullptr || *overrides_json == '\0') return overrides;
    const Json j = qme::json_io::parse(overrides_json, "overrides");
    if (!j.is_object()) throw qme::ParseError("overrides: must be a JSON object");
    if (j.contains("dual_tol")) overrides.dual_tol = j["dual_tol"].get<double>();
    if (j.contains("max_iter")) overrides.max_iter = j["max_iter"].get<int>();
    if (j.contains("damping")) overrides.damping = j["damping"].get<double>();
    return overrides;
}

const char* require_cstr(const char* s) {
    if (s == nullptr) throw qme::ValidationError("null string argument");
    return s;
}

}  // namespace

extern "C" {

const char* qme_version(void) { return "0.1.0"; }

const char* qme_status_name(qme_status status) {
    if (status == QME_OK) return "ok";
    return qme::error_code_name(static_cast<qme::ErrorCode>(static_cast<int>(status)));
}

qme_status qme_run_scenario(const char* scenario_json, const char* overrides_json,
                            qme_report** out_report) {
    return guarded(out_report, [&] {
        const Json document = qme::json_io::parse(require_cstr(scenario_json), "scenario");
        return qme::scenario::run_scenario(qme::scenario::parse_scenario(document),
                                           parse_overrides(overrides_json));
    });
}

qme_status qme_run_scenario_file(const char* path, const char* overrides_json,
                                 qme_report** out_report) {
    return guarded(out_report, [&] {
        return qme::scenario::run_scenario_file(require_cstr(path),
                                                parse_overrides(overrides_json));
    });
}

qme_status qme_validate_scenario(const char* scenario_json, qme_report** out_report) {
    return guarded(out_report, [&] {
        const Json document = qme::json_io::parse(require_cstr(scenario_json), "scenario");
        qme::scenario::RunReport run;
        run.json = qme::scenario::validate_scenario(document);
        run.json["all_checks_passed"] = true;
        run.json["wall_time"] = 0.0;
        run.all_checks_passed = true;
        return run;
    });
}

qme_status qme_validate_scenario_file(const char* path, qme_report** out_report) {
    return guarded(out_report, [&] {
        const Json document = qme::json_io::load_file(require_cstr(path));
        qme::scenario::RunReport run;
        run.json = qme::scenario::validate_scenario(document);
        run.json["all_checks_passed"] = true;
        run.json["wall_time"] = 0.0;
        run.all_checks_passed = true;
        return run;
    });
}

qme_status qme_solve(const char* request_json, qme_report** out_report) {
    return guarded(out_report, [&] {
        const Json request = qme::json_io::parse(require_cstr(request_json), "solve request");
        return qme::scenario::run_solve_request(request);
    });
}

qme_status qme_selftest(const char* options_json, qme_report** out_report) {
    return guarded(out_report, [&] {
        qme::scenario::SelftestOptions options;
        if (options_json != nullptr && *options_json != '\0') {
            const Json j = qme::json_io::parse(options_json, "selftest options");
            if (j.contains("dims")) options.dims = j["dims"].get<std::vector<int>>();
            if (j.contains("trials")) options.trials = j["trials"].get<int>();
            if (j.contains("seed")) options.seed = j["seed"].get<std::uint64_t>();
        }
        return qme::scenario::run_selftest(options);
    });
}

const char* qme_report_json(const qme_report* report) {
    return report ? report->json.c_str() : "";
}

const char* qme_report_text(const qme_report* report) {
    return report ? report->text.c_str() : "";
}

int qme_report_all_checks_passed(const qme_report* report) {
    return report && report->all_checks_passed ? 1 : 0;
}

const char* qme_report_error_code(const qme_report* report) {
    return report ? report->error_code.c_str() : "";
}

const char* qme_report_error_message(const qme_report* report) {
    return report ? report->error_message.c_str() : "";
}

void qme_report_free(qme_report* report) { delete report; }

}  // extern "C"
