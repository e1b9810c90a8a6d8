#include "iklflow/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "iklflow/checks.hpp"
#include "iklflow/flow.hpp"

namespace iklflow {

namespace fs = std::filesystem;

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// temp-file-and-rename so readers never observe a partial file
void atomic_write(const fs::path &path, const std::string &content) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) {
            throw InputError("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

std::string metrics_csv(const std::vector<MetricsRecord> &metrics) {
    std::ostringstream out;
    out << MetricsRecord::csv_header() << "\n";
    for (const auto &rec : metrics) {
        out << rec.csv_row() << "\n";
    }
    return out.str();
}

std::string ensemble_csv(const Ensemble &e) {
    std::ostringstream out;
    for (Eigen::Index j = 0; j < e.dim(); ++j) {
        out << "x_" << (j + 1) << ",";
    }
    out << "weight\n";
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        for (Eigen::Index j = 0; j < e.dim(); ++j) {
            out << fmt_g(e.positions(i, j)) << ",";
        }
        out << fmt_g(e.weights[i]) << "\n";
    }
    return out.str();
}

nlohmann::json metrics_json(const MetricsRecord &rec) {
    nlohmann::json j;
    j["step"] = rec.step;
    j["time"] = rec.time;
    j["mmd2"] = rec.mmd2;
    if (rec.ksd2) {
        j["ksd2"] = *rec.ksd2;
    } else {
        j["ksd2"] = nullptr;
    }
    j["mean_err"] = rec.mean_err;
    j["cov_err"] = rec.cov_err;
    return j;
}

}  // namespace

int cmd_run(const std::string &config_path, const std::string &out_dir) {
    try {
        const RunSpec spec = parse_config(config_path);
        const Target target = build_target(spec.target);
        const Ensemble init = build_init(spec.init, target, spec.flow.seed);
        fs::create_directories(out_dir);

        nlohmann::json manifest;
        manifest["config"] = config_to_json(spec);
        manifest["version"] = kLibraryVersion;
        manifest["flags"]["score_only_reaction"] =
            spec.flow.kind == FlowKind::WfrKsd && spec.flow.score_only_reaction;

        const auto t0 = std::chrono::steady_clock::now();
        bool solver_failed = false;
        double failed_residual = 0.0;
        std::string failure_msg;
        FlowResult result;
        try {
            result = run_flow(spec.flow, init, target);
        } catch (const ConvergenceError &err) {
            solver_failed = true;
            failed_residual = err.residual;
            failure_msg = err.what();
        }
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        manifest["wall_time_seconds"] = wall;

        if (solver_failed) {
            manifest["error"] = failure_msg;
            manifest["kkt_residual"] = failed_residual;
            atomic_write(fs::path(out_dir) / "manifest.json",
                         manifest.dump(2) + "\n");
            std::fprintf(stderr, "error: %s\n", failure_msg.c_str());
            return 2;
        }

        manifest["final_metrics"] = metrics_json(result.metrics.back());
        if (spec.flow.kind == FlowKind::Jko) {
            manifest["kkt_residual"] = result.jko_last_residual;
        }
        atomic_write(fs::path(out_dir) / "metrics.csv",
                     metrics_csv(result.metrics));
        atomic_write(fs::path(out_dir) / "final_ensemble.csv",
                     ensemble_csv(result.final_ensemble));
        atomic_write(fs::path(out_dir) / "manifest.json",
                     manifest.dump(2) + "\n");
        return 0;
    } catch (const std::exception &err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 1;
    }
}

int cmd_check(const std::string &scope) {
    std::vector<CheckResult> results;
    try {
        results = run_checks(scope);
    } catch (const std::exception &err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 2;
    }
    bool all_pass = true;
    for (const auto &r : results) {
        all_pass = all_pass && r.pass;
        std::printf("%-4s %-32s %6.2fs  %s\n", r.pass ? "PASS" : "FAIL",
                    r.name.c_str(), r.seconds, r.detail.c_str());
    }
    std::printf("%s: %zu checks, scope=%s\n", all_pass ? "OK" : "FAILED",
                results.size(), scope.c_str());
    return all_pass ? 0 : 1;
}

}  // namespace iklflow
