#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "iklflow/cli.hpp"
#include "iklflow/config.hpp"

using namespace iklflow;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string &tag)
        : path(fs::temp_directory_path() / ("iklflow_test_" + tag)) {
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

void write_file(const fs::path &p, const std::string &content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    REQUIRE(bool(out));
}

std::string read_file(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string base_config(const std::string &flow_overrides,
                        const std::string &target,
                        const std::string &init) {
    return "{\n"
           "  \"flow\": {\"kind\": \"mmd_wgf\", \"tau\": 0.1, \"steps\": 3, "
           "\"seed\": 7" + flow_overrides + "},\n"
           "  \"kernel\": {\"family\": \"gaussian\", \"sigma\": 1.0},\n"
           "  \"target\": " + target + ",\n"
           "  \"init\": " + init + "\n"
           "}\n";
}

const char *kGaussTarget = "{\"kind\": \"gaussian\", \"mean\": [0.0], \"cov\": [[1.0]]}";
const char *kGaussInit =
    "{\"kind\": \"gaussian\", \"n\": 8, \"mean\": [2.0], \"cov\": [[1.0]]}";

}  // namespace

TEST_CASE("minimal config with an empirical csv target parses and builds") {
    TempDir dir("cfg_min");
    write_file(dir.path / "target.csv", "0.0\n1.0\n2.5\n");
    const std::string text = base_config(
        "", "{\"kind\": \"empirical\", \"csv\": \"" +
                (dir.path / "target.csv").string() + "\"}",
        kGaussInit);
    const RunSpec spec = parse_config_text(text);
    CHECK(spec.flow.kind == FlowKind::MmdWgf);
    CHECK(spec.flow.steps == 3);
    const Target t = build_target(spec.target);
    CHECK(t.dim() == 1);
    const Ensemble init = build_init(spec.init, t, spec.flow.seed);
    CHECK(init.size() == 8);
    CHECK(init.has_uniform_weights());
}

TEST_CASE("cross-field constraints are rejected at parse time") {
    // reaction weight leaves the ensemble but nothing absorbs it
    CHECK_THROWS_AS(
        parse_config_text(base_config(
            ", \"kind\": \"wfr_ift\", \"beta\": 0.5, \"injection\": 0",
            kGaussTarget, kGaussInit)),
        ConfigError);
    // score-based flow against a score-less target
    CHECK_THROWS_AS(
        parse_config_text(base_config(
            ", \"kind\": \"ksd_wgf\"",
            "{\"kind\": \"empirical\", \"csv\": \"x.csv\"}", kGaussInit)),
        ConfigError);
}

TEST_CASE("schema violations raise parse errors naming the field") {
    CHECK_THROWS_AS(parse_config_text("{not json"), ParseError);
    CHECK_THROWS_AS(
        parse_config_text(base_config(", \"steps\": 0", kGaussTarget,
                                      kGaussInit)),
        ParseError);
    try {
        parse_config_text(
            "{\"flow\": {\"kind\": \"mmd_wgf\", \"steps\": 1, \"seed\": 0},"
            "\"kernel\": {\"family\": \"gaussian\", \"sigma\": 1.0},"
            "\"target\": " + std::string(kGaussTarget) + ","
            "\"init\": " + std::string(kGaussInit) + "}");
        FAIL("expected ParseError");
    } catch (const ParseError &e) {
        CHECK(std::string(e.what()).find("flow.tau") != std::string::npos);
    }
    CHECK_THROWS_AS(
        parse_config_text(base_config(", \"kind\": \"warp_drive\"",
                                      kGaussTarget, kGaussInit)),
        ParseError);
    CHECK_THROWS_AS(
        parse_config_text(base_config(", \"tau\": -0.1", kGaussTarget,
                                      kGaussInit)),
        ParseError);
}

TEST_CASE("line comments in configs are tolerated") {
    const std::string text =
        "{\n// picked after a bandwidth sweep\n" +
        base_config("", kGaussTarget, kGaussInit).substr(2);
    CHECK(parse_config_text(text).flow.tau == 0.1);
}

TEST_CASE("serialize then parse is the identity") {
    RunSpec spec = parse_config_text(base_config(
        ", \"kind\": \"wfr_ift\", \"alpha\": 0.7, \"beta\": 0.3, "
        "\"injection\": 5, \"particle_cap\": 5000",
        "{\"kind\": \"gaussian_mixture\", \"components\": ["
        "{\"weight\": 0.4, \"mean\": [-1.0], \"cov\": [[1.0]]},"
        "{\"weight\": 0.6, \"mean\": [2.0], \"cov\": [[0.5]]}]}",
        kGaussInit));
    CHECK(parse_config_text(serialize_config(spec)) == spec);

    RunSpec emp = parse_config_text(base_config(
        "", "{\"kind\": \"empirical\", \"csv\": \"data.csv\", \"with_mass\": true}",
        "{\"kind\": \"target\", \"n\": 12}"));
    CHECK(parse_config_text(serialize_config(emp)) == emp);
    CHECK_FALSE(emp == spec);
}

TEST_CASE("flow kind names round-trip") {
    for (const FlowKind kind :
         {FlowKind::MmdWgf, FlowKind::KsdWgf, FlowKind::FrExact,
          FlowKind::WfrIft, FlowKind::WfrKsd, FlowKind::Mirror, FlowKind::Jko}) {
        CHECK(flow_kind_from_name(flow_kind_name(kind)) == kind);
    }
    CHECK_THROWS_AS(flow_kind_from_name("nope"), ParseError);
}

TEST_CASE("csv measures") {
    TempDir dir("csv");
    write_file(dir.path / "plain.csv", "0.5,1.0\n-1.0,2.0\n");
    const DiscreteMeasure plain = load_csv_measure((dir.path / "plain.csv").string(), false);
    CHECK(plain.size() == 2);
    CHECK(plain.dim() == 2);
    CHECK(plain.atoms(1, 0) == -1.0);
    CHECK(plain.masses[0] == 1.0);  // unit mass when no mass column

    write_file(dir.path / "mass.csv", "0.5,0.25\n1.5,0.75\n");
    const DiscreteMeasure weighted = load_csv_measure((dir.path / "mass.csv").string(), true);
    CHECK(weighted.dim() == 1);
    CHECK(weighted.masses[1] == 0.75);

    write_file(dir.path / "ragged.csv", "1.0,2.0\n3.0\n");
    CHECK_THROWS_AS(load_csv_measure((dir.path / "ragged.csv").string(), false),
                    ParseError);
    write_file(dir.path / "bad.csv", "1.0,oops\n");
    CHECK_THROWS_AS(load_csv_measure((dir.path / "bad.csv").string(), false),
                    ParseError);
    write_file(dir.path / "empty.csv", "");
    CHECK_THROWS_AS(load_csv_measure((dir.path / "empty.csv").string(), false),
                    ParseError);
    CHECK_THROWS_AS(load_csv_measure((dir.path / "missing.csv").string(), false),
                    ParseError);
}

TEST_CASE("cmd_run writes the full artifact set deterministically") {
    TempDir dir("run");
    write_file(dir.path / "target.csv", "-1.0\n0.0\n1.5\n");
    const std::string cfg = base_config(
        "", "{\"kind\": \"empirical\", \"csv\": \"" +
                (dir.path / "target.csv").string() + "\"}",
        kGaussInit);
    write_file(dir.path / "run.json", cfg);

    const fs::path out_a = dir.path / "out_a";
    REQUIRE(cmd_run((dir.path / "run.json").string(), out_a.string()) == 0);
    CHECK(fs::exists(out_a / "metrics.csv"));
    CHECK(fs::exists(out_a / "final_ensemble.csv"));
    CHECK(fs::exists(out_a / "manifest.json"));

    const std::string metrics = read_file(out_a / "metrics.csv");
    std::istringstream lines(metrics);
    std::string line;
    std::vector<std::string> rows;
    while (std::getline(lines, line)) { rows.push_back(line); }
    REQUIRE(rows.size() == 5);  // header + steps 0..3
    CHECK(rows[0] == "step,time,mmd2,ksd2,mean_err,cov_err");
    CHECK(rows[1].substr(0, 4) == "0,0,");

    const std::string ens = read_file(out_a / "final_ensemble.csv");
    CHECK(ens.substr(0, ens.find('\n')) == "x_1,weight");

    // rerun with the same config: byte-identical outputs
    const fs::path out_b = dir.path / "out_b";
    REQUIRE(cmd_run((dir.path / "run.json").string(), out_b.string()) == 0);
    CHECK(read_file(out_b / "metrics.csv") == metrics);
    CHECK(read_file(out_b / "final_ensemble.csv") == ens);

    // manifest echoes the config faithfully
    const RunSpec spec = parse_config_text(cfg);
    const nlohmann::json manifest = nlohmann::json::parse(read_file(out_a / "manifest.json"));
    CHECK(manifest.at("version").get<std::string>() == kLibraryVersion);
    CHECK(manifest.at("wall_time_seconds").get<double>() >= 0.0);
    CHECK(manifest.at("final_metrics").at("mmd2").get<double>() >= 0.0);
    CHECK(parse_config_text(manifest.at("config").dump()) == spec);

    CHECK(cmd_run((dir.path / "nonexistent.json").string(),
                  (dir.path / "out_c").string()) == 1);
}

TEST_CASE("cmd_run reproduces the exact reaction decay in the metrics file") {
    TempDir dir("decay");
    write_file(dir.path / "target.csv", "0.0\n0.7\n-0.4\n1.2\n");
    const std::string cfg = base_config(
        ", \"kind\": \"fr_exact\", \"steps\": 5",
        "{\"kind\": \"empirical\", \"csv\": \"" +
            (dir.path / "target.csv").string() + "\"}",
        kGaussInit);
    write_file(dir.path / "run.json", cfg);
    const fs::path out = dir.path / "out";
    REQUIRE(cmd_run((dir.path / "run.json").string(), out.string()) == 0);

    std::istringstream lines(read_file(out / "metrics.csv"));
    std::string line;
    std::getline(lines, line);  // header
    std::vector<double> mmd2_col;
    while (std::getline(lines, line)) {
        std::istringstream cells(line);
        std::string cell;
        for (int c = 0; c <= 2; ++c) { std::getline(cells, cell, ','); }
        mmd2_col.push_back(std::stod(cell));
    }
    REQUIRE(mmd2_col.size() == 6);
    for (std::size_t n = 1; n < mmd2_col.size(); ++n) {
        const double expected =
            std::exp(-2.0 * 0.1 * static_cast<double>(n)) * mmd2_col[0];
        CHECK(std::abs(mmd2_col[n] - expected) / expected < 1e-10);
    }
}

TEST_CASE("cmd_check scope handling") {
    CHECK(cmd_check("bogus") == 2);
    CHECK(cmd_check("oracles") == 0);
}
