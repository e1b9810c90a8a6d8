#include "iklflow/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace iklflow {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string &path, const std::string &msg) {
    throw ParseError("config field '" + path + "': " + msg);
}

const json &field(const json &obj, const std::string &parent,
                  const std::string &name) {
    if (!obj.is_object() || !obj.contains(name)) {
        fail(parent.empty() ? name : parent + "." + name, "missing");
    }
    return obj.at(name);
}

double num(const json &j, const std::string &path) {
    if (!j.is_number()) { fail(path, "expected a number"); }
    return j.get<double>();
}

long integer(const json &j, const std::string &path) {
    if (!j.is_number_integer()) { fail(path, "expected an integer"); }
    return j.get<long>();
}

std::string str(const json &j, const std::string &path) {
    if (!j.is_string()) { fail(path, "expected a string"); }
    return j.get<std::string>();
}

Vec parse_vec(const json &j, const std::string &path) {
    if (!j.is_array() || j.empty()) { fail(path, "expected a nonempty array"); }
    Vec v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = num(j[i], path + "[" + std::to_string(i) + "]");
    }
    return v;
}

Mat parse_mat(const json &j, const std::string &path) {
    if (!j.is_array() || j.empty()) { fail(path, "expected a nonempty array of rows"); }
    Mat m;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vec row = parse_vec(j[i], path + "[" + std::to_string(i) + "]");
        if (i == 0) {
            m.resize(static_cast<Eigen::Index>(j.size()), row.size());
        } else if (row.size() != m.cols()) {
            fail(path, "ragged rows");
        }
        m.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    return m;
}

json vec_to_json(const Vec &v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) { a.push_back(v[i]); }
    return a;
}

json mat_to_json(const Mat &m) {
    json a = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        a.push_back(vec_to_json(m.row(i).transpose()));
    }
    return a;
}

KernelSpec parse_kernel(const json &j) {
    const std::string family = str(field(j, "kernel", "family"), "kernel.family");
    if (family == "gaussian") {
        return KernelSpec::gaussian(num(field(j, "kernel", "sigma"), "kernel.sigma"));
    }
    if (family == "imq") {
        return KernelSpec::imq(num(field(j, "kernel", "c"), "kernel.c"),
                               num(field(j, "kernel", "beta"), "kernel.beta"));
    }
    fail("kernel.family", "unknown family '" + family + "'");
}

json kernel_to_json(const KernelSpec &k) {
    if (k.family == KernelFamily::Gaussian) {
        return {{"family", "gaussian"}, {"sigma", k.sigma}};
    }
    return {{"family", "imq"}, {"c", k.c}, {"beta", k.beta}};
}

}  // namespace

std::string flow_kind_name(FlowKind kind) {
    switch (kind) {
        case FlowKind::MmdWgf: return "mmd_wgf";
        case FlowKind::KsdWgf: return "ksd_wgf";
        case FlowKind::FrExact: return "fr_exact";
        case FlowKind::WfrIft: return "wfr_ift";
        case FlowKind::WfrKsd: return "wfr_ksd";
        case FlowKind::Mirror: return "mirror";
        case FlowKind::Jko: return "jko";
    }
    return "?";
}

FlowKind flow_kind_from_name(const std::string &name) {
    if (name == "mmd_wgf") { return FlowKind::MmdWgf; }
    if (name == "ksd_wgf") { return FlowKind::KsdWgf; }
    if (name == "fr_exact") { return FlowKind::FrExact; }
    if (name == "wfr_ift") { return FlowKind::WfrIft; }
    if (name == "wfr_ksd") { return FlowKind::WfrKsd; }
    if (name == "mirror") { return FlowKind::Mirror; }
    if (name == "jko") { return FlowKind::Jko; }
    fail("flow.kind", "unknown flow kind '" + name + "'");
}

bool TargetSpec::operator==(const TargetSpec &other) const {
    if (kind != other.kind || csv_path != other.csv_path ||
        with_mass != other.with_mass ||
        components.size() != other.components.size()) {
        return false;
    }
    for (std::size_t i = 0; i < components.size(); ++i) {
        if (components[i].mean != other.components[i].mean ||
            components[i].cov != other.components[i].cov) {
            return false;
        }
    }
    return mixture_weights == other.mixture_weights;
}

bool InitSpec::operator==(const InitSpec &other) const {
    return kind == other.kind && n == other.n && mean == other.mean &&
           cov == other.cov && csv_path == other.csv_path &&
           with_mass == other.with_mass;
}

bool RunSpec::operator==(const RunSpec &other) const {
    const FlowConfig &a = flow;
    const FlowConfig &b = other.flow;
    const bool flows_equal =
        a.kind == b.kind && a.tau == b.tau && a.alpha == b.alpha &&
        a.beta == b.beta && a.steps == b.steps && a.seed == b.seed &&
        a.injection == b.injection && a.particle_cap == b.particle_cap &&
        a.score_only_reaction == b.score_only_reaction &&
        a.kernel.family == b.kernel.family && a.kernel.sigma == b.kernel.sigma &&
        a.kernel.c == b.kernel.c && a.kernel.beta == b.kernel.beta;
    return flows_equal && target == other.target && init == other.init;
}

RunSpec parse_config_text(const std::string &text) {
    json doc;
    try {
        doc = json::parse(text, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error &e) {
        throw ParseError(std::string("config is not valid JSON: ") + e.what());
    }

    RunSpec spec;

    const json &flow = field(doc, "", "flow");
    spec.flow.kind = flow_kind_from_name(str(field(flow, "flow", "kind"), "flow.kind"));
    spec.flow.tau = num(field(flow, "flow", "tau"), "flow.tau");
    spec.flow.steps = integer(field(flow, "flow", "steps"), "flow.steps");
    spec.flow.seed = static_cast<std::uint64_t>(
        integer(field(flow, "flow", "seed"), "flow.seed"));
    if (flow.contains("alpha")) { spec.flow.alpha = num(flow["alpha"], "flow.alpha"); }
    if (flow.contains("beta")) { spec.flow.beta = num(flow["beta"], "flow.beta"); }
    if (flow.contains("injection")) {
        spec.flow.injection = integer(flow["injection"], "flow.injection");
    }
    if (flow.contains("particle_cap")) {
        spec.flow.particle_cap = integer(flow["particle_cap"], "flow.particle_cap");
    }
    if (flow.contains("score_only_reaction")) {
        if (!flow["score_only_reaction"].is_boolean()) {
            fail("flow.score_only_reaction", "expected a boolean");
        }
        spec.flow.score_only_reaction = flow["score_only_reaction"].get<bool>();
    }
    spec.flow.kernel = parse_kernel(field(doc, "", "kernel"));
    if (!(spec.flow.tau > 0.0)) { fail("flow.tau", "must be positive"); }
    if (spec.flow.steps < 1) { fail("flow.steps", "must be >= 1"); }

    const json &target = field(doc, "", "target");
    spec.target.kind = str(field(target, "target", "kind"), "target.kind");
    if (spec.target.kind == "gaussian") {
        spec.target.components.push_back(
            {parse_vec(field(target, "target", "mean"), "target.mean"),
             parse_mat(field(target, "target", "cov"), "target.cov")});
        spec.target.mixture_weights = Vec::Ones(1);
    } else if (spec.target.kind == "gaussian_mixture") {
        const json &comps = field(target, "target", "components");
        if (!comps.is_array() || comps.empty()) {
            fail("target.components", "expected a nonempty array");
        }
        Vec weights(comps.size());
        for (std::size_t i = 0; i < comps.size(); ++i) {
            const std::string p = "target.components[" + std::to_string(i) + "]";
            weights[static_cast<Eigen::Index>(i)] =
                num(field(comps[i], p, "weight"), p + ".weight");
            spec.target.components.push_back(
                {parse_vec(field(comps[i], p, "mean"), p + ".mean"),
                 parse_mat(field(comps[i], p, "cov"), p + ".cov")});
        }
        spec.target.mixture_weights = weights;
    } else if (spec.target.kind == "empirical") {
        spec.target.csv_path = str(field(target, "target", "csv"), "target.csv");
        if (target.contains("with_mass")) {
            spec.target.with_mass = target["with_mass"].get<bool>();
        }
    } else {
        fail("target.kind", "unknown kind '" + spec.target.kind + "'");
    }

    const json &init = field(doc, "", "init");
    spec.init.kind = str(field(init, "init", "kind"), "init.kind");
    if (spec.init.kind == "gaussian") {
        spec.init.n = integer(field(init, "init", "n"), "init.n");
        spec.init.mean = parse_vec(field(init, "init", "mean"), "init.mean");
        spec.init.cov = parse_mat(field(init, "init", "cov"), "init.cov");
    } else if (spec.init.kind == "target") {
        spec.init.n = integer(field(init, "init", "n"), "init.n");
    } else if (spec.init.kind == "csv") {
        spec.init.csv_path = str(field(init, "init", "csv"), "init.csv");
        if (init.contains("with_mass")) {
            spec.init.with_mass = init["with_mass"].get<bool>();
        }
    } else {
        fail("init.kind", "unknown kind '" + spec.init.kind + "'");
    }
    if (spec.init.kind != "csv" && spec.init.n < 1) {
        fail("init.n", "must be >= 1");
    }

    // Cross-field constraints surface before any run starts.
    spec.flow.validate();
    const bool needs_score =
        spec.flow.kind == FlowKind::KsdWgf || spec.flow.kind == FlowKind::WfrKsd;
    if (needs_score && spec.target.kind == "empirical") {
        throw ConfigError("config: flow '" + flow_kind_name(spec.flow.kind) +
                          "' needs a target score, but empirical targets expose none");
    }
    return spec;
}

RunSpec parse_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) { throw ParseError("cannot open config file: " + path); }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str());
}

json config_to_json(const RunSpec &spec) {
    json flow = {{"kind", flow_kind_name(spec.flow.kind)},
                 {"tau", spec.flow.tau},
                 {"alpha", spec.flow.alpha},
                 {"beta", spec.flow.beta},
                 {"steps", spec.flow.steps},
                 {"seed", spec.flow.seed},
                 {"injection", spec.flow.injection},
                 {"particle_cap", spec.flow.particle_cap},
                 {"score_only_reaction", spec.flow.score_only_reaction}};
    json target;
    if (spec.target.kind == "gaussian") {
        target = {{"kind", "gaussian"},
                  {"mean", vec_to_json(spec.target.components[0].mean)},
                  {"cov", mat_to_json(spec.target.components[0].cov)}};
    } else if (spec.target.kind == "gaussian_mixture") {
        json comps = json::array();
        for (std::size_t i = 0; i < spec.target.components.size(); ++i) {
            comps.push_back(
                {{"weight", spec.target.mixture_weights[static_cast<Eigen::Index>(i)]},
                 {"mean", vec_to_json(spec.target.components[i].mean)},
                 {"cov", mat_to_json(spec.target.components[i].cov)}});
        }
        target = {{"kind", "gaussian_mixture"}, {"components", comps}};
    } else {
        target = {{"kind", "empirical"},
                  {"csv", spec.target.csv_path},
                  {"with_mass", spec.target.with_mass}};
    }
    json init;
    if (spec.init.kind == "gaussian") {
        init = {{"kind", "gaussian"},
                {"n", spec.init.n},
                {"mean", vec_to_json(spec.init.mean)},
                {"cov", mat_to_json(spec.init.cov)}};
    } else if (spec.init.kind == "target") {
        init = {{"kind", "target"}, {"n", spec.init.n}};
    } else {
        init = {{"kind", "csv"},
                {"csv", spec.init.csv_path},
                {"with_mass", spec.init.with_mass}};
    }
    return {{"flow", flow},
            {"kernel", kernel_to_json(spec.flow.kernel)},
            {"target", target},
            {"init", init}};
}

std::string serialize_config(const RunSpec &spec) {
    return config_to_json(spec).dump(2);
}

DiscreteMeasure load_csv_measure(const std::string &path, bool with_mass) {
    std::ifstream in(path);
    if (!in) { throw ParseError("cannot open CSV file: " + path); }
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) { continue; }
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception &) {
                throw ParseError("CSV '" + path + "': bad number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError("CSV '" + path + "': ragged rows");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) { throw ParseError("CSV '" + path + "': no rows"); }
    const std::size_t cols = rows.front().size();
    const std::size_t d = with_mass ? cols - 1 : cols;
    if (d < 1) { throw ParseError("CSV '" + path + "': no coordinate columns"); }
    Mat atoms(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
    Vec masses = Vec::Ones(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            atoms(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        }
        if (with_mass) { masses[static_cast<Eigen::Index>(i)] = rows[i][d]; }
    }
    return {std::move(atoms), std::move(masses)};
}

Target build_target(const TargetSpec &spec) {
    if (spec.kind == "gaussian" || spec.kind == "gaussian_mixture") {
        return Target::gaussian_mixture(spec.components, spec.mixture_weights);
    }
    return Target::empirical(load_csv_measure(spec.csv_path, spec.with_mass));
}

Ensemble build_init(const InitSpec &spec, const Target &target,
                    std::uint64_t seed) {
    // decorrelate the init stream from the in-run sampling stream
    const std::uint64_t init_seed = seed ^ 0x5851F42D4C957F2DULL;
    if (spec.kind == "target") {
        return ensemble_from_sampler(target, spec.n, init_seed);
    }
    if (spec.kind == "gaussian") {
        const Target init_dist = Target::gaussian(spec.mean, spec.cov);
        return ensemble_from_sampler(init_dist, spec.n, init_seed);
    }
    const DiscreteMeasure m = load_csv_measure(spec.csv_path, spec.with_mass).normalized();
    return {m.atoms, m.masses};
}

}  // namespace iklflow
