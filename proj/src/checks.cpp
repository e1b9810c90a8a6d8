#include "iklflow/checks.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "iklflow/cli.hpp"
#include "iklflow/flow.hpp"
#include "iklflow/oracle.hpp"

namespace iklflow {

namespace {

namespace fs = std::filesystem;

Mat random_points(Rng &rng, long n, long d, double scale, double shift = 0.0) {
    Mat out(n, d);
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < d; ++j) {
            out(i, j) = shift + scale * rng.normal();
        }
    }
    return out;
}

// strictly positive entries, normalized
Vec random_simplex(Rng &rng, long n) {
    Vec w(n);
    for (long i = 0; i < n; ++i) { w[i] = 0.1 + rng.uniform(); }
    return w / w.sum();
}

double fit_slope(const std::vector<double> &t, const std::vector<double> &y) {
    const double n = static_cast<double>(t.size());
    double tm = 0.0, ym = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        tm += t[i];
        ym += y[i];
    }
    tm /= n;
    ym /= n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        num += (t[i] - tm) * (y[i] - ym);
        den += (t[i] - tm) * (t[i] - tm);
    }
    return num / den;
}

std::string fmt(const char *pattern, double v) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

KernelSpec pick_kernel(long index, Rng &rng) {
    if (index % 2 == 0) { return KernelSpec::gaussian(0.5 + 1.5 * rng.uniform()); }
    return KernelSpec::imq(0.5 + rng.uniform(), 0.25 + 0.5 * rng.uniform());
}

using Outcome = std::pair<bool, std::string>;

// --- kernelized force vs MMD witness on shared atoms -------------------

Outcome check_force_matches_witness() {
    Rng rng(101);
    double max_err = 0.0;
    for (long inst = 0; inst < 50; ++inst) {
        const long m = 2 + static_cast<long>(rng.next_u64() % 49);
        const long d = 1 + static_cast<long>(rng.next_u64() % 3);
        const Mat atoms = random_points(rng, m, d, 1.5);
        const Vec mu = random_simplex(rng, m);
        const Vec pi = random_simplex(rng, m);
        const KernelSpec k = pick_kernel(inst, rng);
        const Vec ratio = density_ratio(DensityRatioTable(atoms, mu, pi));
        const DiscreteMeasure mu_meas{atoms, mu};
        const DiscreteMeasure pi_meas{atoms, pi};
        for (int p = 0; p < 20; ++p) {
            const Vec probe = random_points(rng, 1, d, 2.0).row(0).transpose();
            double force = 0.0;
            for (long j = 0; j < m; ++j) {
                force += mu[j] * ratio[j] *
                         kernel_eval(k, atoms.row(j).transpose(), probe);
            }
            const double wit = mmd_witness(k, mu_meas, pi_meas, probe);
            max_err = std::max(max_err, std::abs(force - wit));
        }
    }
    return {max_err < 1e-13, fmt("max abs gap %.3g", max_err)};
}

// --- exact reaction flow: geometric MMD decay --------------------------

Outcome check_fr_decay_rate() {
    Rng rng(202);
    const double times[] = {0.1, 0.5, 1.0, 2.0, 5.0};
    double max_rel = 0.0;
    for (long inst = 0; inst < 10; ++inst) {
        const long d = 1 + static_cast<long>(rng.next_u64() % 2);
        const long n = 3 + static_cast<long>(rng.next_u64() % 13);
        const long m = 3 + static_cast<long>(rng.next_u64() % 13);
        const Ensemble e0{random_points(rng, n, d, 1.0, 3.0),
                          random_simplex(rng, n)};
        const DiscreteMeasure pi_hat =
            DiscreteMeasure{random_points(rng, m, d, 1.0), random_simplex(rng, m)}
                .normalized();
        const KernelSpec k = pick_kernel(inst, rng);
        const double base = mmd2(k, e0.as_measure(), pi_hat);
        for (const double t : times) {
            const DiscreteMeasure mu_t = fr_exact_solution(e0, pi_hat, t);
            const double expected = std::exp(-2.0 * t) * base;
            const double rel =
                std::abs(mmd2(k, mu_t, pi_hat) - expected) / expected;
            max_rel = std::max(max_rel, rel);
        }
    }
    return {max_rel < 1e-10, fmt("max rel err %.3g", max_rel)};
}

// --- exact reaction flow: log-MMD affine in t with slope -1 ------------

Outcome check_fr_log_slope() {
    Rng rng(303);
    const Ensemble e0{random_points(rng, 8, 1, 1.0, 3.0), random_simplex(rng, 8)};
    const DiscreteMeasure pi_hat =
        DiscreteMeasure{random_points(rng, 10, 1, 1.0), random_simplex(rng, 10)}
            .normalized();
    const KernelSpec k = KernelSpec::gaussian(1.0);
    std::vector<double> ts, logs;
    for (int j = 1; j <= 20; ++j) {
        const double t = 0.1 * j;
        ts.push_back(t);
        logs.push_back(
            std::log(std::sqrt(mmd2(k, fr_exact_solution(e0, pi_hat, t), pi_hat))));
    }
    const double slope = fit_slope(ts, logs);
    return {std::abs(slope + 1.0) < 1e-6, fmt("slope %.12g", slope)};
}

// --- unbalanced splitting: fitted reaction decay rate ------------------

// merge exact duplicate 1D atoms so the quadratic form stays desk-size
DiscreteMeasure merge_atoms_1d(const DiscreteMeasure &m) {
    std::map<double, double> acc;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        acc[m.atoms(i, 0)] += m.masses[i];
    }
    Mat atoms(static_cast<Eigen::Index>(acc.size()), 1);
    Vec masses(static_cast<Eigen::Index>(acc.size()));
    Eigen::Index i = 0;
    for (const auto &[x, w] : acc) {
        atoms(i, 0) = x;
        masses[i] = w;
        ++i;
    }
    return {std::move(atoms), std::move(masses)};
}

Outcome check_wfr_reaction_rate() {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    std::string detail;
    bool pass = true;
    for (const double beta : {0.5, 1.0}) {
        Rng rng(404);
        const long m = 20;
        const DiscreteMeasure pi_hat{random_points(rng, m, 1, 1.0),
                                     Vec::Constant(m, 1.0 / m)};
        Ensemble e{random_points(rng, 30, 1, 1.0, 5.0), Vec::Constant(30, 1.0 / 30)};
        FlowConfig cfg;
        cfg.kind = FlowKind::WfrIft;
        cfg.tau = 0.05;
        cfg.alpha = 0.0;
        cfg.beta = beta;
        cfg.steps = 100;
        cfg.injection = 20;
        cfg.kernel = k;
        Rng step_rng(99);
        std::vector<double> ts, logs;
        ts.push_back(0.0);
        logs.push_back(std::log(
            std::sqrt(mmd2(k, merge_atoms_1d(e.as_measure()), pi_hat))));
        for (long n = 1; n <= cfg.steps; ++n) {
            e = wfr_ift_step(e, pi_hat, cfg, step_rng);
            ts.push_back(cfg.tau * n);
            logs.push_back(std::log(
                std::sqrt(mmd2(k, merge_atoms_1d(e.as_measure()), pi_hat))));
        }
        const double rate = -fit_slope(ts, logs);
        pass = pass && std::abs(rate - beta) <= 0.1 * beta;
        detail += fmt("beta=%.1f", beta) + fmt(" rate=%.4f  ", rate);
    }
    return {pass, detail};
}

// --- KSD descent recovers Gaussian moments -----------------------------

Outcome check_ksd_flow_sampling() {
    const Target target = Target::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const SteinKernel s(KernelSpec::gaussian(1.0), target);
    Rng rng(505);
    // offset 2: from much farther out the score-weighted repulsion
    // scatters the leading particles and they return only at rate 1/N,
    // so no step size reaches the moment tolerances in this budget
    Ensemble e = Ensemble::uniform(random_points(rng, 200, 1, 1.0, 2.0));
    const double ksd0 = ksd2(s, e.as_measure());
    for (int n = 0; n < 2000; ++n) { e = ksd_wgf_step(e, s, 0.1); }
    const double ksd_final = ksd2(s, e.as_measure());
    const double mean = e.positions.col(0).mean();
    const double var =
        (e.positions.col(0).array() - mean).square().mean();
    const bool pass = std::abs(mean) < 0.1 && std::abs(var - 1.0) < 0.15 &&
                      ksd_final <= ksd0 / 10.0;
    return {pass, fmt("mean %.3g", mean) + fmt(" var %.3g", var) +
                      fmt(" ksd2 drop x%.3g", ksd0 / ksd_final)};
}

// --- MMD descent on a bimodal instance ---------------------------------

Outcome check_mmd_flow_two_gaussians() {
    std::vector<GaussianComponent> comps(2);
    comps[0] = {Vec::Constant(1, -2.0), Mat::Identity(1, 1)};
    comps[1] = {Vec::Constant(1, 2.0), Mat::Identity(1, 1)};
    const Target target = Target::gaussian_mixture(comps, Vec::Constant(2, 0.5));
    const DiscreteMeasure pi_hat =
        ensemble_from_sampler(target, 128, 11).as_measure();
    Rng rng(606);
    Ensemble e = Ensemble::uniform(random_points(rng, 100, 1, 1.0));
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const double initial = mmd2(k, e.as_measure(), pi_hat);
    double prev = initial;
    long nonincreasing = 0;
    const long steps = 500;
    for (long n = 0; n < steps; ++n) {
        e = mmd_wgf_step(e, pi_hat, k, 0.1);
        const double cur = mmd2(k, e.as_measure(), pi_hat);
        if (cur <= prev) { ++nonincreasing; }
        prev = cur;
    }
    const bool pass =
        nonincreasing >= (95 * steps) / 100 && prev < 0.1 * initial;
    return {pass, fmt("monotone %.0f", static_cast<double>(nonincreasing)) +
                      "/500" + fmt(" final/initial %.3g", prev / initial)};
}

// --- proximal weight step vs exhaustive simplex grid -------------------

Outcome check_jko_grid_oracle() {
    Rng rng(707);
    double worst_gap = 0.0;
    double worst_residual = 0.0;
    for (long inst = 0; inst < 20; ++inst) {
        const long d = 1 + static_cast<long>(rng.next_u64() % 2);
        const Mat support = random_points(rng, 3, d, 1.5);
        const Vec prev = random_simplex(rng, 3);
        const long m = 2 + static_cast<long>(rng.next_u64() % 3);
        const DiscreteMeasure pi_hat =
            DiscreteMeasure{random_points(rng, m, d, 1.5), random_simplex(rng, m)}
                .normalized();
        const KernelSpec k = pick_kernel(inst, rng);
        const double eta = 1.0;

        // explicit small Gram matrices over the union, built once; the
        // objective is evaluated as a raw signed double sum
        const long total = 3 + m;
        Mat atoms(total, d);
        atoms.topRows(3) = support;
        atoms.bottomRows(m) = pi_hat.atoms;
        Mat gram(total, total);
        for (long i = 0; i < total; ++i) {
            for (long j = 0; j < total; ++j) {
                gram(i, j) = kernel_eval(k, atoms.row(i).transpose(),
                                         atoms.row(j).transpose());
            }
        }
        const auto objective = [&](const Vec &w) {
            Vec s1(total), s2(total);
            s1.head(3) = w;
            s1.tail(m) = -pi_hat.masses;
            s2.head(3) = w - prev;
            s2.tail(m).setZero();
            return 0.5 * s1.dot(gram * s1) +
                   (0.5 / eta) * s2.dot(gram * s2);
        };

        const JkoSolution sol = jko_step_full(support, prev, pi_hat, k, eta);
        const Vec grid = simplex_grid_argmin(objective, 3, 1e-3);
        const double gap = std::abs(objective(grid) - objective(sol.weights));
        worst_gap = std::max(worst_gap, gap);
        worst_residual = std::max(worst_residual, sol.kkt_residual);
    }
    const bool pass = worst_gap < 1e-3 && worst_residual < 1e-8;
    return {pass, fmt("max obj gap %.3g", worst_gap) +
                      fmt(" max kkt %.3g", worst_residual)};
}

// --- Stein kernel integrates to zero against the target ----------------

Outcome check_stein_zero_mean() {
    const Target target = Target::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const QuadratureGrid grid(-10.0, 10.0, 10000);
    double worst = 0.0;
    for (const KernelSpec &k :
         {KernelSpec::gaussian(1.0), KernelSpec::imq(1.0, 0.5)}) {
        const SteinKernel s(k, target);
        for (const double xv : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
            const Vec x = Vec::Constant(1, xv);
            const double integral = quad_integral(
                [&](double y) {
                    const Vec yv = Vec::Constant(1, y);
                    return stein_kernel_eval(s, x, yv) *
                           std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI);
                },
                grid);
            worst = std::max(worst, std::abs(integral));
        }
    }
    return {worst < 1e-6, fmt("max |integral| %.3g", worst)};
}

// --- analytic gradients vs central differences -------------------------

Outcome check_gradient_consistency() {
    Rng rng(808);
    double worst = 0.0;
    for (const KernelSpec &k :
         {KernelSpec::gaussian(0.9), KernelSpec::imq(1.2, 0.5)}) {
        for (const long d : {1L, 2L, 5L}) {
            const Target target = Target::gaussian(Vec::Zero(d), Mat::Identity(d, d));
            const SteinKernel s(k, target);
            long accepted = 0;
            long attempts = 0;
            while (accepted < 40 && attempts < 4000) {
                ++attempts;
                const Vec x = random_points(rng, 1, d, 1.2).row(0).transpose();
                const Vec y = random_points(rng, 1, d, 1.2).row(0).transpose();
                if ((x - y).norm() < 0.3) { continue; }
                const Vec g = kernel_grad2(k, x, y);
                const Vec gs = stein_kernel_grad2(s, x, y);
                // skip near-critical points where a relative error is
                // meaningless against finite-difference noise
                if (g.norm() < 1e-2 || gs.norm() < 1e-2) { continue; }
                const Vec g_fd = finite_diff_grad(
                    [&](const Vec &yy) { return kernel_eval(k, x, yy); }, y, 1e-5);
                const Vec gs_fd = finite_diff_grad(
                    [&](const Vec &yy) { return stein_kernel_eval(s, x, yy); }, y,
                    1e-5);
                worst = std::max(worst, (g - g_fd).norm() / g.norm());
                worst = std::max(worst, (gs - gs_fd).norm() / gs.norm());
                ++accepted;
            }
            if (accepted < 40) {
                return {false, "could not sample enough non-degenerate pairs"};
            }
        }
    }
    return {worst < 1e-6, fmt("max rel err %.3g", worst)};
}

// --- multiplicative weight update: fixed point and scalar oracle -------

Outcome check_mirror_fixed_point() {
    Rng rng(909);
    const KernelSpec k = KernelSpec::gaussian(1.0);

    const Mat atoms = random_points(rng, 5, 1, 1.5);
    const Vec pi = random_simplex(rng, 5);
    const Ensemble e{atoms, pi};
    // arbitrary total mass on the target side: normalization is internal
    const Ensemble fixed = mirror_step(e, {atoms, 2.0 * pi}, k, 0.7);
    const double drift = (fixed.weights - pi).cwiseAbs().maxCoeff();

    Mat two(2, 1);
    two << 0.0, 1.0;
    Vec mu(2), pi2(2);
    mu << 0.8, 0.2;
    pi2 << 0.5, 0.5;
    const Ensemble out = mirror_step({two, mu}, {two, pi2}, k, 1.0);
    // scalar brute-force oracle
    const double kk = std::exp(-0.5);
    const double w0 = 0.8 + 0.2 * kk - 0.5 - 0.5 * kk;
    const double w1 = 0.8 * kk + 0.2 - 0.5 * kk - 0.5;
    const double a0 = 0.8 * std::exp(-w0);
    const double a1 = 0.2 * std::exp(-w1);
    const double gap = std::max(std::abs(out.weights[0] - a0 / (a0 + a1)),
                                std::abs(out.weights[1] - a1 / (a0 + a1)));

    const bool pass = drift < 1e-12 && gap < 1e-12;
    return {pass, fmt("fixed-point drift %.3g", drift) +
                      fmt(" oracle gap %.3g", gap)};
}

// --- local-regression vs RKHS witness sign agreement -------------------

Outcome check_nw_witness_sign() {
    Rng rng(1010);
    long compared = 0;
    long disagreements = 0;
    for (long inst = 0; inst < 20; ++inst) {
        const long d = 1 + static_cast<long>(rng.next_u64() % 2);
        const long n = 5 + static_cast<long>(rng.next_u64() % 16);
        const long m = 5 + static_cast<long>(rng.next_u64() % 16);
        const Ensemble e{random_points(rng, n, d, 1.2), random_simplex(rng, n)};
        const DiscreteMeasure pi_hat{random_points(rng, m, d, 1.2),
                                     random_simplex(rng, m)};
        const KernelSpec k = KernelSpec::gaussian(0.8 + 0.7 * rng.uniform());
        for (int p = 0; p < 10; ++p) {
            const Vec probe = random_points(rng, 1, d, 1.5).row(0).transpose();
            const NwWitnessValue nw = nw_witness(e, pi_hat, k, probe);
            const double wit =
                mmd_witness(k, e.as_measure(), pi_hat.normalized(), probe);
            if (nw.degenerate || std::abs(nw.value) <= 1e-10 ||
                std::abs(wit) <= 1e-10) {
                continue;
            }
            ++compared;
            if ((nw.value > 0.0) != (wit > 0.0)) { ++disagreements; }
        }
    }
    const bool pass = compared > 0 && disagreements == 0;
    return {pass, fmt("probes compared %.0f", static_cast<double>(compared)) +
                      fmt(" disagreements %.0f",
                          static_cast<double>(disagreements))};
}

// --- byte-identical reruns ---------------------------------------------

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome check_run_determinism() {
    RunSpec spec;
    spec.flow.kind = FlowKind::MmdWgf;
    spec.flow.tau = 0.05;
    spec.flow.steps = 20;
    spec.flow.kernel = KernelSpec::gaussian(1.0);
    spec.flow.seed = 7;
    spec.target.kind = "gaussian";
    spec.target.components = {{Vec::Zero(1), Mat::Identity(1, 1)}};
    spec.target.mixture_weights = Vec::Ones(1);
    spec.init.kind = "gaussian";
    spec.init.n = 50;
    spec.init.mean = Vec::Constant(1, 2.0);
    spec.init.cov = Mat::Identity(1, 1);

    const fs::path base = fs::temp_directory_path() / "iklflow_determinism";
    fs::remove_all(base);
    fs::create_directories(base);
    const fs::path cfg = base / "config.json";
    {
        std::ofstream out(cfg);
        out << serialize_config(spec) << "\n";
    }
    const int rc1 = cmd_run(cfg.string(), (base / "out1").string());
    const int rc2 = cmd_run(cfg.string(), (base / "out2").string());
    const std::string m1 = slurp(base / "out1" / "metrics.csv");
    const std::string m2 = slurp(base / "out2" / "metrics.csv");
    const bool pass = rc1 == 0 && rc2 == 0 && !m1.empty() && m1 == m2;
    fs::remove_all(base);
    return {pass, fmt("exit %.0f", static_cast<double>(rc1)) +
                      (m1 == m2 ? " metrics identical" : " metrics differ")};
}

// --- oracle self-checks ------------------------------------------------

Outcome check_quadrature_sanity() {
    const double mass = quad_integral(
        [](double y) { return std::exp(-0.5 * y * y) / std::sqrt(2.0 * M_PI); },
        QuadratureGrid(-10.0, 10.0, 10000));
    const double odd = quad_integral(
        [](double y) { return y * std::exp(-0.5 * y * y); },
        QuadratureGrid(-10.0, 10.0, 10001));
    const bool pass = std::abs(mass - 1.0) < 1e-8 && std::abs(odd) < 1e-12;
    return {pass, fmt("mass err %.3g", std::abs(mass - 1.0)) +
                      fmt(" odd integral %.3g", odd)};
}

Outcome check_finite_diff_sanity() {
    Rng rng(1212);
    const long d = 4;
    const Mat a_half = random_points(rng, d, d, 1.0);
    const Mat a = a_half + a_half.transpose();
    const Vec b = random_points(rng, 1, d, 1.0).row(0).transpose();
    const Vec x = random_points(rng, 1, d, 1.0).row(0).transpose();
    const auto f = [&](const Vec &v) {
        return 0.5 * v.dot(a * v) + b.dot(v);
    };
    const Vec g = finite_diff_grad(f, x, 1e-4);
    const Vec exact = a * x + b;
    const double rel = (g - exact).norm() / exact.norm();
    return {rel < 1e-8, fmt("rel err %.3g", rel)};
}

Outcome check_grid_search_sanity() {
    Vec c(3);
    c << 0.7, -0.4, 0.2;
    const Vec best = simplex_grid_argmin(
        [&](const Vec &w) { return c.dot(w); }, 3, 0.1);
    const bool vertex_ok = std::abs(best[1] - 1.0) < 1e-12;
    const Vec coarse = simplex_grid_argmin(
        [&](const Vec &w) { return c.dot(w); }, 3, 1.0);
    const bool coarse_vertex = std::abs(coarse.maxCoeff() - 1.0) < 1e-12;
    return {vertex_ok && coarse_vertex,
            vertex_ok ? "argmin at expected vertex" : "wrong grid argmin"};
}

struct Criterion {
    const char *name;
    const char *scope;
    Outcome (*fn)();
};

constexpr Criterion kCriteria[] = {
    {"force_matches_witness", "kernels", check_force_matches_witness},
    {"stein_zero_mean", "kernels", check_stein_zero_mean},
    {"gradient_consistency", "kernels", check_gradient_consistency},
    {"fr_decay_rate", "flows", check_fr_decay_rate},
    {"fr_log_slope", "flows", check_fr_log_slope},
    {"wfr_reaction_rate", "flows", check_wfr_reaction_rate},
    {"ksd_flow_sampling", "flows", check_ksd_flow_sampling},
    {"mmd_flow_two_gaussians", "flows", check_mmd_flow_two_gaussians},
    {"jko_grid_oracle", "flows", check_jko_grid_oracle},
    {"mirror_fixed_point", "flows", check_mirror_fixed_point},
    {"nw_witness_sign", "flows", check_nw_witness_sign},
    {"run_determinism", "flows", check_run_determinism},
    {"quadrature_sanity", "oracles", check_quadrature_sanity},
    {"finite_diff_sanity", "oracles", check_finite_diff_sanity},
    {"grid_search_sanity", "oracles", check_grid_search_sanity},
};

}  // namespace

std::vector<CheckResult> run_checks(const std::string &scope) {
    if (scope != "kernels" && scope != "flows" && scope != "oracles" &&
        scope != "all") {
        throw InputError("run_checks: unknown scope '" + scope +
                         "' (kernels | flows | oracles | all)");
    }
    std::vector<CheckResult> results;
    for (const Criterion &c : kCriteria) {
        if (scope != "all" && scope != c.scope) { continue; }
        CheckResult r;
        r.name = c.name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            const Outcome out = c.fn();
            r.pass = out.first;
            r.detail = out.second;
        } catch (const std::exception &err) {
            r.pass = false;
            r.detail = std::string("exception: ") + err.what();
        }
        r.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace iklflow
