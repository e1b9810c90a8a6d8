#include "iklflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "iklflow/parallel.hpp"

namespace iklflow {

namespace {

constexpr double kKktTol = 1e-8;
constexpr long kJkoMaxIters = 100000;
constexpr double kPruneScale = 1e-8;  // prune weights < kPruneScale / N

void check_dims(const Ensemble &e, const DiscreteMeasure &target,
                const char *op) {
    if (e.dim() != target.dim()) {
        throw InputError(std::string(op) + ": dimension mismatch");
    }
}

// Gradient of the witness of (mu - pi_hat) at every particle; one row
// per particle, weights already normalized on both sides.
Mat witness_gradient(const Mat &positions, const Vec &weights,
                     const DiscreteMeasure &target_norm, const KernelSpec &k) {
    const long n = positions.rows();
    Mat force(n, positions.cols());
    parallel_for(n, [&](long i) {
        const Vec xi = positions.row(i).transpose();
        Vec acc = Vec::Zero(positions.cols());
        for (long j = 0; j < n; ++j) {
            acc += weights[j] * kernel_grad2(k, positions.row(j).transpose(), xi);
        }
        for (long j = 0; j < target_norm.size(); ++j) {
            acc -= target_norm.masses[j] *
                   kernel_grad2(k, target_norm.atoms.row(j).transpose(), xi);
        }
        force.row(i) = acc.transpose();
    });
    return force;
}

// Stein witness gradient: sum_j w_j grad2 s(X_j, x_i). Scores and the
// score Jacobians are evaluated once per particle, not per pair.
Mat stein_witness_gradient(const Mat &positions, const Vec &weights,
                           const SteinKernel &s) {
    const long n = positions.rows();
    std::vector<Vec> scores(static_cast<std::size_t>(n));
    std::vector<Mat> jacobians(static_cast<std::size_t>(n));
    parallel_for(n, [&](long i) {
        const Vec xi = positions.row(i).transpose();
        scores[static_cast<std::size_t>(i)] = s.target->score(xi);
        jacobians[static_cast<std::size_t>(i)] = s.target->score_jacobian(xi);
    });
    Mat force(n, positions.cols());
    parallel_for(n, [&](long i) {
        const Vec xi = positions.row(i).transpose();
        Vec acc = Vec::Zero(positions.cols());
        for (long j = 0; j < n; ++j) {
            acc += weights[j] *
                   stein_kernel_grad2_scored(
                       s.base, positions.row(j).transpose(), xi,
                       scores[static_cast<std::size_t>(j)],
                       scores[static_cast<std::size_t>(i)],
                       jacobians[static_cast<std::size_t>(i)]);
        }
        force.row(i) = acc.transpose();
    });
    return force;
}

// Systematic (low-variance) resampling of n atoms from a normalized
// discrete measure; one uniform draw per call.
Mat systematic_draw(const DiscreteMeasure &target_norm, long n, Rng &rng) {
    Mat out(n, target_norm.dim());
    const double step = 1.0 / static_cast<double>(n);
    double u = rng.uniform() * step;
    double cum = target_norm.masses[0];
    Eigen::Index j = 0;
    for (long i = 0; i < n; ++i) {
        while (u > cum && j + 1 < target_norm.size()) {
            ++j;
            cum += target_norm.masses[j];
        }
        out.row(i) = target_norm.atoms.row(j);
        u += step;
    }
    return out;
}

// Exact Fisher-Rao reaction sub-step: decay existing weights by
// e^{-beta tau} and hand the freed mass to injected target atoms.
Ensemble fr_reaction(const Ensemble &e, const Mat &injected, double decay,
                     long particle_cap) {
    const long n = e.size();
    const long m = injected.rows();
    Mat positions(n + m, e.dim());
    positions.topRows(n) = e.positions;
    positions.bottomRows(m) = injected;
    Vec weights(n + m);
    weights.head(n) = decay * e.weights;
    weights.tail(m).setConstant((1.0 - decay) / static_cast<double>(m));

    if (positions.rows() > particle_cap) {
        const double threshold = kPruneScale / static_cast<double>(positions.rows());
        std::vector<Eigen::Index> keep;
        keep.reserve(static_cast<std::size_t>(positions.rows()));
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            if (weights[i] >= threshold) { keep.push_back(i); }
        }
        Mat pruned_pos(static_cast<Eigen::Index>(keep.size()), e.dim());
        Vec pruned_w(static_cast<Eigen::Index>(keep.size()));
        for (std::size_t i = 0; i < keep.size(); ++i) {
            pruned_pos.row(static_cast<Eigen::Index>(i)) = positions.row(keep[i]);
            pruned_w[static_cast<Eigen::Index>(i)] = weights[keep[i]];
        }
        pruned_w /= pruned_w.sum();
        return {std::move(pruned_pos), std::move(pruned_w)};
    }
    weights /= weights.sum();
    return {std::move(positions), std::move(weights)};
}

}  // namespace

void FlowConfig::validate() const {
    if (!(tau > 0.0)) { throw InputError("FlowConfig: tau must be positive"); }
    if (steps < 1) { throw InputError("FlowConfig: steps must be >= 1"); }
    if (injection < 0) { throw InputError("FlowConfig: injection must be >= 0"); }
    if (kind == FlowKind::WfrIft || kind == FlowKind::WfrKsd) {
        if (alpha < 0.0 || beta < 0.0 || !(alpha + beta > 0.0)) {
            throw ConfigError("FlowConfig: wfr needs alpha >= 0, beta >= 0, alpha + beta > 0");
        }
        if (beta > 0.0 && injection == 0 && !score_only_reaction) {
            throw ConfigError(
                "FlowConfig: injection = 0 with beta > 0 -- reaction mass has nowhere to go");
        }
    }
}

Ensemble mmd_wgf_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                      const KernelSpec &k, double tau) {
    check_dims(e, target_samples, "mmd_wgf_step");
    if (!e.has_uniform_weights()) {
        throw ConfigError("mmd_wgf_step: transport flow requires uniform weights");
    }
    const Mat force =
        witness_gradient(e.positions, e.weights, target_samples.normalized(), k);
    return {e.positions - tau * force, e.weights};
}

Ensemble ksd_wgf_step(const Ensemble &e, const SteinKernel &s, double tau) {
    if (!e.has_uniform_weights()) {
        throw ConfigError("ksd_wgf_step: transport flow requires uniform weights");
    }
    const Mat force = stein_witness_gradient(e.positions, e.weights, s);
    return {e.positions - tau * force, e.weights};
}

DiscreteMeasure fr_exact_solution(const Ensemble &e0,
                                  const DiscreteMeasure &target_samples,
                                  double t) {
    check_dims(e0, target_samples, "fr_exact_solution");
    if (t < 0.0) { throw InputError("fr_exact_solution: t must be >= 0"); }
    const DiscreteMeasure pi = target_samples.normalized();
    const double decay = std::exp(-t);
    Mat atoms(e0.size() + pi.size(), e0.dim());
    atoms.topRows(e0.size()) = e0.positions;
    atoms.bottomRows(pi.size()) = pi.atoms;
    Vec masses(e0.size() + pi.size());
    masses.head(e0.size()) = decay * e0.weights;
    masses.tail(pi.size()) = (1.0 - decay) * pi.masses;
    return {std::move(atoms), std::move(masses)};
}

Ensemble wfr_ift_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                      const FlowConfig &cfg, Rng &rng) {
    check_dims(e, target_samples, "wfr_ift_step");
    if (cfg.kind != FlowKind::WfrIft) {
        throw ConfigError("wfr_ift_step: cfg.kind must be wfr_ift");
    }
    cfg.validate();
    const DiscreteMeasure pi = target_samples.normalized();

    Ensemble out = e;
    if (cfg.alpha > 0.0) {
        const Mat force = witness_gradient(out.positions, out.weights, pi, cfg.kernel);
        out.positions -= cfg.tau * cfg.alpha * force;
    }
    if (cfg.beta > 0.0) {
        const double decay = std::exp(-cfg.beta * cfg.tau);
        const Mat injected = systematic_draw(pi, cfg.injection, rng);
        out = fr_reaction(out, injected, decay, cfg.particle_cap);
    }
    return out;
}

Ensemble wfr_ksd_step(const Ensemble &e, const SteinKernel &s,
                      const Target &target, const FlowConfig &cfg, Rng &rng) {
    if (cfg.kind != FlowKind::WfrKsd) {
        throw ConfigError("wfr_ksd_step: cfg.kind must be wfr_ksd");
    }
    cfg.validate();
    const bool sampler_route = target.has_sampler() && !cfg.score_only_reaction;
    if (!sampler_route && !target.has_unnorm_logdensity()) {
        throw CapabilityError(
            "wfr_ksd_step: reaction needs a sampler or an unnormalized log-density");
    }

    Ensemble out = e;
    if (cfg.alpha > 0.0) {
        const Mat force = stein_witness_gradient(out.positions, out.weights, s);
        out.positions -= cfg.tau * cfg.alpha * force;
    }
    if (cfg.beta > 0.0) {
        if (sampler_route) {
            const double decay = std::exp(-cfg.beta * cfg.tau);
            const Mat injected = target.sample(cfg.injection, rng);
            out = fr_reaction(out, injected, decay, cfg.particle_cap);
        } else {
            // SNIS surrogate of the reaction on the current atoms:
            // w_i <- w_i exp(beta tau (pi_hat_i / w_i - 1)) / Z with
            // pi_hat self-normalized from the unnormalized density.
            Vec logp(out.size());
            for (Eigen::Index i = 0; i < out.size(); ++i) {
                logp[i] = target.unnorm_logdensity(out.positions.row(i).transpose());
            }
            const double mx = logp.maxCoeff();
            Vec pi_hat = (logp.array() - mx).exp();
            pi_hat /= pi_hat.sum();
            Vec log_w(out.size());
            for (Eigen::Index i = 0; i < out.size(); ++i) {
                const double ratio =
                    out.weights[i] > 0.0 ? pi_hat[i] / out.weights[i] : 0.0;
                const double arg = cfg.beta * cfg.tau * (ratio - 1.0);
                log_w[i] = std::log(std::max(out.weights[i], 1e-300)) +
                           std::min(arg, 50.0);
            }
            const double mw = log_w.maxCoeff();
            out.weights = (log_w.array() - mw).exp();
            out.renormalize();
        }
    }
    return out;
}

Ensemble mirror_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                     const KernelSpec &k, double tau) {
    check_dims(e, target_samples, "mirror_step");
    const DiscreteMeasure mu = e.as_measure();
    const DiscreteMeasure pi = target_samples.normalized();
    Vec w(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double f = mmd_witness(k, mu, pi, e.positions.row(i).transpose());
        w[i] = e.weights[i] * std::exp(-tau * f);
    }
    w /= w.sum();
    return {e.positions, std::move(w)};
}

Ensemble mirror_step_stein(const Ensemble &e, const SteinKernel &s, double tau) {
    Vec w(e.size());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const Vec xi = e.positions.row(i).transpose();
        double f = 0.0;
        for (Eigen::Index j = 0; j < e.size(); ++j) {
            f += e.weights[j] *
                 stein_kernel_eval(s, xi, e.positions.row(j).transpose());
        }
        w[i] = e.weights[i] * std::exp(-tau * f);
    }
    w /= w.sum();
    return {e.positions, std::move(w)};
}

Vec simplex_project(const Vec &v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0;
    double theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cum += u[static_cast<std::size_t>(i)];
        const double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u[static_cast<std::size_t>(i)] > t) {
            theta = t;
        } else {
            break;
        }
    }
    return (v.array() - theta).max(0.0);
}

namespace {

// Sup-norm of the projection of -grad onto the simplex tangent cone at
// w; zero exactly at a KKT point.
double tangent_cone_residual(const Vec &w, const Vec &grad) {
    const double active_tol = 1e-12;
    auto value = [&](double lambda) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            const double vi = -grad[i] + lambda;
            acc += (w[i] > active_tol) ? vi : std::max(vi, 0.0);
        }
        return acc;
    };
    double lo = -grad.cwiseAbs().maxCoeff() - 1.0;
    double hi = grad.cwiseAbs().maxCoeff() + 1.0;
    while (value(lo) > 0.0) { lo = 2.0 * lo - hi; }
    while (value(hi) < 0.0) { hi = 2.0 * hi - lo; }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (value(mid) < 0.0 ? lo : hi) = mid;
    }
    const double lambda = 0.5 * (lo + hi);
    double res = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        const double vi = -grad[i] + lambda;
        res = std::max(res, std::abs((w[i] > active_tol) ? vi : std::max(vi, 0.0)));
    }
    return res;
}

Mat gram_matrix(const KernelSpec &k, const Mat &a, const Mat &b) {
    Mat g(a.rows(), b.rows());
    parallel_for(a.rows(), [&](long i) {
        for (Eigen::Index j = 0; j < b.rows(); ++j) {
            g(i, j) = kernel_eval(k, a.row(i).transpose(), b.row(j).transpose());
        }
    });
    return g;
}

}  // namespace

JkoSolution jko_step_full(const Mat &support, const Vec &prev_weights,
                          const DiscreteMeasure &target_samples,
                          const KernelSpec &k, double eta) {
    if (!(eta > 0.0)) { throw InputError("jko_step: eta must be positive"); }
    if (support.rows() != prev_weights.size()) {
        throw InputError("jko_step: support/weights size mismatch");
    }
    if (support.cols() != target_samples.dim()) {
        throw InputError("jko_step: dimension mismatch");
    }
    const DiscreteMeasure pi = target_samples.normalized();
    const Mat g = gram_matrix(k, support, support);
    const Vec c_pi = gram_matrix(k, support, pi.atoms) * pi.masses;
    const Vec c_prev = g * prev_weights;
    const double inv_eta = 1.0 / eta;

    auto grad = [&](const Vec &w) -> Vec {
        return (1.0 + inv_eta) * (g * w) - c_pi - inv_eta * c_prev;
    };

    // Lipschitz bound from the top eigenvalue of the Gram matrix.
    Vec pv = Vec::Ones(g.rows()).normalized();
    double lambda_max = 1.0;
    for (int it = 0; it < 50; ++it) {
        pv = (g * pv).normalized();
        lambda_max = pv.dot(g * pv);
    }
    const double step = 1.0 / ((1.0 + inv_eta) * std::max(lambda_max, 1e-12));

    // FISTA with gradient restart.
    Vec w = simplex_project(prev_weights);
    Vec y = w;
    double t_acc = 1.0;
    double residual = tangent_cone_residual(w, grad(w));
    long iter = 0;
    while (residual >= kKktTol && iter < kJkoMaxIters) {
        const Vec w_next = simplex_project(y - step * grad(y));
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_acc * t_acc));
        const Vec diff = w_next - w;
        if (grad(y).dot(diff) > 0.0) {
            t_acc = 1.0;  // restart momentum
            y = w_next;
        } else {
            y = w_next + ((t_acc - 1.0) / t_next) * diff;
            t_acc = t_next;
        }
        w = w_next;
        ++iter;
        if (iter % 16 == 0 || iter < 16) {
            residual = tangent_cone_residual(w, grad(w));
        }
    }
    residual = tangent_cone_residual(w, grad(w));
    if (residual >= kKktTol) {
        throw ConvergenceError("jko_step: KKT residual " + std::to_string(residual) +
                                   " above tolerance after " +
                                   std::to_string(iter) + " iterations",
                               residual);
    }
    return {std::move(w), residual, iter};
}

Vec jko_step(const Mat &support, const Vec &prev_weights,
             const DiscreteMeasure &target_samples, const KernelSpec &k,
             double eta) {
    return jko_step_full(support, prev_weights, target_samples, k, eta).weights;
}

NwWitnessValue nw_witness(const Ensemble &e,
                          const DiscreteMeasure &target_samples,
                          const KernelSpec &k, const Vec &x) {
    check_dims(e, target_samples, "nw_witness");
    if (target_samples.size() < 1) {
        throw InputError("nw_witness: empty target sample");
    }
    const DiscreteMeasure pi = target_samples.normalized();
    double kde_mu = 0.0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        kde_mu += e.weights[i] * kernel_eval(k, e.positions.row(i).transpose(), x);
    }
    double kde_pi = 0.0;
    for (Eigen::Index i = 0; i < pi.size(); ++i) {
        kde_pi += pi.masses[i] * kernel_eval(k, pi.atoms.row(i).transpose(), x);
    }
    if (!(kde_mu > 0.0)) { return {0.0, true}; }
    return {(kde_mu - kde_pi) / kde_mu, false};
}

namespace {

MetricsRecord make_record(long step, double time, const DiscreteMeasure &mu,
                          const Ensemble &as_ensemble, const Target &target,
                          const DiscreteMeasure &pi, const KernelSpec &k,
                          const SteinKernel *stein) {
    MetricsRecord rec;
    rec.step = step;
    rec.time = time;
    rec.mmd2 = mmd2(k, mu, pi);
    if (stein != nullptr && mu.size() <= 1000) {
        rec.ksd2 = ksd2(*stein, mu);
    }
    const auto [mean_err, cov_err] = moment_error(as_ensemble, target);
    rec.mean_err = mean_err;
    rec.cov_err = cov_err;
    return rec;
}

}  // namespace

FlowResult run_flow(const FlowConfig &cfg, const Ensemble &init,
                    const Target &target) {
    cfg.validate();
    const bool needs_score =
        cfg.kind == FlowKind::KsdWgf || cfg.kind == FlowKind::WfrKsd;
    if (needs_score && !target.has_score()) {
        throw CapabilityError("run_flow: this flow kind needs a target score");
    }
    if (init.dim() != target.dim()) {
        throw InputError("run_flow: ensemble/target dimension mismatch");
    }

    Rng rng(cfg.seed);
    // Reference measure for metrics (and sample-based transport): the
    // empirical atoms themselves, or a seeded draw from the target.
    DiscreteMeasure pi_hat;
    if (target.kind() == TargetKind::Empirical) {
        pi_hat = target.empirical_atoms().normalized();
    } else {
        const Eigen::Index m = std::max<Eigen::Index>(init.size(), 256);
        pi_hat = DiscreteMeasure(target.sample(m, rng),
                                 Vec::Constant(m, 1.0 / static_cast<double>(m)))
                     .normalized();
    }

    std::optional<SteinKernel> stein;
    if (target.has_score()) { stein.emplace(cfg.kernel, target); }
    const SteinKernel *stein_ptr = stein ? &*stein : nullptr;

    FlowResult result;
    result.score_only_reaction =
        cfg.kind == FlowKind::WfrKsd && cfg.score_only_reaction;

    Ensemble current = init;
    // JKO evolves weights on the fixed union support.
    Mat jko_support;
    Vec jko_weights;
    if (cfg.kind == FlowKind::Jko) {
        jko_support.resize(init.size() + pi_hat.size(), init.dim());
        jko_support.topRows(init.size()) = init.positions;
        jko_support.bottomRows(pi_hat.size()) = pi_hat.atoms;
        jko_weights = Vec::Zero(jko_support.rows());
        jko_weights.head(init.size()) = init.weights;
        current = Ensemble(jko_support, jko_weights);
    }

    result.metrics.push_back(make_record(0, 0.0, current.as_measure(), current,
                                         target, pi_hat, cfg.kernel, stein_ptr));

    for (long n = 1; n <= cfg.steps; ++n) {
        switch (cfg.kind) {
            case FlowKind::MmdWgf:
                current = mmd_wgf_step(current, pi_hat, cfg.kernel, cfg.tau);
                break;
            case FlowKind::KsdWgf:
                current = ksd_wgf_step(current, *stein, cfg.tau);
                break;
            case FlowKind::FrExact: {
                const DiscreteMeasure sol =
                    fr_exact_solution(init, pi_hat, static_cast<double>(n) * cfg.tau);
                current = Ensemble(sol.atoms, sol.masses);
                break;
            }
            case FlowKind::WfrIft:
                current = wfr_ift_step(current, pi_hat, cfg, rng);
                break;
            case FlowKind::WfrKsd:
                current = wfr_ksd_step(current, *stein, target, cfg, rng);
                break;
            case FlowKind::Mirror:
                current = mirror_step(current, pi_hat, cfg.kernel, cfg.tau);
                break;
            case FlowKind::Jko: {
                const JkoSolution sol =
                    jko_step_full(jko_support, jko_weights, pi_hat, cfg.kernel, cfg.tau);
                jko_weights = sol.weights;
                result.jko_last_residual = sol.kkt_residual;
                current = Ensemble(jko_support, jko_weights);
                break;
            }
        }
        result.metrics.push_back(make_record(n, static_cast<double>(n) * cfg.tau,
                                             current.as_measure(), current, target,
                                             pi_hat, cfg.kernel, stein_ptr));
    }
    result.final_ensemble = std::move(current);
    return result;
}

}  // namespace iklflow
