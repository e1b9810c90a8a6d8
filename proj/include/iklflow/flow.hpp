#pragma once

#include <cstdint>
#include <vector>

#include "iklflow/discrepancy.hpp"
#include "iklflow/kernel.hpp"
#include "iklflow/measure.hpp"
#include "iklflow/rng.hpp"

namespace iklflow {

enum class FlowKind { MmdWgf, KsdWgf, FrExact, WfrIft, WfrKsd, Mirror, Jko };

struct FlowConfig {
    FlowKind kind = FlowKind::MmdWgf;
    double tau = 0.1;    // step size (JKO: the proximal eta)
    double alpha = 1.0;  // wfr transport scale
    double beta = 0.0;   // wfr reaction scale
    long steps = 1;
    KernelSpec kernel = KernelSpec::gaussian(1.0);
    std::uint64_t seed = 0;
    long injection = 0;  // fresh target particles per reaction sub-step
    long particle_cap = 100000;  // prune tiny weights above this size
    bool score_only_reaction = false;  // force the SNIS reaction route

    /// Cross-field invariants; throws ConfigError / InputError.
    void validate() const;
};

/// One explicit-Euler transport step of the MMD flow on uniformly
/// weighted particles:
///   X_i <- X_i - tau ((1/N) sum_j grad2 k(X_j,X_i)
///                     - sum_j v_j grad2 k(Y_j,X_i))
/// with v the normalized target masses (1/M for uniform samples).
Ensemble mmd_wgf_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                      const KernelSpec &k, double tau);

/// X_i <- X_i - tau (1/N) sum_j grad2 s_pi(X_j, X_i).
Ensemble ksd_wgf_step(const Ensemble &e, const SteinKernel &s, double tau);

/// Exact reaction-flow solution: the mixture
/// e^{-t} mu_0 + (1 - e^{-t}) pi_hat on the union of the atoms.
DiscreteMeasure fr_exact_solution(const Ensemble &e0,
                                  const DiscreteMeasure &target_samples,
                                  double t);

/// Transport-then-reaction splitting step of the unbalanced flow. The
/// transport sub-step moves every particle along the weighted witness
/// gradient scaled by alpha; the reaction sub-step applies the exact
/// weight decay e^{-beta tau} and injects cfg.injection fresh target
/// particles (systematic resampling, seeded) carrying the freed mass.
Ensemble wfr_ift_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                      const FlowConfig &cfg, Rng &rng);

/// Same splitting with the Stein-kernel witness gradient in the
/// transport sub-step. Reaction uses the target sampler, or when
/// cfg.score_only_reaction is set (or no sampler exists) a
/// self-normalized importance reweighting from the unnormalized
/// log-density.
Ensemble wfr_ksd_step(const Ensemble &e, const SteinKernel &s,
                      const Target &target, const FlowConfig &cfg, Rng &rng);

/// Multiplicative weight update w_i <- w_i exp(-tau f(x_i)) / Z with f
/// the MMD witness of (mu - pi_hat). Positions never move.
Ensemble mirror_step(const Ensemble &e, const DiscreteMeasure &target_samples,
                     const KernelSpec &k, double tau);

/// w_i <- w_i exp(-tau sum_j w_j s_pi(x_i, x_j)) / Z.
Ensemble mirror_step_stein(const Ensemble &e, const SteinKernel &s, double tau);

struct JkoSolution {
    Vec weights;
    double kkt_residual;  // sup-norm of the tangent-cone projected gradient
    long iterations;
};

/// Proximal step: argmin over simplex weights on the fixed support of
///   1/2 mmd2(w, pi_hat) + 1/(2 eta) mmd2(w, prev).
/// Accelerated projected gradient, stops at KKT residual < 1e-8;
/// throws ConvergenceError (residual attached) past the iteration cap.
JkoSolution jko_step_full(const Mat &support, const Vec &prev_weights,
                          const DiscreteMeasure &target_samples,
                          const KernelSpec &k, double eta);

Vec jko_step(const Mat &support, const Vec &prev_weights,
             const DiscreteMeasure &target_samples, const KernelSpec &k,
             double eta);

struct NwWitnessValue {
    double value = 0.0;
    bool degenerate = false;  // all kernel weights underflowed at x
};

/// Local-regression force estimate: the normalized-KDE difference
/// (kde_mu(x) - kde_pi(x)) / kde_mu(x). Shares the sign of the MMD
/// witness wherever kde_mu does not underflow.
NwWitnessValue nw_witness(const Ensemble &e,
                          const DiscreteMeasure &target_samples,
                          const KernelSpec &k, const Vec &x);

struct FlowResult {
    std::vector<MetricsRecord> metrics;  // rows 0..steps
    Ensemble final_ensemble;
    bool score_only_reaction = false;
    double jko_last_residual = 0.0;
};

/// Advances the configured flow for cfg.steps, recording a
/// MetricsRecord at t = 0 and after every step. Deterministic given
/// cfg.seed. Capability mismatches are reported before step 0.
FlowResult run_flow(const FlowConfig &cfg, const Ensemble &init,
                    const Target &target);

/// Euclidean projection onto the probability simplex.
Vec simplex_project(const Vec &v);

}  // namespace iklflow
