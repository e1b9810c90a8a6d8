#pragma once

#include <optional>
#include <string>

#include "iklflow/kernel.hpp"
#include "iklflow/measure.hpp"

namespace iklflow {

/// Per-step diagnostics of a flow run. Serializes to one CSV row with
/// the fixed column order step,time,mmd2,ksd2,mean_err,cov_err (empty
/// field when ksd2 is absent).
struct MetricsRecord {
    long step = 0;
    double time = 0.0;
    double mmd2 = 0.0;
    std::optional<double> ksd2;
    double mean_err = 0.0;
    double cov_err = 0.0;

    static const char *csv_header();  // "step,time,mmd2,ksd2,mean_err,cov_err"
    std::string csv_row() const;
};

/// Exact squared MMD of (a - b) as a V-statistic quadratic form over
/// all atom pairs, diagonal included.
double mmd2(const KernelSpec &k, const DiscreteMeasure &a,
            const DiscreteMeasure &b);

/// sum_ij w_i w_j s_pi(x_i, x_j), diagonal included.
double ksd2(const SteinKernel &s, const DiscreteMeasure &mu);

/// Witness f(x) = integral of k(x', x) d(a - b)(x').
double mmd_witness(const KernelSpec &k, const DiscreteMeasure &a,
                   const DiscreteMeasure &b, const Vec &x);

/// Euclidean norm of the mean gap and Frobenius norm of the covariance
/// gap between the weighted ensemble moments and the target moments.
std::pair<double, double> moment_error(const Ensemble &e, const Target &target);

}  // namespace iklflow
