#include "iklflow/discrepancy.hpp"

#include <cmath>
#include <cstdio>
#include <vector>

#include "iklflow/parallel.hpp"

namespace iklflow {

const char *MetricsRecord::csv_header() {
    return "step,time,mmd2,ksd2,mean_err,cov_err";
}

std::string MetricsRecord::csv_row() const {
    char buf[256];
    char ksd_buf[32] = "";
    if (ksd2.has_value()) {
        std::snprintf(ksd_buf, sizeof(ksd_buf), "%.17g", *ksd2);
    }
    std::snprintf(buf, sizeof(buf), "%ld,%.17g,%.17g,%s,%.17g,%.17g", step, time,
                  mmd2, ksd_buf, mean_err, cov_err);
    return buf;
}

namespace {

void check_dims(const DiscreteMeasure &a, const DiscreteMeasure &b,
                const char *op) {
    if (a.dim() != b.dim()) {
        throw InputError(std::string(op) + ": dimension mismatch");
    }
}

// Signed quadratic form s^T G s over the concatenated atoms, one row per
// parallel slot so results are identical at any thread count.
double signed_quadratic_form(const KernelSpec &k, const Mat &atoms,
                             const Vec &signed_masses) {
    const long n = atoms.rows();
    Vec row_sums(n);
    parallel_for(n, [&](long i) {
        const Vec xi = atoms.row(i).transpose();
        double acc = 0.0;
        for (long j = 0; j < n; ++j) {
            acc += signed_masses[j] * kernel_eval(k, xi, atoms.row(j).transpose());
        }
        row_sums[i] = signed_masses[i] * acc;
    });
    return row_sums.sum();
}

}  // namespace

double mmd2(const KernelSpec &k, const DiscreteMeasure &a,
            const DiscreteMeasure &b) {
    check_dims(a, b, "mmd2");
    Mat atoms(a.size() + b.size(), a.dim());
    atoms.topRows(a.size()) = a.atoms;
    atoms.bottomRows(b.size()) = b.atoms;
    Vec signed_masses(a.size() + b.size());
    signed_masses.head(a.size()) = a.masses;
    signed_masses.tail(b.size()) = -b.masses;
    return signed_quadratic_form(k, atoms, signed_masses);
}

double ksd2(const SteinKernel &s, const DiscreteMeasure &mu) {
    const long n = mu.size();
    std::vector<Vec> scores(static_cast<std::size_t>(n));
    parallel_for(n, [&](long i) {
        scores[static_cast<std::size_t>(i)] =
            s.target->score(mu.atoms.row(i).transpose());
    });
    Vec row_sums(n);
    parallel_for(n, [&](long i) {
        const Vec xi = mu.atoms.row(i).transpose();
        double acc = 0.0;
        for (long j = 0; j < n; ++j) {
            acc += mu.masses[j] *
                   stein_kernel_eval_scored(s.base, xi,
                                            mu.atoms.row(j).transpose(),
                                            scores[static_cast<std::size_t>(i)],
                                            scores[static_cast<std::size_t>(j)]);
        }
        row_sums[i] = mu.masses[i] * acc;
    });
    return row_sums.sum();
}

double mmd_witness(const KernelSpec &k, const DiscreteMeasure &a,
                   const DiscreteMeasure &b, const Vec &x) {
    check_dims(a, b, "mmd_witness");
    if (x.size() != a.dim()) { throw InputError("mmd_witness: probe dimension mismatch"); }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        acc += a.masses[i] * kernel_eval(k, a.atoms.row(i).transpose(), x);
    }
    for (Eigen::Index i = 0; i < b.size(); ++i) {
        acc -= b.masses[i] * kernel_eval(k, b.atoms.row(i).transpose(), x);
    }
    return acc;
}

std::pair<double, double> moment_error(const Ensemble &e, const Target &target) {
    const auto [t_mean, t_cov] = target_moments(target);
    if (t_mean.size() != e.dim()) {
        throw InputError("moment_error: dimension mismatch");
    }
    const Vec mean = e.positions.transpose() * e.weights;
    Mat cov = Mat::Zero(e.dim(), e.dim());
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const Vec c = e.positions.row(i).transpose() - mean;
        cov += e.weights[i] * (c * c.transpose());
    }
    return {(mean - t_mean).norm(), (cov - t_cov).norm()};
}

}  // namespace iklflow
