#include "iklflow/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace iklflow {

namespace {

// Radial profile k(x,y) = phi(u) with u = ||x-y||^2, plus derivatives
// in u up to third order. Everything downstream is assembled from these.
struct RadialProfile {
    double phi0, phi1, phi2, phi3;
};

RadialProfile profile(const KernelSpec &spec, double u) {
    RadialProfile p{};
    switch (spec.family) {
        case KernelFamily::Gaussian: {
            const double a = 0.5 / (spec.sigma * spec.sigma);
            p.phi0 = std::exp(-a * u);
            p.phi1 = -a * p.phi0;
            p.phi2 = a * a * p.phi0;
            p.phi3 = -a * a * a * p.phi0;
            break;
        }
        case KernelFamily::InverseMultiquadric: {
            const double v = spec.c * spec.c + u;
            const double b = spec.beta;
            p.phi0 = std::pow(v, -b);
            p.phi1 = -b * p.phi0 / v;
            p.phi2 = b * (b + 1.0) * p.phi0 / (v * v);
            p.phi3 = -b * (b + 1.0) * (b + 2.0) * p.phi0 / (v * v * v);
            break;
        }
    }
    return p;
}

void check_dims(const Vec &x, const Vec &y, const char *op) {
    if (x.size() != y.size()) {
        throw InputError(std::string(op) + ": dimension mismatch (" +
                         std::to_string(x.size()) + " vs " +
                         std::to_string(y.size()) + ")");
    }
}

}  // namespace

KernelSpec KernelSpec::gaussian(double sigma) {
    if (!(sigma > 0.0)) {
        throw InputError("gaussian kernel: sigma must be positive");
    }
    KernelSpec s;
    s.family = KernelFamily::Gaussian;
    s.sigma = sigma;
    return s;
}

KernelSpec KernelSpec::imq(double c, double beta) {
    if (!(c > 0.0)) { throw InputError("imq kernel: c must be positive"); }
    if (!(beta > 0.0 && beta < 1.0)) {
        throw InputError("imq kernel: beta must lie in (0, 1)");
    }
    KernelSpec s;
    s.family = KernelFamily::InverseMultiquadric;
    s.c = c;
    s.beta = beta;
    return s;
}

double kernel_eval(const KernelSpec &spec, const Vec &x, const Vec &y) {
    check_dims(x, y, "kernel_eval");
    return profile(spec, (x - y).squaredNorm()).phi0;
}

Vec kernel_grad2(const KernelSpec &spec, const Vec &x, const Vec &y) {
    check_dims(x, y, "kernel_grad2");
    const Vec delta = x - y;
    const RadialProfile p = profile(spec, delta.squaredNorm());
    // d/dy phi(||x-y||^2) = -2 phi'(u) (x - y)
    return -2.0 * p.phi1 * delta;
}

double kernel_grad12_trace(const KernelSpec &spec, const Vec &x, const Vec &y) {
    check_dims(x, y, "kernel_grad12_trace");
    const Vec delta = x - y;
    const double u = delta.squaredNorm();
    const RadialProfile p = profile(spec, u);
    const double d = static_cast<double>(x.size());
    // d^2k/dx_a dy_a summed: tr(-4 phi'' dd^T - 2 phi' I)
    return -4.0 * p.phi2 * u - 2.0 * d * p.phi1;
}

double median_heuristic_bandwidth(const Mat &points) {
    const Eigen::Index n = points.rows();
    if (n < 2) { throw InputError("median heuristic needs at least 2 points"); }
    std::vector<double> dists;
    dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            dists.push_back((points.row(i) - points.row(j)).norm());
        }
    }
    auto mid = dists.begin() + static_cast<std::ptrdiff_t>(dists.size() / 2);
    std::nth_element(dists.begin(), mid, dists.end());
    return *mid;
}

SteinKernel::SteinKernel(KernelSpec b, const Target &t) : base(b), target(&t) {
    if (!t.has_score()) {
        throw CapabilityError("SteinKernel: target does not expose a score");
    }
}

double stein_kernel_eval(const SteinKernel &s, const Vec &x, const Vec &y) {
    check_dims(x, y, "stein_kernel_eval");
    return stein_kernel_eval_scored(s.base, x, y, s.target->score(x),
                                    s.target->score(y));
}

double stein_kernel_eval_scored(const KernelSpec &base, const Vec &x,
                                const Vec &y, const Vec &sx, const Vec &sy) {
    check_dims(x, y, "stein_kernel_eval");
    const Vec delta = x - y;
    const double u = delta.squaredNorm();
    const RadialProfile p = profile(base, u);
    const double d = static_cast<double>(x.size());

    const double trace_term = -4.0 * p.phi2 * u - 2.0 * d * p.phi1;
    const Vec g1 = 2.0 * p.phi1 * delta;   // grad_1 k
    const Vec g2 = -2.0 * p.phi1 * delta;  // grad_2 k
    return trace_term + g1.dot(sy) + g2.dot(sx) + p.phi0 * sx.dot(sy);
}

Vec stein_kernel_grad2(const SteinKernel &s, const Vec &x, const Vec &y) {
    check_dims(x, y, "stein_kernel_grad2");
    return stein_kernel_grad2_scored(s.base, x, y, s.target->score(x),
                                     s.target->score(y),
                                     s.target->score_jacobian(y));
}

Vec stein_kernel_grad2_scored(const KernelSpec &base, const Vec &x,
                              const Vec &y, const Vec &sx, const Vec &sy,
                              const Mat &hy) {
    check_dims(x, y, "stein_kernel_grad2");
    const Vec delta = x - y;
    const double u = delta.squaredNorm();
    const RadialProfile p = profile(base, u);
    const double d = static_cast<double>(x.size());

    const Vec g1 = 2.0 * p.phi1 * delta;
    const Vec g2 = -2.0 * p.phi1 * delta;
    // mixed Hessian A = d^2k/dxdy and pure Hessian B = d^2k/dy^2
    const Mat dd = delta * delta.transpose();
    const Mat eye = Mat::Identity(x.size(), x.size());
    const Mat a_mat = -4.0 * p.phi2 * dd - 2.0 * p.phi1 * eye;
    const Mat b_mat = 4.0 * p.phi2 * dd + 2.0 * p.phi1 * eye;
    // grad_y of tr(A): chain rule through u, du/dy = -2 delta
    const double dtrace_du = -4.0 * p.phi3 * u - 4.0 * p.phi2 - 2.0 * d * p.phi2;
    const Vec grad_trace = dtrace_du * (-2.0 * delta);

    return grad_trace + a_mat * sy + hy * g1 + b_mat * sx +
           g2 * sx.dot(sy) + p.phi0 * (hy * sx);
}

}  // namespace iklflow
