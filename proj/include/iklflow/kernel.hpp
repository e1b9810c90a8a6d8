#pragma once

#include <Eigen/Dense>

#include "iklflow/errors.hpp"
#include "iklflow/measure.hpp"

namespace iklflow {

enum class KernelFamily { Gaussian, InverseMultiquadric };

/// Symmetric positive-definite kernel. Conventions:
///   gaussian:  k(x,y) = exp(-||x-y||^2 / (2 sigma^2))
///   imq:       k(x,y) = (c^2 + ||x-y||^2)^(-beta),  0 < beta < 1
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double sigma = 1.0;  // gaussian bandwidth
    double c = 1.0;      // imq offset
    double beta = 0.5;   // imq exponent

    static KernelSpec gaussian(double sigma);
    static KernelSpec imq(double c, double beta);
};

double kernel_eval(const KernelSpec &spec, const Vec &x, const Vec &y);

/// Gradient in the second argument, grad_2 k(x, y).
Vec kernel_grad2(const KernelSpec &spec, const Vec &x, const Vec &y);

/// trace of the mixed second derivative matrix d^2 k / dx dy.
double kernel_grad12_trace(const KernelSpec &spec, const Vec &x, const Vec &y);

/// Median of pairwise distances among the given points (rows), as a
/// bandwidth suggestion. Never applied implicitly anywhere.
double median_heuristic_bandwidth(const Mat &points);

/// Stein kernel built from a base kernel and the target score:
///   s(x,y) = tr(d^2k/dxdy) + grad_1 k . score(y) + grad_2 k . score(x)
///          + k(x,y) score(x) . score(y)
/// The referenced Target must outlive the SteinKernel.
struct SteinKernel {
    KernelSpec base;
    const Target *target;

    SteinKernel(KernelSpec b, const Target &t);
};

double stein_kernel_eval(const SteinKernel &s, const Vec &x, const Vec &y);

/// grad_2 s(x, y); needs the target's score Jacobian.
Vec stein_kernel_grad2(const SteinKernel &s, const Vec &x, const Vec &y);

/// Same evaluations with the scores (and the score Jacobian at y)
/// supplied by the caller, so batch loops over particle pairs compute
/// each target score once per point instead of once per pair.
double stein_kernel_eval_scored(const KernelSpec &base, const Vec &x,
                                const Vec &y, const Vec &sx, const Vec &sy);
Vec stein_kernel_grad2_scored(const KernelSpec &base, const Vec &x,
                              const Vec &y, const Vec &sx, const Vec &sy,
                              const Mat &hy);

}  // namespace iklflow
