#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "iklflow/errors.hpp"
#include "iklflow/rng.hpp"

namespace iklflow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Atoms (rows) with nonnegative masses. Normalization is not required;
/// this is the substrate for exact MMD quadratic forms.
struct DiscreteMeasure {
    Mat atoms;   // M x d
    Vec masses;  // length M, >= 0

    DiscreteMeasure() = default;
    DiscreteMeasure(Mat a, Vec m);

    Eigen::Index size() const { return atoms.rows(); }
    Eigen::Index dim() const { return atoms.cols(); }
    double total_mass() const { return masses.sum(); }

    /// Same atoms, masses scaled to sum to one.
    DiscreteMeasure normalized() const;
};

/// Weighted particle system representing mu: positions plus a weight
/// vector on the simplex.
struct Ensemble {
    Mat positions;  // N x d
    Vec weights;    // length N, simplex

    Ensemble() = default;
    Ensemble(Mat pos, Vec w);

    /// Uniform weights 1/N.
    static Ensemble uniform(Mat pos);

    Eigen::Index size() const { return positions.rows(); }
    Eigen::Index dim() const { return positions.cols(); }

    bool has_uniform_weights(double tol = 1e-12) const;
    void renormalize();

    DiscreteMeasure as_measure() const { return {positions, weights}; }
};

/// Shared atoms carrying both mu- and pi-masses; the discrete stand-in
/// for the density ratio d(pi)/d(mu).
struct DensityRatioTable {
    Mat atoms;      // M x d
    Vec mu_masses;  // > 0 wherever pi_masses > 0
    Vec pi_masses;  // >= 0

    DensityRatioTable(Mat a, Vec mu, Vec pi);
};

enum class TargetKind { Gaussian, GaussianMixture, Empirical };

struct GaussianComponent {
    Vec mean;
    Mat cov;  // symmetric positive-definite
};

/// Target measure pi with capability-based access. Analytic targets
/// (gaussian, mixture) expose score, unnormalized log-density, sampler,
/// and moments; empirical targets expose sampler and moments only.
class Target {
public:
    static Target gaussian(Vec mean, Mat cov);
    static Target gaussian_mixture(std::vector<GaussianComponent> components,
                                   Vec mixture_weights);
    static Target empirical(DiscreteMeasure atoms);

    TargetKind kind() const { return kind_; }
    Eigen::Index dim() const { return dim_; }

    bool has_score() const { return kind_ != TargetKind::Empirical; }
    bool has_unnorm_logdensity() const { return kind_ != TargetKind::Empirical; }
    bool has_sampler() const { return true; }
    bool has_moments() const { return true; }

    /// grad log pi(x). Throws CapabilityError for empirical targets.
    Vec score(const Vec &x) const;
    /// Hessian of log pi at x (Jacobian of the score).
    Mat score_jacobian(const Vec &x) const;
    /// log pi(x) up to an additive constant.
    double unnorm_logdensity(const Vec &x) const;
    /// n i.i.d. rows.
    Mat sample(Eigen::Index n, Rng &rng) const;

    const DiscreteMeasure &empirical_atoms() const;
    const std::vector<GaussianComponent> &components() const { return components_; }
    const Vec &mixture_weights() const { return mixture_weights_; }

private:
    Target() = default;

    TargetKind kind_ = TargetKind::Gaussian;
    Eigen::Index dim_ = 0;
    std::vector<GaussianComponent> components_;  // gaussian: single entry
    Vec mixture_weights_;
    std::vector<Mat> chol_;      // Cholesky factors per component
    std::vector<Mat> cov_inv_;   // inverses per component
    std::vector<double> log_norm_;  // -0.5 log det(2 pi cov) per component
    DiscreteMeasure empirical_;
};

/// n i.i.d. draws with uniform weights; fully determined by
/// (target, n, seed).
Ensemble ensemble_from_sampler(const Target &target, Eigen::Index n,
                               std::uint64_t seed);

/// Componentwise 1 - pi/mu on the shared atoms: the dual force that the
/// kernelized flows smooth.
Vec density_ratio(const DensityRatioTable &table);

/// Analytic mean/covariance for gaussian and mixture; weighted moments
/// for empirical targets.
std::pair<Vec, Mat> target_moments(const Target &target);

}  // namespace iklflow
