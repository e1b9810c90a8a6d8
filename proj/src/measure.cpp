#include "iklflow/measure.hpp"

#include <cmath>

namespace iklflow {

namespace {

constexpr double kSimplexTol = 1e-12;

void require_finite(const Mat &m, const char *what) {
    if (!m.allFinite()) {
        throw InputError(std::string(what) + ": non-finite entries");
    }
}

}  // namespace

DiscreteMeasure::DiscreteMeasure(Mat a, Vec m)
    : atoms(std::move(a)), masses(std::move(m)) {
    if (atoms.rows() != masses.size()) {
        throw InputError("DiscreteMeasure: atom/mass count mismatch");
    }
    require_finite(atoms, "DiscreteMeasure atoms");
    if ((masses.array() < 0.0).any()) {
        throw InputError("DiscreteMeasure: masses must be nonnegative");
    }
    if (!std::isfinite(masses.sum())) {
        throw InputError("DiscreteMeasure: total mass must be finite");
    }
}

DiscreteMeasure DiscreteMeasure::normalized() const {
    const double total = masses.sum();
    if (!(total > 0.0)) {
        throw InputError("DiscreteMeasure::normalized: zero total mass");
    }
    return {atoms, masses / total};
}

Ensemble::Ensemble(Mat pos, Vec w)
    : positions(std::move(pos)), weights(std::move(w)) {
    if (positions.rows() < 1) { throw InputError("Ensemble: needs N >= 1"); }
    if (positions.rows() != weights.size()) {
        throw InputError("Ensemble: position/weight count mismatch");
    }
    require_finite(positions, "Ensemble positions");
    if ((weights.array() < 0.0).any()) {
        throw InputError("Ensemble: weights must be nonnegative");
    }
    if (std::abs(weights.sum() - 1.0) > 1e-9) {
        throw InputError("Ensemble: weights must sum to 1");
    }
    renormalize();
}

Ensemble Ensemble::uniform(Mat pos) {
    const Eigen::Index n = pos.rows();
    return Ensemble(std::move(pos), Vec::Constant(n, 1.0 / static_cast<double>(n)));
}

bool Ensemble::has_uniform_weights(double tol) const {
    const double u = 1.0 / static_cast<double>(weights.size());
    return ((weights.array() - u).abs() < tol).all();
}

void Ensemble::renormalize() {
    const double total = weights.sum();
    if (!(total > 0.0)) {
        throw NumericalError("Ensemble: total weight collapsed to zero");
    }
    if (std::abs(total - 1.0) > kSimplexTol) { weights /= total; }
}

DensityRatioTable::DensityRatioTable(Mat a, Vec mu, Vec pi)
    : atoms(std::move(a)), mu_masses(std::move(mu)), pi_masses(std::move(pi)) {
    if (atoms.rows() != mu_masses.size() || atoms.rows() != pi_masses.size()) {
        throw InputError("DensityRatioTable: size mismatch");
    }
    for (Eigen::Index i = 0; i < pi_masses.size(); ++i) {
        if (pi_masses[i] > 0.0 && !(mu_masses[i] > 0.0)) {
            throw AbsoluteContinuityError(
                "DensityRatioTable: pi has mass on atom " + std::to_string(i) +
                " where mu has none");
        }
    }
}

Target Target::gaussian(Vec mean, Mat cov) {
    return gaussian_mixture({GaussianComponent{std::move(mean), std::move(cov)}},
                            Vec::Ones(1));
}

Target Target::gaussian_mixture(std::vector<GaussianComponent> components,
                                Vec mixture_weights) {
    if (components.empty() ||
        static_cast<Eigen::Index>(components.size()) != mixture_weights.size()) {
        throw InputError("gaussian_mixture: component/weight count mismatch");
    }
    if ((mixture_weights.array() < 0.0).any() ||
        std::abs(mixture_weights.sum() - 1.0) > 1e-9) {
        throw InputError("gaussian_mixture: weights must lie on the simplex");
    }
    Target t;
    t.kind_ = components.size() == 1 ? TargetKind::Gaussian
                                     : TargetKind::GaussianMixture;
    t.dim_ = components.front().mean.size();
    t.mixture_weights_ = std::move(mixture_weights);
    for (auto &comp : components) {
        if (comp.mean.size() != t.dim_ || comp.cov.rows() != t.dim_ ||
            comp.cov.cols() != t.dim_) {
            throw InputError("gaussian_mixture: inconsistent dimensions");
        }
        if (!comp.cov.isApprox(comp.cov.transpose(), 1e-12)) {
            throw InputError("gaussian target: covariance must be symmetric");
        }
        Eigen::LLT<Mat> llt(comp.cov);
        if (llt.info() != Eigen::Success) {
            throw InputError("gaussian target: covariance must be positive-definite");
        }
        t.chol_.push_back(llt.matrixL());
        t.cov_inv_.push_back(llt.solve(Mat::Identity(t.dim_, t.dim_)));
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < t.dim_; ++i) {
            log_det += 2.0 * std::log(t.chol_.back()(i, i));
        }
        t.log_norm_.push_back(-0.5 * (log_det + t.dim_ * std::log(2.0 * M_PI)));
        t.components_.push_back(std::move(comp));
    }
    return t;
}

Target Target::empirical(DiscreteMeasure atoms) {
    if (atoms.size() < 1 || !(atoms.total_mass() > 0.0)) {
        throw InputError("empirical target: needs atoms with positive mass");
    }
    Target t;
    t.kind_ = TargetKind::Empirical;
    t.dim_ = atoms.dim();
    t.empirical_ = std::move(atoms);
    return t;
}

namespace {

// log N(x; mean, cov) and responsibilities for the mixture.
struct MixtureEval {
    Vec resp;        // responsibilities, simplex
    double log_pdf;  // log pi(x)
};

MixtureEval eval_mixture(const Target &t, const std::vector<Mat> &cov_inv,
                         const std::vector<double> &log_norm, const Vec &x) {
    const auto &comps = t.components();
    const Eigen::Index m = static_cast<Eigen::Index>(comps.size());
    Vec log_terms(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const Vec d = x - comps[static_cast<std::size_t>(i)].mean;
        log_terms[i] = std::log(t.mixture_weights()[i]) +
                       log_norm[static_cast<std::size_t>(i)] -
                       0.5 * d.dot(cov_inv[static_cast<std::size_t>(i)] * d);
    }
    const double mx = log_terms.maxCoeff();
    const Vec scaled = (log_terms.array() - mx).exp();
    const double z = scaled.sum();
    return {scaled / z, mx + std::log(z)};
}

}  // namespace

Vec Target::score(const Vec &x) const {
    if (!has_score()) {
        throw CapabilityError("target does not expose a score");
    }
    if (x.size() != dim_) { throw InputError("score: dimension mismatch"); }
    const auto mix = eval_mixture(*this, cov_inv_, log_norm_, x);
    Vec g = Vec::Zero(dim_);
    for (std::size_t i = 0; i < components_.size(); ++i) {
        g -= mix.resp[static_cast<Eigen::Index>(i)] *
             (cov_inv_[i] * (x - components_[i].mean));
    }
    return g;
}

Mat Target::score_jacobian(const Vec &x) const {
    if (!has_score()) {
        throw CapabilityError("target does not expose a score Jacobian");
    }
    if (x.size() != dim_) { throw InputError("score_jacobian: dimension mismatch"); }
    const auto mix = eval_mixture(*this, cov_inv_, log_norm_, x);
    // grad^2 log pi = sum_i r_i (H_i + g_i g_i^T) - g g^T
    Vec g = Vec::Zero(dim_);
    Mat h = Mat::Zero(dim_, dim_);
    for (std::size_t i = 0; i < components_.size(); ++i) {
        const double r = mix.resp[static_cast<Eigen::Index>(i)];
        const Vec gi = -(cov_inv_[i] * (x - components_[i].mean));
        g += r * gi;
        h += r * (-cov_inv_[i] + gi * gi.transpose());
    }
    return h - g * g.transpose();
}

double Target::unnorm_logdensity(const Vec &x) const {
    if (!has_unnorm_logdensity()) {
        throw CapabilityError("target does not expose a log-density");
    }
    if (x.size() != dim_) { throw InputError("unnorm_logdensity: dimension mismatch"); }
    return eval_mixture(*this, cov_inv_, log_norm_, x).log_pdf;
}

Mat Target::sample(Eigen::Index n, Rng &rng) const {
    Mat out(n, dim_);
    if (kind_ == TargetKind::Empirical) {
        for (Eigen::Index i = 0; i < n; ++i) {
            out.row(i) = empirical_.atoms.row(rng.sample_index(empirical_.masses));
        }
        return out;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index comp =
            components_.size() == 1 ? 0 : rng.sample_index(mixture_weights_);
        Vec z(dim_);
        for (Eigen::Index j = 0; j < dim_; ++j) { z[j] = rng.normal(); }
        out.row(i) = components_[static_cast<std::size_t>(comp)].mean +
                     chol_[static_cast<std::size_t>(comp)] * z;
    }
    return out;
}

const DiscreteMeasure &Target::empirical_atoms() const {
    if (kind_ != TargetKind::Empirical) {
        throw CapabilityError("target is not empirical");
    }
    return empirical_;
}

Ensemble ensemble_from_sampler(const Target &target, Eigen::Index n,
                               std::uint64_t seed) {
    if (n < 1) { throw InputError("ensemble_from_sampler: n must be >= 1"); }
    Rng rng(seed);
    return Ensemble::uniform(target.sample(n, rng));
}

Vec density_ratio(const DensityRatioTable &table) {
    Vec out(table.mu_masses.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        if (table.mu_masses[i] > 0.0) {
            out[i] = 1.0 - table.pi_masses[i] / table.mu_masses[i];
        } else {
            out[i] = 1.0;  // pi is zero here by the absolute-continuity invariant
        }
    }
    return out;
}

std::pair<Vec, Mat> target_moments(const Target &target) {
    const Eigen::Index d = target.dim();
    if (target.kind() == TargetKind::Empirical) {
        const DiscreteMeasure m = target.empirical_atoms().normalized();
        Vec mean = m.atoms.transpose() * m.masses;
        Mat cov = Mat::Zero(d, d);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const Vec c = m.atoms.row(i).transpose() - mean;
            cov += m.masses[i] * (c * c.transpose());
        }
        return {mean, cov};
    }
    // law of total mean/variance over components
    Vec mean = Vec::Zero(d);
    const auto &comps = target.components();
    const Vec &w = target.mixture_weights();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        mean += w[static_cast<Eigen::Index>(i)] * comps[i].mean;
    }
    Mat cov = Mat::Zero(d, d);
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const Vec c = comps[i].mean - mean;
        cov += w[static_cast<Eigen::Index>(i)] * (comps[i].cov + c * c.transpose());
    }
    return {mean, cov};
}

}  // namespace iklflow
