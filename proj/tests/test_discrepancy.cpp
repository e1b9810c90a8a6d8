#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <string>

#include "iklflow/discrepancy.hpp"
#include "iklflow/rng.hpp"

using namespace iklflow;

namespace {

DiscreteMeasure dirac(double x, double mass = 1.0) {
    return {Mat::Constant(1, 1, x), Vec::Constant(1, mass)};
}

DiscreteMeasure random_measure(Rng &rng, long m, long d) {
    Mat atoms(m, d);
    Vec masses(m);
    for (long i = 0; i < m; ++i) {
        for (long j = 0; j < d; ++j) { atoms(i, j) = rng.normal(); }
        masses[i] = 0.1 + rng.uniform();
    }
    return {std::move(atoms), masses / masses.sum()};
}

}  // namespace

TEST_CASE("mmd2 basic values") {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const DiscreteMeasure a = dirac(0.0), b = dirac(1.0);
    CHECK(std::abs(mmd2(k, a, a)) < 1e-15);
    const double expected = 2.0 - 2.0 * std::exp(-0.5);
    CHECK(mmd2(k, a, b) == doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(mmd2(k, a, b) - 0.7869386806) < 1e-9);
    CHECK_THROWS_AS(mmd2(k, a, {Mat::Zero(1, 2), Vec::Ones(1)}), InputError);
}

TEST_CASE("mmd2 symmetry, permutation invariance, nonnegativity") {
    Rng rng(11);
    const KernelSpec k = KernelSpec::imq(1.0, 0.5);
    for (int rep = 0; rep < 10; ++rep) {
        const DiscreteMeasure a = random_measure(rng, 6, 2);
        const DiscreteMeasure b = random_measure(rng, 4, 2);
        CHECK(std::abs(mmd2(k, a, b) - mmd2(k, b, a)) < 1e-15);
        CHECK(mmd2(k, a, b) > -1e-12);

        // permute the atoms of a
        Mat perm_atoms(a.size(), a.dim());
        Vec perm_masses(a.size());
        for (long i = 0; i < a.size(); ++i) {
            perm_atoms.row(i) = a.atoms.row((i + 2) % a.size());
            perm_masses[i] = a.masses[(i + 2) % a.size()];
        }
        const DiscreteMeasure ap{perm_atoms, perm_masses};
        CHECK(std::abs(mmd2(k, a, b) - mmd2(k, ap, b)) < 1e-15);
    }
}

TEST_CASE("ksd2 values") {
    const Target pi = Target::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const SteinKernel s(KernelSpec::gaussian(1.0), pi);
    // single atom at the mode: ksd2 = s(0,0) = 1
    CHECK(ksd2(s, dirac(0.0)) == doctest::Approx(1.0).epsilon(1e-14));

    Rng rng(12);
    const DiscreteMeasure m = random_measure(rng, 5, 1);
    Mat perm_atoms(5, 1);
    Vec perm_masses(5);
    for (long i = 0; i < 5; ++i) {
        perm_atoms.row(i) = m.atoms.row((i + 3) % 5);
        perm_masses[i] = m.masses[(i + 3) % 5];
    }
    CHECK(std::abs(ksd2(s, m) - ksd2(s, {perm_atoms, perm_masses})) < 1e-13);
}

TEST_CASE("ksd2 of a fine quadrature discretization of the target is tiny") {
    const Target pi = Target::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const SteinKernel s(KernelSpec::gaussian(1.0), pi);
    const long nodes = 2001;
    const double lo = -10.0, hi = 10.0;
    const double h = (hi - lo) / (nodes - 1);
    Mat atoms(nodes, 1);
    Vec masses(nodes);
    for (long i = 0; i < nodes; ++i) {
        const double x = lo + h * i;
        atoms(i, 0) = x;
        const double w = (i == 0 || i == nodes - 1) ? 0.5 : 1.0;
        masses[i] = w * std::exp(-0.5 * x * x);
    }
    masses /= masses.sum();
    CHECK(ksd2(s, {atoms, masses}) < 1e-4);
}

TEST_CASE("ksd2 agrees with the raw stein quadratic form") {
    const Target pi = Target::gaussian(Vec::Zero(1), Mat::Identity(1, 1));
    const SteinKernel s(KernelSpec::imq(1.0, 0.5), pi);
    Rng rng(13);
    const DiscreteMeasure m = random_measure(rng, 7, 1);
    double direct = 0.0;
    for (long i = 0; i < m.size(); ++i) {
        for (long j = 0; j < m.size(); ++j) {
            direct += m.masses[i] * m.masses[j] *
                      stein_kernel_eval(s, m.atoms.row(i).transpose(),
                                        m.atoms.row(j).transpose());
        }
    }
    CHECK(ksd2(s, m) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("mmd witness values and gradient linearity") {
    const KernelSpec k = KernelSpec::gaussian(1.0);
    const DiscreteMeasure a = dirac(0.0), b = dirac(1.0);
    CHECK(mmd_witness(k, a, a, Vec::Constant(1, 0.37)) == 0.0);
    const double expected = 1.0 - std::exp(-0.5);
    CHECK(mmd_witness(k, a, b, Vec::Zero(1)) ==
          doctest::Approx(expected).epsilon(1e-14));
    CHECK(std::abs(mmd_witness(k, a, b, Vec::Zero(1)) - 0.3934693403) < 1e-9);

    Rng rng(14);
    const DiscreteMeasure am = random_measure(rng, 5, 2);
    const DiscreteMeasure bm = random_measure(rng, 4, 2);
    const Vec x = Vec::Constant(2, 0.2);
    // gradient of the witness = signed accumulation of kernel_grad2
    Vec acc = Vec::Zero(2);
    for (long i = 0; i < am.size(); ++i) {
        acc += am.masses[i] * kernel_grad2(k, am.atoms.row(i).transpose(), x);
    }
    for (long i = 0; i < bm.size(); ++i) {
        acc -= bm.masses[i] * kernel_grad2(k, bm.atoms.row(i).transpose(), x);
    }
    const double h = 1e-5;
    for (long c = 0; c < 2; ++c) {
        Vec xp = x, xm = x;
        xp[c] += h;
        xm[c] -= h;
        const double fd = (mmd_witness(k, am, bm, xp) -
                           mmd_witness(k, am, bm, xm)) /
                          (2.0 * h);
        CHECK(acc[c] == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("moment errors") {
    const Vec mean = Vec::Constant(1, 2.0);
    const Mat cov = Mat::Constant(1, 1, 3.0);
    const Target g = Target::gaussian(mean, cov);
    const Ensemble single{Mat::Constant(1, 1, 2.0), Vec::Ones(1)};
    const auto [me, ce] = moment_error(single, g);
    CHECK(me < 1e-15);
    CHECK(ce == doctest::Approx(cov.norm()).epsilon(1e-14));

    Mat atoms(2, 1);
    atoms << 0.0, 2.0;
    const Target emp = Target::empirical({atoms, Vec::Constant(2, 0.5)});
    const Ensemble same{atoms, Vec::Constant(2, 0.5)};
    const auto [me2, ce2] = moment_error(same, emp);
    CHECK(me2 < 1e-14);
    CHECK(ce2 < 1e-14);

    // weighted two-atom ensemble {0: 1/2, 2: 1/2} vs gaussian(1, 1)
    const Target g11 = Target::gaussian(Vec::Ones(1), Mat::Identity(1, 1));
    const auto [me3, ce3] = moment_error(same, g11);
    CHECK(me3 < 1e-14);
    CHECK(ce3 < 1e-14);
}

TEST_CASE("metrics record CSV shape") {
    CHECK(std::string(MetricsRecord::csv_header()) ==
          "step,time,mmd2,ksd2,mean_err,cov_err");
    MetricsRecord rec;
    rec.step = 3;
    rec.time = 0.3;
    rec.mmd2 = 0.5;
    rec.mean_err = 1.0;
    rec.cov_err = 2.0;
    CHECK(rec.csv_row() == "3,0.29999999999999999,0.5,,1,2");
    rec.ksd2 = 0.25;
    CHECK(rec.csv_row() == "3,0.29999999999999999,0.5,0.25,1,2");
}
