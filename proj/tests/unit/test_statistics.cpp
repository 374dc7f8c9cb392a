//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file tests/unit/test_statistics.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "twinbeam/statistics.hpp"

using namespace twinbeam;

namespace
{
// Independent oracles: plain factorial products, no lgamma.
long double factorial(int n)
{
    long double f = 1;
    for (int k = 2; k <= n; ++k)
        f *= k;
    return f;
}

long double poisson(int k, long double mean)
{
    return std::pow(mean, k) * std::exp(-mean) / factorial(k);
}

long double binomial(int k, int n, long double p)
{
    if (k < 0 || k > n)
        return 0;
    return factorial(n) / (factorial(k) * factorial(n - k)) * std::pow(p, k)
           * std::pow(1 - p, n - k);
}

// Direct triple sum over pairs, thinned photons and dark counts.
long double brute_force_joint(PhotodetectionParams const& p, int cs, int ci,
                              int n_max = 60)
{
    long double total = 0;
    for (int n = 0; n <= n_max; ++n)
    {
        long double as = 0, ai = 0;
        for (int k = 0; k <= std::min(n, cs); ++k)
            as += binomial(k, n, p.eta_s) * poisson(cs - k, p.dark_s);
        for (int k = 0; k <= std::min(n, ci); ++k)
            ai += binomial(k, n, p.eta_i) * poisson(ci - k, p.dark_i);
        total += poisson(n, p.mu) * as * ai;
    }
    return total;
}

JointHistogram sample_independent(double ls, double li, int frames,
                                  unsigned seed)
{
    std::mt19937_64 rng(seed);
    std::poisson_distribution<int> ds(ls), di(li);
    JointHistogram h(20);
    for (int f = 0; f < frames; ++f)
        h.accumulate(ds(rng), di(rng));
    return h;
}
}  // namespace

//---------------------------------------------------------------------------//
// HISTOGRAM
//---------------------------------------------------------------------------//
TEST(JointHistogram, AccumulateSingleFrame)
{
    JointHistogram h;
    auto const g = accumulate(h, 0, 0);
    EXPECT_EQ(g.n_frames(), 1u);
    EXPECT_EQ(g.count(0, 0), 1u);
    EXPECT_EQ(h.n_frames(), 0u);
}

TEST(JointHistogram, OverflowIsTalliedSeparately)
{
    JointHistogram h(3);
    h.accumulate(1, 2);
    h.accumulate(4, 0);
    h.accumulate(0, 9);
    EXPECT_EQ(h.n_frames(), 3u);
    EXPECT_EQ(h.overflow(), 2u);
    EXPECT_TRUE(h.truncated());
    EXPECT_DOUBLE_EQ(frequencies(h).sum(), 1.0 / 3.0);
    EXPECT_THROW(h.accumulate(-1, 0), ValidationError);
}

TEST(JointHistogram, MergeRequiresMatchingCutoff)
{
    JointHistogram a(5), b(6);
    EXPECT_THROW(a.merge(b), ValidationError);
}

TEST(JointHistogram, FromCountsRoundTrip)
{
    JointHistogram h(2);
    h.accumulate(1, 1);
    h.accumulate(2, 0);
    h.accumulate(5, 5);
    std::vector<std::uint64_t> counts;
    for (int s = 0; s <= 2; ++s)
        for (int i = 0; i <= 2; ++i)
            counts.push_back(h.count(s, i));
    EXPECT_EQ(JointHistogram::from_counts(2, counts, 1), h);
}

TEST(JointHistogram, EmptyHasNoFrequencies)
{
    EXPECT_THROW(frequencies(JointHistogram{}), NumericalError);
}

TEST(Marginals, PointMassAndSymmetry)
{
    JointHistogram h(5);
    h.accumulate(2, 3);
    auto const m = marginals(h);
    for (int c = 0; c <= 5; ++c)
    {
        EXPECT_EQ(m.signal[c], c == 2 ? 1.0 : 0.0);
        EXPECT_EQ(m.idler[c], c == 3 ? 1.0 : 0.0);
    }

    JointHistogram sym(4);
    for (auto [s, i] : {std::pair{1, 3}, {3, 1}, {2, 2}, {0, 4}, {4, 0}})
        sym.accumulate(s, i);
    auto const ms = marginals(sym);
    EXPECT_EQ(ms.signal, ms.idler);
}

//---------------------------------------------------------------------------//
// CORRELATION COEFFICIENT
//---------------------------------------------------------------------------//
TEST(Correlation, PerfectCorrelation)
{
    JointHistogram h(3);
    for (int k = 0; k < 50; ++k)
    {
        h.accumulate(0, 0);
        h.accumulate(1, 1);
    }
    auto const r = correlation_coefficient(h, 50, 1);
    EXPECT_DOUBLE_EQ(r.c_p, 1.0);
}

TEST(Correlation, ProductFormIsUncorrelated)
{
    auto const h = sample_independent(1.7, 2.2, 100000, 5);
    auto const r = correlation_coefficient(h, 200, 3);
    EXPECT_NEAR(r.c_p, 0.0, 3 * r.std_err);
    EXPECT_EQ(r.bootstrap_resamples, 200);
    // Bootstrap error agrees with the large-sample (1 - c^2)/sqrt(N).
    EXPECT_NEAR(r.std_err, 1 / std::sqrt(1e5), 0.25 / std::sqrt(1e5));
}

TEST(Correlation, BootstrapIsSeeded)
{
    auto const h = sample_independent(1.0, 1.0, 5000, 9);
    auto const a = correlation_coefficient(h, 30, 77);
    auto const b = correlation_coefficient(h, 30, 77);
    auto const c = correlation_coefficient(h, 30, 78);
    EXPECT_EQ(a.std_err, b.std_err);
    EXPECT_NE(a.std_err, c.std_err);
}

TEST(Correlation, DegenerateInputsFail)
{
    JointHistogram one;
    one.accumulate(1, 1);
    EXPECT_THROW(correlation_coefficient(one, 0, 0), NumericalError);
    JointHistogram flat;
    for (int k = 0; k < 10; ++k)
        flat.accumulate(2, k % 3);
    EXPECT_THROW(correlation_coefficient(flat, 0, 0), NumericalError);
}

TEST(Correlation, AnalyticClosedForm)
{
    for (auto [mu, es, ei] : {std::tuple{2.0, 0.07, 0.07},
                              {5.0, 0.5, 0.07},
                              {0.5, 0.3, 0.9}})
    {
        PhotodetectionParams p{mu, es, ei, 0, 0};
        auto const j = analytic_joint(p, recommended_cutoff(p, 1e-14));
        EXPECT_NEAR(correlation_of(j.pmf), std::sqrt(es * ei), 1e-6)
            << mu << " " << es << " " << ei;
    }
    PhotodetectionParams const p{2, 0.07, 0.07, 0, 0};
    EXPECT_NEAR(correlation_of(analytic_joint(p, 20).pmf), 0.07, 1e-6);
}

TEST(Correlation, AnalyticWithDarkCounts)
{
    // cov = eta_s eta_i mu, var = eta mu + dark.
    PhotodetectionParams const p{20, 0.07, 0.07, 0.5, 0.5};
    double const expect = 0.07 * 0.07 * 20 / (0.07 * 20 + 0.5);
    auto const j = analytic_joint(p, recommended_cutoff(p, 1e-14));
    EXPECT_NEAR(correlation_of(j.pmf), expect, 1e-6);
}

//---------------------------------------------------------------------------//
// CLASSICALITY BOUND
//---------------------------------------------------------------------------//
TEST(ClassicalityBound, KnownValues)
{
    EXPECT_EQ(classicality_bound(0, 0), 1.0);
    EXPECT_NEAR(classicality_bound(1, 1), std::exp(-2.0), 1e-15);
    long double const exact = std::pow(8.0L, 8) / factorial(8) * std::exp(-8.0L)
                              * std::pow(9.0L, 9) / factorial(9)
                              * std::exp(-9.0L);
    EXPECT_NEAR(classicality_bound(8, 9), double(exact), 1e-15);
    EXPECT_NEAR(classicality_bound(8, 9), 0.0183913, 5e-7);
}

TEST(ClassicalityBound, MatchesExactFactorials)
{
    for (int s = 0; s <= 30; ++s)
    {
        for (int i = 0; i <= 30; ++i)
        {
            long double ps = 1, pi = 1;
            for (int k = 1; k <= s; ++k)
                ps *= static_cast<long double>(s) / k;
            for (int k = 1; k <= i; ++k)
                pi *= static_cast<long double>(i) / k;
            long double const exact = ps * pi * std::exp(-(long double)(s + i));
            double const got = classicality_bound(s, i);
            EXPECT_NEAR(got / double(exact), 1.0, 1e-12) << s << "," << i;
        }
    }
}

TEST(ClassicalityBound, FiniteForLargeCounts)
{
    for (int n : {100, 170, 171, 1000, 5000, 10000})
    {
        double const b = classicality_bound(n, n);
        ASSERT_TRUE(std::isfinite(b));
        ASSERT_GT(b, 0);
        // Stirling: n^n e^-n / n! ~ 1 / sqrt(2 pi n) (1 - 1/(12 n)).
        double const single = 1 / std::sqrt(2 * M_PI * n) * (1 - 1.0 / (12 * n));
        EXPECT_NEAR(b / (single * single), 1.0, 1e-4) << n;
    }
    EXPECT_TRUE(std::isfinite(classicality_bound(0, 10000)));
}

TEST(ClassicalityBound, IsPeakOfPoissonProducts)
{
    for (int s = 0; s <= 6; ++s)
    {
        for (int i = 0; i <= 6; ++i)
        {
            double best = 0;
            for (double ms = 0; ms <= 8; ms += 0.01)
            {
                for (double mi = 0; mi <= 8; mi += 0.25)
                {
                    double const v = double(poisson(s, ms) * poisson(i, mi));
                    EXPECT_LE(v, classicality_bound(s, i) * (1 + 1e-12));
                    best = std::max(best, v);
                }
            }
            // Both peaks lie on the scan grid (integer means).
            EXPECT_NEAR(best, classicality_bound(s, i), 1e-12);
        }
    }
}

TEST(Criterion, ExcessAtBoundIsZero)
{
    SquareGrid f(2);
    f(1, 1) = std::exp(-2.0);
    f(0, 0) = 1 - f(1, 1);
    auto const rep = criterion_from_pmf(f, 1000.0);
    auto const& r = rep.records[3];
    ASSERT_EQ(r.n_s, 1);
    ASSERT_EQ(r.n_i, 1);
    EXPECT_EQ(r.excess, 0.0);
    ASSERT_TRUE(r.significance);
    EXPECT_EQ(*r.significance, 0.0);
}

TEST(Criterion, IndependentArmsNeverViolate)
{
    for (double mu : {0.3, 2.0, 7.5, 20.0})
    {
        for (double eta : {0.07, 0.5, 1.0})
        {
            for (double dark : {0.0, 0.4})
            {
                PhotodetectionParams const p{mu, eta, 0.0, dark, 1.3};
                auto const j = analytic_joint(p, 40);
                for (auto const& r : criterion_from_pmf(j.pmf).records)
                    ASSERT_LE(r.excess, 1e-15) << mu << " " << eta << " "
                                               << r.n_s << "," << r.n_i;
            }
        }
    }
}

TEST(Criterion, PerfectPairsViolateOnDiagonal)
{
    PhotodetectionParams const p{3, 1, 1, 0, 0};
    auto const rep = criterion_from_pmf(analytic_joint(p, 20).pmf);
    int diagonal = 0;
    for (auto k : rep.violating)
        diagonal += rep.records[k].n_s == rep.records[k].n_i;
    EXPECT_GE(diagonal, 1);
}

TEST(Criterion, SignificanceUsesBinomialError)
{
    JointHistogram h(3);
    for (int k = 0; k < 300; ++k)
        h.accumulate(1, 1);
    for (int k = 0; k < 700; ++k)
        h.accumulate(0, 0);
    auto const rep = criterion_test(h, 400, 5);
    auto const& r = rep.records[1 * 4 + 1];
    double const se = std::sqrt(0.3 * 0.7 / 1000);
    EXPECT_DOUBLE_EQ(r.std_err, se);
    EXPECT_NEAR(*r.significance, (0.3 - std::exp(-2.0)) / se, 1e-12);
    ASSERT_TRUE(r.bootstrap_significance);
    EXPECT_NEAR(*r.bootstrap_significance / *r.significance, 1.0, 0.15);
    // Empty bins have no defined significance.
    EXPECT_FALSE(rep.records[2].significance);
    ASSERT_TRUE(rep.max_index);
    EXPECT_EQ(*rep.max_index, 5u);
}

//---------------------------------------------------------------------------//
// DIFFERENCE MAP
//---------------------------------------------------------------------------//
TEST(DifferenceMap, ProductFormIsZero)
{
    std::vector<double> a{0.2, 0.5, 0.3}, b{0.6, 0.1, 0.3};
    SquareGrid f(3);
    for (int s = 0; s < 3; ++s)
        for (int i = 0; i < 3; ++i)
            f(s, i) = a[s] * b[i];
    auto const d = difference_map(f);
    for (double v : d.values())
        EXPECT_NEAR(v, 0.0, 1e-16);
}

TEST(DifferenceMap, PerfectPairsArePositiveOnDiagonal)
{
    JointHistogram h(4);
    for (int c = 0; c <= 3; ++c)
        for (int k = 0; k < 10 * (c + 1); ++k)
            h.accumulate(c, c);
    auto const d = difference_map(h);
    for (int c = 0; c <= 3; ++c)
        EXPECT_GT(d(c, c), 0.0);
    EXPECT_LT(d(0, 3), 0.0);
}

//---------------------------------------------------------------------------//
// ANALYTIC JOINT DISTRIBUTION
//---------------------------------------------------------------------------//
TEST(AnalyticJoint, ZeroRateIsPointMass)
{
    auto const j = analytic_joint({0, 0.5, 0.5, 0, 0}, 6);
    EXPECT_EQ(j.pmf(0, 0), 1.0);
    EXPECT_EQ(j.pmf.sum(), 1.0);
}

TEST(AnalyticJoint, LosslessIsDiagonalPoisson)
{
    auto const j = analytic_joint({3.5, 1, 1, 0, 0}, 30);
    for (int s = 0; s <= 30; ++s)
    {
        for (int i = 0; i <= 30; ++i)
        {
            double const expect = s == i ? double(poisson(s, 3.5)) : 0.0;
            EXPECT_NEAR(j.pmf(s, i), expect, 1e-15);
        }
    }
}

TEST(AnalyticJoint, HalfEfficiencyVacuum)
{
    // sum_n e^{-1} 0.25^n / n! = e^{-0.75}
    long double series = 0;
    for (int n = 0; n <= 60; ++n)
        series += std::exp(-1.0L) * std::pow(0.25L, n) / factorial(n);
    auto const j = analytic_joint({1, 0.5, 0.5, 0, 0}, 10);
    EXPECT_NEAR(j.pmf(0, 0), double(series), 1e-14);
    EXPECT_NEAR(j.pmf(0, 0), std::exp(-0.75), 1e-14);
}

TEST(AnalyticJoint, MatchesBruteForceWithDarkCounts)
{
    for (PhotodetectionParams p : {PhotodetectionParams{2, 0.07, 0.5, 0.1, 0.3},
                                   PhotodetectionParams{5, 0.5, 0.5, 0.2, 0.0},
                                   PhotodetectionParams{0.5, 1.0, 0.07, 0.0, 1.0}})
    {
        auto const j = analytic_joint(p, 12);
        for (int s = 0; s <= 12; ++s)
            for (int i = 0; i <= 12; ++i)
                EXPECT_NEAR(j.pmf(s, i), double(brute_force_joint(p, s, i)),
                            1e-13);
    }
}

TEST(AnalyticJoint, NormalisedWithRecommendedCutoff)
{
    for (PhotodetectionParams p : {PhotodetectionParams{0.5, 0.07, 0.07, 0.1, 0.1},
                                   PhotodetectionParams{20, 0.07, 0.07, 0.5, 0.5},
                                   PhotodetectionParams{30, 0.5, 0.9, 2, 0}})
    {
        int const cutoff = recommended_cutoff(p);
        auto const j = analytic_joint(p, cutoff);
        EXPECT_NEAR(j.pmf.sum(), 1.0, 1e-9);
        EXPECT_LT(j.tail_mass, 1e-9);
        auto const wide = analytic_joint(p, cutoff + 20);
        EXPECT_NEAR(wide.pmf.sum(), 1.0, 1e-12);
    }
}

TEST(AnalyticJoint, MarginalsArePoisson)
{
    PhotodetectionParams const p{4, 0.3, 0.6, 0.2, 0.1};
    auto const m = marginals(analytic_joint(p, 30).pmf);
    for (int c = 0; c <= 30; ++c)
    {
        EXPECT_NEAR(m.signal[c], double(poisson(c, 4 * 0.3 + 0.2)), 1e-14);
        EXPECT_NEAR(m.idler[c], double(poisson(c, 4 * 0.6 + 0.1)), 1e-14);
    }
}

TEST(AnalyticJoint, RejectsBadParameters)
{
    EXPECT_THROW(analytic_joint({-1, 0.5, 0.5, 0, 0}, 5), ValidationError);
    EXPECT_THROW(analytic_joint({1, 1.5, 0.5, 0, 0}, 5), ValidationError);
    EXPECT_THROW(analytic_joint({1, 0.5, 0.5, 0, 0}, -1), ValidationError);
}
