//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file tests/unit/test_source_model.cpp
//---------------------------------------------------------------------------//
#include <cmath>
#include <map>
#include <vector>

#include <gtest/gtest.h>

#include "twinbeam/source_model.hpp"

using namespace twinbeam;

namespace
{
// Poisson pmf by the ratio recurrence, independent of the library's lgamma.
std::vector<double> poisson_table(double mean, int kmax)
{
    std::vector<double> p(kmax + 1);
    p[0] = std::exp(-mean);
    for (int k = 1; k <= kmax; ++k)
        p[k] = p[k - 1] * mean / k;
    return p;
}
}  // namespace

TEST(SourceModel, ZeroRateGivesNoPairs)
{
    SourceParams p;
    p.mu_pairs = 0;
    for (std::uint64_t f = 0; f < 1000; ++f)
        EXPECT_TRUE(sample_frame(p, {42, f}).empty());
}

TEST(SourceModel, ZeroSpreadIsExactConjugate)
{
    SourceParams p;
    p.mu_pairs = 8;
    for (std::uint64_t f = 0; f < 200; ++f)
    {
        for (auto const& pair : sample_frame(p, {3, f}))
        {
            EXPECT_EQ(pair.phi_i, -pair.phi_s);
            EXPECT_EQ(pair.theta_i, pair.theta_s);
            EXPECT_LE(std::abs(pair.phi_s), 0.5 * p.phi_window);
        }
    }
}

TEST(SourceModel, PairCountIsPoisson)
{
    SourceParams p;
    p.mu_pairs = 2;
    std::uint64_t const frames = 100000;
    std::map<int, std::uint64_t> hist;
    double sum = 0;
    for (std::uint64_t f = 0; f < frames; ++f)
    {
        auto const n = static_cast<int>(sample_frame(p, {11, f}).size());
        ++hist[n];
        sum += n;
    }
    double const mean = sum / frames;
    EXPECT_NEAR(mean, 2.0, 3 * std::sqrt(2.0 / frames));

    auto const pmf = poisson_table(2.0, 40);
    double tv = 0, covered = 0;
    for (int k = 0; k <= 40; ++k)
    {
        double const emp = hist.count(k) ? double(hist[k]) / frames : 0.0;
        tv += std::abs(emp - pmf[k]);
        covered += pmf[k];
    }
    tv += 1 - covered;
    EXPECT_LT(0.5 * tv, 0.01);
}

TEST(SourceModel, ConditionalSpreadMatchesParameters)
{
    SourceParams p;
    p.mu_pairs = 5;
    p.corr_sigma_phi = 4.0;
    p.corr_sigma_theta = 2.5;
    std::vector<double> dphi, dtheta;
    for (std::uint64_t f = 0; f < 20000; ++f)
    {
        for (auto const& pair : sample_frame(p, {5, f}))
        {
            dphi.push_back(pair.phi_i + pair.phi_s);
            dtheta.push_back(pair.theta_i - pair.theta_s);
        }
    }
    auto sd = [](std::vector<double> const& v) {
        double m = 0, s = 0;
        for (double x : v)
            m += x;
        m /= v.size();
        for (double x : v)
            s += (x - m) * (x - m);
        return std::sqrt(s / (v.size() - 1));
    };
    double const n = dphi.size();
    // Standard error of a Gaussian sample std: sigma / sqrt(2 (n - 1)).
    EXPECT_NEAR(sd(dphi), 4.0, 3 * 4.0 / std::sqrt(2 * (n - 1)));
    EXPECT_NEAR(sd(dtheta), 2.5, 3 * 2.5 / std::sqrt(2 * (n - 1)));
}

TEST(SourceModel, LayerAndWindowShape)
{
    SourceParams p;
    p.mu_pairs = 5;
    p.layer_sigma_theta = 30;
    p.phi_window = 200;
    double s2 = 0, n = 0, phi_max = 0;
    for (std::uint64_t f = 0; f < 10000; ++f)
    {
        for (auto const& pair : sample_frame(p, {8, f}))
        {
            s2 += pair.theta_s * pair.theta_s;
            phi_max = std::max(phi_max, std::abs(pair.phi_s));
            ++n;
        }
    }
    EXPECT_NEAR(std::sqrt(s2 / n), 30.0, 3 * 30.0 / std::sqrt(2 * n));
    EXPECT_LE(phi_max, 100.0);
    EXPECT_GT(phi_max, 99.0);
}

TEST(SourceModel, FramesAreReproducibleAndIndependent)
{
    SourceParams p;
    p.mu_pairs = 6;
    p.corr_sigma_phi = 3;
    auto const a = sample_frame(p, {99, 123});
    auto const b = sample_frame(p, {99, 123});
    EXPECT_EQ(a, b);
    EXPECT_NE(a, sample_frame(p, {99, 124}));
    EXPECT_NE(a, sample_frame(p, {100, 123}));
}

TEST(SourceModel, ValidationRejectsBadParameters)
{
    SourceParams p;
    p.mu_pairs = -1;
    EXPECT_THROW(sample_frame(p, {1, 0}), ValidationError);
    p = {};
    p.phi_window = 0;
    EXPECT_THROW(p.validate(), ValidationError);
    p = {};
    p.corr_sigma_theta = std::nan("");
    EXPECT_THROW(p.validate(), ValidationError);
}
