//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/statistics.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace twinbeam
{
//---------------------------------------------------------------------------//
//! Dense square array indexed by (signal count, idler count).
class SquareGrid
{
  public:
    SquareGrid() = default;
    explicit SquareGrid(int size, double fill = 0.0)
        : size_{size}, values_(static_cast<std::size_t>(size) * size, fill)
    {
    }

    int size() const { return size_; }
    double& operator()(int s, int i)
    {
        return values_[static_cast<std::size_t>(s) * size_ + i];
    }
    double operator()(int s, int i) const
    {
        return values_[static_cast<std::size_t>(s) * size_ + i];
    }
    double sum() const
    {
        double total = 0;
        for (double v : values_)
            total += v;
        return total;
    }
    std::vector<double> const& values() const { return values_; }

  private:
    int size_{0};
    std::vector<double> values_;
};

//---------------------------------------------------------------------------//
/*!
 * Joint signal-idler photocount histogram f(c_S, c_I).
 *
 * Bins cover counts 0..cutoff on each axis. A frame with either count above
 * the cutoff goes to the overflow tally and marks the histogram truncated;
 * it still counts towards \c n_frames. Merging is a bin-wise integer sum,
 * so it is exactly associative and commutative.
 */
class JointHistogram
{
  public:
    explicit JointHistogram(int cutoff = 20)
        : cutoff_{cutoff}
        , counts_(static_cast<std::size_t>(cutoff + 1) * (cutoff + 1), 0)
    {
        detail::require(cutoff >= 0, "histogram cutoff must be >= 0");
    }

    void accumulate(int c_s, int c_i)
    {
        detail::require(c_s >= 0 && c_i >= 0,
                        "photocounts must be nonnegative");
        ++n_frames_;
        if (c_s > cutoff_ || c_i > cutoff_)
        {
            ++overflow_;
            return;
        }
        ++counts_[index(c_s, c_i)];
    }

    void merge(JointHistogram const& other)
    {
        detail::require(other.cutoff_ == cutoff_,
                        "cannot merge histograms with different cutoffs");
        for (std::size_t k = 0; k < counts_.size(); ++k)
            counts_[k] += other.counts_[k];
        n_frames_ += other.n_frames_;
        overflow_ += other.overflow_;
    }

    int cutoff() const { return cutoff_; }
    int size() const { return cutoff_ + 1; }
    std::uint64_t n_frames() const { return n_frames_; }
    std::uint64_t overflow() const { return overflow_; }
    bool truncated() const { return overflow_ > 0; }
    std::uint64_t count(int c_s, int c_i) const
    {
        return counts_[index(c_s, c_i)];
    }
    double frequency(int c_s, int c_i) const
    {
        return static_cast<double>(count(c_s, c_i))
               / static_cast<double>(n_frames_);
    }

    //! Rebuild from stored bins (file readers).
    static JointHistogram from_counts(int cutoff,
                                      std::vector<std::uint64_t> counts,
                                      std::uint64_t overflow)
    {
        JointHistogram h(cutoff);
        detail::require(counts.size() == h.counts_.size(),
                        "histogram bin count does not match cutoff");
        h.counts_ = std::move(counts);
        h.overflow_ = overflow;
        h.n_frames_ = overflow;
        for (auto c : h.counts_)
            h.n_frames_ += c;
        return h;
    }

    friend bool operator==(JointHistogram const&, JointHistogram const&)
        = default;

  private:
    int cutoff_;
    std::uint64_t n_frames_{0};
    std::uint64_t overflow_{0};
    std::vector<std::uint64_t> counts_;

    std::size_t index(int s, int i) const
    {
        return static_cast<std::size_t>(s) * (cutoff_ + 1) + i;
    }
};

//! Functional form of JointHistogram::accumulate.
inline JointHistogram accumulate(JointHistogram hist, int c_s, int c_i)
{
    hist.accumulate(c_s, c_i);
    return hist;
}

//! Relative frequencies f = counts / n_frames.
inline SquareGrid frequencies(JointHistogram const& hist)
{
    if (hist.n_frames() == 0)
        throw NumericalError("empty histogram");
    SquareGrid f(hist.size());
    for (int s = 0; s < hist.size(); ++s)
        for (int i = 0; i < hist.size(); ++i)
            f(s, i) = hist.frequency(s, i);
    return f;
}

//---------------------------------------------------------------------------//
// MARGINALS AND CORRELATION
//---------------------------------------------------------------------------//
struct Marginals
{
    std::vector<double> signal;
    std::vector<double> idler;
};

inline Marginals marginals(SquareGrid const& f)
{
    Marginals m{std::vector<double>(f.size(), 0.0),
                std::vector<double>(f.size(), 0.0)};
    for (int s = 0; s < f.size(); ++s)
    {
        for (int i = 0; i < f.size(); ++i)
        {
            m.signal[s] += f(s, i);
            m.idler[i] += f(s, i);
        }
    }
    return m;
}

inline Marginals marginals(JointHistogram const& hist)
{
    return marginals(frequencies(hist));
}

struct CorrelationResult
{
    double c_p{0};
    double std_err{0};
    std::uint64_t n_frames{0};
    int bootstrap_resamples{0};
};

namespace detail
{
struct Moments
{
    double var_s{0};
    double var_i{0};
    double cov{0};
};

//! Central moments of a (possibly unnormalised) distribution on the grid.
template<class Weight>
Moments moments(int size, Weight&& weight)
{
    double w = 0, ms = 0, mi = 0;
    for (int s = 0; s < size; ++s)
    {
        for (int i = 0; i < size; ++i)
        {
            double const p = weight(s, i);
            w += p;
            ms += p * s;
            mi += p * i;
        }
    }
    ms /= w;
    mi /= w;
    Moments m;
    for (int s = 0; s < size; ++s)
    {
        for (int i = 0; i < size; ++i)
        {
            double const p = weight(s, i) / w;
            m.var_s += p * (s - ms) * (s - ms);
            m.var_i += p * (i - mi) * (i - mi);
            m.cov += p * (s - ms) * (i - mi);
        }
    }
    return m;
}

inline std::optional<double> correlation(Moments const& m)
{
    if (!(m.var_s > 0) || !(m.var_i > 0))
        return std::nullopt;
    return std::clamp(m.cov / std::sqrt(m.var_s * m.var_i), -1.0, 1.0);
}

//! Multinomial resample of \c n draws over \c probs into \c out.
inline void multinomial(Engine& rng,
                        std::uint64_t n,
                        std::vector<double> const& probs,
                        std::vector<double>& out)
{
    out.assign(probs.size(), 0.0);
    double remaining = 1.0;
    for (std::size_t k = 0; k < probs.size() && n > 0; ++k)
    {
        if (probs[k] <= 0)
            continue;
        double const p = remaining > 0 ? std::min(1.0, probs[k] / remaining)
                                       : 1.0;
        std::binomial_distribution<std::uint64_t> draw(n, p);
        std::uint64_t const got = (p >= 1.0) ? n : draw(rng);
        out[k] = static_cast<double>(got);
        n -= got;
        remaining -= probs[k];
    }
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Normalised signal-idler covariance C_p of an exact distribution.
 */
inline double correlation_of(SquareGrid const& pmf)
{
    auto const c = detail::correlation(detail::moments(
        pmf.size(), [&](int s, int i) { return pmf(s, i); }));
    if (!c)
        throw NumericalError("correlation undefined: zero marginal variance");
    return *c;
}

/*!
 * Correlation coefficient of the measured counts with a bootstrap error.
 *
 * The bootstrap resamples frames with replacement, which for a histogram is
 * a multinomial draw of n_frames over the occupied bins. Resamples that
 * happen to have a constant marginal are skipped. With zero resamples the
 * asymptotic (1 - C_p^2)/sqrt(N) error is reported instead.
 */
inline CorrelationResult correlation_coefficient(JointHistogram const& hist,
                                                 int resamples,
                                                 std::uint64_t seed)
{
    if (hist.n_frames() < 2)
        throw NumericalError("correlation needs at least two frames");
    detail::require(resamples >= 0, "bootstrap resamples must be >= 0");

    auto const c = detail::correlation(detail::moments(
        hist.size(),
        [&](int s, int i) { return static_cast<double>(hist.count(s, i)); }));
    if (!c)
        throw NumericalError("correlation undefined: zero marginal variance");

    CorrelationResult result;
    result.c_p = *c;
    result.n_frames = hist.n_frames();
    if (resamples == 0)
    {
        result.std_err = (1 - *c * *c) / std::sqrt(double(hist.n_frames()));
        return result;
    }

    SquareGrid const f = frequencies(hist);
    std::uint64_t const n_in = hist.n_frames() - hist.overflow();
    std::vector<double> probs(f.values());
    double const in_mass = std::max(1e-300, f.sum());
    for (double& p : probs)
        p /= in_mass;

    Engine rng = FrameSeed{seed, 0}.engine(Stream::bootstrap);
    std::vector<double> draw;
    double sum = 0, sum2 = 0;
    int used = 0;
    int const n = hist.size();
    for (int r = 0; r < resamples; ++r)
    {
        detail::multinomial(rng, n_in, probs, draw);
        auto const cr = detail::correlation(detail::moments(
            n, [&](int s, int i) { return draw[std::size_t(s) * n + i]; }));
        if (!cr)
            continue;
        sum += *cr;
        sum2 += *cr * *cr;
        ++used;
    }
    result.bootstrap_resamples = used;
    if (used >= 2)
    {
        double const mean = sum / used;
        result.std_err
            = std::sqrt(std::max(0.0, (sum2 - used * mean * mean) / (used - 1)));
    }
    return result;
}

//---------------------------------------------------------------------------//
// CLASSICALITY CRITERION
//---------------------------------------------------------------------------//
namespace detail
{
//! log of n^n e^{-n} / n!, with 0^0 = 1.
inline double log_poisson_peak(int n)
{
    if (n == 0)
        return 0.0;
    double const x = n;
    return x * std::log(x) - std::lgamma(x + 1.0) - x;
}
}  // namespace detail

/*!
 * Upper bound on p(n_S, n_I) for any classical field.
 *
 * The bound is the product of the per-arm Poisson peaks n^n e^{-n}/n!,
 * i.e. the largest value an independent Poisson product can reach in the
 * bin. Evaluated in the log domain so it stays finite for large n.
 */
inline double classicality_bound(int n_s, int n_i)
{
    detail::require(n_s >= 0 && n_i >= 0, "bound needs nonnegative counts");
    return std::exp(detail::log_poisson_peak(n_s)
                    + detail::log_poisson_peak(n_i));
}

struct CriterionRecord
{
    int n_s{0};
    int n_i{0};
    double f{0};
    double bound{0};
    double excess{0};
    double std_err{0};
    std::optional<double> significance;            //!< excess / std_err
    std::optional<double> bootstrap_significance;  //!< excess / bootstrap SE
};

struct CriterionReport
{
    std::uint64_t n_frames{0};
    std::vector<CriterionRecord> records;
    std::vector<std::size_t> violating;  //!< indices with excess > 0
    std::optional<std::size_t> max_index;  //!< most significant record

    std::optional<double> max_significance() const
    {
        if (!max_index)
            return std::nullopt;
        return records[*max_index].significance;
    }

    //! Most significant record among those passing \c pred.
    template<class Pred>
    CriterionRecord const* best_where(Pred&& pred) const
    {
        CriterionRecord const* best = nullptr;
        for (auto const& r : records)
        {
            if (!r.significance || !pred(r))
                continue;
            if (!best || *r.significance > *best->significance)
                best = &r;
        }
        return best;
    }
};

namespace detail
{
inline void finish_report(CriterionReport& rep)
{
    for (std::size_t k = 0; k < rep.records.size(); ++k)
    {
        auto const& r = rep.records[k];
        if (r.excess > 0)
            rep.violating.push_back(k);
        if (r.significance
            && (!rep.max_index
                || *r.significance
                       > *rep.records[*rep.max_index].significance))
        {
            rep.max_index = k;
        }
    }
}

inline CriterionRecord
make_record(int s, int i, double f, std::optional<double> n_frames)
{
    CriterionRecord r;
    r.n_s = s;
    r.n_i = i;
    r.f = f;
    r.bound = classicality_bound(s, i);
    r.excess = f - r.bound;
    if (n_frames)
    {
        r.std_err = std::sqrt(std::max(0.0, f * (1 - f)) / *n_frames);
        if (r.std_err > 0)
            r.significance = r.excess / r.std_err;
    }
    return r;
}
}  // namespace detail

/*!
 * Test every bin of the measured distribution against the classical bound.
 *
 * Significance uses the binomial-proportion error sqrt(f(1-f)/N); bins with
 * f = 0 or f = 1 have no defined significance. With \c resamples > 0 a
 * bootstrap error per bin is computed as a cross-check.
 */
inline CriterionReport criterion_test(JointHistogram const& hist,
                                      int resamples = 0,
                                      std::uint64_t seed = 0)
{
    SquareGrid const f = frequencies(hist);
    double const n = static_cast<double>(hist.n_frames());
    int const size = hist.size();

    CriterionReport rep;
    rep.n_frames = hist.n_frames();
    rep.records.reserve(std::size_t(size) * size);
    for (int s = 0; s < size; ++s)
        for (int i = 0; i < size; ++i)
            rep.records.push_back(detail::make_record(s, i, f(s, i), n));

    if (resamples > 0)
    {
        std::vector<double> probs = f.values();
        std::vector<double> draw;
        std::vector<double> sum(probs.size(), 0.0), sum2(probs.size(), 0.0);
        Engine rng = FrameSeed{seed, 1}.engine(Stream::bootstrap);
        for (int r = 0; r < resamples; ++r)
        {
            detail::multinomial(rng, hist.n_frames(), probs, draw);
            for (std::size_t k = 0; k < draw.size(); ++k)
            {
                double const fk = draw[k] / n;
                sum[k] += fk;
                sum2[k] += fk * fk;
            }
        }
        for (std::size_t k = 0; k < probs.size(); ++k)
        {
            double const mean = sum[k] / resamples;
            double const var
                = resamples > 1
                      ? (sum2[k] - resamples * mean * mean) / (resamples - 1)
                      : 0.0;
            if (var > 0)
            {
                rep.records[k].bootstrap_significance
                    = rep.records[k].excess / std::sqrt(var);
            }
        }
    }
    detail::finish_report(rep);
    return rep;
}

/*!
 * Criterion evaluated on an exact distribution.
 *
 * Excesses carry no sampling error. Passing \c n_frames gives the expected
 * significance a run of that length would show.
 */
inline CriterionReport criterion_from_pmf(SquareGrid const& pmf,
                                          std::optional<double> n_frames
                                          = std::nullopt)
{
    CriterionReport rep;
    rep.n_frames = n_frames ? static_cast<std::uint64_t>(*n_frames) : 0;
    for (int s = 0; s < pmf.size(); ++s)
        for (int i = 0; i < pmf.size(); ++i)
            rep.records.push_back(
                detail::make_record(s, i, pmf(s, i), n_frames));
    detail::finish_report(rep);
    return rep;
}

//! f(c_S, c_I) minus the product of its marginals.
inline SquareGrid difference_map(SquareGrid const& f)
{
    auto const m = marginals(f);
    SquareGrid d(f.size());
    for (int s = 0; s < f.size(); ++s)
        for (int i = 0; i < f.size(); ++i)
            d(s, i) = f(s, i) - m.signal[s] * m.idler[i];
    return d;
}

inline SquareGrid difference_map(JointHistogram const& hist)
{
    return difference_map(frequencies(hist));
}

//---------------------------------------------------------------------------//
// PHOTODETECTION ORACLE
//---------------------------------------------------------------------------//
namespace detail
{
inline double poisson_pmf(int k, double mean)
{
    if (k < 0)
        return 0.0;
    if (mean == 0)
        return k == 0 ? 1.0 : 0.0;
    return std::exp(k * std::log(mean) - mean - std::lgamma(k + 1.0));
}

inline double binomial_pmf(int k, int n, double p)
{
    if (k < 0 || k > n)
        return 0.0;
    if (p == 0)
        return k == 0 ? 1.0 : 0.0;
    if (p == 1)
        return k == n ? 1.0 : 0.0;
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0)
                    - std::lgamma(n - k + 1.0) + k * std::log(p)
                    + (n - k) * std::log1p(-p));
}

//! Upper tail P(X > k) of Poisson(mean).
inline double poisson_upper_tail(int k, double mean)
{
    double cdf = 0;
    for (int j = 0; j <= k; ++j)
        cdf += poisson_pmf(j, mean);
    return std::max(0.0, 1.0 - cdf);
}

//! Counts in one arm given n pairs: Bin(n, eta) convolved with Poisson(d).
inline std::vector<double>
arm_counts(int n, double eta, std::vector<double> const& dark, int size)
{
    std::vector<double> out(size, 0.0);
    for (int k = 0; k <= std::min(n, size - 1); ++k)
    {
        double const b = binomial_pmf(k, n, eta);
        if (b == 0)
            continue;
        for (int c = k; c < size; ++c)
            out[c] += b * dark[c - k];
    }
    return out;
}
}  // namespace detail

struct PhotodetectionParams
{
    double mu{1.0};
    double eta_s{1.0};
    double eta_i{1.0};
    double dark_s{0.0};
    double dark_i{0.0};

    void validate() const
    {
        auto nonneg = [](double v) { return std::isfinite(v) && v >= 0; };
        detail::require(nonneg(mu), "mu must be >= 0");
        detail::require(nonneg(eta_s) && eta_s <= 1, "eta_s must be in [0, 1]");
        detail::require(nonneg(eta_i) && eta_i <= 1, "eta_i must be in [0, 1]");
        detail::require(nonneg(dark_s), "dark_s must be >= 0");
        detail::require(nonneg(dark_i), "dark_i must be >= 0");
    }
};

struct AnalyticJoint
{
    SquareGrid pmf;
    double tail_mass{0};  //!< probability beyond the cutoff
    int cutoff{0};
};

/*!
 * Exact joint photocount distribution of Poisson pairs.
 *
 * f(c_S, c_I) = sum_n Poisson(n; mu) A_n(c_S) B_n(c_I), where each arm's
 * A_n is binomial thinning of the n photons convolved with Poisson noise.
 * The pair sum runs until the remaining Poisson mass is below 1e-16.
 */
inline AnalyticJoint
analytic_joint(PhotodetectionParams const& p, int cutoff)
{
    p.validate();
    detail::require(cutoff >= 0 && cutoff <= 10000,
                    "cutoff must be in [0, 10000]");
    int const size = cutoff + 1;
    std::vector<double> dark_s(size), dark_i(size);
    for (int c = 0; c < size; ++c)
    {
        dark_s[c] = detail::poisson_pmf(c, p.dark_s);
        dark_i[c] = detail::poisson_pmf(c, p.dark_i);
    }

    AnalyticJoint out{SquareGrid(size), 0.0, cutoff};
    double covered = 0;
    int const n_mode = static_cast<int>(p.mu);
    for (int n = 0;; ++n)
    {
        double const pn = detail::poisson_pmf(n, p.mu);
        covered += pn;
        if (pn > 0)
        {
            auto const a = detail::arm_counts(n, p.eta_s, dark_s, size);
            auto const b = detail::arm_counts(n, p.eta_i, dark_i, size);
            for (int s = 0; s < size; ++s)
            {
                if (a[s] == 0)
                    continue;
                double const ps = pn * a[s];
                for (int i = 0; i < size; ++i)
                    out.pmf(s, i) += ps * b[i];
            }
        }
        if (n > n_mode && (1.0 - covered < 1e-16 || pn < 1e-300))
            break;
    }
    out.tail_mass = std::max(0.0, 1.0 - out.pmf.sum());
    return out;
}

/*!
 * Smallest cutoff whose truncated mass is below \c tail.
 *
 * Each arm's marginal is Poisson(eta mu + dark), and the joint tail is
 * bounded by the sum of the two marginal tails.
 */
inline int recommended_cutoff(PhotodetectionParams const& p, double tail = 1e-9)
{
    p.validate();
    double const ls = p.eta_s * p.mu + p.dark_s;
    double const li = p.eta_i * p.mu + p.dark_i;
    int c = 0;
    while (c < 10000
           && detail::poisson_upper_tail(c, ls) + detail::poisson_upper_tail(c, li)
                  >= tail)
    {
        ++c;
    }
    return c;
}

}  // namespace twinbeam
