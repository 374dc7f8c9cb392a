//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/spatial.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "detector_model.hpp"
#include "error.hpp"

namespace twinbeam
{
//---------------------------------------------------------------------------//
//! Uniform binning [lo, lo + bins * width).
struct Axis
{
    double lo{0};
    double width{1};
    int bins{0};

    double hi() const { return lo + bins * width; }
    double center(int k) const { return lo + (k + 0.5) * width; }
    int index(double x) const
    {
        double const t = std::floor((x - lo) / width);
        if (!(t >= 0 && t < bins))
            return -1;
        return static_cast<int>(t);
    }

    friend bool operator==(Axis const&, Axis const&) = default;
};

//! Weighted 2D histogram, signal coordinate by idler coordinate.
class WeightedHistogram2D
{
  public:
    WeightedHistogram2D() = default;
    WeightedHistogram2D(Axis signal, Axis idler)
        : signal_{signal}
        , idler_{idler}
        , w_(static_cast<std::size_t>(signal.bins) * idler.bins, 0.0)
    {
    }

    void fill(double u_signal, double u_idler, double weight)
    {
        int const i = signal_.index(u_signal);
        int const j = idler_.index(u_idler);
        if (i < 0 || j < 0)
        {
            outside_ += weight;
            return;
        }
        w_[static_cast<std::size_t>(i) * idler_.bins + j] += weight;
    }

    void merge(WeightedHistogram2D const& other)
    {
        detail::require(signal_ == other.signal_ && idler_ == other.idler_,
                        "cannot merge histograms with different axes");
        for (std::size_t k = 0; k < w_.size(); ++k)
            w_[k] += other.w_[k];
        outside_ += other.outside_;
    }

    Axis const& signal_axis() const { return signal_; }
    Axis const& idler_axis() const { return idler_; }
    double at(int i, int j) const
    {
        return w_[static_cast<std::size_t>(i) * idler_.bins + j];
    }
    double& at(int i, int j)
    {
        return w_[static_cast<std::size_t>(i) * idler_.bins + j];
    }
    double outside() const { return outside_; }
    void set_outside(double v) { outside_ = v; }
    double in_range_weight() const
    {
        return std::accumulate(w_.begin(), w_.end(), 0.0);
    }

  private:
    Axis signal_;
    Axis idler_;
    std::vector<double> w_;
    double outside_{0};
};

enum class Coordinate
{
    phi,
    theta,
};

constexpr std::string_view to_string(Coordinate c)
{
    return c == Coordinate::phi ? "phi" : "theta";
}

//! +1 if the conjugate point keeps the coordinate, -1 if it negates it.
constexpr double conjugate_sign(Coordinate c)
{
    return c == Coordinate::phi ? -1.0 : 1.0;
}

//---------------------------------------------------------------------------//
/*!
 * Signal-vs-idler position histograms in phi and theta.
 *
 * Every signal-idler combination of a frame is entered with weight
 * 1/(n_s n_i), so each frame with both strips occupied carries total
 * weight one. \c total_weight counts those frames exactly; weight landing
 * outside the axes is tallied separately in each histogram.
 */
class CorrelationAccumulator
{
  public:
    CorrelationAccumulator() = default;
    CorrelationAccumulator(WeightedHistogram2D phi, WeightedHistogram2D theta)
        : phi_{std::move(phi)}, theta_{std::move(theta)}
    {
    }

    /*!
     * Axes aligned with the strips' macropixel columns and rows.
     *
     * With \c bin_width <= 0 the bin is one macropixel.
     */
    static CorrelationAccumulator from_geometry(RegionSet const& rois,
                                                double mrad_per_macropixel,
                                                double bin_width = 0)
    {
        double const mp = mrad_per_macropixel;
        double const w = bin_width > 0 ? bin_width : mp;
        auto axis = [&](int extent_px) {
            double const half = 0.5 * extent_px * mp;
            int const bins = static_cast<int>(std::ceil(2 * half / w - 1e-9));
            return Axis{-0.5 * bins * w, w, bins};
        };
        return {{axis(rois.signal.width()), axis(rois.idler.width())},
                {axis(rois.signal.height()), axis(rois.idler.height())}};
    }

    template<class Event>
    void accumulate_frame(std::span<Event const> signal,
                          std::span<Event const> idler)
    {
        ++frames_;
        if (signal.empty() || idler.empty())
            return;
        double const w = 1.0 / (double(signal.size()) * double(idler.size()));
        for (auto const& s : signal)
        {
            for (auto const& i : idler)
            {
                phi_.fill(s.phi, i.phi, w);
                theta_.fill(s.theta, i.theta, w);
            }
        }
        total_weight_ += 1.0;
    }

    //! Split a frame's events by strip and accumulate.
    void accumulate_frame(FrameEvents const& frame)
    {
        auto const s = frame.in_region(Region::signal);
        auto const i = frame.in_region(Region::idler);
        accumulate_frame(std::span<DetectionEvent const>(s),
                         std::span<DetectionEvent const>(i));
    }

    void merge(CorrelationAccumulator const& other)
    {
        phi_.merge(other.phi_);
        theta_.merge(other.theta_);
        total_weight_ += other.total_weight_;
        frames_ += other.frames_;
    }

    WeightedHistogram2D const& histogram(Coordinate c) const
    {
        return c == Coordinate::phi ? phi_ : theta_;
    }
    double total_weight() const { return total_weight_; }
    std::uint64_t frames() const { return frames_; }

    void set_totals(double total_weight, std::uint64_t frames)
    {
        total_weight_ = total_weight;
        frames_ = frames;
    }

  private:
    WeightedHistogram2D phi_;
    WeightedHistogram2D theta_;
    double total_weight_{0};
    std::uint64_t frames_{0};
};

//---------------------------------------------------------------------------//
/*!
 * Profile across the correlation diagonal.
 *
 * The abscissa is the offset of the idler from the conjugate image of the
 * signal: s = u_i + u_s for phi and s = u_i - u_s for theta. A perfectly
 * correlated pair has s = 0.
 */
struct CrossSectionProfile
{
    Coordinate coordinate{Coordinate::phi};
    double bin_width{1};
    std::vector<double> s;
    std::vector<double> weight;

    double total() const
    {
        return std::accumulate(weight.begin(), weight.end(), 0.0);
    }
};

inline CrossSectionProfile
cross_section(CorrelationAccumulator const& acc, Coordinate coord)
{
    if (!(acc.total_weight() > 0))
        throw NumericalError("cross-section of an empty accumulator");
    auto const& h = acc.histogram(coord);
    Axis const& as = h.signal_axis();
    Axis const& ai = h.idler_axis();
    detail::require(std::abs(as.width - ai.width) <= 1e-12 * as.width,
                    "cross-section needs equal bin widths on both axes");

    double const conj = conjugate_sign(coord);
    // s(i, j) = s00 + (j - conj * i) * width
    int const step = conj > 0 ? -1 : 1;
    int const kmin = std::min(0, step * (as.bins - 1));
    int const kmax = (ai.bins - 1) + std::max(0, step * (as.bins - 1));
    double const s00 = ai.center(0) - conj * as.center(0);

    CrossSectionProfile p;
    p.coordinate = coord;
    p.bin_width = as.width;
    p.s.resize(kmax - kmin + 1);
    p.weight.assign(kmax - kmin + 1, 0.0);
    for (int k = kmin; k <= kmax; ++k)
        p.s[k - kmin] = s00 + k * as.width;
    for (int i = 0; i < as.bins; ++i)
        for (int j = 0; j < ai.bins; ++j)
            p.weight[j + step * i - kmin] += h.at(i, j);
    return p;
}

//---------------------------------------------------------------------------//
// GAUSSIAN FIT
//---------------------------------------------------------------------------//
inline constexpr double fwhm_per_sigma = 2.3548200450309493;  // 2 sqrt(2 ln 2)

struct GaussianFit
{
    double amplitude{0};
    double center{0};
    double sigma{0};
    double offset{0};
    double amplitude_err{0};
    double center_err{0};
    double sigma_err{0};
    double offset_err{0};
    double fwhm{0};
    double fwhm_err{0};
    double residual_norm{0};
    bool converged{false};
    bool bin_limited{false};  //!< fwhm is an upper bound set by the binning
    int iterations{0};
    int n_bins{0};
};

struct FitOptions
{
    //! Bins farther than this from the profile maximum are ignored (<= 0: all).
    double half_range{30.0};
    int max_iterations{200};
    double rel_tolerance{1e-10};
    //! A fitted amplitude below this many standard errors is treated as noise.
    double min_significance{5.0};
};

namespace detail
{
struct FitWindow
{
    std::vector<double> s;
    std::vector<double> y;
};

inline FitWindow select_window(CrossSectionProfile const& p, double half_range)
{
    FitWindow win;
    if (half_range <= 0)
    {
        win.s = p.s;
        win.y = p.weight;
        return win;
    }
    // Locate the maximum of a 5-bin running mean.
    std::size_t const n = p.weight.size();
    std::size_t best = 0;
    double best_val = -1;
    for (std::size_t k = 0; k < n; ++k)
    {
        std::size_t const lo = k >= 2 ? k - 2 : 0;
        std::size_t const hi = std::min(n - 1, k + 2);
        double m = 0;
        for (std::size_t q = lo; q <= hi; ++q)
            m += p.weight[q];
        m /= double(hi - lo + 1);
        if (m > best_val)
        {
            best_val = m;
            best = k;
        }
    }
    double const c = n ? p.s[best] : 0.0;
    for (std::size_t k = 0; k < n; ++k)
    {
        if (std::abs(p.s[k] - c) <= half_range + 1e-9)
        {
            win.s.push_back(p.s[k]);
            win.y.push_back(p.weight[k]);
        }
    }
    return win;
}

inline double median(std::vector<double> v)
{
    auto mid = v.begin() + v.size() / 2;
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2)
        return *mid;
    double const upper = *mid;
    double const lower = *std::max_element(v.begin(), mid);
    return 0.5 * (lower + upper);
}
}  // namespace detail

/*!
 * Least-squares fit of a exp(-(s-c)^2 / 2 sigma^2) + b.
 *
 * Levenberg-Marquardt: Gauss-Newton steps on the normal equations with a
 * multiplicative damping of the diagonal, raised tenfold when a step grows
 * the residual and lowered tenfold when it shrinks it. Starting values come
 * from the profile moments around its peak. Parameter errors are the
 * linearised covariance scaled by the residual variance.
 *
 * A peak a single bin wide is not fitted; it is reported as bin-limited with
 * FWHM equal to the bin width. Throws NoPeakError when the amplitude is not
 * positive or the fitted peak is wider than half the fit window.
 */
inline GaussianFit
fit_gaussian(CrossSectionProfile const& profile, FitOptions const& opts = {})
{
    auto const win = detail::select_window(profile, opts.half_range);
    int const m = static_cast<int>(win.y.size());
    int const populated = static_cast<int>(
        std::count_if(win.y.begin(), win.y.end(), [](double v) { return v > 0; }));
    if (populated < 8)
    {
        throw NumericalError("Gaussian fit needs at least 8 populated bins, got "
                             + std::to_string(populated));
    }

    // Initial estimates
    double const b0 = detail::median(win.y);
    auto const imax = static_cast<int>(
        std::max_element(win.y.begin(), win.y.end()) - win.y.begin());
    double const a0 = win.y[imax] - b0;
    if (!(a0 > 0))
        throw NoPeakError("profile has no peak above its median");

    int above_half = 0;
    for (double v : win.y)
        above_half += (v - b0 > 0.5 * a0);

    GaussianFit fit;
    fit.n_bins = m;
    if (above_half == 1)
    {
        fit.amplitude = a0;
        fit.center = win.s[imax];
        fit.sigma = profile.bin_width / fwhm_per_sigma;
        fit.offset = b0;
        fit.fwhm = profile.bin_width;
        fit.converged = true;
        fit.bin_limited = true;
        return fit;
    }

    int lo = imax, hi = imax;
    while (lo > 0 && win.y[lo - 1] - b0 > 0)
        --lo;
    while (hi < m - 1 && win.y[hi + 1] - b0 > 0)
        ++hi;
    double sw = 0, s1 = 0, s2 = 0;
    for (int k = lo; k <= hi; ++k)
    {
        double const w = win.y[k] - b0;
        sw += w;
        s1 += w * win.s[k];
        s2 += w * win.s[k] * win.s[k];
    }
    double const c0 = s1 / sw;
    double sig0 = std::sqrt(std::max(0.0, s2 / sw - c0 * c0));
    if (!(sig0 > 0))
        sig0 = profile.bin_width;

    using Vec4 = Eigen::Vector4d;
    using Mat4 = Eigen::Matrix4d;
    Vec4 par(a0, c0, sig0, b0);

    auto rss_of = [&](Vec4 const& q) {
        double r2 = 0;
        for (int k = 0; k < m; ++k)
        {
            double const d = win.s[k] - q[1];
            double const r
                = win.y[k] - (q[0] * std::exp(-d * d / (2 * q[2] * q[2])) + q[3]);
            r2 += r * r;
        }
        return r2;
    };
    auto normal_eqs = [&](Vec4 const& q, Mat4& jtj, Vec4& jtr) {
        jtj.setZero();
        jtr.setZero();
        for (int k = 0; k < m; ++k)
        {
            double const d = win.s[k] - q[1];
            double const sg2 = q[2] * q[2];
            double const e = std::exp(-d * d / (2 * sg2));
            Vec4 j(e, q[0] * e * d / sg2, q[0] * e * d * d / (sg2 * q[2]), 1.0);
            double const r = win.y[k] - (q[0] * e + q[3]);
            jtj.noalias() += j * j.transpose();
            jtr += j * r;
        }
    };

    double y2 = 0;
    for (double v : win.y)
        y2 += v * v;
    double rss = rss_of(par);
    double lambda = 1e-3;
    Mat4 jtj;
    Vec4 jtr;
    bool done = false;
    int it = 0;
    for (; it < opts.max_iterations && !done; ++it)
    {
        normal_eqs(par, jtj, jtr);
        bool accepted = false;
        while (!accepted)
        {
            Mat4 damped = jtj;
            damped.diagonal() += lambda * jtj.diagonal();
            Vec4 const step = damped.ldlt().solve(jtr);
            Vec4 trial = par + step;
            trial[2] = std::abs(trial[2]);
            double const trial_rss
                = trial.allFinite() && trial[2] > 0 ? rss_of(trial)
                                                    : std::numeric_limits<double>::infinity();
            if (trial_rss <= rss)
            {
                double const rel = rss > 0 ? (rss - trial_rss) / rss : 0.0;
                par = trial;
                rss = trial_rss;
                lambda = std::max(lambda / 10, 1e-15);
                accepted = true;
                if (rel < opts.rel_tolerance || rss <= 1e-30 * y2)
                    done = true;
            }
            else
            {
                lambda *= 10;
                if (lambda > 1e20)
                {
                    // No descent direction left: at the minimum to precision.
                    done = true;
                    break;
                }
            }
        }
    }
    if (!done)
    {
        std::ostringstream msg;
        msg << "Gaussian fit did not converge after " << it
            << " iterations (rss=" << rss << ", a=" << par[0]
            << ", c=" << par[1] << ", sigma=" << par[2] << ", b=" << par[3]
            << ")";
        throw NumericalError(msg.str());
    }

    fit.amplitude = par[0];
    fit.center = par[1];
    fit.sigma = std::abs(par[2]);
    fit.offset = par[3];
    fit.fwhm = fwhm_per_sigma * fit.sigma;
    fit.residual_norm = std::sqrt(rss);
    fit.converged = true;
    fit.iterations = it;

    // Sandwich covariance: bin variances differ between peak and background,
    // so a single pooled residual variance would understate peak errors.
    Mat4 meat = Mat4::Zero();
    normal_eqs(par, jtj, jtr);
    for (int k = 0; k < m; ++k)
    {
        double const d = win.s[k] - par[1];
        double const sg2 = par[2] * par[2];
        double const e = std::exp(-d * d / (2 * sg2));
        Vec4 j(e, par[0] * e * d / sg2, par[0] * e * d * d / (sg2 * par[2]), 1.0);
        double const r = win.y[k] - (par[0] * e + par[3]);
        meat.noalias() += (r * r) * (j * j.transpose());
    }
    Mat4 const bread = jtj.inverse();
    Mat4 const cov = bread * meat * bread * (double(m) / std::max(1, m - 4));
    fit.amplitude_err = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.center_err = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.sigma_err = std::sqrt(std::max(0.0, cov(2, 2)));
    fit.offset_err = std::sqrt(std::max(0.0, cov(3, 3)));
    fit.fwhm_err = fwhm_per_sigma * fit.sigma_err;

    if (!(fit.amplitude > 0))
        throw NoPeakError("fitted peak amplitude is not positive");
    if (fit.amplitude < opts.min_significance * fit.amplitude_err)
    {
        std::ostringstream msg;
        msg << "no resolved peak: fitted amplitude " << fit.amplitude << " +- "
            << fit.amplitude_err << " is below " << opts.min_significance
            << " standard errors";
        throw NoPeakError(msg.str());
    }
    if (opts.half_range > 0 && fit.fwhm > 0.5 * opts.half_range)
    {
        std::ostringstream msg;
        msg << "no resolved peak: fitted FWHM " << fit.fwhm
            << " exceeds half the fit half-range " << opts.half_range;
        throw NoPeakError(msg.str());
    }
    if (fit.fwhm < profile.bin_width)
        fit.bin_limited = true;
    return fit;
}

//---------------------------------------------------------------------------//
//! Both correlation-area dimensions with their profiles.
struct CorrelationAreaReport
{
    CrossSectionProfile phi_profile;
    CrossSectionProfile theta_profile;
    GaussianFit phi_fit;
    GaussianFit theta_fit;
    double total_weight{0};
};

inline CorrelationAreaReport
correlation_area_report(CorrelationAccumulator const& acc,
                        FitOptions const& opts = {})
{
    CorrelationAreaReport rep;
    rep.total_weight = acc.total_weight();
    rep.phi_profile = cross_section(acc, Coordinate::phi);
    rep.theta_profile = cross_section(acc, Coordinate::theta);
    rep.phi_fit = fit_gaussian(rep.phi_profile, opts);
    rep.theta_fit = fit_gaussian(rep.theta_profile, opts);
    return rep;
}

}  // namespace twinbeam
