//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/detector_model.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "random.hpp"
#include "source_model.hpp"

namespace twinbeam
{
//---------------------------------------------------------------------------//
// GEOMETRY
//---------------------------------------------------------------------------//
enum class Region : int
{
    signal = 0,
    idler = 1,
    noise = 2,
};

inline constexpr std::array<Region, 3> all_regions{
    Region::signal, Region::idler, Region::noise};

constexpr std::string_view to_string(Region r)
{
    switch (r)
    {
        case Region::signal: return "signal";
        case Region::idler: return "idler";
        case Region::noise: return "noise";
    }
    return "?";
}

//! Half-open rectangle [x0, x1) x [y0, y1) in macropixel units.
struct Rect
{
    int x0{0};
    int y0{0};
    int x1{0};
    int y1{0};

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }
    bool empty() const { return x1 <= x0 || y1 <= y0; }
    bool contains(double x, double y) const
    {
        return x >= x0 && x < x1 && y >= y0 && y < y1;
    }
    bool overlaps(Rect const& o) const
    {
        return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1;
    }

    friend bool operator==(Rect const&, Rect const&) = default;
};

//---------------------------------------------------------------------------//
/*!
 * The three camera regions of interest: signal strip, idler strip and a
 * monitor strip that sees only noise.
 */
struct RegionSet
{
    Rect signal{0, 0, 480, 640};
    Rect idler{500, 0, 980, 640};
    Rect noise{1000, 0, 1064, 640};

    Rect const& operator[](Region r) const
    {
        switch (r)
        {
            case Region::signal: return signal;
            case Region::idler: return idler;
            default: return noise;
        }
    }

    //! Camera frame size: smallest origin-anchored box holding all regions.
    int frame_width() const
    {
        return std::max({signal.x1, idler.x1, noise.x1});
    }
    int frame_height() const
    {
        return std::max({signal.y1, idler.y1, noise.y1});
    }

    void validate() const
    {
        for (Region r : all_regions)
        {
            Rect const& b = (*this)[r];
            detail::require(!b.empty() && b.x0 >= 0 && b.y0 >= 0,
                            "region '" + std::string(to_string(r))
                                + "' must be a nonempty rectangle at "
                                  "nonnegative coordinates");
        }
        detail::require(!signal.overlaps(idler) && !signal.overlaps(noise)
                            && !idler.overlaps(noise),
                        "regions of interest must be pairwise disjoint");
    }

    friend bool operator==(RegionSet const&, RegionSet const&) = default;
};

//---------------------------------------------------------------------------//
// DETECTOR
//---------------------------------------------------------------------------//
/*!
 * Intensified-camera model parameters.
 *
 * Efficiencies are total per-arm detection probabilities. Dark means are
 * spurious events per region per frame. The raster fields (psf, gain,
 * readout, thresholds) only matter for the image-level path.
 */
struct DetectorParams
{
    double eta_s{0.07};
    double eta_i{0.07};
    double dark_mean_s{0.0};
    double dark_mean_i{0.0};
    double dark_mean_noise{0.0};
    double mrad_per_pixel{0.25};
    int macropixel{2};
    double psf_sigma{0.15};      //!< [macropixel]
    double gain_mean{100.0};
    double gain_sigma{20.0};
    double readout_sigma{1.0};
    double threshold_low{2.5};
    double threshold_high{5.0};
    double blur_sigma{0.0};      //!< [mrad], event-level path only

    //! Angular size of one macropixel [mrad].
    double mrad_per_macropixel() const { return mrad_per_pixel * macropixel; }

    double dark_mean(Region r) const
    {
        switch (r)
        {
            case Region::signal: return dark_mean_s;
            case Region::idler: return dark_mean_i;
            default: return dark_mean_noise;
        }
    }

    void validate() const
    {
        auto finite = [](double v) { return std::isfinite(v); };
        auto nonneg = [&](double v) { return finite(v) && v >= 0; };
        auto unit = [&](double v) { return finite(v) && v >= 0 && v <= 1; };
        detail::require(unit(eta_s), "detector.eta_s must be in [0, 1]");
        detail::require(unit(eta_i), "detector.eta_i must be in [0, 1]");
        detail::require(nonneg(dark_mean_s),
                        "detector.dark_mean_s must be >= 0");
        detail::require(nonneg(dark_mean_i),
                        "detector.dark_mean_i must be >= 0");
        detail::require(nonneg(dark_mean_noise),
                        "detector.dark_mean_noise must be >= 0");
        detail::require(finite(mrad_per_pixel) && mrad_per_pixel > 0,
                        "detector.mrad_per_pixel must be > 0");
        detail::require(macropixel >= 1, "detector.macropixel must be >= 1");
        detail::require(nonneg(psf_sigma), "detector.psf_sigma must be >= 0");
        detail::require(finite(gain_mean) && gain_mean > 0,
                        "detector.gain_mean must be > 0");
        detail::require(nonneg(gain_sigma),
                        "detector.gain_sigma must be >= 0");
        detail::require(nonneg(readout_sigma),
                        "detector.readout_sigma must be >= 0");
        detail::require(nonneg(threshold_low),
                        "detector.threshold_low must be >= 0");
        detail::require(finite(threshold_high)
                            && threshold_high >= threshold_low,
                        "detector.threshold_high must be >= threshold_low");
        detail::require(nonneg(blur_sigma),
                        "detector.blur_sigma must be >= 0");
    }

    friend bool operator==(DetectorParams const&, DetectorParams const&)
        = default;
};

//---------------------------------------------------------------------------//
/*!
 * Linear small-angle map between strip-local angles and macropixels.
 *
 * The angular offset runs along x, the radial offset along y, both centred
 * on the strip. The idler strip is seen through a mirror, so its x axis is
 * inverted.
 */
class StripMap
{
  public:
    StripMap(Rect const& roi, bool mirrored, double mrad_per_macropixel)
        : cx_{roi.center_x()}
        , cy_{roi.center_y()}
        , sign_{mirrored ? -1.0 : 1.0}
        , scale_{mrad_per_macropixel}
    {
    }

    static StripMap
    for_region(Region r, RegionSet const& rois, DetectorParams const& p)
    {
        return {rois[r], r == Region::idler, p.mrad_per_macropixel()};
    }

    double to_x(double phi) const { return cx_ + sign_ * phi / scale_; }
    double to_y(double theta) const { return cy_ + theta / scale_; }
    double to_phi(double x) const { return sign_ * (x - cx_) * scale_; }
    double to_theta(double y) const { return (y - cy_) * scale_; }

  private:
    double cx_;
    double cy_;
    double sign_;
    double scale_;
};

//---------------------------------------------------------------------------//
/*!
 * One detected event: centroid in macropixels and the strip-local angles it
 * maps back to.
 */
struct DetectionEvent
{
    Region region{Region::signal};
    double x{0};
    double y{0};
    double phi{0};
    double theta{0};
};

//! Frame-level diagnostics from the raster pipeline.
struct FrameQuality
{
    bool saturated{false};   //!< Most pixels above the growth threshold
    int unassigned{0};       //!< Components centred outside every region
    int components{0};
};

struct FrameEvents
{
    std::uint64_t frame_index{0};
    std::vector<DetectionEvent> events;
    std::array<int, 3> counts{0, 0, 0};
    FrameQuality quality;

    int count(Region r) const { return counts[static_cast<int>(r)]; }

    void add(DetectionEvent const& e)
    {
        events.push_back(e);
        ++counts[static_cast<int>(e.region)];
    }

    std::vector<DetectionEvent> in_region(Region r) const
    {
        std::vector<DetectionEvent> out;
        out.reserve(count(r));
        for (auto const& e : events)
        {
            if (e.region == r)
                out.push_back(e);
        }
        return out;
    }
};

//! Build an event at a macropixel position, filling in the angles.
inline DetectionEvent make_event(Region r,
                                 double x,
                                 double y,
                                 RegionSet const& rois,
                                 DetectorParams const& params)
{
    auto const map = StripMap::for_region(r, rois, params);
    return {r, x, y, map.to_phi(x), map.to_theta(y)};
}

//---------------------------------------------------------------------------//
/*!
 * Event-level detection of one frame.
 *
 * Photons survive with the arm efficiency, are optionally blurred, mapped
 * onto the camera and kept only inside their own strip. Dark events are
 * Poisson per region and uniform over it.
 */
inline FrameEvents detect_events(std::vector<PairEvent> const& pairs,
                                 DetectorParams const& params,
                                 RegionSet const& rois,
                                 FrameSeed const& seed)
{
    params.validate();
    rois.validate();

    FrameEvents out;
    out.frame_index = seed.frame;
    Engine rng = seed.engine(Stream::detector);
    std::bernoulli_distribution keep_s(params.eta_s);
    std::bernoulli_distribution keep_i(params.eta_i);
    std::normal_distribution<double> unit;

    auto const smap = StripMap::for_region(Region::signal, rois, params);
    auto const imap = StripMap::for_region(Region::idler, rois, params);
    double const blur = params.blur_sigma;

    auto place = [&](Region r, StripMap const& map, double phi, double theta) {
        if (blur > 0)
        {
            phi += blur * unit(rng);
            theta += blur * unit(rng);
        }
        double const x = map.to_x(phi);
        double const y = map.to_y(theta);
        if (rois[r].contains(x, y))
        {
            out.add({r, x, y, phi, theta});
        }
    };

    for (auto const& p : pairs)
    {
        bool const s = keep_s(rng);
        bool const i = keep_i(rng);
        if (s)
            place(Region::signal, smap, p.phi_s, p.theta_s);
        if (i)
            place(Region::idler, imap, p.phi_i, p.theta_i);
    }

    for (Region r : all_regions)
    {
        double const mean = params.dark_mean(r);
        if (mean <= 0)
            continue;
        Rect const& b = rois[r];
        std::poisson_distribution<int> ndark(mean);
        std::uniform_real_distribution<double> ux(b.x0, b.x1);
        std::uniform_real_distribution<double> uy(b.y0, b.y1);
        int const n = ndark(rng);
        for (int k = 0; k < n; ++k)
        {
            double const x = ux(rng);
            double const y = uy(rng);
            if (b.contains(x, y))
                out.add(make_event(r, x, y, rois, params));
        }
    }
    return out;
}

//---------------------------------------------------------------------------//
// RASTER PIPELINE
//---------------------------------------------------------------------------//
//! Intensity image over macropixels, row-major.
struct RasterFrame
{
    std::uint64_t frame_index{0};
    int width{0};
    int height{0};
    std::vector<double> pixels;

    RasterFrame() = default;
    RasterFrame(std::uint64_t index, int w, int h)
        : frame_index{index}
        , width{w}
        , height{h}
        , pixels(static_cast<std::size_t>(w) * h, 0.0)
    {
    }

    double& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    double at(int x, int y) const
    {
        return pixels[static_cast<std::size_t>(y) * width + x];
    }
    double sum() const
    {
        double s = 0;
        for (double v : pixels)
            s += v;
        return s;
    }
};

namespace detail
{
//! Fraction of a unit-mass 1D Gaussian falling in pixel [i, i+1).
inline double pixel_fraction(int i, double center, double sigma)
{
    double const k = 1.0 / (sigma * std::sqrt(2.0));
    return 0.5 * (std::erf((i + 1 - center) * k) - std::erf((i - center) * k));
}

//! Half-width, in pixels, of the rendered splat support.
inline int splat_radius(double sigma)
{
    return static_cast<int>(std::ceil(4.0 * sigma));
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Render events into a synthetic camera frame.
 *
 * Each event deposits a Gaussian spot whose total amplitude is drawn from
 * the gain law (normal, redrawn while nonpositive). A zero PSF width puts
 * the whole amplitude into the containing pixel. Readout noise is added per
 * pixel and the result is clipped at zero.
 *
 * Drawn amplitudes are appended to \c amplitudes when it is non-null.
 */
inline RasterFrame rasterize(FrameEvents const& events,
                             DetectorParams const& params,
                             RegionSet const& rois,
                             FrameSeed const& seed,
                             std::vector<double>* amplitudes = nullptr)
{
    params.validate();
    RasterFrame frame(events.frame_index, rois.frame_width(), rois.frame_height());
    Engine rng = seed.engine(Stream::raster);
    std::normal_distribution<double> gain(params.gain_mean, params.gain_sigma);

    for (auto const& e : events.events)
    {
        double g = gain(rng);
        for (int tries = 0; g <= 0 && tries < 64; ++tries)
            g = gain(rng);
        if (g <= 0)
            g = params.gain_mean;
        if (amplitudes)
            amplitudes->push_back(g);

        int const px = static_cast<int>(std::floor(e.x));
        int const py = static_cast<int>(std::floor(e.y));
        if (params.psf_sigma == 0)
        {
            if (px >= 0 && px < frame.width && py >= 0 && py < frame.height)
                frame.at(px, py) += g;
            continue;
        }
        int const r = detail::splat_radius(params.psf_sigma);
        int const xlo = std::max(px - r, 0);
        int const xhi = std::min(px + r, frame.width - 1);
        int const ylo = std::max(py - r, 0);
        int const yhi = std::min(py + r, frame.height - 1);
        std::vector<double> fx;
        fx.reserve(xhi - xlo + 1);
        for (int ix = xlo; ix <= xhi; ++ix)
            fx.push_back(detail::pixel_fraction(ix, e.x, params.psf_sigma));
        for (int iy = ylo; iy <= yhi; ++iy)
        {
            double const fy = g * detail::pixel_fraction(iy, e.y, params.psf_sigma);
            for (int ix = xlo; ix <= xhi; ++ix)
                frame.at(ix, iy) += fy * fx[ix - xlo];
        }
    }

    if (params.readout_sigma > 0)
    {
        std::normal_distribution<double> noise(0.0, params.readout_sigma);
        for (double& v : frame.pixels)
            v = std::max(0.0, v + noise(rng));
    }
    return frame;
}

//---------------------------------------------------------------------------//
/*!
 * Double-threshold segmentation and centroiding.
 *
 * Pixels at or above \c threshold_high seed components that grow through
 * 8-connected pixels at or above \c threshold_low. Each component becomes
 * one event at its intensity-weighted centroid, assigned to the region
 * containing the centroid. Touching spots merge into a single event.
 */
inline FrameEvents process_frame(RasterFrame const& raster,
                                 DetectorParams const& params,
                                 RegionSet const& rois)
{
    detail::require(params.threshold_high >= params.threshold_low
                        && params.threshold_low >= 0,
                    "thresholds must satisfy high >= low >= 0");
    FrameEvents out;
    out.frame_index = raster.frame_index;

    int const w = raster.width;
    int const h = raster.height;
    std::vector<std::uint8_t> visited(raster.pixels.size(), 0);
    std::vector<int> stack;
    std::size_t above_low = 0;

    for (std::size_t idx = 0; idx < raster.pixels.size(); ++idx)
    {
        if (raster.pixels[idx] >= params.threshold_low)
            ++above_low;
        if (visited[idx] || raster.pixels[idx] < params.threshold_high)
            continue;

        double sw = 0, sx = 0, sy = 0;
        stack.assign(1, static_cast<int>(idx));
        visited[idx] = 1;
        while (!stack.empty())
        {
            int const cur = stack.back();
            stack.pop_back();
            int const cx = cur % w;
            int const cy = cur / w;
            double const v = raster.pixels[cur];
            sw += v;
            sx += v * (cx + 0.5);
            sy += v * (cy + 0.5);
            for (int dy = -1; dy <= 1; ++dy)
            {
                for (int dx = -1; dx <= 1; ++dx)
                {
                    int const nx = cx + dx;
                    int const ny = cy + dy;
                    if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                        continue;
                    int const n = ny * w + nx;
                    if (!visited[n] && raster.pixels[n] >= params.threshold_low)
                    {
                        visited[n] = 1;
                        stack.push_back(n);
                    }
                }
            }
        }

        ++out.quality.components;
        double x = 0, y = 0;
        if (sw > 0)
        {
            x = sx / sw;
            y = sy / sw;
        }
        else
        {
            x = (idx % w) + 0.5;
            y = (idx / w) + 0.5;
        }
        bool placed = false;
        for (Region r : all_regions)
        {
            if (rois[r].contains(x, y))
            {
                out.add(make_event(r, x, y, rois, params));
                placed = true;
                break;
            }
        }
        if (!placed)
            ++out.quality.unassigned;
    }
    out.quality.saturated = !raster.pixels.empty()
                            && 2 * above_low > raster.pixels.size();
    return out;
}

}  // namespace twinbeam
