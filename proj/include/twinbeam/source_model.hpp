//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/source_model.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <cmath>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "error.hpp"
#include "random.hpp"

namespace twinbeam
{
//---------------------------------------------------------------------------//
/*!
 * Twin-photon source on the down-conversion cone layer.
 *
 * All angles are in mrad. Positions are strip-local: \c phi is the angular
 * offset from the strip centre and \c theta the radial offset from the
 * cone-layer centre \c theta0. The idler of a pair sits at the conjugate
 * point (phi -> -phi, theta -> theta) smeared by the correlation spread.
 */
struct SourceParams
{
    double mu_pairs{1.0};            //!< Mean pairs per frame
    double theta0{270.5};            //!< Cone half-angle (metadata)
    double layer_sigma_theta{30.0};  //!< Radial width of the layer
    double phi_window{200.0};        //!< Angular extent of the strip
    double corr_sigma_theta{0.0};    //!< Conditional radial spread
    double corr_sigma_phi{0.0};      //!< Conditional angular spread
    std::map<std::string, std::string> metadata;  //!< Pump description

    void validate() const
    {
        auto nonneg = [](double v) { return std::isfinite(v) && v >= 0; };
        detail::require(nonneg(mu_pairs), "source.mu_pairs must be >= 0");
        detail::require(std::isfinite(theta0), "source.theta0 must be finite");
        detail::require(nonneg(layer_sigma_theta),
                        "source.layer_sigma_theta must be >= 0");
        detail::require(std::isfinite(phi_window) && phi_window > 0,
                        "source.phi_window must be > 0");
        detail::require(nonneg(corr_sigma_theta),
                        "source.corr_sigma_theta must be >= 0");
        detail::require(nonneg(corr_sigma_phi),
                        "source.corr_sigma_phi must be >= 0");
    }

    friend bool operator==(SourceParams const&, SourceParams const&)
        = default;
};

//! Emission angles of one signal-idler pair (strip-local, mrad).
struct PairEvent
{
    double theta_s{0};
    double phi_s{0};
    double theta_i{0};
    double phi_i{0};

    friend bool operator==(PairEvent const&, PairEvent const&) = default;
};

//---------------------------------------------------------------------------//
/*!
 * Draw the pairs emitted in one frame.
 *
 * The pair count is Poisson(mu_pairs); each signal photon is uniform in
 * phi over the strip window and Gaussian in theta with the layer width.
 */
inline std::vector<PairEvent>
sample_frame(SourceParams const& params, FrameSeed const& seed)
{
    params.validate();
    std::vector<PairEvent> pairs;
    if (params.mu_pairs == 0)
    {
        return pairs;
    }

    Engine rng = seed.engine(Stream::source);
    std::poisson_distribution<int> count_dist(params.mu_pairs);
    std::uniform_real_distribution<double> phi_dist(-0.5 * params.phi_window,
                                                    0.5 * params.phi_window);
    std::normal_distribution<double> unit;

    int const n = count_dist(rng);
    pairs.reserve(n);
    for (int k = 0; k < n; ++k)
    {
        PairEvent p;
        p.phi_s = phi_dist(rng);
        p.theta_s = params.layer_sigma_theta * unit(rng);
        double const dphi = unit(rng);
        double const dtheta = unit(rng);
        p.phi_i = -p.phi_s + params.corr_sigma_phi * dphi;
        p.theta_i = p.theta_s + params.corr_sigma_theta * dtheta;
        pairs.push_back(p);
    }
    return pairs;
}

}  // namespace twinbeam
