//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/commands.hpp
//! End-to-end runs behind the command-line subcommands.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "io/config.hpp"
#include "io/frame_stream.hpp"
#include "io/tables.hpp"
#include "pipeline.hpp"
#include "spatial.hpp"
#include "statistics.hpp"

namespace twinbeam::cli
{
namespace fs = std::filesystem;

//! Result of one subcommand.
struct CommandOutcome
{
    int exit_status{0};
    std::vector<fs::path> artifacts;
    nlohmann::json summary = nlohmann::json::object();
    std::vector<std::string> warnings;
};

//! Default output directory: $TWINBEAM_OUT_DIR, else the working directory.
inline fs::path default_out_dir()
{
    if (char const* env = std::getenv("TWINBEAM_OUT_DIR"); env && *env)
        return env;
    return ".";
}

namespace detail
{
inline void ensure_dir(fs::path const& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create directory '" + dir.string()
                      + "': " + ec.message());
}

inline fs::path
write_summary(CommandOutcome& out, fs::path const& path)
{
    std::ofstream f(path, std::ios::trunc);
    if (!f)
        throw IoError("cannot write '" + path.string() + "'");
    f << out.summary.dump(2) << "\n";
    out.artifacts.push_back(path);
    return path;
}

inline FrameStreamHeader header_for(RunConfig const& cfg)
{
    FrameStreamHeader h;
    h.mrad_per_macropixel = cfg.detector.mrad_per_macropixel();
    h.regions = cfg.regions;
    h.seed = cfg.run.seed;
    return h;
}

inline nlohmann::json record_json(CriterionRecord const& r)
{
    nlohmann::json j{{"n_s", r.n_s}, {"n_i", r.n_i}, {"f", r.f},
                     {"bound", r.bound}, {"excess", r.excess}};
    j["significance"] = r.significance ? nlohmann::json(*r.significance)
                                       : nlohmann::json(nullptr);
    return j;
}

inline std::string raster_name(std::uint64_t frame)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "raster_%08llu.txt.gz",
                  static_cast<unsigned long long>(frame));
    return buf;
}
}  // namespace detail

//---------------------------------------------------------------------------//
// simulate
//---------------------------------------------------------------------------//
struct SimulateOptions
{
    unsigned parallelism{1};
    Fidelity fidelity{Fidelity::event};
    std::optional<fs::path> raster_dir;  //!< also write rasters here
    std::uint64_t raster_frames{0};      //!< number of leading frames rendered
    int raster_decimals{2};
};

/*!
 * Simulate \c cfg.run.n_frames frames into a frame stream.
 *
 * Output is identical for any parallelism. When a raster directory is
 * given, the first \c raster_frames frames are also rendered to synthetic
 * camera images; the stream then serves as their ground truth.
 */
inline CommandOutcome cmd_simulate(RunConfig const& cfg,
                                   fs::path const& out_path,
                                   SimulateOptions const& opts = {})
{
    cfg.validate();
    CommandOutcome out;
    if (out_path.has_parent_path())
        detail::ensure_dir(out_path.parent_path());
    if (opts.raster_dir)
        detail::ensure_dir(*opts.raster_dir);

    std::array<std::uint64_t, 3> totals{0, 0, 0};
    {
        FrameWriter writer(out_path, detail::header_for(cfg));
        simulate_frames(cfg, {0, cfg.run.n_frames}, opts.parallelism,
                        opts.fidelity, [&](FrameEvents const& f) {
                            writer.append(f);
                            for (int r = 0; r < 3; ++r)
                                totals[r] += f.counts[r];
                        });
    }
    out.artifacts.push_back(out_path);

    if (opts.raster_dir)
    {
        std::uint64_t const n = std::min(opts.raster_frames, cfg.run.n_frames);
        for (std::uint64_t f = 0; f < n; ++f)
        {
            FrameSeed const seed{cfg.run.seed, f};
            auto const events = simulate_frame(cfg, f, Fidelity::event);
            auto const raster
                = rasterize(events, cfg.detector, cfg.regions, seed);
            auto const path = *opts.raster_dir / detail::raster_name(f);
            io::write_raster(raster, path, opts.raster_decimals);
            out.artifacts.push_back(path);
        }
    }

    out.summary["command"] = "simulate";
    out.summary["frames"] = cfg.run.n_frames;
    out.summary["seed"] = cfg.run.seed;
    out.summary["fidelity"] = opts.fidelity == Fidelity::event ? "event" : "raster";
    out.summary["mean_counts"] = {
        {"signal", cfg.run.n_frames ? double(totals[0]) / cfg.run.n_frames : 0.0},
        {"idler", cfg.run.n_frames ? double(totals[1]) / cfg.run.n_frames : 0.0},
        {"noise", cfg.run.n_frames ? double(totals[2]) / cfg.run.n_frames : 0.0}};
    detail::write_summary(out, fs::path(out_path.string() + ".summary.json"));
    return out;
}

//---------------------------------------------------------------------------//
// joint
//---------------------------------------------------------------------------//
struct JointOptions
{
    int cutoff{20};
    int resamples{200};
    std::uint64_t seed{1};
};

//! Joint histogram of the signal and idler counts in a frame stream.
inline JointHistogram read_joint_histogram_from_frames(fs::path const& frames,
                                                       int cutoff,
                                                       std::vector<std::string>* warnings = nullptr)
{
    FrameReader reader(frames);
    JointHistogram h(cutoff);
    while (auto rec = reader.next())
        h.accumulate(rec->counts[0], rec->counts[1]);
    if (warnings)
        warnings->insert(warnings->end(), reader.warnings().begin(),
                         reader.warnings().end());
    return h;
}

/*!
 * Photon-number analysis: histogram, marginals, difference map,
 * correlation coefficient and classicality criterion.
 */
inline CommandOutcome cmd_joint(fs::path const& frames_path,
                                fs::path const& out_dir,
                                JointOptions const& opts = {})
{
    CommandOutcome out;
    auto const hist
        = read_joint_histogram_from_frames(frames_path, opts.cutoff, &out.warnings);
    if (hist.n_frames() == 0)
        throw ValidationError("'" + frames_path.string() + "' holds no frames");
    detail::ensure_dir(out_dir);

    auto add = [&](fs::path const& p) { out.artifacts.push_back(p); };
    io::write_joint_histogram(hist, out_dir / "joint_histogram.txt");
    add(out_dir / "joint_histogram.txt");
    io::write_marginals(marginals(hist), out_dir / "marginals.csv");
    add(out_dir / "marginals.csv");
    io::write_grid(difference_map(hist), "difference_map",
                   out_dir / "difference_map.txt");
    add(out_dir / "difference_map.txt");

    auto const crit = criterion_test(hist, opts.resamples, opts.seed);
    io::write_criterion(crit, out_dir / "criterion.csv");
    add(out_dir / "criterion.csv");
    io::write_grid(io::excess_grid(crit, hist.size()), "criterion_excess",
                   out_dir / "criterion_excess.txt");
    add(out_dir / "criterion_excess.txt");

    out.summary["command"] = "joint";
    out.summary["frames"] = hist.n_frames();
    out.summary["truncated"] = hist.truncated();
    out.summary["violating_bins"] = crit.violating.size();
    if (crit.max_index)
        out.summary["max_significance"]
            = detail::record_json(crit.records[*crit.max_index]);

    // Correlation last: zero-variance input is a numerical failure, but the
    // tables above are still useful.
    auto const corr = correlation_coefficient(hist, opts.resamples, opts.seed);
    io::write_correlation(corr, out_dir / "correlation.csv");
    add(out_dir / "correlation.csv");
    out.summary["c_p"] = corr.c_p;
    out.summary["c_p_err"] = corr.std_err;
    detail::write_summary(out, out_dir / "summary.json");
    return out;
}

//---------------------------------------------------------------------------//
// spatial
//---------------------------------------------------------------------------//
struct SpatialOptions
{
    double bin_width{0};  //!< [mrad]; 0 = one macropixel
    FitOptions fit;
};

inline CorrelationAccumulator
accumulate_correlation_from_frames(fs::path const& frames,
                                   double bin_width,
                                   std::vector<std::string>* warnings = nullptr)
{
    FrameReader reader(frames);
    if (!reader.header())
        throw ValidationError("'" + frames.string() + "' holds no frames");
    auto const& h = *reader.header();
    auto acc = CorrelationAccumulator::from_geometry(
        h.regions, h.mrad_per_macropixel, bin_width);
    while (auto rec = reader.next())
        acc.accumulate_frame(to_frame_events(*rec, h));
    if (warnings)
        warnings->insert(warnings->end(), reader.warnings().begin(),
                         reader.warnings().end());
    return acc;
}

inline nlohmann::json fit_json(GaussianFit const& f)
{
    return {{"fwhm", f.fwhm},           {"fwhm_err", f.fwhm_err},
            {"sigma", f.sigma},         {"center", f.center},
            {"amplitude", f.amplitude}, {"offset", f.offset},
            {"bin_limited", f.bin_limited}, {"iterations", f.iterations}};
}

/*!
 * Correlation-area analysis of a frame stream.
 *
 * Histograms and profiles are written before fitting so they survive a fit
 * failure, which is rethrown.
 */
inline CommandOutcome cmd_spatial(fs::path const& frames_path,
                                  fs::path const& out_dir,
                                  SpatialOptions const& opts = {})
{
    CommandOutcome out;
    auto const acc = accumulate_correlation_from_frames(
        frames_path, opts.bin_width, &out.warnings);
    detail::ensure_dir(out_dir);

    CorrelationAreaReport rep;
    rep.total_weight = acc.total_weight();
    for (Coordinate c : {Coordinate::phi, Coordinate::theta})
    {
        auto const name = std::string(to_string(c));
        auto const p2 = out_dir / ("correlation_" + name + ".csv");
        io::write_hist2d(acc.histogram(c), c, acc, p2);
        out.artifacts.push_back(p2);
    }
    rep.phi_profile = cross_section(acc, Coordinate::phi);
    rep.theta_profile = cross_section(acc, Coordinate::theta);
    io::write_profile(rep.phi_profile, out_dir / "profile_phi.csv");
    io::write_profile(rep.theta_profile, out_dir / "profile_theta.csv");
    out.artifacts.push_back(out_dir / "profile_phi.csv");
    out.artifacts.push_back(out_dir / "profile_theta.csv");

    out.summary["command"] = "spatial";
    out.summary["frames"] = acc.frames();
    out.summary["total_weight"] = acc.total_weight();
    rep.phi_fit = fit_gaussian(rep.phi_profile, opts.fit);
    rep.theta_fit = fit_gaussian(rep.theta_profile, opts.fit);
    io::write_fits(rep, out_dir / "fits.csv");
    out.artifacts.push_back(out_dir / "fits.csv");
    out.summary["phi"] = fit_json(rep.phi_fit);
    out.summary["theta"] = fit_json(rep.theta_fit);
    detail::write_summary(out, out_dir / "summary.json");
    return out;
}

//---------------------------------------------------------------------------//
// oracle
//---------------------------------------------------------------------------//
struct OracleOptions
{
    std::optional<int> cutoff;          //!< default: tail mass below 1e-9
    std::optional<double> n_frames;     //!< expected significance for N frames
};

/*!
 * Exact photodetection distribution with its correlation and criterion.
 *
 * C_p is reported as null when a marginal has no variance (e.g. mu = 0).
 */
inline CommandOutcome cmd_oracle(PhotodetectionParams const& params,
                                 fs::path const& out_dir,
                                 OracleOptions const& opts = {})
{
    params.validate();
    int const cutoff
        = opts.cutoff ? *opts.cutoff : std::max(recommended_cutoff(params), 1);
    auto const joint = analytic_joint(params, cutoff);
    detail::ensure_dir(out_dir);

    CommandOutcome out;
    io::write_grid(joint.pmf, "analytic_joint", out_dir / "oracle_pmf.txt");
    out.artifacts.push_back(out_dir / "oracle_pmf.txt");
    auto const crit = criterion_from_pmf(joint.pmf, opts.n_frames);
    io::write_criterion(crit, out_dir / "oracle_criterion.csv");
    out.artifacts.push_back(out_dir / "oracle_criterion.csv");

    out.summary["command"] = "oracle";
    out.summary["params"] = {{"mu", params.mu},         {"eta_s", params.eta_s},
                             {"eta_i", params.eta_i},   {"dark_s", params.dark_s},
                             {"dark_i", params.dark_i}};
    out.summary["cutoff"] = cutoff;
    out.summary["tail_mass"] = joint.tail_mass;
    out.summary["f00"] = joint.pmf(0, 0);
    out.summary["violating_bins"] = crit.violating.size();
    if (auto const* best = crit.best_where([](auto const&) { return true; }))
        out.summary["max_expected_significance"] = detail::record_json(*best);
    try
    {
        out.summary["c_p"] = correlation_of(joint.pmf);
    }
    catch (NumericalError const&)
    {
        out.summary["c_p"] = nullptr;
    }
    detail::write_summary(out, out_dir / "summary.json");
    return out;
}

//---------------------------------------------------------------------------//
// process
//---------------------------------------------------------------------------//
//! Raster files in a directory, sorted by name.
inline std::vector<fs::path> list_rasters(fs::path const& dir)
{
    if (!fs::is_directory(dir))
        throw IoError("raster directory '" + dir.string() + "' does not exist");
    std::vector<fs::path> files;
    for (auto const& e : fs::directory_iterator(dir))
    {
        auto const name = e.path().filename().string();
        if (e.is_regular_file() && name.rfind("raster", 0) == 0)
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

/*!
 * Turn a directory of raster frames into a frame stream.
 */
inline CommandOutcome cmd_process(fs::path const& raster_dir,
                                  RunConfig const& cfg,
                                  fs::path const& out_path)
{
    cfg.validate();
    auto const files = list_rasters(raster_dir);
    if (out_path.has_parent_path())
        detail::ensure_dir(out_path.parent_path());

    CommandOutcome out;
    std::uint64_t saturated = 0, unassigned = 0, events = 0;
    {
        FrameWriter writer(out_path, detail::header_for(cfg));
        for (auto const& f : files)
        {
            auto const raster = io::read_raster(f);
            if (raster.width < cfg.regions.frame_width()
                || raster.height < cfg.regions.frame_height())
            {
                throw IoError("'" + f.string()
                              + "' is smaller than the configured regions");
            }
            auto const frame = process_frame(raster, cfg.detector, cfg.regions);
            saturated += frame.quality.saturated;
            unassigned += frame.quality.unassigned;
            events += frame.events.size();
            writer.append(frame);
        }
    }
    out.artifacts.push_back(out_path);
    out.summary["command"] = "process";
    out.summary["frames"] = files.size();
    out.summary["events"] = events;
    out.summary["saturated_frames"] = saturated;
    out.summary["unassigned_components"] = unassigned;
    detail::write_summary(out, fs::path(out_path.string() + ".summary.json"));
    return out;
}

}  // namespace twinbeam::cli
