//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file tools/twinbeam.cpp
//! Command-line front end.
//---------------------------------------------------------------------------//
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "twinbeam/commands.hpp"

namespace
{
namespace fs = std::filesystem;
using namespace twinbeam;

struct CommonFlags
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> frames;
    std::string out;
    unsigned parallelism{0};
    std::optional<int> resamples;
};

RunConfig load(CommonFlags const& f)
{
    std::vector<std::string> warnings;
    auto cfg = read_config(f.config, &warnings);
    for (auto const& w : warnings)
        std::cerr << "warning: " << w << "\n";
    if (f.seed)
        cfg.run.seed = *f.seed;
    if (f.frames)
        cfg.run.n_frames = *f.frames;
    if (f.resamples)
        cfg.run.bootstrap_resamples = *f.resamples;
    return cfg;
}

unsigned threads(CommonFlags const& f)
{
    return f.parallelism ? f.parallelism
                         : std::max(1u, std::thread::hardware_concurrency());
}

fs::path out_dir(CommonFlags const& f)
{
    return f.out.empty() ? cli::default_out_dir() : fs::path(f.out);
}

void report(cli::CommandOutcome const& o)
{
    for (auto const& w : o.warnings)
        std::cerr << "warning: " << w << "\n";
    for (auto const& a : o.artifacts)
        std::cerr << "wrote " << a.string() << "\n";
    std::cout << o.summary.dump(2) << "\n";
}
}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Twin-beam photon-pair simulator and analysis tools"};
    app.require_subcommand(1);

    CommonFlags f;
    auto add_common = [&](CLI::App* sub, bool with_config) {
        if (with_config)
            sub->add_option("--config", f.config, "Run configuration (YAML)")
                ->required();
        sub->add_option("--out", f.out,
                        "Output path or directory (default: $TWINBEAM_OUT_DIR)");
    };

    // simulate
    auto* sim = app.add_subcommand("simulate", "Simulate frames to a frame stream");
    add_common(sim, true);
    sim->add_option("--seed", f.seed, "Master seed");
    sim->add_option("--frames", f.frames, "Number of frames");
    sim->add_option("--parallelism", f.parallelism, "Worker threads (0 = all cores)");
    std::string fidelity = "event";
    sim->add_option("--fidelity", fidelity, "event or raster")
        ->check(CLI::IsMember({"event", "raster"}));
    std::string raster_dir;
    std::uint64_t raster_frames = 0;
    sim->add_option("--raster-dir", raster_dir, "Also write rendered rasters here");
    sim->add_option("--raster-frames", raster_frames, "Number of frames to render");

    // joint
    auto* joint = app.add_subcommand("joint", "Photon-number statistics of a frame stream");
    std::string frames_path;
    joint->add_option("frames", frames_path, "Frame stream")->required();
    add_common(joint, false);
    int cutoff = 20;
    std::uint64_t analysis_seed = 1;
    joint->add_option("--cutoff", cutoff, "Largest count per arm");
    joint->add_option("--resamples", f.resamples, "Bootstrap resamples");
    joint->add_option("--seed", analysis_seed, "Bootstrap seed");

    // spatial
    auto* spatial = app.add_subcommand("spatial", "Correlation-area analysis of a frame stream");
    spatial->add_option("frames", frames_path, "Frame stream")->required();
    add_common(spatial, false);
    cli::SpatialOptions sp;
    spatial->add_option("--bin-width", sp.bin_width, "Histogram bin width [mrad]");
    spatial->add_option("--fit-half-range", sp.fit.half_range, "Fit window half-width [mrad]");

    // oracle
    auto* oracle = app.add_subcommand("oracle", "Exact joint distribution from model parameters");
    add_common(oracle, false);
    PhotodetectionParams pp;
    oracle->add_option("--mu", pp.mu, "Mean pairs per frame")->required();
    oracle->add_option("--eta-s", pp.eta_s, "Signal efficiency");
    oracle->add_option("--eta-i", pp.eta_i, "Idler efficiency");
    oracle->add_option("--dark-s", pp.dark_s, "Signal dark counts per frame");
    oracle->add_option("--dark-i", pp.dark_i, "Idler dark counts per frame");
    cli::OracleOptions oo;
    oracle->add_option("--cutoff", oo.cutoff, "Largest count per arm");
    oracle->add_option("--frames", oo.n_frames, "Frame count for expected significance");

    // process
    auto* process = app.add_subcommand("process", "Turn raster frames into a frame stream");
    std::string rasters;
    process->add_option("rasters", rasters, "Raster directory")->required();
    add_common(process, true);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        int const code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try
    {
        cli::CommandOutcome outcome;
        if (*sim)
        {
            auto const cfg = load(f);
            cli::SimulateOptions so;
            so.parallelism = threads(f);
            so.fidelity = fidelity == "raster" ? Fidelity::raster : Fidelity::event;
            if (!raster_dir.empty())
            {
                so.raster_dir = raster_dir;
                so.raster_frames = raster_frames;
            }
            fs::path const out = f.out.empty()
                                     ? cli::default_out_dir() / "frames.jsonl.gz"
                                     : fs::path(f.out);
            outcome = cli::cmd_simulate(cfg, out, so);
        }
        else if (*joint)
        {
            cli::JointOptions jo;
            jo.cutoff = cutoff;
            jo.resamples = f.resamples.value_or(jo.resamples);
            jo.seed = analysis_seed;
            outcome = cli::cmd_joint(frames_path, out_dir(f), jo);
        }
        else if (*spatial)
        {
            outcome = cli::cmd_spatial(frames_path, out_dir(f), sp);
        }
        else if (*oracle)
        {
            outcome = cli::cmd_oracle(pp, out_dir(f), oo);
        }
        else if (*process)
        {
            auto const cfg = load(f);
            fs::path const out = f.out.empty()
                                     ? cli::default_out_dir() / "processed.jsonl.gz"
                                     : fs::path(f.out);
            outcome = cli::cmd_process(rasters, cfg, out);
        }
        report(outcome);
        return outcome.exit_status;
    }
    catch (Error const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    }
    catch (std::exception const& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
