//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/pipeline.hpp
//! Frame simulation and parallel reduction over frame shards.
//---------------------------------------------------------------------------//
#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

#include "detector_model.hpp"
#include "io/config.hpp"
#include "source_model.hpp"
#include "spatial.hpp"
#include "statistics.hpp"

namespace twinbeam
{
enum class Fidelity
{
    event,   //!< detect_events only
    raster,  //!< detect_events, rasterize, then process_frame
};

//! Frames per shard. Fixed so that reductions never depend on thread count.
inline constexpr std::uint64_t shard_frames = 4096;

struct FrameRange
{
    std::uint64_t first{0};
    std::uint64_t count{0};
};

//! Simulate one frame from source to detection events.
inline FrameEvents simulate_frame(RunConfig const& cfg,
                                  std::uint64_t index,
                                  Fidelity fidelity = Fidelity::event)
{
    FrameSeed const seed{cfg.run.seed, index};
    auto const pairs = sample_frame(cfg.source, seed);
    auto events = detect_events(pairs, cfg.detector, cfg.regions, seed);
    if (fidelity == Fidelity::raster)
    {
        auto const raster = rasterize(events, cfg.detector, cfg.regions, seed);
        events = process_frame(raster, cfg.detector, cfg.regions);
    }
    return events;
}

//---------------------------------------------------------------------------//
/*!
 * Run \c work on every shard, at most \c parallelism at a time, and hand the
 * results to \c consume in shard order on the calling thread.
 */
template<class Work, class Consume>
void ordered_shards(std::uint64_t n_shards,
                    unsigned parallelism,
                    Work&& work,
                    Consume&& consume)
{
    using Result = decltype(work(std::uint64_t{}));
    unsigned const p = std::max(1u, parallelism);
    for (std::uint64_t base = 0; base < n_shards; base += p)
    {
        auto const k = static_cast<unsigned>(std::min<std::uint64_t>(p, n_shards - base));
        if (k == 1)
        {
            consume(base, work(base));
            continue;
        }
        std::vector<std::optional<Result>> results(k);
        std::vector<std::exception_ptr> errors(k);
        {
            std::vector<std::jthread> threads;
            threads.reserve(k);
            for (unsigned t = 0; t < k; ++t)
            {
                threads.emplace_back([&, t] {
                    try
                    {
                        results[t].emplace(work(base + t));
                    }
                    catch (...)
                    {
                        errors[t] = std::current_exception();
                    }
                });
            }
        }
        for (unsigned t = 0; t < k; ++t)
        {
            if (errors[t])
                std::rethrow_exception(errors[t]);
            consume(base + t, std::move(*results[t]));
        }
    }
}

inline std::uint64_t shard_count(FrameRange const& r)
{
    return (r.count + shard_frames - 1) / shard_frames;
}

inline FrameRange shard_range(FrameRange const& r, std::uint64_t shard)
{
    std::uint64_t const first = r.first + shard * shard_frames;
    return {first, std::min(shard_frames, r.first + r.count - first)};
}

//! Simulate frames and pass each to \c sink in frame order.
template<class Sink>
void simulate_frames(RunConfig const& cfg,
                     FrameRange range,
                     unsigned parallelism,
                     Fidelity fidelity,
                     Sink&& sink)
{
    cfg.validate();
    ordered_shards(
        shard_count(range), parallelism,
        [&](std::uint64_t shard) {
            auto const r = shard_range(range, shard);
            std::vector<FrameEvents> frames;
            frames.reserve(r.count);
            for (std::uint64_t f = r.first; f < r.first + r.count; ++f)
                frames.push_back(simulate_frame(cfg, f, fidelity));
            return frames;
        },
        [&](std::uint64_t, std::vector<FrameEvents>&& frames) {
            for (auto const& f : frames)
                sink(f);
        });
}

/*!
 * Fold simulated frames into per-shard accumulators and merge them.
 *
 * \c make builds an empty accumulator, \c fold adds one frame to it. The
 * merge runs in shard order, so floating-point sums are reproducible for
 * any parallelism.
 */
template<class Make, class Fold>
auto reduce_frames(RunConfig const& cfg,
                   FrameRange range,
                   unsigned parallelism,
                   Fidelity fidelity,
                   Make&& make,
                   Fold&& fold)
{
    cfg.validate();
    auto total = make();
    ordered_shards(
        shard_count(range), parallelism,
        [&](std::uint64_t shard) {
            auto const r = shard_range(range, shard);
            auto acc = make();
            for (std::uint64_t f = r.first; f < r.first + r.count; ++f)
                fold(acc, simulate_frame(cfg, f, fidelity));
            return acc;
        },
        [&](std::uint64_t, auto&& acc) { total.merge(acc); });
    return total;
}

//! Joint signal-idler histogram of a simulated run.
inline JointHistogram simulate_joint_histogram(RunConfig const& cfg,
                                               unsigned parallelism = 1,
                                               Fidelity fidelity = Fidelity::event)
{
    return reduce_frames(
        cfg, {0, cfg.run.n_frames}, parallelism, fidelity,
        [&] { return JointHistogram(cfg.run.cutoff); },
        [](JointHistogram& h, FrameEvents const& f) {
            h.accumulate(f.count(Region::signal), f.count(Region::idler));
        });
}

//! Spatial correlation accumulator of a simulated run.
inline CorrelationAccumulator
simulate_correlation(RunConfig const& cfg,
                     unsigned parallelism = 1,
                     Fidelity fidelity = Fidelity::event)
{
    return reduce_frames(
        cfg, {0, cfg.run.n_frames}, parallelism, fidelity,
        [&] {
            return CorrelationAccumulator::from_geometry(
                cfg.regions, cfg.detector.mrad_per_macropixel(),
                cfg.run.bin_width);
        },
        [](CorrelationAccumulator& acc, FrameEvents const& f) {
            acc.accumulate_frame(f);
        });
}

}  // namespace twinbeam
