//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/io/frame_stream.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../detector_model.hpp"
#include "../error.hpp"
#include "text.hpp"

namespace twinbeam
{
inline constexpr char const* frames_schema = "twinbeam.frames/1";

//---------------------------------------------------------------------------//
/*!
 * First line of a frame stream.
 *
 * Positions in the records are macropixel coordinates; the angular scale
 * and region layout recorded here map them back to strip-local angles.
 */
struct FrameStreamHeader
{
    std::string schema{frames_schema};
    double mrad_per_macropixel{0.5};
    RegionSet regions;
    std::uint64_t seed{0};

    friend bool operator==(FrameStreamHeader const&, FrameStreamHeader const&)
        = default;
};

using Point = std::array<double, 2>;

//! One frame as stored on disk: per-region event positions.
struct FrameRecord
{
    std::uint64_t frame_index{0};
    std::array<std::vector<Point>, 3> positions;
    std::array<int, 3> counts{0, 0, 0};

    friend bool operator==(FrameRecord const&, FrameRecord const&) = default;
};

inline FrameRecord to_record(FrameEvents const& frame)
{
    FrameRecord rec;
    rec.frame_index = frame.frame_index;
    for (auto const& e : frame.events)
        rec.positions[static_cast<int>(e.region)].push_back({e.x, e.y});
    for (int r = 0; r < 3; ++r)
        rec.counts[r] = static_cast<int>(rec.positions[r].size());
    return rec;
}

inline FrameEvents
to_frame_events(FrameRecord const& rec, FrameStreamHeader const& header)
{
    FrameEvents out;
    out.frame_index = rec.frame_index;
    for (Region r : all_regions)
    {
        StripMap const map(header.regions[r], r == Region::idler,
                           header.mrad_per_macropixel);
        for (auto const& p : rec.positions[static_cast<int>(r)])
            out.add({r, p[0], p[1], map.to_phi(p[0]), map.to_theta(p[1])});
    }
    return out;
}

namespace detail
{
inline nlohmann::json rect_json(Rect const& r)
{
    return nlohmann::json::array({r.x0, r.y0, r.x1, r.y1});
}

inline Rect rect_from_json(nlohmann::json const& j)
{
    if (!j.is_array() || j.size() != 4)
        throw std::invalid_argument("region must be [x0, y0, x1, y1]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

inline std::string header_line(FrameStreamHeader const& h)
{
    nlohmann::json j;
    j["schema"] = h.schema;
    j["precision"] = "shortest-roundtrip";
    j["mrad_per_macropixel"] = h.mrad_per_macropixel;
    j["regions"] = {{"signal", rect_json(h.regions.signal)},
                    {"idler", rect_json(h.regions.idler)},
                    {"noise", rect_json(h.regions.noise)}};
    j["seed"] = h.seed;
    return j.dump();
}

inline std::string record_line(FrameRecord const& rec)
{
    nlohmann::json j;
    j["frame"] = rec.frame_index;
    j["counts"] = rec.counts;
    for (Region r : all_regions)
    {
        auto& arr = j[std::string(to_string(r))] = nlohmann::json::array();
        for (auto const& p : rec.positions[static_cast<int>(r)])
            arr.push_back({p[0], p[1]});
    }
    return j.dump();
}

inline FrameRecord parse_record(nlohmann::json const& j)
{
    FrameRecord rec;
    rec.frame_index = j.at("frame").get<std::uint64_t>();
    rec.counts = j.at("counts").get<std::array<int, 3>>();
    for (Region r : all_regions)
    {
        auto const& arr = j.at(std::string(to_string(r)));
        auto& dst = rec.positions[static_cast<int>(r)];
        for (auto const& p : arr)
        {
            Point const pt = p.get<Point>();
            if (!std::isfinite(pt[0]) || !std::isfinite(pt[1]))
                throw std::invalid_argument("non-finite position");
            dst.push_back(pt);
        }
        if (dst.size() != static_cast<std::size_t>(rec.counts[static_cast<int>(r)]))
        {
            throw std::invalid_argument("count for region '"
                                        + std::string(to_string(r))
                                        + "' does not match its event list");
        }
    }
    return rec;
}
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Streaming reader of newline-delimited frame records.
 *
 * Memory use does not grow with the number of frames. An empty file is an
 * empty stream. A final line without a newline that fails to parse is
 * treated as a truncated write: it is dropped with a warning. Any other
 * malformed line is an error naming its line number.
 */
class FrameReader
{
  public:
    explicit FrameReader(std::filesystem::path const& path) : lines_{path}
    {
        auto first = lines_.next();
        if (!first)
            return;
        try
        {
            auto const j = nlohmann::json::parse(first->text);
            auto const schema = j.at("schema").get<std::string>();
            if (schema != frames_schema)
            {
                throw IoError(location() + ": schema mismatch: '" + schema
                              + "' (expected " + frames_schema + ")");
            }
            FrameStreamHeader h;
            h.schema = schema;
            h.mrad_per_macropixel = j.at("mrad_per_macropixel").get<double>();
            auto const& r = j.at("regions");
            h.regions.signal = detail::rect_from_json(r.at("signal"));
            h.regions.idler = detail::rect_from_json(r.at("idler"));
            h.regions.noise = detail::rect_from_json(r.at("noise"));
            h.seed = j.value("seed", std::uint64_t{0});
            header_ = h;
        }
        catch (IoError const&)
        {
            throw;
        }
        catch (std::exception const& e)
        {
            throw IoError(location() + ": bad frame stream header: " + e.what());
        }
    }

    //! Header, absent for an empty file.
    std::optional<FrameStreamHeader> const& header() const { return header_; }

    std::optional<FrameRecord> next()
    {
        if (!header_)
            return std::nullopt;
        while (auto line = lines_.next())
        {
            if (line->text.empty() && line->terminated)
                continue;
            try
            {
                return detail::parse_record(nlohmann::json::parse(line->text));
            }
            catch (std::exception const& e)
            {
                if (!line->terminated)
                {
                    warnings_.push_back(location()
                                        + ": truncated final record ignored");
                    return std::nullopt;
                }
                throw IoError(location() + ": malformed frame record: "
                              + e.what());
            }
        }
        return std::nullopt;
    }

    std::vector<std::string> const& warnings() const { return warnings_; }

  private:
    io::LineReader lines_;
    std::optional<FrameStreamHeader> header_;
    std::vector<std::string> warnings_;

    std::string location() const
    {
        return lines_.path().string() + ":" + std::to_string(lines_.line_number());
    }
};

//---------------------------------------------------------------------------//
//! Sequential writer; creates the file and writes the header line.
class FrameWriter
{
  public:
    FrameWriter(std::filesystem::path const& path, FrameStreamHeader const& header)
        : out_{path}
    {
        out_.line(detail::header_line(header));
    }

    void append(FrameRecord const& rec) { out_.line(detail::record_line(rec)); }
    void append(FrameEvents const& frame) { append(to_record(frame)); }
    void flush() { out_.flush(); }

  private:
    io::LineWriter out_;
};

//! Start a new stream holding only the header.
inline void create_frame_stream(std::filesystem::path const& path,
                                FrameStreamHeader const& header)
{
    FrameWriter w(path, header);
}

/*!
 * Append one record to an existing stream.
 *
 * Appending to a gzip stream adds a new gzip member, which readers handle
 * transparently.
 */
inline void append_frame(FrameRecord const& rec, std::filesystem::path const& path)
{
    if (!std::filesystem::exists(path))
    {
        throw IoError("cannot append to '" + path.string()
                      + "': stream has not been created");
    }
    io::LineWriter out(path, /*append=*/true);
    out.line(detail::record_line(rec));
}

}  // namespace twinbeam
