//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/io/tables.hpp
//! Text grids and delimited tables for histograms, reports and rasters.
//!
//! Every file starts with "# <schema> key=value ...". Grids are
//! whitespace-separated rows; tables are comma-separated with a header row.
//---------------------------------------------------------------------------//
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "../detector_model.hpp"
#include "../error.hpp"
#include "../spatial.hpp"
#include "../statistics.hpp"
#include "text.hpp"

namespace twinbeam::io
{
//---------------------------------------------------------------------------//
//! Parsed "# schema key=value ..." line.
struct SchemaLine
{
    std::string schema;
    std::map<std::string, std::string> fields;

    std::string const& at(std::string const& key, std::string const& where) const
    {
        auto it = fields.find(key);
        if (it == fields.end())
            throw IoError(where + ": header lacks '" + key + "'");
        return it->second;
    }
    double number(std::string const& key, std::string const& where) const
    {
        auto const v = parse_double(at(key, where));
        if (!v)
            throw IoError(where + ": header field '" + key + "' is not a number");
        return *v;
    }
    std::uint64_t count(std::string const& key, std::string const& where) const
    {
        double const v = number(key, where);
        if (v < 0 || v != std::floor(v))
            throw IoError(where + ": header field '" + key
                          + "' is not a nonnegative integer");
        return static_cast<std::uint64_t>(v);
    }
};

namespace detail
{
inline std::string schema_line(
    std::string const& schema,
    std::vector<std::pair<std::string, std::string>> const& fields)
{
    std::string out = "# " + schema;
    for (auto const& [k, v] : fields)
        out += " " + k + "=" + v;
    return out;
}

inline SchemaLine read_schema_line(LineReader& in, std::string const& expected)
{
    auto line = in.next();
    std::string const where = in.path().string() + ":1";
    if (!line)
        throw IoError(where + ": empty file");
    std::istringstream ss(line->text);
    std::string hash;
    SchemaLine out;
    ss >> hash >> out.schema;
    if (hash != "#" || out.schema != expected)
    {
        throw IoError(where + ": schema mismatch (expected '" + expected
                      + "', got '" + line->text + "')");
    }
    std::string tok;
    while (ss >> tok)
    {
        auto const eq = tok.find('=');
        if (eq == std::string::npos)
            throw IoError(where + ": bad header token '" + tok + "'");
        out.fields[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    return out;
}

//! Next non-comment line, split on \c delim (whitespace when ' ').
inline std::optional<std::vector<std::string>>
next_row(LineReader& in, char delim)
{
    while (auto line = in.next())
    {
        if (line->text.empty() || line->text[0] == '#')
            continue;
        std::vector<std::string> cells;
        if (delim == ' ')
        {
            std::istringstream ss(line->text);
            std::string tok;
            while (ss >> tok)
                cells.push_back(tok);
        }
        else
        {
            std::string cell;
            std::istringstream ss(line->text);
            while (std::getline(ss, cell, delim))
                cells.push_back(cell);
        }
        return cells;
    }
    return std::nullopt;
}

inline std::string where(LineReader const& in)
{
    return in.path().string() + ":" + std::to_string(in.line_number());
}

inline double cell_number(LineReader const& in, std::string const& s)
{
    auto const v = parse_double(s);
    if (!v)
        throw IoError(where(in) + ": not a number: '" + s + "'");
    return *v;
}

inline std::string optional_cell(std::optional<double> const& v)
{
    return v ? format_double(*v) : "NA";
}
}  // namespace detail

//---------------------------------------------------------------------------//
// JOINT HISTOGRAM
//---------------------------------------------------------------------------//
inline void write_joint_histogram(JointHistogram const& h,
                                  std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line(
        "twinbeam.joint/1",
        {{"n_frames", std::to_string(h.n_frames())},
         {"cutoff", std::to_string(h.cutoff())},
         {"overflow", std::to_string(h.overflow())},
         {"truncated", h.truncated() ? "1" : "0"}}));
    out.line("# rows: c_S = 0.." + std::to_string(h.cutoff())
             + "; columns: c_I = 0.." + std::to_string(h.cutoff()));
    for (int s = 0; s < h.size(); ++s)
    {
        std::string row;
        for (int i = 0; i < h.size(); ++i)
        {
            if (i)
                row += ' ';
            row += std::to_string(h.count(s, i));
        }
        out.line(row);
    }
}

inline JointHistogram read_joint_histogram(std::filesystem::path const& path)
{
    LineReader in(path);
    auto const head = detail::read_schema_line(in, "twinbeam.joint/1");
    std::string const w0 = path.string() + ":1";
    auto const cutoff = head.count("cutoff", w0);
    if (cutoff > 10000)
        throw IoError(w0 + ": cutoff too large");
    auto const n_frames = head.count("n_frames", w0);
    auto const overflow = head.count("overflow", w0);
    std::size_t const size = cutoff + 1;
    std::vector<std::uint64_t> counts;
    counts.reserve(size * size);
    for (std::size_t s = 0; s < size; ++s)
    {
        auto row = detail::next_row(in, ' ');
        if (!row || row->size() != size)
            throw IoError(detail::where(in) + ": expected "
                          + std::to_string(size) + " counts per row");
        for (auto const& c : *row)
        {
            double const v = detail::cell_number(in, c);
            if (v < 0 || v != std::floor(v))
                throw IoError(detail::where(in) + ": bad count '" + c + "'");
            counts.push_back(static_cast<std::uint64_t>(v));
        }
    }
    auto h = JointHistogram::from_counts(static_cast<int>(cutoff),
                                         std::move(counts), overflow);
    if (h.n_frames() != n_frames)
        throw IoError(w0 + ": n_frames does not match the bin total");
    return h;
}

//---------------------------------------------------------------------------//
// REAL GRIDS
//---------------------------------------------------------------------------//
inline void write_grid(SquareGrid const& g,
                       std::string const& name,
                       std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line("twinbeam.grid/1",
                                 {{"name", name},
                                  {"size", std::to_string(g.size())}}));
    out.line("# rows: c_S; columns: c_I");
    for (int s = 0; s < g.size(); ++s)
    {
        std::string row;
        for (int i = 0; i < g.size(); ++i)
        {
            if (i)
                row += ' ';
            row += format_double(g(s, i));
        }
        out.line(row);
    }
}

inline SquareGrid read_grid(std::filesystem::path const& path)
{
    LineReader in(path);
    auto const head = detail::read_schema_line(in, "twinbeam.grid/1");
    auto const size = head.count("size", path.string() + ":1");
    if (size > 10001)
        throw IoError(path.string() + ":1: grid too large");
    SquareGrid g(static_cast<int>(size));
    for (std::size_t s = 0; s < size; ++s)
    {
        auto row = detail::next_row(in, ' ');
        if (!row || row->size() != size)
            throw IoError(detail::where(in) + ": expected "
                          + std::to_string(size) + " values per row");
        for (std::size_t i = 0; i < size; ++i)
            g(int(s), int(i)) = detail::cell_number(in, (*row)[i]);
    }
    return g;
}

//---------------------------------------------------------------------------//
// STATISTICS TABLES
//---------------------------------------------------------------------------//
inline void write_marginals(Marginals const& m, std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line("twinbeam.marginals/1", {}));
    out.line("count,signal,idler");
    for (std::size_t c = 0; c < m.signal.size(); ++c)
    {
        out.line(std::to_string(c) + "," + format_double(m.signal[c]) + ","
                 + format_double(m.idler[c]));
    }
}

inline void write_correlation(CorrelationResult const& r,
                              std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line("twinbeam.correlation/1", {}));
    out.line("c_p,std_err,n_frames,bootstrap_resamples");
    out.line(format_double(r.c_p) + "," + format_double(r.std_err) + ","
             + std::to_string(r.n_frames) + ","
             + std::to_string(r.bootstrap_resamples));
}

inline void write_criterion(CriterionReport const& rep,
                            std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line("twinbeam.criterion/1",
                                 {{"n_frames", std::to_string(rep.n_frames)}}));
    out.line("n_s,n_i,f,bound,excess,std_err,significance,"
             "bootstrap_significance,violates");
    for (auto const& r : rep.records)
    {
        out.line(std::to_string(r.n_s) + "," + std::to_string(r.n_i) + ","
                 + format_double(r.f) + "," + format_double(r.bound) + ","
                 + format_double(r.excess) + "," + format_double(r.std_err)
                 + "," + detail::optional_cell(r.significance) + ","
                 + detail::optional_cell(r.bootstrap_significance) + ","
                 + (r.excess > 0 ? "1" : "0"));
    }
}

//! Excess f - bound as a grid, for contour plots.
inline SquareGrid excess_grid(CriterionReport const& rep, int size)
{
    SquareGrid g(size);
    for (auto const& r : rep.records)
        g(r.n_s, r.n_i) = r.excess;
    return g;
}

//---------------------------------------------------------------------------//
// SPATIAL
//---------------------------------------------------------------------------//
inline void write_hist2d(WeightedHistogram2D const& h,
                         Coordinate coord,
                         CorrelationAccumulator const& acc,
                         std::filesystem::path const& path)
{
    LineWriter out(path);
    Axis const& as = h.signal_axis();
    Axis const& ai = h.idler_axis();
    out.line(detail::schema_line(
        "twinbeam.hist2d/1",
        {{"coordinate", std::string(to_string(coord))},
         {"signal_lo", format_double(as.lo)},
         {"signal_bins", std::to_string(as.bins)},
         {"idler_lo", format_double(ai.lo)},
         {"idler_bins", std::to_string(ai.bins)},
         {"bin_width", format_double(as.width)},
         {"outside", format_double(h.outside())},
         {"total_weight", format_double(acc.total_weight())},
         {"frames", std::to_string(acc.frames())}}));
    std::string head = "signal\\idler";
    for (int j = 0; j < ai.bins; ++j)
        head += "," + format_double(ai.center(j));
    out.line(head);
    for (int i = 0; i < as.bins; ++i)
    {
        std::string row = format_double(as.center(i));
        for (int j = 0; j < ai.bins; ++j)
            row += "," + format_double(h.at(i, j));
        out.line(row);
    }
}

struct Hist2DFile
{
    Coordinate coordinate{Coordinate::phi};
    WeightedHistogram2D hist;
    double total_weight{0};
    std::uint64_t frames{0};
};

inline Hist2DFile read_hist2d(std::filesystem::path const& path)
{
    LineReader in(path);
    auto const head = detail::read_schema_line(in, "twinbeam.hist2d/1");
    std::string const w0 = path.string() + ":1";
    Hist2DFile f;
    f.coordinate = head.at("coordinate", w0) == "theta" ? Coordinate::theta
                                                        : Coordinate::phi;
    double const width = head.number("bin_width", w0);
    Axis const as{head.number("signal_lo", w0), width,
                  static_cast<int>(head.count("signal_bins", w0))};
    Axis const ai{head.number("idler_lo", w0), width,
                  static_cast<int>(head.count("idler_bins", w0))};
    f.hist = WeightedHistogram2D(as, ai);
    f.hist.set_outside(head.number("outside", w0));
    f.total_weight = head.number("total_weight", w0);
    f.frames = head.count("frames", w0);
    auto axis_row = detail::next_row(in, ',');
    if (!axis_row || axis_row->size() != std::size_t(ai.bins) + 1)
        throw IoError(detail::where(in) + ": bad axis row");
    for (int i = 0; i < as.bins; ++i)
    {
        auto row = detail::next_row(in, ',');
        if (!row || row->size() != std::size_t(ai.bins) + 1)
            throw IoError(detail::where(in) + ": bad histogram row");
        for (int j = 0; j < ai.bins; ++j)
            f.hist.at(i, j) = detail::cell_number(in, (*row)[j + 1]);
    }
    return f;
}

inline void write_profile(CrossSectionProfile const& p,
                          std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line(
        "twinbeam.profile/1",
        {{"coordinate", std::string(to_string(p.coordinate))},
         {"bin_width", format_double(p.bin_width)}}));
    out.line("s,weight");
    for (std::size_t k = 0; k < p.s.size(); ++k)
        out.line(format_double(p.s[k]) + "," + format_double(p.weight[k]));
}

inline CrossSectionProfile read_profile(std::filesystem::path const& path)
{
    LineReader in(path);
    auto const head = detail::read_schema_line(in, "twinbeam.profile/1");
    std::string const w0 = path.string() + ":1";
    CrossSectionProfile p;
    p.coordinate = head.at("coordinate", w0) == "theta" ? Coordinate::theta
                                                        : Coordinate::phi;
    p.bin_width = head.number("bin_width", w0);
    detail::next_row(in, ',');  // column names
    while (auto row = detail::next_row(in, ','))
    {
        if (row->size() != 2)
            throw IoError(detail::where(in) + ": expected 's,weight'");
        p.s.push_back(detail::cell_number(in, (*row)[0]));
        p.weight.push_back(detail::cell_number(in, (*row)[1]));
    }
    return p;
}

inline void write_fits(CorrelationAreaReport const& rep,
                       std::filesystem::path const& path)
{
    LineWriter out(path);
    out.line(detail::schema_line(
        "twinbeam.fit/1", {{"total_weight", format_double(rep.total_weight)}}));
    out.line("coordinate,amplitude,amplitude_err,center,center_err,sigma,"
             "sigma_err,offset,offset_err,fwhm,fwhm_err,bin_limited,"
             "converged,iterations,residual_norm,n_bins");
    auto row = [&](Coordinate c, GaussianFit const& f) {
        out.line(std::string(to_string(c)) + "," + format_double(f.amplitude)
                 + "," + format_double(f.amplitude_err) + ","
                 + format_double(f.center) + "," + format_double(f.center_err)
                 + "," + format_double(f.sigma) + ","
                 + format_double(f.sigma_err) + "," + format_double(f.offset)
                 + "," + format_double(f.offset_err) + ","
                 + format_double(f.fwhm) + "," + format_double(f.fwhm_err)
                 + "," + (f.bin_limited ? "1" : "0") + ","
                 + (f.converged ? "1" : "0") + ","
                 + std::to_string(f.iterations) + ","
                 + format_double(f.residual_norm) + ","
                 + std::to_string(f.n_bins));
    };
    row(Coordinate::phi, rep.phi_fit);
    row(Coordinate::theta, rep.theta_fit);
}

//---------------------------------------------------------------------------//
// RASTER FRAMES
//---------------------------------------------------------------------------//
//! \param decimals fixed-point digits per pixel; negative keeps full precision
inline void write_raster(RasterFrame const& f,
                         std::filesystem::path const& path,
                         int decimals = -1)
{
    LineWriter out(path);
    out.line(detail::schema_line("twinbeam.raster/1",
                                 {{"frame", std::to_string(f.frame_index)},
                                  {"width", std::to_string(f.width)},
                                  {"height", std::to_string(f.height)}}));
    std::string row;
    for (int y = 0; y < f.height; ++y)
    {
        row.clear();
        for (int x = 0; x < f.width; ++x)
        {
            if (x)
                row += ' ';
            double const v = f.at(x, y);
            if (v == 0)
                row += '0';
            else if (decimals < 0)
                row += format_double(v);
            else
            {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
                row += buf;
            }
        }
        out.line(row);
    }
}

inline RasterFrame read_raster(std::filesystem::path const& path)
{
    LineReader in(path);
    auto const head = detail::read_schema_line(in, "twinbeam.raster/1");
    std::string const w0 = path.string() + ":1";
    auto const width = head.count("width", w0);
    auto const height = head.count("height", w0);
    if (width == 0 || height == 0 || width > 1 << 16 || height > 1 << 16)
        throw IoError(w0 + ": bad raster dimensions");
    RasterFrame f(head.count("frame", w0), int(width), int(height));
    for (int y = 0; y < f.height; ++y)
    {
        auto row = detail::next_row(in, ' ');
        if (!row || row->size() != width)
            throw IoError(detail::where(in) + ": expected "
                          + std::to_string(width) + " pixels per row");
        for (int x = 0; x < f.width; ++x)
        {
            double const v = detail::cell_number(in, (*row)[x]);
            if (!std::isfinite(v) || v < 0)
                throw IoError(detail::where(in)
                              + ": raster pixels must be finite and >= 0");
            f.at(x, y) = v;
        }
    }
    return f;
}

}  // namespace twinbeam::io
