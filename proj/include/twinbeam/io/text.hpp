//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/io/text.hpp
//! Number formatting and line-oriented file access shared by the formats.
//---------------------------------------------------------------------------//
#pragma once

#include <array>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

#include <zlib.h>

#include "../error.hpp"

namespace twinbeam::io
{
//! Shortest decimal form that reads back to the identical double.
inline std::string format_double(double v)
{
    std::array<char, 32> buf;
    auto const res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline std::optional<double> parse_double(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty()
           && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    double v = 0;
    auto const res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
        return std::nullopt;
    return v;
}

inline bool is_gzip_path(std::filesystem::path const& p)
{
    return p.extension() == ".gz";
}

//! True if the file starts with the gzip magic bytes.
inline bool has_gzip_magic(std::filesystem::path const& p)
{
    std::ifstream in(p, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    in.read(reinterpret_cast<char*>(magic), 2);
    return in.gcount() == 2 && magic[0] == 0x1f && magic[1] == 0x8b;
}

//---------------------------------------------------------------------------//
/*!
 * Reads a plain or gzip-compressed text file one line at a time.
 *
 * Compression is detected from the magic bytes. \c next reports whether
 * the returned line was terminated by a newline, so callers can tell a
 * truncated final record from a complete one.
 */
class LineReader
{
  public:
    struct Line
    {
        std::string text;
        bool terminated{true};
    };

    explicit LineReader(std::filesystem::path const& path) : path_{path}
    {
        if (!std::filesystem::exists(path))
            throw IoError("cannot open '" + path.string() + "': no such file");
        if (has_gzip_magic(path))
        {
            gz_ = gzopen(path.string().c_str(), "rb");
            if (!gz_)
                throw IoError("cannot open '" + path.string() + "'");
        }
        else
        {
            plain_.open(path, std::ios::binary);
            if (!plain_)
                throw IoError("cannot open '" + path.string() + "'");
        }
    }
    ~LineReader()
    {
        if (gz_)
            gzclose(gz_);
    }
    LineReader(LineReader const&) = delete;
    LineReader& operator=(LineReader const&) = delete;

    std::optional<Line> next()
    {
        Line line;
        if (gz_)
        {
            char buf[8192];
            bool got = false;
            while (char* r = gzgets(gz_, buf, sizeof(buf)))
            {
                got = true;
                std::string_view chunk(r);
                if (!chunk.empty() && chunk.back() == '\n')
                {
                    chunk.remove_suffix(1);
                    line.text.append(chunk);
                    ++line_no_;
                    return line;
                }
                line.text.append(chunk);
            }
            int err = 0;
            char const* msg = gzerror(gz_, &err);
            if (err != Z_OK && err != Z_STREAM_END)
            {
                throw IoError(path_.string() + ": decompression failed: "
                              + msg);
            }
            if (!got)
                return std::nullopt;
            line.terminated = false;
            ++line_no_;
            return line;
        }
        if (!std::getline(plain_, line.text))
            return std::nullopt;
        line.terminated = !plain_.eof();
        ++line_no_;
        return line;
    }

    //! 1-based number of the line last returned.
    std::size_t line_number() const { return line_no_; }
    std::filesystem::path const& path() const { return path_; }

  private:
    std::filesystem::path path_;
    std::ifstream plain_;
    gzFile gz_{nullptr};
    std::size_t line_no_{0};
};

//---------------------------------------------------------------------------//
//! Writes plain text, or gzip when the path ends in ".gz".
class LineWriter
{
  public:
    LineWriter(std::filesystem::path const& path, bool append = false)
        : path_{path}
    {
        if (is_gzip_path(path))
        {
            gz_ = gzopen(path.string().c_str(), append ? "ab" : "wb");
            if (!gz_)
                throw IoError("cannot write '" + path.string() + "'");
        }
        else
        {
            plain_.open(path, append ? std::ios::app | std::ios::binary
                                     : std::ios::trunc | std::ios::binary);
            if (!plain_)
                throw IoError("cannot write '" + path.string() + "'");
        }
    }
    ~LineWriter()
    {
        if (gz_)
            gzclose(gz_);
    }
    LineWriter(LineWriter const&) = delete;
    LineWriter& operator=(LineWriter const&) = delete;

    void write(std::string_view text)
    {
        if (gz_)
        {
            if (!text.empty()
                && gzwrite(gz_, text.data(), static_cast<unsigned>(text.size()))
                       == 0)
            {
                throw IoError("write failed: '" + path_.string() + "'");
            }
            return;
        }
        plain_.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!plain_)
            throw IoError("write failed: '" + path_.string() + "'");
    }

    void line(std::string_view text)
    {
        write(text);
        write("\n");
    }

    void flush()
    {
        if (gz_)
            gzflush(gz_, Z_SYNC_FLUSH);
        else
            plain_.flush();
    }

  private:
    std::filesystem::path path_;
    std::ofstream plain_;
    gzFile gz_{nullptr};
};

}  // namespace twinbeam::io
