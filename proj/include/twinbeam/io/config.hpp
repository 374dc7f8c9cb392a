//---------------------------------------------------------------------------//
// Copyright 2026 twinbeam developers.
// SPDX-License-Identifier: Apache-2.0
//---------------------------------------------------------------------------//
//! \file twinbeam/io/config.hpp
//---------------------------------------------------------------------------//
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "../detector_model.hpp"
#include "../error.hpp"
#include "../source_model.hpp"
#include "text.hpp"

namespace twinbeam
{
inline constexpr char const* config_schema = "twinbeam.config/1";

//! Run length, seeding and analysis settings.
struct RunControls
{
    std::uint64_t n_frames{240000};
    std::uint64_t seed{1};
    int cutoff{20};
    int bootstrap_resamples{200};
    double bin_width{0};         //!< [mrad]; 0 means one macropixel
    double fit_half_range{30.0};  //!< [mrad]; 0 fits the whole profile

    friend bool operator==(RunControls const&, RunControls const&) = default;
};

struct RunConfig
{
    std::string schema{config_schema};
    SourceParams source;
    DetectorParams detector;
    RegionSet regions;
    RunControls run;

    void validate() const
    {
        source.validate();
        detector.validate();
        regions.validate();
        detail::require(run.cutoff >= 0, "run.cutoff must be >= 0");
        detail::require(run.bootstrap_resamples >= 0,
                        "run.bootstrap_resamples must be >= 0");
        detail::require(std::isfinite(run.bin_width) && run.bin_width >= 0,
                        "run.bin_width must be >= 0");
        detail::require(std::isfinite(run.fit_half_range)
                            && run.fit_half_range >= 0,
                        "run.fit_half_range must be >= 0");
    }

    friend bool operator==(RunConfig const&, RunConfig const&) = default;
};

namespace detail
{
//---------------------------------------------------------------------------//
/*!
 * Table-driven reader for one YAML document.
 *
 * Every known key has a handler; unknown keys only produce warnings.
 * Errors carry "file:line:" of the offending node.
 */
class ConfigParser
{
  public:
    ConfigParser(std::string name, std::vector<std::string>* warnings)
        : name_{std::move(name)}, warnings_{warnings}
    {
    }

    using Handler = std::function<void(YAML::Node const&, std::string const&)>;
    struct Field
    {
        std::string key;
        Handler apply;
        bool required{false};
    };

    std::string where(YAML::Node const& n) const
    {
        auto const mark = n.Mark();
        if (mark.line < 0)
            return name_;
        return name_ + ":" + std::to_string(mark.line + 1);
    }

    [[noreturn]] void fail(YAML::Node const& n, std::string const& msg) const
    {
        throw ValidationError(where(n) + ": " + msg);
    }

    void warn(YAML::Node const& n, std::string const& msg) const
    {
        if (warnings_)
            warnings_->push_back(where(n) + ": " + msg);
    }

    void section(YAML::Node const& root,
                 std::string const& name,
                 std::vector<Field> const& fields)
    {
        YAML::Node const sec = root[name];
        if (sec && !sec.IsMap())
            fail(sec, "section '" + name + "' must be a mapping");
        std::set<std::string> seen;
        if (sec)
        {
            for (auto const& kv : sec)
            {
                auto const key = kv.first.as<std::string>();
                auto const full = name + "." + key;
                auto it = std::find_if(fields.begin(), fields.end(),
                                       [&](Field const& f) { return f.key == key; });
                if (it == fields.end())
                {
                    warn(kv.first, "unknown key '" + full + "' ignored");
                    continue;
                }
                seen.insert(key);
                it->apply(kv.second, full);
            }
        }
        for (auto const& f : fields)
        {
            if (f.required && !seen.count(f.key))
            {
                throw ValidationError(
                    (sec ? where(sec) : name_) + ": missing required key '"
                    + name + "." + f.key + "'");
            }
        }
    }

    double number(YAML::Node const& n, std::string const& key) const
    {
        if (!n.IsScalar())
            fail(n, "key '" + key + "' must be a number");
        auto const v = io::parse_double(n.Scalar());
        if (!v)
            fail(n, "key '" + key + "' must be a number, got '" + n.Scalar() + "'");
        return *v;
    }

    std::int64_t integer(YAML::Node const& n, std::string const& key) const
    {
        double const v = number(n, key);
        if (v != std::floor(v) || std::abs(v) > 9.007199254740992e15)
            fail(n, "key '" + key + "' must be an integer");
        return static_cast<std::int64_t>(v);
    }

    void check(bool ok, YAML::Node const& n, std::string const& key,
               std::string const& expect) const
    {
        if (!ok)
        {
            fail(n, "key '" + key + "' = " + n.Scalar() + " is out of range: "
                        + expect);
        }
    }

    //! Handler storing a real constrained by \c pred.
    template<class Pred>
    Handler real(double& dst, Pred pred, std::string expect)
    {
        return [this, &dst, pred, expect](YAML::Node const& n,
                                          std::string const& key) {
            double const v = number(n, key);
            check(std::isfinite(v) && pred(v), n, key, expect);
            dst = v;
        };
    }

    Handler nonneg(double& dst)
    {
        return real(dst, [](double v) { return v >= 0; }, "must be >= 0");
    }
    Handler positive(double& dst)
    {
        return real(dst, [](double v) { return v > 0; }, "must be > 0");
    }
    Handler unit(double& dst)
    {
        return real(dst, [](double v) { return v >= 0 && v <= 1; },
                    "must be in [0, 1]");
    }

    Handler rect(Rect& dst)
    {
        return [this, &dst](YAML::Node const& n, std::string const& key) {
            if (!n.IsSequence() || n.size() != 4)
                fail(n, "key '" + key + "' must be a list [x0, y0, x1, y1]");
            std::int64_t v[4];
            for (int k = 0; k < 4; ++k)
            {
                v[k] = integer(n[k], key);
                check(v[k] >= 0 && v[k] <= 1 << 20, n[k], key,
                      "coordinates must be in [0, 2^20]");
            }
            if (v[2] <= v[0] || v[3] <= v[1])
                fail(n, "key '" + key + "' must satisfy x1 > x0 and y1 > y0");
            dst = Rect{int(v[0]), int(v[1]), int(v[2]), int(v[3])};
        };
    }

  private:
    std::string name_;
    std::vector<std::string>* warnings_;
};
}  // namespace detail

//---------------------------------------------------------------------------//
/*!
 * Parse a configuration document.
 *
 * Required: \c schema, \c source.mu_pairs, \c detector.eta_s and
 * \c detector.eta_i. Everything else has a default. When the thresholds
 * are omitted they default to 2.5 and 5 times the readout noise.
 */
inline RunConfig parse_config(std::string const& text,
                              std::string const& name = "<config>",
                              std::vector<std::string>* warnings = nullptr)
{
    YAML::Node root;
    try
    {
        root = YAML::Load(text);
    }
    catch (YAML::ParserException const& e)
    {
        throw ValidationError(name + ":" + std::to_string(e.mark.line + 1)
                              + ": " + e.msg);
    }
    if (!root || !root.IsMap())
        throw ValidationError(name + ": configuration must be a mapping");

    detail::ConfigParser p(name, warnings);
    RunConfig cfg;

    YAML::Node const schema = root["schema"];
    if (!schema)
        throw ValidationError(name + ": missing required key 'schema'");
    if (!schema.IsScalar() || schema.Scalar() != config_schema)
    {
        p.fail(schema, "unrecognised schema '" + schema.Scalar()
                           + "' (expected " + config_schema + ")");
    }

    static std::set<std::string> const sections{"schema", "source", "detector",
                                                "regions", "run"};
    for (auto const& kv : root)
    {
        auto const key = kv.first.as<std::string>();
        if (!sections.count(key))
            p.warn(kv.first, "unknown key '" + key + "' ignored");
    }

    auto& src = cfg.source;
    p.section(root, "source",
              {{"mu_pairs", p.nonneg(src.mu_pairs), true},
               {"theta0", p.real(src.theta0, [](double) { return true; }, ""), false},
               {"layer_sigma_theta", p.nonneg(src.layer_sigma_theta), false},
               {"phi_window", p.positive(src.phi_window), false},
               {"corr_sigma_theta", p.nonneg(src.corr_sigma_theta), false},
               {"corr_sigma_phi", p.nonneg(src.corr_sigma_phi), false},
               {"metadata",
                [&](YAML::Node const& n, std::string const& key) {
                    if (!n.IsMap())
                        p.fail(n, "key '" + key + "' must be a mapping");
                    for (auto const& m : n)
                    {
                        if (!m.second.IsScalar())
                            p.fail(m.second, "metadata values must be scalars");
                        src.metadata[m.first.as<std::string>()]
                            = m.second.Scalar();
                    }
                },
                false}});

    auto& det = cfg.detector;
    bool have_low = false, have_high = false;
    p.section(
        root, "detector",
        {{"eta_s", p.unit(det.eta_s), true},
         {"eta_i", p.unit(det.eta_i), true},
         {"dark_mean_s", p.nonneg(det.dark_mean_s), false},
         {"dark_mean_i", p.nonneg(det.dark_mean_i), false},
         {"dark_mean_noise", p.nonneg(det.dark_mean_noise), false},
         {"mrad_per_pixel", p.positive(det.mrad_per_pixel), false},
         {"macropixel",
          [&](YAML::Node const& n, std::string const& key) {
              auto const v = p.integer(n, key);
              p.check(v >= 1 && v <= 4096, n, key, "must be in [1, 4096]");
              det.macropixel = static_cast<int>(v);
          },
          false},
         {"psf_sigma", p.nonneg(det.psf_sigma), false},
         {"gain_mean", p.positive(det.gain_mean), false},
         {"gain_sigma", p.nonneg(det.gain_sigma), false},
         {"readout_sigma", p.nonneg(det.readout_sigma), false},
         {"threshold_low",
          [&, h = p.nonneg(det.threshold_low)](YAML::Node const& n,
                                                std::string const& key) {
              h(n, key);
              have_low = true;
          },
          false},
         {"threshold_high",
          [&, h = p.nonneg(det.threshold_high)](YAML::Node const& n,
                                                 std::string const& key) {
              h(n, key);
              have_high = true;
          },
          false},
         {"blur_sigma", p.nonneg(det.blur_sigma), false}});
    if (!have_low)
        det.threshold_low = 2.5 * det.readout_sigma;
    if (!have_high)
        det.threshold_high = 5.0 * det.readout_sigma;
    if (det.threshold_high < det.threshold_low)
    {
        throw ValidationError(name + ": detector.threshold_high must be >= "
                                     "detector.threshold_low");
    }

    p.section(root, "regions",
              {{"signal", p.rect(cfg.regions.signal), false},
               {"idler", p.rect(cfg.regions.idler), false},
               {"noise", p.rect(cfg.regions.noise), false}});
    try
    {
        cfg.regions.validate();
    }
    catch (ValidationError const& e)
    {
        throw ValidationError(p.where(root["regions"]) + ": " + e.what());
    }

    auto& run = cfg.run;
    p.section(
        root, "run",
        {{"n_frames",
          [&](YAML::Node const& n, std::string const& key) {
              auto const v = p.integer(n, key);
              p.check(v >= 0, n, key, "must be >= 0");
              run.n_frames = static_cast<std::uint64_t>(v);
          },
          false},
         {"seed",
          [&](YAML::Node const& n, std::string const& key) {
              try
              {
                  run.seed = n.as<std::uint64_t>();
              }
              catch (YAML::Exception const&)
              {
                  p.fail(n, "key '" + key + "' must be an unsigned integer");
              }
          },
          false},
         {"cutoff",
          [&](YAML::Node const& n, std::string const& key) {
              auto const v = p.integer(n, key);
              p.check(v >= 0 && v <= 10000, n, key, "must be in [0, 10000]");
              run.cutoff = static_cast<int>(v);
          },
          false},
         {"bootstrap_resamples",
          [&](YAML::Node const& n, std::string const& key) {
              auto const v = p.integer(n, key);
              p.check(v >= 0 && v <= 1000000, n, key, "must be in [0, 10^6]");
              run.bootstrap_resamples = static_cast<int>(v);
          },
          false},
         {"bin_width", p.nonneg(run.bin_width), false},
         {"fit_half_range", p.nonneg(run.fit_half_range), false}});

    cfg.validate();
    return cfg;
}

inline RunConfig read_config(std::filesystem::path const& path,
                             std::vector<std::string>* warnings = nullptr)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot open config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string(), warnings);
}

namespace detail
{
inline std::string yaml_quote(std::string const& s)
{
    std::string out = "\"";
    for (char c : s)
    {
        if (c == '"' || c == '\\')
            out += '\\';
        out += c;
    }
    return out + "\"";
}

inline std::string yaml_rect(Rect const& r)
{
    return "[" + std::to_string(r.x0) + ", " + std::to_string(r.y0) + ", "
           + std::to_string(r.x1) + ", " + std::to_string(r.y1) + "]";
}
}  // namespace detail

//! Serialise so that parse_config(format_config(c)) reproduces c exactly.
inline std::string format_config(RunConfig const& cfg)
{
    using io::format_double;
    std::ostringstream os;
    auto const& s = cfg.source;
    auto const& d = cfg.detector;
    auto const& r = cfg.run;
    os << "schema: " << config_schema << "\n"
       << "source:\n"
       << "  mu_pairs: " << format_double(s.mu_pairs) << "\n"
       << "  theta0: " << format_double(s.theta0) << "\n"
       << "  layer_sigma_theta: " << format_double(s.layer_sigma_theta) << "\n"
       << "  phi_window: " << format_double(s.phi_window) << "\n"
       << "  corr_sigma_theta: " << format_double(s.corr_sigma_theta) << "\n"
       << "  corr_sigma_phi: " << format_double(s.corr_sigma_phi) << "\n";
    if (!s.metadata.empty())
    {
        os << "  metadata:\n";
        for (auto const& [k, v] : s.metadata)
            os << "    " << detail::yaml_quote(k) << ": "
               << detail::yaml_quote(v) << "\n";
    }
    os << "detector:\n"
       << "  eta_s: " << format_double(d.eta_s) << "\n"
       << "  eta_i: " << format_double(d.eta_i) << "\n"
       << "  dark_mean_s: " << format_double(d.dark_mean_s) << "\n"
       << "  dark_mean_i: " << format_double(d.dark_mean_i) << "\n"
       << "  dark_mean_noise: " << format_double(d.dark_mean_noise) << "\n"
       << "  mrad_per_pixel: " << format_double(d.mrad_per_pixel) << "\n"
       << "  macropixel: " << d.macropixel << "\n"
       << "  psf_sigma: " << format_double(d.psf_sigma) << "\n"
       << "  gain_mean: " << format_double(d.gain_mean) << "\n"
       << "  gain_sigma: " << format_double(d.gain_sigma) << "\n"
       << "  readout_sigma: " << format_double(d.readout_sigma) << "\n"
       << "  threshold_low: " << format_double(d.threshold_low) << "\n"
       << "  threshold_high: " << format_double(d.threshold_high) << "\n"
       << "  blur_sigma: " << format_double(d.blur_sigma) << "\n"
       << "regions:\n"
       << "  signal: " << detail::yaml_rect(cfg.regions.signal) << "\n"
       << "  idler: " << detail::yaml_rect(cfg.regions.idler) << "\n"
       << "  noise: " << detail::yaml_rect(cfg.regions.noise) << "\n"
       << "run:\n"
       << "  n_frames: " << r.n_frames << "\n"
       << "  seed: " << r.seed << "\n"
       << "  cutoff: " << r.cutoff << "\n"
       << "  bootstrap_resamples: " << r.bootstrap_resamples << "\n"
       << "  bin_width: " << format_double(r.bin_width) << "\n"
       << "  fit_half_range: " << format_double(r.fit_half_range) << "\n";
    return os.str();
}

inline void write_config(RunConfig const& cfg, std::filesystem::path const& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out)
        throw IoError("cannot write config '" + path.string() + "'");
    out << format_config(cfg);
    if (!out)
        throw IoError("write failed: '" + path.string() + "'");
}

}  // namespace twinbeam
