#pragma once

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <string_view>
#include <vector>

#include "cavicrys/sweeps.hpp"

namespace cavicrys {

enum class OutputFormat { Csv, Json };

/// Fully resolved run configuration. Defaults are the paper apparatus:
/// 866 nm / 37 um beam, kappa = (2pi) 2.15 MHz, gamma = (2pi) 11.2 MHz,
/// and a 336 um x 50 um crystal at 3.8e8 cm^-3.
struct RunConfig {
    double wavelength = 866e-9;
    double waist = 37e-6;
    CrystalSpec crystal{336e-6, 50e-6, 3.8e14, 0.0, 0.0};
    ProbePhysics physics;
    CouplingConfig coupling;
    SweepKind kind = SweepKind::Displacement;
    Axis axis = Axis::X;
    std::vector<ModeIndex> modes{{0, 0}};
    std::vector<double> grid;  // filled by finalize when absent
    bool normalize = true;
    bool end_to_end = false;
    ScanGrid scan;
    double noise_sigma = 0.0;
    OutputFormat format = OutputFormat::Csv;
    std::string out_path;
    int precision = 9;
    std::uint64_t seed = 1;

    BeamGeometry beam() const { return BeamGeometry(wavelength, waist); }

    SweepRequest request() const {
        SweepRequest req;
        req.kind = kind;
        req.geometry = beam();
        req.base_crystal = crystal;
        req.modes = modes;
        req.grid = grid;
        req.coupling = coupling;
        req.physics = physics;
        req.axis = axis;
        req.normalize = normalize;
        req.end_to_end = end_to_end;
        req.noise_sigma = noise_sigma;
        req.scan = scan;
        req.seed = seed;
        return req;
    }
};

namespace cfgdetail {

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

inline bool parse_number(const std::string& text, double& out) {
    const char* begin = text.c_str();
    char* end = nullptr;
    out = std::strtod(begin, &end);
    return end != begin && *end == '\0';
}

struct Unit {
    const char* suffix;
    double factor;
};

inline double parse_with_units(const std::string& raw, const Unit* units, int n_units,
                               const char* what, int line) {
    std::string s = trim(raw);
    for (int i = 0; i < n_units; ++i) {
        std::string_view suf(units[i].suffix);
        if (s.size() > suf.size() &&
            s.compare(s.size() - suf.size(), suf.size(), suf) == 0) {
            double v;
            if (!parse_number(trim(s.substr(0, s.size() - suf.size())), v))
                throw ParseError(std::string("malformed ") + what + " value '" + raw + "'",
                                 line);
            return v * units[i].factor;
        }
    }
    double v;
    if (!parse_number(s, v))
        throw ParseError(std::string("malformed ") + what + " value '" + raw + "'", line);
    return v;  // bare number: SI base unit
}

inline double parse_length(const std::string& raw, int line) {
    static const Unit units[] = {{"nm", 1e-9}, {"um", 1e-6}, {"µm", 1e-6},
                                 {"mm", 1e-3}, {"cm", 1e-2}, {"m", 1.0}};
    return parse_with_units(raw, units, 6, "length", line);
}

/// Frequency suffixes follow the "(2pi) X MHz" convention of the paper:
/// a value in Hz-units is an ordinary frequency, converted to an angular
/// rate. "rad/s" passes through unchanged, as does a bare number.
inline double parse_rate(const std::string& raw, int line) {
    static const Unit units[] = {{"rad/s", 1.0},
                                 {"GHz", two_pi * 1e9},
                                 {"MHz", two_pi * 1e6},
                                 {"kHz", two_pi * 1e3},
                                 {"Hz", two_pi}};
    return parse_with_units(raw, units, 5, "rate", line);
}

inline double parse_density(const std::string& raw, int line) {
    static const Unit units[] = {{"/cm3", 1e6}, {"cm^-3", 1e6}, {"/m3", 1.0},
                                 {"m^-3", 1.0}};
    return parse_with_units(raw, units, 4, "density", line);
}

inline double parse_plain(const std::string& raw, const char* what, int line) {
    double v;
    if (!parse_number(trim(raw), v))
        throw ParseError(std::string("malformed ") + what + " value '" + raw + "'", line);
    return v;
}

inline long long parse_integer(const std::string& raw, const char* what, int line) {
    double v = parse_plain(raw, what, line);
    long long n = static_cast<long long>(v);
    if (static_cast<double>(n) != v)
        throw ParseError(std::string(what) + " must be an integer", line);
    return n;
}

inline bool parse_bool(const std::string& raw, int line) {
    std::string s = trim(raw);
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw ParseError("malformed boolean '" + raw + "'", line);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || s[i] == sep) {
            out.push_back(trim(s.substr(start, i - start)));
            start = i + 1;
        }
    }
    return out;
}

inline ModeIndex parse_mode(const std::string& raw, int line) {
    std::string s = trim(raw);
    if (s.size() != 2 || !std::isdigit(static_cast<unsigned char>(s[0])) ||
        !std::isdigit(static_cast<unsigned char>(s[1])))
        throw ParseError("mode must be two digits MN, got '" + raw + "'", line);
    return ModeIndex{s[0] - '0', s[1] - '0'};
}

}  // namespace cfgdetail

/// Parse a mode label like "10" outside config files (CLI flag).
inline ModeIndex parse_mode_label(const std::string& s) {
    if (s.size() != 2 || !std::isdigit(static_cast<unsigned char>(s[0])) ||
        !std::isdigit(static_cast<unsigned char>(s[1])))
        throw ValidationError("mode must be two digits MN, got '" + s + "'");
    return ModeIndex{s[0] - '0', s[1] - '0'};
}

/// Parse the line-based `key = value` config format with [section]
/// headers. Unknown sections or keys are rejected; every error carries
/// its line number. Missing keys keep their defaults; validation of the
/// assembled config happens at the end and names the offending key.
inline RunConfig parse_config(std::string_view text) {
    using namespace cfgdetail;
    RunConfig cfg;
    std::string section;
    std::string grid_raw;
    int grid_line = 0;

    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string line = trim(text.substr(pos, eol - pos));
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            if (pos > text.size()) break;
            continue;
        }
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError("unterminated section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "beam" && section != "crystal" && section != "physics" &&
                section != "coupling" && section != "sweep" && section != "spectrum" &&
                section != "output")
                throw ParseError("unknown section [" + section + "]", line_no);
            if (pos > text.size()) break;
            continue;
        }
        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("expected key = value, got '" + line + "'", line_no);
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        // strip trailing comment
        std::size_t hash = value.find('#');
        if (hash != std::string::npos) value = trim(value.substr(0, hash));
        if (key.empty()) throw ParseError("empty key", line_no);
        if (section.empty())
            throw ParseError("key '" + key + "' outside any [section]", line_no);

        auto unknown = [&]() -> ParseError {
            return ParseError("unknown key '" + key + "' in section [" + section + "]",
                              line_no);
        };

        if (section == "beam") {
            if (key == "wavelength") cfg.wavelength = parse_length(value, line_no);
            else if (key == "waist") cfg.waist = parse_length(value, line_no);
            else throw unknown();
        } else if (section == "crystal") {
            if (key == "half_length") cfg.crystal.half_length = parse_length(value, line_no);
            else if (key == "radius") cfg.crystal.radius = parse_length(value, line_no);
            else if (key == "density") cfg.crystal.density = parse_density(value, line_no);
            else if (key == "offset_x") cfg.crystal.offset_x = parse_length(value, line_no);
            else if (key == "offset_y") cfg.crystal.offset_y = parse_length(value, line_no);
            else throw unknown();
        } else if (section == "physics") {
            if (key == "kappa") cfg.physics.kappa = parse_rate(value, line_no);
            else if (key == "gamma") cfg.physics.gamma = parse_rate(value, line_no);
            else if (key == "delta") cfg.physics.delta = parse_rate(value, line_no);
            else throw unknown();
        } else if (section == "coupling") {
            if (key == "g") cfg.coupling.single_ion_g = parse_rate(value, line_no);
            else if (key == "method") {
                std::string m = trim(value);
                if (m == "averaged") cfg.coupling.method = CouplingMethod::PhaseAveraged;
                else if (m == "oscillatory") cfg.coupling.method = CouplingMethod::Oscillatory;
                else if (m == "mc") cfg.coupling.method = CouplingMethod::MonteCarlo;
                else throw ParseError("unknown method '" + m + "'", line_no);
            } else if (key == "tolerance")
                cfg.coupling.rel_tolerance = parse_plain(value, "tolerance", line_no);
            else if (key == "samples")
                cfg.coupling.mc_samples = parse_integer(value, "samples", line_no);
            else if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(parse_integer(value, "seed", line_no));
            else throw unknown();
        } else if (section == "sweep") {
            if (key == "kind") {
                std::string k = trim(value);
                if (k == "displacement") cfg.kind = SweepKind::Displacement;
                else if (k == "radius") cfg.kind = SweepKind::Radius;
                else if (k == "detuning") cfg.kind = SweepKind::Detuning;
                else throw ParseError("unknown sweep kind '" + k + "'", line_no);
            } else if (key == "axis") {
                std::string a = trim(value);
                if (a == "x") cfg.axis = Axis::X;
                else if (a == "y") cfg.axis = Axis::Y;
                else throw ParseError("axis must be x or y", line_no);
            } else if (key == "grid") {
                grid_raw = value;
                grid_line = line_no;
            } else if (key == "modes") {
                cfg.modes.clear();
                for (const std::string& tok : split(value, ','))
                    cfg.modes.push_back(parse_mode(tok, line_no));
            } else if (key == "normalize")
                cfg.normalize = parse_bool(value, line_no);
            else if (key == "end_to_end")
                cfg.end_to_end = parse_bool(value, line_no);
            else throw unknown();
        } else if (section == "spectrum") {
            if (key == "span") cfg.scan.half_span = parse_rate(value, line_no) / 2.0;
            else if (key == "points")
                cfg.scan.points = static_cast<int>(parse_integer(value, "points", line_no));
            else if (key == "noise_sigma")
                cfg.noise_sigma = parse_plain(value, "noise_sigma", line_no);
            else throw unknown();
        } else if (section == "output") {
            if (key == "format") {
                std::string f = trim(value);
                if (f == "csv") cfg.format = OutputFormat::Csv;
                else if (f == "json") cfg.format = OutputFormat::Json;
                else throw ParseError("format must be csv or json", line_no);
            } else if (key == "path")
                cfg.out_path = value;
            else if (key == "precision")
                cfg.precision = static_cast<int>(parse_integer(value, "precision", line_no));
            else throw unknown();
        }
        if (pos > text.size()) break;
    }

    // grid values carry the unit of the sweep variable, so they resolve
    // only after the kind is known
    if (!grid_raw.empty()) {
        auto parse_value = [&](const std::string& tok) {
            return (cfg.kind == SweepKind::Detuning) ? parse_rate(tok, grid_line)
                                                     : parse_length(tok, grid_line);
        };
        std::vector<std::string> colon = split(grid_raw, ':');
        cfg.grid.clear();
        if (colon.size() == 3) {
            double start = parse_value(colon[0]);
            double stop = parse_value(colon[1]);
            long long count = parse_integer(colon[2], "grid count", grid_line);
            if (count < 1) throw ParseError("grid count must be >= 1", grid_line);
            for (long long i = 0; i < count; ++i)
                cfg.grid.push_back(count == 1 ? start
                                              : start + (stop - start) * i / (count - 1));
        } else {
            for (const std::string& tok : split(grid_raw, ','))
                cfg.grid.push_back(parse_value(tok));
        }
    }
    if (cfg.grid.empty()) {
        // kind-appropriate default grid
        if (cfg.kind == SweepKind::Detuning) {
            for (int i = 0; i < 9; ++i)
                cfg.grid.push_back(-two_pi * 30e6 + two_pi * 60e6 * i / 8.0);
        } else if (cfg.kind == SweepKind::Radius) {
            for (double r : {10e-6, 20e-6, 40e-6, 60e-6, 80e-6, 100e-6, 120e-6, 148e-6})
                cfg.grid.push_back(r);
        } else {
            for (int i = 0; i < 17; ++i)
                cfg.grid.push_back(-80e-6 + 160e-6 * i / 16.0);
        }
    }

    // validation: name the offending key
    auto need_positive = [](double v, const char* key) {
        if (!(v > 0.0))
            throw ValidationError(std::string("config value '") + key +
                                  "' must be positive");
    };
    need_positive(cfg.wavelength, "beam.wavelength");
    need_positive(cfg.waist, "beam.waist");
    need_positive(cfg.crystal.half_length, "crystal.half_length");
    need_positive(cfg.crystal.radius, "crystal.radius");
    need_positive(cfg.crystal.density, "crystal.density");
    need_positive(cfg.physics.kappa, "physics.kappa");
    need_positive(cfg.physics.gamma, "physics.gamma");
    need_positive(cfg.coupling.single_ion_g, "coupling.g");
    if (!(cfg.coupling.rel_tolerance > 0.0) || cfg.coupling.rel_tolerance > 0.1)
        throw ValidationError("config value 'coupling.tolerance' must lie in (0, 0.1]");
    if (cfg.coupling.mc_samples < 1000)
        throw ValidationError("config value 'coupling.samples' must be >= 1000");
    if (cfg.scan.points < 16)
        throw ValidationError("config value 'spectrum.points' must be >= 16");
    if (cfg.noise_sigma < 0.0)
        throw ValidationError("config value 'spectrum.noise_sigma' must be >= 0");
    if (cfg.precision < 1 || cfg.precision > 17)
        throw ValidationError("config value 'output.precision' must lie in [1, 17]");
    for (ModeIndex m : cfg.modes) validate_mode(m);
    return cfg;
}

}  // namespace cavicrys
