#pragma once

#include <hsnr/cube.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace hsnr {

// ============================================================
// Helpers
// ============================================================

namespace detail {

inline void put_f32le(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    out.push_back(static_cast<char>(bits & 0xFF));
    out.push_back(static_cast<char>((bits >> 8) & 0xFF));
    out.push_back(static_cast<char>((bits >> 16) & 0xFF));
    out.push_back(static_cast<char>((bits >> 24) & 0xFF));
}

inline float get_f32le(const unsigned char* p) {
    const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                               (static_cast<std::uint32_t>(p[1]) << 8) |
                               (static_cast<std::uint32_t>(p[2]) << 16) |
                               (static_cast<std::uint32_t>(p[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Shortest decimal form that round-trips a double; used for CSV output so
// repeated runs emit identical bytes. Plain notation wins length ties over
// the exponent form, so 900 prints as "900" rather than "9e+02".
inline std::string fmt_double(double v) {
    std::string best;
    for (int prec = 1; prec <= 17; ++prec) {
        char probe[40];
        std::snprintf(probe, sizeof probe, "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(probe, "%lf", &back);
        if (back != v) continue;
        const bool shorter = best.empty() || std::strlen(probe) < best.size();
        const bool plainer = std::strlen(probe) == best.size() &&
                             best.find('e') != std::string::npos && std::strchr(probe, 'e') == nullptr;
        if (shorter || plainer) best = probe;
    }
    if (!best.empty()) return best;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string read_file_bytes(const std::string& path, const std::string& who) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(who + ": cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (!in.good() && !in.eof()) throw std::runtime_error(who + ": read failure on '" + path + "'");
    return std::move(ss).str();
}

inline void write_file_bytes(const std::string& path, const std::string& bytes, const std::string& who) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error(who + ": cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out.good()) throw std::runtime_error(who + ": write failure on '" + path + "'");
}

// `a.json` -> `a.raw`, used by the two-file cube layout.
inline std::string sibling_raw_path(const std::string& json_path) {
    return json_path.substr(0, json_path.size() - 5) + ".raw";
}

}  // namespace detail

// ============================================================
// Cube files
// ============================================================
//
// Cube format "HCB1": a one-line JSON header
//   {"axis":{"start":s,"step":d},"bands":N,"dtype":"f32le","height":H,
//    "magic":"HCB1","order":"x,y,band","width":W}
// plus H*W*N little-endian 32-bit floats ordered x-major, band fastest.
// The header and payload live either in one file (header line, newline,
// payload) or in a `.json` + `.raw` pair when the given path ends in .json.

inline void save_cube(const HyperCube& cube, const std::string& path) {
    nlohmann::json header = {
        {"magic", "HCB1"},
        {"height", cube.height()},
        {"width", cube.width()},
        {"bands", cube.bands()},
        {"axis", {{"start", cube.axis().start}, {"step", cube.axis().step}}},
        {"dtype", "f32le"},
        {"order", "x,y,band"},
    };
    const std::string header_line = header.dump();

    std::string payload;
    payload.reserve(cube.size() * 4);
    const double* p = cube.data();
    for (std::size_t i = 0; i < cube.size(); ++i)
        detail::put_f32le(payload, static_cast<float>(p[i]));

    if (detail::ends_with(path, ".json")) {
        detail::write_file_bytes(path, header_line + "\n", "save_cube");
        detail::write_file_bytes(detail::sibling_raw_path(path), payload, "save_cube");
    } else {
        detail::write_file_bytes(path, header_line + "\n" + payload, "save_cube");
    }
}

inline HyperCube load_cube(const std::string& path) {
    std::string header_text;
    std::string payload;
    if (detail::ends_with(path, ".json")) {
        header_text = detail::read_file_bytes(path, "load_cube");
        payload = detail::read_file_bytes(detail::sibling_raw_path(path), "load_cube");
    } else {
        std::string all = detail::read_file_bytes(path, "load_cube");
        const std::size_t nl = all.find('\n');
        if (nl == std::string::npos)
            throw std::runtime_error("load_cube: no header line in '" + path + "'");
        header_text = all.substr(0, nl);
        payload = all.substr(nl + 1);
    }

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_text);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("load_cube: malformed header: ") + e.what());
    }

    if (header.value("magic", "") != "HCB1")
        throw std::runtime_error("load_cube: unsupported format (magic != HCB1)");
    if (header.value("dtype", "") != "f32le")
        throw std::runtime_error("load_cube: unsupported dtype '" + header.value("dtype", "") + "'");
    if (header.value("order", "") != "x,y,band")
        throw std::runtime_error("load_cube: unsupported element order '" + header.value("order", "") + "'");

    const int h = header.value("height", 0);
    const int w = header.value("width", 0);
    const int n = header.value("bands", 0);
    if (h < 1 || w < 1 || n < 1)
        throw std::runtime_error("load_cube: header dimensions must be >= 1");
    if (!header.contains("axis") || !header["axis"].contains("start") || !header["axis"].contains("step"))
        throw std::runtime_error("load_cube: header missing axis");

    WavenumberAxis axis{header["axis"]["start"].get<double>(), header["axis"]["step"].get<double>(), n};
    if (!axis.valid()) throw std::runtime_error("load_cube: axis step must be positive");

    const std::size_t expect = static_cast<std::size_t>(h) * w * n * 4;
    if (payload.size() != expect)
        throw std::runtime_error("load_cube: payload size mismatch (header says " + std::to_string(expect) +
                                 " bytes, file has " + std::to_string(payload.size()) + ")");

    HyperCube cube(h, w, axis);
    const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
    double* out = cube.data();
    for (std::size_t i = 0; i < cube.size(); ++i) {
        out[i] = static_cast<double>(detail::get_f32le(bytes + 4 * i));
        if (!std::isfinite(out[i]))
            throw std::runtime_error("load_cube: non-finite value in payload");
    }
    return cube;
}

// ============================================================
// Masks (binary PGM, nonzero = true)
// ============================================================

inline void save_mask_pgm(const PixelMask& mask, const std::string& path) {
    std::string bytes = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) + "\n255\n";
    bytes.reserve(bytes.size() + mask.flags.size());
    for (std::uint8_t f : mask.flags) bytes.push_back(f ? '\xFF' : '\0');
    detail::write_file_bytes(path, bytes, "save_mask_pgm");
}

inline PixelMask load_mask_pgm(const std::string& path) {
    const std::string bytes = detail::read_file_bytes(path, "load_mask_pgm");
    std::istringstream in(bytes);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw std::runtime_error("load_mask_pgm: not a binary PGM (P5) file");

    // Header tokens may be separated by whitespace and '#' comments.
    auto next_int = [&in]() {
        int v;
        while (true) {
            in >> std::ws;
            if (in.peek() == '#') {
                std::string line;
                std::getline(in, line);
                continue;
            }
            if (!(in >> v)) throw std::runtime_error("load_mask_pgm: truncated header");
            return v;
        }
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw std::runtime_error("load_mask_pgm: unsupported PGM header");
    in.get();  // single whitespace byte after maxval

    const std::size_t start = static_cast<std::size_t>(in.tellg());
    const std::size_t expect = static_cast<std::size_t>(w) * h;
    if (bytes.size() - start != expect)
        throw std::runtime_error("load_mask_pgm: payload size mismatch");

    PixelMask mask(h, w);
    for (std::size_t i = 0; i < expect; ++i)
        mask.flags[i] = static_cast<std::uint8_t>(bytes[start + i]) ? 255 : 0;
    return mask;
}

// ============================================================
// Spectra (CSV: wavenumber,value)
// ============================================================

struct SpectrumCsv {
    std::vector<double> wavenumber;
    Spectrum values;
};

inline void save_spectrum_csv(const WavenumberAxis& axis, const Spectrum& values, const std::string& path) {
    if (values.size() != axis.count)
        throw std::invalid_argument("save_spectrum_csv: value count does not match axis");
    std::string out = "wavenumber,value\n";
    for (int n = 0; n < axis.count; ++n)
        out += detail::fmt_double(axis.value(n)) + "," + detail::fmt_double(values[n]) + "\n";
    detail::write_file_bytes(path, out, "save_spectrum_csv");
}

inline SpectrumCsv load_spectrum_csv(const std::string& path) {
    std::istringstream in(detail::read_file_bytes(path, "load_spectrum_csv"));
    SpectrumCsv result;
    std::vector<double> values;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        double wn, v;
        if (std::sscanf(line.c_str(), "%lf,%lf", &wn, &v) != 2) {
            if (result.wavenumber.empty() && values.empty()) continue;  // header line
            throw std::runtime_error("load_spectrum_csv: malformed line '" + line + "'");
        }
        result.wavenumber.push_back(wn);
        values.push_back(v);
    }
    if (values.empty()) throw std::runtime_error("load_spectrum_csv: no data rows in '" + path + "'");
    result.values = Eigen::Map<const Spectrum>(values.data(), static_cast<Eigen::Index>(values.size()));
    return result;
}

}  // namespace hsnr
