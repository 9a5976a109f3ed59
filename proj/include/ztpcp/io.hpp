#pragma once

// Text formats:
//   tensor file   one one-entry per line, K whitespace-separated 0-based coords
//   network file  one edge per line, "i j"
//   test file     K coords followed by a 0/1 label
// Blank lines and lines starting with '#' are ignored everywhere.

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

namespace io {

inline std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

inline bool skip_line(std::string_view line) {
    std::size_t i = line.find_first_not_of(" \t\r");
    return i == std::string_view::npos || line[i] == '#';
}

template <typename Int>
bool parse_int(std::string_view tok, Int& out) {
    if (tok.empty() || tok.front() == '-' || tok.front() == '+') return false;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && p == tok.data() + tok.size();
}

inline bool parse_double(std::string_view tok, double& out) {
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
    return ec == std::errc{} && p == tok.data() + tok.size();
}

// 17 significant digits: enough to round-trip any double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    return in;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    return out;
}

inline void parse_coords(const std::string& path, std::size_t lineno, std::span<const std::string_view> toks,
                         std::span<Coord> coords) {
    for (std::size_t k = 0; k < coords.size(); ++k) {
        if (!parse_int(toks[k], coords[k])) {
            throw ParseError(path, lineno, "expected a non-negative integer, got '" + std::string(toks[k]) + "'");
        }
    }
}

}  // namespace io

struct LoadSummary {
    std::size_t lines = 0;
    std::size_t duplicates = 0;
};

inline SparseBinaryTensor load_tensor(const std::string& path, const Shape& shape, LoadSummary* summary = nullptr) {
    SparseBinaryTensor t(shape);
    auto in = io::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    LoadSummary s;
    std::vector<Coord> coords(shape.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (io::skip_line(line)) continue;
        auto toks = io::split_ws(line);
        if (toks.size() != shape.size()) {
            throw ParseError(path, lineno,
                             "expected " + std::to_string(shape.size()) + " coordinates, got " +
                                 std::to_string(toks.size()));
        }
        io::parse_coords(path, lineno, toks, coords);
        try {
            if (!t.insert(coords)) ++s.duplicates;
        } catch (const BoundsError& e) {
            throw BoundsError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ++s.lines;
    }
    if (summary) *summary = s;
    return t;
}

inline void write_tensor(const std::string& path, const SparseBinaryTensor& t) {
    auto out = io::open_out(path);
    for (std::size_t i = 0; i < t.nnz(); ++i) {
        auto e = t.entry(i);
        for (std::size_t k = 0; k < e.size(); ++k) out << (k ? " " : "") << e[k];
        out << '\n';
    }
}

inline ModeNetwork load_network(const std::string& path, std::size_t mode, std::size_t size,
                                LoadSummary* summary = nullptr) {
    ModeNetwork net(mode, size);
    auto in = io::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    LoadSummary s;
    Coord ij[2];
    while (std::getline(in, line)) {
        ++lineno;
        if (io::skip_line(line)) continue;
        auto toks = io::split_ws(line);
        if (toks.size() != 2) throw ParseError(path, lineno, "expected two endpoints");
        io::parse_coords(path, lineno, toks, ij);
        try {
            if (!net.insert(ij[0], ij[1])) ++s.duplicates;
        } catch (const BoundsError& e) {
            throw BoundsError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
        ++s.lines;
    }
    if (summary) *summary = s;
    return net;
}

inline void write_network(const std::string& path, const ModeNetwork& net) {
    auto out = io::open_out(path);
    for (auto [i, j] : net.sorted_edges()) out << i << ' ' << j << '\n';
}

inline std::vector<TestEntry> load_test_file(const std::string& path, const Shape& shape) {
    std::vector<TestEntry> out;
    auto in = io::open_in(path);
    std::string line;
    std::size_t lineno = 0;
    std::vector<Coord> coords(shape.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (io::skip_line(line)) continue;
        auto toks = io::split_ws(line);
        if (toks.size() != shape.size() + 1) {
            throw ParseError(path, lineno, "expected " + std::to_string(shape.size()) + " coordinates and a label");
        }
        io::parse_coords(path, lineno, toks, coords);
        int label = 0;
        if (!io::parse_int(toks.back(), label) || label > 1) {
            throw ParseError(path, lineno, "label must be 0 or 1");
        }
        TestEntry e{TensorIndex(coords), label};
        try {
            e.index.validate(shape);
        } catch (const BoundsError& err) {
            throw BoundsError(path + ":" + std::to_string(lineno) + ": " + err.what());
        }
        out.push_back(std::move(e));
    }
    return out;
}

inline void write_test_file(const std::string& path, std::span<const TestEntry> entries) {
    auto out = io::open_out(path);
    for (const auto& e : entries) {
        for (auto c : e.index.coords()) out << c << ' ';
        out << e.label << '\n';
    }
}

}  // namespace ztpcp
