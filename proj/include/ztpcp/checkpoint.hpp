#pragma once

// Checkpoint text format. Field order is fixed so that checkpoints of
// identical runs are byte-identical and diff cleanly:
//
//   ztpcp-checkpoint 1
//   order K
//   shape n_1 ... n_K
//   rank R
//   iteration T
//   seed S
//   networks N m_1 ... m_N          (0-based modes)
//   factor k                        (then n_k rows of R values), for k = 0..K-1
//   lambda ...   p ...
//   beta n ...   h n ...            for each network n
//   suff 0|1
//   s_mode k (n_k rows) ... s_total ... v_node n (rows) v_total n ...   if suff 1
//   end
//
// A file may hold several checkpoints back to back (posterior samples).

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/io.hpp"
#include "ztpcp/model.hpp"

namespace ztpcp {

struct Checkpoint {
    std::uint64_t iteration = 0;
    std::uint64_t seed = 0;
    Parameters params;
    std::optional<SuffStats> suff;
};

namespace detail {

inline void write_values(std::ostream& os, std::span<const double> v) {
    for (std::size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << io::format_double(v[i]);
    os << '\n';
}

inline void write_matrix(std::ostream& os, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows(); ++i) write_values(os, m.row(i));
}

class CheckpointReader {
public:
    CheckpointReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    // Next non-empty line split into tokens; empty vector at end of input.
    std::vector<std::string> next() {
        std::string line;
        while (std::getline(in_, line)) {
            ++lineno_;
            if (io::skip_line(line)) continue;
            std::vector<std::string> out;
            for (auto t : io::split_ws(line)) out.emplace_back(t);
            return out;
        }
        return {};
    }

    std::vector<std::string> expect(const std::string& key, std::size_t min_fields = 1) {
        auto toks = next();
        if (toks.empty() || toks[0] != key || toks.size() < min_fields) fail("expected '" + key + "'");
        return toks;
    }

    std::uint64_t expect_uint(const std::string& key) {
        auto toks = expect(key, 2);
        return to_uint(toks[1]);
    }

    std::uint64_t to_uint(const std::string& tok) {
        std::uint64_t v = 0;
        if (!io::parse_int(tok, v)) fail("bad integer '" + tok + "'");
        return v;
    }

    double to_double(const std::string& tok) {
        double v = 0.0;
        if (!io::parse_double(tok, v)) fail("bad number '" + tok + "'");
        return v;
    }

    // "key [prefix...] v_1 ... v_n"
    std::vector<double> expect_values(const std::string& key, std::size_t skip, std::size_t n) {
        auto toks = expect(key);
        if (toks.size() != 1 + skip + n) fail("'" + key + "' needs " + std::to_string(n) + " values");
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = to_double(toks[1 + skip + i]);
        return v;
    }

    Matrix read_matrix(std::size_t rows, std::size_t cols) {
        Matrix m(rows, cols);
        for (std::size_t i = 0; i < rows; ++i) {
            auto toks = next();
            if (toks.size() != cols) fail("matrix row needs " + std::to_string(cols) + " values");
            for (std::size_t j = 0; j < cols; ++j) m(i, j) = to_double(toks[j]);
        }
        return m;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(name_, lineno_, what); }

private:
    std::istream& in_;
    std::string name_;
    std::size_t lineno_ = 0;
};

}  // namespace detail

inline void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
    const auto& p = ck.params;
    const std::size_t R = p.rank();
    os << "ztpcp-checkpoint 1\n";
    os << "order " << p.order() << '\n';
    os << "shape";
    for (const auto& u : p.factors) os << ' ' << u.rows();
    os << '\n';
    os << "rank " << R << '\n';
    os << "iteration " << ck.iteration << '\n';
    os << "seed " << ck.seed << '\n';
    os << "networks " << p.networks.size();
    for (const auto& n : p.networks) os << ' ' << n.mode;
    os << '\n';
    for (std::size_t k = 0; k < p.order(); ++k) {
        os << "factor " << k << '\n';
        detail::write_matrix(os, p.factors[k]);
    }
    os << "lambda ";
    detail::write_values(os, p.weights.lambda);
    os << "p ";
    detail::write_values(os, p.weights.p);
    for (std::size_t n = 0; n < p.networks.size(); ++n) {
        os << "beta " << n << ' ';
        detail::write_values(os, p.networks[n].beta);
        os << "h " << n << ' ';
        detail::write_values(os, p.networks[n].h);
    }
    os << "suff " << (ck.suff ? 1 : 0) << '\n';
    if (ck.suff) {
        const auto& s = *ck.suff;
        for (std::size_t k = 0; k < s.s_mode.size(); ++k) {
            os << "s_mode " << k << '\n';
            detail::write_matrix(os, s.s_mode[k]);
        }
        os << "s_total ";
        detail::write_values(os, s.s_total);
        for (std::size_t n = 0; n < s.networks.size(); ++n) {
            os << "v_node " << n << '\n';
            detail::write_matrix(os, s.networks[n].v_node);
            os << "v_total " << n << ' ';
            detail::write_values(os, s.networks[n].v_total);
        }
    }
    os << "end\n";
}

inline std::string checkpoint_string(const Checkpoint& ck) {
    std::ostringstream os;
    write_checkpoint(os, ck);
    return os.str();
}

inline void write_checkpoint_file(const std::string& path, const Checkpoint& ck) {
    auto out = io::open_out(path);
    write_checkpoint(out, ck);
}

inline void write_checkpoint_file(const std::string& path, std::span<const Checkpoint> cks) {
    auto out = io::open_out(path);
    for (const auto& ck : cks) write_checkpoint(out, ck);
}

/// Reads every checkpoint in the stream.
inline std::vector<Checkpoint> read_checkpoints(std::istream& in, const std::string& name = "<checkpoint>") {
    detail::CheckpointReader rd(in, name);
    std::vector<Checkpoint> out;
    for (;;) {
        auto head = rd.next();
        if (head.empty()) break;
        if (head.size() != 2 || head[0] != "ztpcp-checkpoint" || head[1] != "1") rd.fail("not a checkpoint header");
        Checkpoint ck;
        const std::size_t K = rd.expect_uint("order");
        auto shape_toks = rd.expect("shape");
        if (shape_toks.size() != K + 1) rd.fail("shape needs " + std::to_string(K) + " sizes");
        Shape shape;
        for (std::size_t k = 0; k < K; ++k) shape.push_back(rd.to_uint(shape_toks[k + 1]));
        const std::size_t R = rd.expect_uint("rank");
        ck.iteration = rd.expect_uint("iteration");
        ck.seed = rd.expect_uint("seed");
        auto net_toks = rd.expect("networks", 2);
        const std::size_t N = rd.to_uint(net_toks[1]);
        if (net_toks.size() != N + 2) rd.fail("networks line needs one mode per network");
        for (std::size_t k = 0; k < K; ++k) {
            auto t = rd.expect("factor", 2);
            if (rd.to_uint(t[1]) != k) rd.fail("factors out of order");
            ck.params.factors.push_back(rd.read_matrix(shape[k], R));
        }
        ck.params.weights.lambda = rd.expect_values("lambda", 0, R);
        ck.params.weights.p = rd.expect_values("p", 0, R);
        for (std::size_t n = 0; n < N; ++n) {
            NetworkWeights nw;
            nw.mode = rd.to_uint(net_toks[n + 2]);
            if (nw.mode >= K) rd.fail("network mode out of range");
            nw.beta = rd.expect_values("beta", 1, R);
            nw.h = rd.expect_values("h", 1, R);
            ck.params.networks.push_back(std::move(nw));
        }
        const auto has_suff = rd.expect_uint("suff");
        if (has_suff) {
            SuffStats s;
            for (std::size_t k = 0; k < K; ++k) {
                rd.expect("s_mode", 2);
                s.s_mode.push_back(rd.read_matrix(shape[k], R));
            }
            s.s_total = rd.expect_values("s_total", 0, R);
            for (std::size_t n = 0; n < N; ++n) {
                NetworkSuffStats v;
                v.mode = ck.params.networks[n].mode;
                rd.expect("v_node", 2);
                v.v_node = rd.read_matrix(shape[v.mode], R);
                v.v_total = rd.expect_values("v_total", 1, R);
                s.networks.push_back(std::move(v));
            }
            ck.suff = std::move(s);
        }
        rd.expect("end");
        out.push_back(std::move(ck));
    }
    if (out.empty()) throw DataError(name + " holds no checkpoint");
    return out;
}

inline std::vector<Checkpoint> read_checkpoint_file(const std::string& path) {
    auto in = io::open_in(path);
    return read_checkpoints(in, path);
}

inline Checkpoint to_checkpoint(const ModelState& st) { return {st.iteration, st.seed, st.params, st.suff}; }

}  // namespace ztpcp
