#pragma once

// Line-oriented "key = value" run configuration. Keys may repeat only where
// noted (network). Command-line flags replace every file value of their key.

#include <algorithm>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ztpcp/error.hpp"
#include "ztpcp/io.hpp"
#include "ztpcp/model.hpp"
#include "ztpcp/split.hpp"
#include "ztpcp/tensor.hpp"

namespace ztpcp {

using KeyValues = std::map<std::string, std::vector<std::string>>;

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline KeyValues parse_key_values(std::istream& in, const std::string& name) {
    KeyValues kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (io::skip_line(line)) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError(name, lineno, "expected 'key = value'");
        auto key = trim(std::string_view(line).substr(0, eq));
        auto value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty()) throw ParseError(name, lineno, "empty key");
        kv[key].push_back(value);
    }
    return kv;
}

inline KeyValues load_key_values(const std::string& path) {
    auto in = io::open_in(path);
    try {
        return parse_key_values(in, path);
    } catch (const ParseError& e) {
        throw ConfigError(e.what());
    }
}

// Later maps replace earlier ones key by key.
inline KeyValues merge(KeyValues base, const KeyValues& overrides) {
    for (const auto& [k, v] : overrides) base[k] = v;
    return base;
}

namespace cfg {

inline std::vector<std::string> split_list(const std::string& s, const std::string& seps = ", \tx") {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (seps.find(ch) != std::string::npos) {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
    Int out{};
    if (!io::parse_int(v, out)) throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return out;
}

inline double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    if (!io::parse_double(v, out)) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline Shape to_shape(const std::string& key, const std::string& v) {
    Shape s;
    for (const auto& t : split_list(v)) s.push_back(to_int<std::size_t>(key, t));
    if (s.size() < 2) throw ConfigError(key + ": need at least two mode sizes");
    return s;
}

inline std::vector<double> to_doubles(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& t : split_list(v, ", \t")) out.push_back(to_double(key, t));
    return out;
}

// One-based mode number from the user, returned 0-based.
inline std::size_t to_mode(const std::string& key, const std::string& v) {
    const auto m = to_int<std::size_t>(key, v);
    if (m == 0) throw ConfigError(key + ": modes are numbered from 1");
    return m - 1;
}

// Reads a key that must appear at most once.
class Reader {
public:
    explicit Reader(const KeyValues& kv) : kv_(kv) {}

    const std::string* get(const std::string& key) {
        used_.push_back(key);
        auto it = kv_.find(key);
        if (it == kv_.end() || it->second.empty()) return nullptr;
        if (it->second.size() > 1) throw ConfigError(key + " given more than once");
        return &it->second.front();
    }

    const std::vector<std::string>* get_all(const std::string& key) {
        used_.push_back(key);
        auto it = kv_.find(key);
        return it == kv_.end() ? nullptr : &it->second;
    }

    void reject_unknown() const {
        for (const auto& [k, v] : kv_) {
            if (std::find(used_.begin(), used_.end(), k) == used_.end()) throw ConfigError("unknown key '" + k + "'");
        }
    }

private:
    const KeyValues& kv_;
    std::vector<std::string> used_;
};

}  // namespace cfg

struct NetworkSource {
    std::size_t mode = 0;  // 0-based
    std::string path;
};

struct HoldoutSpec {
    bool enabled = false;
    SplitSpec split;
};

/// Everything a fit needs. Every field has a default; see README for the key list.
struct RunConfig {
    std::string tensor;
    Shape shape;
    std::vector<NetworkSource> networks;
    std::size_t rank = 20;
    std::size_t iters = 1000;
    std::size_t burnin = 500;
    std::size_t thin = 1;
    std::uint64_t seed = 1;
    std::string inference = "batch";  // batch | online
    double minibatch_fraction = 0.1;
    std::size_t minibatch = 0;          // absolute tensor batch; 0 -> fraction
    std::size_t network_minibatch = 0;  // absolute per-network batch; 0 -> fraction
    std::size_t samples_per_refresh = 1;
    bool reweight = true;
    std::string summary = "analytic";  // analytic | average
    double decay = 1.0;
    double zeros_per_one = 1.0;
    std::string holdout = "none";  // none | random:F | coldstart:MODE:BEGIN:END
    double prune_tau = 1e-3;
    std::string out = "out";
    std::size_t threads = 1;
    std::size_t log_every = 10;
    bool keep_samples = true;
    // Hyperparameters; epsilon and alpha default to 1/rank (1/2 at rank 1) when left at 0.
    double a = 1.0;
    double c = 10.0;
    double epsilon = 0.0;
    double g = 0.1;
    double d = 10.0;
    double alpha = 0.0;
    double f = 0.1;

    Hyperparams hyperparams() const {
        Hyperparams h = Hyperparams::defaults(shape.size(), rank);
        h.a.assign(shape.size(), a);
        h.c = c;
        h.d = d;
        if (epsilon > 0.0) h.epsilon = epsilon;
        if (alpha > 0.0) h.alpha = alpha;
        h.g.assign(rank, g);
        h.f.assign(rank, f);
        return h;
    }

    HoldoutSpec holdout_spec() const {
        HoldoutSpec hs;
        auto parts = cfg::split_list(holdout, ":");
        if (parts.empty() || parts[0] == "none") return hs;
        hs.enabled = true;
        if (parts[0] == "random" && parts.size() == 2) {
            hs.split = SplitSpec::random_entry(cfg::to_double("holdout", parts[1]), seed);
        } else if (parts[0] == "coldstart" && parts.size() == 4) {
            hs.split = SplitSpec::cold_start(cfg::to_mode("holdout", parts[1]), cfg::to_int<Coord>("holdout", parts[2]),
                                             cfg::to_int<Coord>("holdout", parts[3]), seed);
        } else {
            throw ConfigError("holdout must be none, random:FRACTION or coldstart:MODE:BEGIN:END");
        }
        return hs;
    }

    void validate() const {
        if (tensor.empty()) throw ConfigError("tensor path is required");
        if (shape.size() < 2) throw ConfigError("shape is required (at least two modes)");
        if (inference != "batch" && inference != "online") throw ConfigError("inference must be batch or online");
        if (summary != "analytic" && summary != "average") throw ConfigError("summary must be analytic or average");
        if (!(minibatch_fraction > 0.0 && minibatch_fraction <= 1.0)) throw ConfigError("minibatch_fraction must lie in (0, 1]");
        if (threads == 0) throw ConfigError("threads must be >= 1");
        for (const auto& n : networks) {
            if (n.mode >= shape.size()) throw ConfigError("network on nonexistent " + mode_name(n.mode));
        }
        if (iters <= burnin) throw ConfigError("iters (" + std::to_string(iters) + ") must exceed burnin (" + std::to_string(burnin) + ")");
        const auto hs = holdout_spec();
        if (hs.enabled && hs.split.kind == SplitSpec::Kind::RandomEntry) {
            if (!(hs.split.fraction > 0.0 && hs.split.fraction < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
        } else if (hs.enabled) {
            if (hs.split.mode >= shape.size()) throw ConfigError("holdout on nonexistent " + mode_name(hs.split.mode));
            if (hs.split.slice_begin >= hs.split.slice_end || hs.split.slice_end > shape[hs.split.mode]) {
                throw ConfigError("holdout slice range must satisfy BEGIN < END <= size of " + mode_name(hs.split.mode));
            }
        }
        hyperparams().validate(shape.size());
    }

    static RunConfig from_key_values(const KeyValues& kv) {
        RunConfig c;
        cfg::Reader rd(kv);
        if (auto v = rd.get("tensor")) c.tensor = *v;
        if (auto v = rd.get("shape")) c.shape = cfg::to_shape("shape", *v);
        if (auto vs = rd.get_all("network")) {
            for (const auto& v : *vs) {
                const auto colon = v.find(':');
                if (colon == std::string::npos) throw ConfigError("network: expected MODE:PATH, got '" + v + "'");
                c.networks.push_back({cfg::to_mode("network", v.substr(0, colon)), v.substr(colon + 1)});
            }
        }
        auto get_size = [&](const char* key, std::size_t& dst) {
            if (auto v = rd.get(key)) dst = cfg::to_int<std::size_t>(key, *v);
        };
        auto get_double = [&](const char* key, double& dst) {
            if (auto v = rd.get(key)) dst = cfg::to_double(key, *v);
        };
        auto get_string = [&](const char* key, std::string& dst) {
            if (auto v = rd.get(key)) dst = *v;
        };
        auto get_bool = [&](const char* key, bool& dst) {
            if (auto v = rd.get(key)) dst = cfg::to_bool(key, *v);
        };
        get_size("rank", c.rank);
        get_size("iters", c.iters);
        get_size("burnin", c.burnin);
        get_size("thin", c.thin);
        if (auto v = rd.get("seed")) c.seed = cfg::to_int<std::uint64_t>("seed", *v);
        get_string("inference", c.inference);
        get_double("minibatch_fraction", c.minibatch_fraction);
        get_size("minibatch", c.minibatch);
        get_size("network_minibatch", c.network_minibatch);
        get_size("samples_per_refresh", c.samples_per_refresh);
        get_bool("reweight", c.reweight);
        get_string("summary", c.summary);
        get_double("decay", c.decay);
        get_double("zeros_per_one", c.zeros_per_one);
        get_string("holdout", c.holdout);
        get_double("prune_tau", c.prune_tau);
        get_string("out", c.out);
        get_size("threads", c.threads);
        get_size("log_every", c.log_every);
        get_bool("keep_samples", c.keep_samples);
        get_double("a", c.a);
        get_double("c", c.c);
        get_double("epsilon", c.epsilon);
        get_double("g", c.g);
        get_double("d", c.d);
        get_double("alpha", c.alpha);
        get_double("f", c.f);
        rd.reject_unknown();
        return c;
    }

    /// Canonical key = value dump, one key per line in a fixed order.
    std::string to_text() const {
        std::ostringstream os;
        os << "tensor = " << tensor << '\n';
        os << "shape = ";
        for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
        os << '\n';
        for (const auto& n : networks) os << "network = " << n.mode + 1 << ':' << n.path << '\n';
        os << "rank = " << rank << "\niters = " << iters << "\nburnin = " << burnin << "\nthin = " << thin
           << "\nseed = " << seed << "\ninference = " << inference
           << "\nminibatch_fraction = " << io::format_double(minibatch_fraction) << "\nminibatch = " << minibatch
           << "\nnetwork_minibatch = " << network_minibatch << "\nsamples_per_refresh = " << samples_per_refresh
           << "\nreweight = " << (reweight ? "true" : "false") << "\nsummary = " << summary
           << "\ndecay = " << io::format_double(decay) << "\nzeros_per_one = " << io::format_double(zeros_per_one)
           << "\nholdout = " << holdout << "\nprune_tau = " << io::format_double(prune_tau) << "\nout = " << out
           << "\nthreads = " << threads << "\nlog_every = " << log_every
           << "\nkeep_samples = " << (keep_samples ? "true" : "false") << "\na = " << io::format_double(a)
           << "\nc = " << io::format_double(c) << "\nepsilon = " << io::format_double(epsilon)
           << "\ng = " << io::format_double(g) << "\nd = " << io::format_double(d)
           << "\nalpha = " << io::format_double(alpha) << "\nf = " << io::format_double(f) << '\n';
        return os.str();
    }
};

inline const std::vector<std::string>& run_config_keys() {
    static const std::vector<std::string> keys{
        "tensor",    "shape",       "network",  "rank",      "iters",        "burnin",
        "thin",      "seed",        "inference", "minibatch_fraction", "minibatch", "network_minibatch",
        "samples_per_refresh", "reweight", "summary", "decay", "zeros_per_one", "holdout",
        "prune_tau", "out",         "threads",  "log_every", "keep_samples", "a",
        "c",         "epsilon",     "g",        "d",         "alpha",        "f"};
    return keys;
}

}  // namespace ztpcp
