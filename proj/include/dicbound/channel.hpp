#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dicbound/errors.hpp"

namespace dicbound {

struct Alphabet {
    int size = 1;
};

/// Finite-alphabet deterministic interference channel with 2 users, or 3 users
/// in the symmetric-topology form (every receiver sees both other users).
///
/// f[i] is flat row-major over (x_i, v_j, v_k...) with the other users taken
/// in increasing order.
class DeterministicChannel {
public:
    DeterministicChannel() = default;
    DeterministicChannel(int user_count, std::vector<int> x_sizes, std::vector<int> v_sizes,
                         std::vector<int> y_sizes, std::vector<std::vector<int>> g,
                         std::vector<std::vector<int>> f, std::string name = "custom")
        : users_(user_count), x_(std::move(x_sizes)), v_(std::move(v_sizes)), y_(std::move(y_sizes)),
          g_(std::move(g)), f_(std::move(f)), name_(std::move(name)) {
        check_structure();
    }

    int user_count() const { return users_; }
    int x_size(int i) const { return x_[i]; }
    int v_size(int i) const { return v_[i]; }
    int y_size(int i) const { return y_[i]; }
    Alphabet input_alphabet(int i) const { return {x_[i]}; }
    const std::string& name() const { return name_; }
    const std::vector<int>& x_sizes() const { return x_; }
    const std::vector<int>& v_sizes() const { return v_; }
    const std::vector<int>& y_sizes() const { return y_; }
    const std::vector<std::vector<int>>& g_tables() const { return g_; }
    const std::vector<std::vector<int>>& f_tables() const { return f_; }

    /// Users interfering at receiver i, increasing.
    std::vector<int> others(int i) const {
        std::vector<int> o;
        for (int u = 0; u < users_; ++u)
            if (u != i) o.push_back(u);
        return o;
    }

    int interference(int i, int x) const { return g_[i][x]; }

    std::size_t f_index(int i, int x, const int* v) const {
        std::size_t idx = static_cast<std::size_t>(x);
        int t = 0;
        for (int u = 0; u < users_; ++u) {
            if (u == i) continue;
            idx = idx * static_cast<std::size_t>(v_[u]) + static_cast<std::size_t>(v[t++]);
        }
        return idx;
    }

    /// v holds the interfering symbols in others(i) order.
    int receive(int i, int x, const int* v) const { return f_[i][f_index(i, x, v)]; }

    /// Number of interference tuples seen by receiver i.
    std::size_t tuple_count(int i) const {
        std::size_t n = 1;
        for (int u : others(i)) n *= static_cast<std::size_t>(v_[u]);
        return n;
    }

    bool operator==(const DeterministicChannel& o) const {
        return users_ == o.users_ && x_ == o.x_ && v_ == o.v_ && y_ == o.y_ && g_ == o.g_ && f_ == o.f_;
    }

private:
    void check_structure() const {
        if (users_ != 2 && users_ != 3) throw StructuralError("user_count must be 2 or 3");
        auto sized = [&](const auto& v, const char* what) {
            if (static_cast<int>(v.size()) != users_)
                throw StructuralError(std::string(what) + ": expected one entry per user");
        };
        sized(x_, "alphabet_sizes");
        sized(v_, "v_sizes");
        sized(y_, "y_sizes");
        sized(g_, "g");
        sized(f_, "f");
        for (int i = 0; i < users_; ++i) {
            if (x_[i] < 1 || v_[i] < 1 || y_[i] < 1) throw StructuralError("alphabet sizes must be >= 1");
            if (static_cast<int>(g_[i].size()) != x_[i])
                throw StructuralError("g[" + std::to_string(i + 1) + "]: table length must equal |X" +
                                      std::to_string(i + 1) + "|");
            for (int v : g_[i])
                if (v < 0 || v >= v_[i])
                    throw StructuralError("g[" + std::to_string(i + 1) + "]: symbol out of range");
        }
        for (int i = 0; i < users_; ++i) {
            std::size_t want = static_cast<std::size_t>(x_[i]) * tuple_count(i);
            if (f_[i].size() != want)
                throw StructuralError("f[" + std::to_string(i + 1) + "]: expected " + std::to_string(want) +
                                      " entries, got " + std::to_string(f_[i].size()));
            for (int y : f_[i])
                if (y < 0 || y >= y_[i])
                    throw StructuralError("f[" + std::to_string(i + 1) + "]: symbol out of range");
        }
    }

    int users_ = 0;
    std::vector<int> x_, v_, y_;
    std::vector<std::vector<int>> g_, f_;
    std::string name_;
};

struct Collision {
    int user = 0;  // 0-based
    int x = 0;
    int y = 0;
    std::vector<std::vector<int>> tuples;  // interference tuples mapping to y
};

struct ValidationReport {
    bool valid = true;
    std::vector<Collision> violations;
};

/// Injectivity of f_i(x_i, .) in the interference tuple, for every user and x_i.
inline ValidationReport validate_channel(const DeterministicChannel& c) {
    ValidationReport rep;
    for (int i = 0; i < c.user_count(); ++i) {
        auto oth = c.others(i);
        for (int x = 0; x < c.x_size(i); ++x) {
            std::map<int, std::vector<std::vector<int>>> seen;
            std::vector<int> v(oth.size(), 0);
            for (std::size_t t = 0; t < c.tuple_count(i); ++t) {
                seen[c.receive(i, x, v.data())].push_back(v);
                for (int p = static_cast<int>(v.size()) - 1; p >= 0; --p) {
                    if (++v[p] < c.v_size(oth[p])) break;
                    v[p] = 0;
                }
            }
            for (auto& [y, tuples] : seen)
                if (tuples.size() > 1) rep.violations.push_back({i, x, y, tuples});
        }
    }
    rep.valid = rep.violations.empty();
    return rep;
}

/// Built-in families: xor2, shift2 [q, n_direct, n_cross], concat3.
inline DeterministicChannel builtin_channel(const std::string& family, const std::vector<int>& params = {}) {
    if (family == "xor2") {
        if (!params.empty()) throw InvariantError("family-parameters", "xor2 takes no parameters");
        std::vector<std::vector<int>> g{{0, 1}, {0, 1}};
        std::vector<std::vector<int>> f{{0, 1, 1, 0}, {0, 1, 1, 0}};
        return DeterministicChannel(2, {2, 2}, {2, 2}, {2, 2}, g, f, "xor2");
    }
    if (family == "shift2") {
        if (params.size() != 3) throw InvariantError("family-parameters", "shift2 expects [q, n_direct, n_cross]");
        int q = params[0], nd = params[1], nc = params[2];
        if (q < 1 || q > 12) throw InvariantError("family-parameters", "shift2: q must be in 1..12");
        if (nc < 0 || nd < 0) throw InvariantError("family-parameters", "shift2: negative level");
        if (nc > nd) throw InvariantError("family-parameters", "shift2: n_cross > n_direct");
        if (nd > q) throw InvariantError("family-parameters", "shift2: n_direct > q");
        int nx = 1 << q, nv = 1 << nc, ny = 1 << nd;
        std::vector<std::vector<int>> g(2), f(2);
        for (int i = 0; i < 2; ++i) {
            for (int x = 0; x < nx; ++x) g[i].push_back(x >> (q - nc));
            for (int x = 0; x < nx; ++x)
                for (int v = 0; v < nv; ++v) f[i].push_back((x >> (q - nd)) ^ v);
        }
        return DeterministicChannel(2, {nx, nx}, {nv, nv}, {ny, ny}, g, f,
                                    "shift2(" + std::to_string(q) + "," + std::to_string(nd) + "," +
                                        std::to_string(nc) + ")");
    }
    if (family == "concat3") {
        if (!params.empty()) throw InvariantError("family-parameters", "concat3 takes no parameters");
        std::vector<std::vector<int>> g(3, {0, 1}), f(3);
        for (int i = 0; i < 3; ++i)
            for (int x = 0; x < 2; ++x)
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) f[i].push_back(x + 2 * a + 4 * b);
        return DeterministicChannel(3, {2, 2, 2}, {2, 2, 2}, {8, 8, 8}, g, f, "concat3");
    }
    throw InvariantError("channel-family", "unknown channel family: " + family);
}

/// Parses "xor2", "concat3", "shift2(3,3,1)" or "shift2:3,3,1".
inline DeterministicChannel builtin_channel_from_name(const std::string& spec) {
    auto open = spec.find_first_of("(:");
    if (open == std::string::npos) return builtin_channel(spec);
    std::string fam = spec.substr(0, open);
    std::string rest = spec.substr(open + 1);
    if (!rest.empty() && rest.back() == ')') rest.pop_back();
    std::vector<int> ps;
    std::size_t pos = 0;
    while (pos <= rest.size() && !rest.empty()) {
        auto comma = rest.find(',', pos);
        std::string tok = rest.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
        try {
            ps.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw InvariantError("family-parameters", "bad channel parameter: '" + tok + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return builtin_channel(fam, ps);
}

inline DeterministicChannel channel_from_json(const nlohmann::json& j) {
    if (j.contains("family")) {
        std::vector<int> ps;
        if (j.contains("params")) ps = j.at("params").get<std::vector<int>>();
        return builtin_channel(j.at("family").get<std::string>(), ps);
    }
    for (const char* key : {"user_count", "alphabet_sizes", "g", "f"})
        if (!j.contains(key)) throw StructuralError(std::string("channel file: missing field '") + key + "'");
    int users = j.at("user_count").get<int>();
    auto xs = j.at("alphabet_sizes").get<std::vector<int>>();
    auto g = j.at("g").get<std::vector<std::vector<int>>>();
    auto f = j.at("f").get<std::vector<std::vector<int>>>();
    auto infer = [](const std::vector<std::vector<int>>& t) {
        std::vector<int> out;
        for (auto& row : t) {
            int m = 0;
            for (int v : row) m = std::max(m, v + 1);
            out.push_back(std::max(m, 1));
        }
        return out;
    };
    auto vs = j.contains("v_sizes") ? j.at("v_sizes").get<std::vector<int>>() : infer(g);
    auto ys = j.contains("y_sizes") ? j.at("y_sizes").get<std::vector<int>>() : infer(f);
    std::string name = j.value("name", std::string("custom"));
    return DeterministicChannel(users, xs, vs, ys, g, f, name);
}

inline nlohmann::json channel_to_json(const DeterministicChannel& c) {
    return nlohmann::json{{"name", c.name()},         {"user_count", c.user_count()},
                          {"alphabet_sizes", c.x_sizes()}, {"v_sizes", c.v_sizes()},
                          {"y_sizes", c.y_sizes()},   {"g", c.g_tables()},
                          {"f", c.f_tables()}};
}

}  // namespace dicbound
