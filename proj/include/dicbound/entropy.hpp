#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <unordered_map>
#include <vector>

#include "dicbound/distribution.hpp"
#include "dicbound/errors.hpp"
#include "dicbound/network.hpp"

namespace dicbound {

enum class VarKind { X = 0, V = 1, Y = 2 };

struct VariableId {
    VarKind kind = VarKind::X;
    int pair = 0;
    int code() const { return pair * 3 + static_cast<int>(kind); }
    bool operator==(const VariableId&) const = default;
    bool operator<(const VariableId& o) const { return code() < o.code(); }
};

using VarSet = std::vector<VariableId>;

inline VariableId X(int pair) { return {VarKind::X, pair}; }
inline VariableId V(int pair) { return {VarKind::V, pair}; }
inline VariableId Y(int pair) { return {VarKind::Y, pair}; }

inline std::string variable_name(const NetworkGraph& net, VariableId v) {
    static const char* k = "XVY";
    return k[static_cast<int>(v.kind)] + net.pair_suffix(v.pair);
}

/// "X1", "V2", "Y1.3"; replica defaults to 1.
inline VariableId parse_variable(const NetworkGraph& net, const std::string& s) {
    auto bad = [&] { return InvariantError("unknown-variable", "unknown variable '" + s + "'"); };
    if (s.size() < 2) throw bad();
    VarKind kind;
    switch (s[0]) {
        case 'X': kind = VarKind::X; break;
        case 'V': kind = VarKind::V; break;
        case 'Y': kind = VarKind::Y; break;
        default: throw bad();
    }
    NodeRef n;
    try {
        n = net.parse_label("S" + s.substr(1));
    } catch (const Error&) {
        throw bad();
    }
    return {kind, n.pair};
}

inline std::size_t default_atom_budget() {
    if (const char* e = std::getenv("DICBOUND_BUDGET_ATOMS")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(e, &end, 10);
        if (end != e && v > 0) return static_cast<std::size_t>(v);
    }
    return std::size_t{1} << 22;
}

namespace detail {

inline int var_size(const NetworkGraph& net, VariableId v) {
    const auto& c = net.channel();
    int u = net.pair(v.pair).user;
    switch (v.kind) {
        case VarKind::X: return c.x_size(u);
        case VarKind::V: return c.v_size(u);
        default: return c.y_size(u);
    }
}

/// Value of v given source symbols indexed by pair.
inline int var_value(const NetworkGraph& net, VariableId v, const int* x) {
    const auto& c = net.channel();
    const auto& pr = net.pair(v.pair);
    switch (v.kind) {
        case VarKind::X: return x[v.pair];
        case VarKind::V: return c.interference(pr.user, x[v.pair]);
        default: {
            int vs[2] = {0, 0};
            for (std::size_t t = 0; t < pr.interferers.size(); ++t) {
                int q = pr.interferers[t];
                vs[t] = c.interference(net.pair(q).user, x[q]);
            }
            return c.receive(pr.user, x[v.pair], vs);
        }
    }
}

inline double plogp_sum(const std::vector<double>& mass) {
    double h = 0;
    for (double p : mass)
        if (p > 0) h -= p * std::log2(p);
    return h;
}

/// Merges equal projections. Buckets are numbered in first-appearance order so
/// the final sum is independent of hashing.
class Projector {
public:
    Projector(const NetworkGraph& net, VarSet vars) : net_(net), vars_(std::move(vars)) {
        long double space = 1;
        for (auto v : vars_) {
            radix_.push_back(static_cast<std::uint64_t>(var_size(net, v)));
            space *= static_cast<long double>(radix_.back());
        }
        packed_ = space < 1.8e19L;
        buf_.resize(vars_.size());
    }

    void add(const int* x, double p) {
        if (packed_) {
            std::uint64_t key = 0;
            for (std::size_t i = 0; i < vars_.size(); ++i)
                key = key * radix_[i] + static_cast<std::uint64_t>(var_value(net_, vars_[i], x));
            auto [it, fresh] = packed_idx_.try_emplace(key, mass_.size());
            if (fresh) mass_.push_back(0.0);
            mass_[it->second] += p;
        } else {
            for (std::size_t i = 0; i < vars_.size(); ++i) buf_[i] = var_value(net_, vars_[i], x);
            auto [it, fresh] = wide_idx_.try_emplace(buf_, mass_.size());
            if (fresh) mass_.push_back(0.0);
            mass_[it->second] += p;
        }
    }

    double entropy() const { return plogp_sum(mass_); }
    std::size_t bucket_count() const { return mass_.size(); }

private:
    const NetworkGraph& net_;
    VarSet vars_;
    std::vector<std::uint64_t> radix_;
    bool packed_ = true;
    std::unordered_map<std::uint64_t, std::size_t> packed_idx_;
    std::map<std::vector<int>, std::size_t> wide_idx_;
    std::vector<int> buf_;
    std::vector<double> mass_;
};

inline VarSet normalize(VarSet s) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    return s;
}

}  // namespace detail

/// Exact joint law of every X, V, Y symbol of a network. Atoms are the
/// supported source tuples only; V and Y are recomputed from them on demand.
class JointTable {
public:
    JointTable(const NetworkGraph& net, std::vector<std::uint16_t> atoms, std::vector<double> probs)
        : net_(net), atoms_(std::move(atoms)), probs_(std::move(probs)) {}

    const NetworkGraph& network() const { return net_; }
    std::size_t atom_count() const { return probs_.size(); }
    double probability(std::size_t a) const { return probs_[a]; }

    /// All variables: X, V, Y of each pair in pair order.
    VarSet variables() const {
        VarSet out;
        for (int p = 0; p < net_.pair_count(); ++p)
            for (auto k : {VarKind::X, VarKind::V, VarKind::Y}) out.push_back({k, p});
        return out;
    }

    std::vector<int> sources(std::size_t a) const {
        std::size_t n = static_cast<std::size_t>(net_.pair_count());
        return std::vector<int>(atoms_.begin() + static_cast<std::ptrdiff_t>(a * n),
                                atoms_.begin() + static_cast<std::ptrdiff_t>((a + 1) * n));
    }

    int value(std::size_t a, VariableId v) const {
        auto x = sources(a);
        return detail::var_value(net_, v, x.data());
    }

    double entropy(const VarSet& subset) const {
        auto s = detail::normalize(subset);
        for (auto v : s)
            if (v.pair < 0 || v.pair >= net_.pair_count())
                throw InvariantError("unknown-variable", "variable outside the table");
        if (s.empty()) return 0.0;
        detail::Projector proj(net_, s);
        std::size_t n = static_cast<std::size_t>(net_.pair_count());
        std::vector<int> x(n);
        for (std::size_t a = 0; a < probs_.size(); ++a) {
            for (std::size_t i = 0; i < n; ++i) x[i] = atoms_[a * n + i];
            proj.add(x.data(), probs_[a]);
        }
        return proj.entropy();
    }

private:
    NetworkGraph net_;
    std::vector<std::uint16_t> atoms_;
    std::vector<double> probs_;
};

/// Enumerates the supported source tuples. Only tuples with positive mass
/// become atoms, so the count never exceeds the product of alphabet sizes.
inline JointTable induce_joint(const NetworkGraph& net, const SourceDistribution& dist,
                               std::size_t budget = default_atom_budget()) {
    auto sizes = source_sizes(net);
    dist.check(sizes);
    std::size_t n = sizes.size();
    std::vector<std::uint16_t> atoms;
    std::vector<double> probs;
    if (dist.is_product()) {
        std::vector<std::vector<int>> support(n);
        long double count = 1;
        for (std::size_t i = 0; i < n; ++i) {
            for (int x = 0; x < sizes[i]; ++x)
                if (dist.marginals[i][x] > 0) support[i].push_back(x);
            count *= static_cast<long double>(support[i].size());
        }
        if (count > static_cast<long double>(budget))
            throw BudgetError("joint table needs " + std::to_string(static_cast<double>(count)) +
                              " atoms, cap is " + std::to_string(budget));
        std::vector<std::size_t> pos(n, 0);
        for (std::size_t a = 0; a < static_cast<std::size_t>(count); ++a) {
            double p = 1;
            for (std::size_t i = 0; i < n; ++i) {
                int x = support[i][pos[i]];
                atoms.push_back(static_cast<std::uint16_t>(x));
                p *= dist.marginals[i][x];
            }
            probs.push_back(p);
            for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
                if (++pos[i] < support[i].size()) break;
                pos[i] = 0;
            }
        }
    } else {
        std::size_t nnz = 0;
        for (double p : dist.joint) nnz += p > 0;
        if (nnz > budget)
            throw BudgetError("joint table needs " + std::to_string(nnz) + " atoms, cap is " + std::to_string(budget));
        std::vector<int> x(n, 0);
        for (std::size_t a = 0; a < dist.joint.size(); ++a) {
            if (dist.joint[a] > 0) {
                for (int v : x) atoms.push_back(static_cast<std::uint16_t>(v));
                probs.push_back(dist.joint[a]);
            }
            for (int i = static_cast<int>(n) - 1; i >= 0; --i) {
                if (++x[i] < sizes[i]) break;
                x[i] = 0;
            }
        }
    }
    return JointTable(net, std::move(atoms), std::move(probs));
}

inline JointTable induce_joint(const DeterministicChannel& c, const SourceDistribution& dist) {
    return induce_joint(base_network(c), dist);
}

inline double entropy(const JointTable& t, const VarSet& a) { return t.entropy(a); }

inline VarSet set_union(const VarSet& a, const VarSet& b) {
    VarSet u = a;
    u.insert(u.end(), b.begin(), b.end());
    return detail::normalize(u);
}

inline double conditional_entropy(const JointTable& t, const VarSet& a, const VarSet& b) {
    return t.entropy(set_union(a, b)) - t.entropy(b);
}

inline double mutual_information(const JointTable& t, const VarSet& a, const VarSet& b) {
    return t.entropy(a) + t.entropy(b) - t.entropy(set_union(a, b));
}

/// Entropy oracle for large networks. Under a product law, conditioning on
/// the X's in a set splits the rest into independent components, each
/// enumerated on its own:
///   H(S) = sum_{s in B} H(X_s) + sum_C [H(Z_C, X_{B_C}) - H(X_{B_C})]
/// Joint laws fall back to one full table.
class EntropyEvaluator {
public:
    EntropyEvaluator(const NetworkGraph& net, const SourceDistribution& dist,
                     std::size_t budget = default_atom_budget())
        : net_(net), dist_(dist), budget_(budget) {
        auto sizes = source_sizes(net_);
        dist_.check(sizes);
        if (dist_.is_product()) {
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                std::vector<int> sup;
                for (int x = 0; x < sizes[i]; ++x)
                    if (dist_.marginals[i][x] > 0) sup.push_back(x);
                support_.push_back(std::move(sup));
                marginal_h_.push_back(detail::plogp_sum(dist_.marginals[i]));
            }
        } else {
            table_ = std::make_unique<JointTable>(induce_joint(net_, dist_, budget_));
        }
    }

    const NetworkGraph& network() const { return net_; }
    const SourceDistribution& distribution() const { return dist_; }

    double entropy(const VarSet& subset) {
        auto s = detail::normalize(subset);
        for (auto v : s)
            if (v.pair < 0 || v.pair >= net_.pair_count())
                throw InvariantError("unknown-variable", "variable outside the network");
        std::vector<int> key;
        for (auto v : s) key.push_back(v.code());
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
        double h = table_ ? table_->entropy(s) : product_entropy(s);
        cache_.emplace(std::move(key), h);
        return h;
    }

    double conditional(const VarSet& a, const VarSet& b) { return entropy(set_union(a, b)) - entropy(b); }
    double mutual(const VarSet& a, const VarSet& b) {
        return entropy(a) + entropy(b) - entropy(set_union(a, b));
    }

private:
    std::vector<int> deps(VariableId v) const {
        if (v.kind != VarKind::Y) return {v.pair};
        std::vector<int> d{v.pair};
        for (int q : net_.pair(v.pair).interferers) d.push_back(q);
        return d;
    }

    double product_entropy(const VarSet& s) {
        int n = net_.pair_count();
        std::vector<char> in_b(n, 0);
        for (auto v : s)
            if (v.kind == VarKind::X) in_b[v.pair] = 1;
        double h = 0;
        for (int p = 0; p < n; ++p)
            if (in_b[p]) h += marginal_h_[p];

        std::vector<int> parent(n);
        std::iota(parent.begin(), parent.end(), 0);
        auto find = [&](int a) {
            while (parent[a] != a) a = parent[a] = parent[parent[a]];
            return a;
        };
        VarSet rest;
        std::vector<int> anchor;
        for (auto v : s) {
            if (v.kind == VarKind::X) continue;
            int first = -1;
            for (int d : deps(v)) {
                if (in_b[d]) continue;
                if (first < 0)
                    first = d;
                else
                    parent[find(d)] = find(first);
            }
            if (first < 0) continue;  // a function of conditioned sources only
            rest.push_back(v);
            anchor.push_back(first);
        }
        std::map<int, std::vector<std::size_t>> comps;  // keyed by root, ordered
        for (std::size_t i = 0; i < rest.size(); ++i) comps[find(anchor[i])].push_back(i);

        std::vector<std::pair<int, VarSet>> ordered;
        for (auto& [root, idx] : comps) {
            VarSet z;
            for (auto i : idx) z.push_back(rest[i]);
            int lo = n;
            for (auto v : z)
                for (int d : deps(v)) lo = std::min(lo, d);
            ordered.emplace_back(lo, std::move(z));
        }
        std::sort(ordered.begin(), ordered.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        for (auto& [lo, z] : ordered) h += component_entropy(z, in_b);
        return h;
    }

    double component_entropy(const VarSet& z, const std::vector<char>& in_b) {
        std::vector<int> srcs;
        for (auto v : z)
            for (int d : deps(v)) srcs.push_back(d);
        std::sort(srcs.begin(), srcs.end());
        srcs.erase(std::unique(srcs.begin(), srcs.end()), srcs.end());
        VarSet proj_vars = z;
        double hb = 0;
        long double count = 1;
        for (int sidx : srcs) {
            count *= static_cast<long double>(support_[sidx].size());
            if (in_b[sidx]) {
                proj_vars.push_back(X(sidx));
                hb += marginal_h_[sidx];
            }
        }
        if (count > static_cast<long double>(budget_))
            throw BudgetError("entropy component needs " + std::to_string(static_cast<double>(count)) +
                              " atoms, cap is " + std::to_string(budget_));
        detail::Projector proj(net_, detail::normalize(proj_vars));
        std::vector<int> x(static_cast<std::size_t>(net_.pair_count()), 0);
        std::vector<std::size_t> pos(srcs.size(), 0);
        for (std::size_t a = 0; a < static_cast<std::size_t>(count); ++a) {
            double p = 1;
            for (std::size_t i = 0; i < srcs.size(); ++i) {
                int sidx = srcs[i];
                x[sidx] = support_[sidx][pos[i]];
                p *= dist_.marginals[sidx][x[sidx]];
            }
            proj.add(x.data(), p);
            for (int i = static_cast<int>(srcs.size()) - 1; i >= 0; --i) {
                if (++pos[i] < support_[srcs[i]].size()) break;
                pos[i] = 0;
            }
        }
        return proj.entropy() - hb;
    }

    NetworkGraph net_;
    SourceDistribution dist_;
    std::size_t budget_;
    std::vector<std::vector<int>> support_;
    std::vector<double> marginal_h_;
    std::unique_ptr<JointTable> table_;
    std::map<std::vector<int>, double> cache_;
};

}  // namespace dicbound
