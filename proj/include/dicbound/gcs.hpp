#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dicbound/entropy.hpp"
#include "dicbound/errors.hpp"
#include "dicbound/network.hpp"

namespace dicbound {

/// Omega_1 ... Omega_l as node-label lists.
struct CutChain {
    std::vector<std::vector<std::string>> subsets;
    std::size_t length() const { return subsets.size(); }
    bool operator==(const CutChain&) const = default;
};

struct ChainViolation {
    std::string rule;
    std::string detail;
};

struct ChainValue {
    double total = 0;
    std::vector<double> terms;
};

namespace detail {

using NodeSet = std::vector<char>;  // indexed by pair*2 + (destination ? 1 : 0)

inline int node_index(NodeRef n) { return n.pair * 2 + (n.role == NodeRole::Destination ? 1 : 0); }

inline std::vector<NodeSet> chain_sets(const NetworkGraph& net, const CutChain& c) {
    std::vector<NodeSet> out;
    for (auto& sub : c.subsets) {
        NodeSet s(static_cast<std::size_t>(net.node_count()), 0);
        for (auto& lbl : sub) {
            auto n = net.parse_label(lbl);
            if (s[node_index(n)])
                throw InvariantError("chain-labels", "node '" + lbl + "' listed twice in one subset");
            s[node_index(n)] = 1;
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace detail

/// Checks nesting and d_i in Omega_j <=> s_i in Omega_{j+1} for j = 0..l
/// (Omega_0 = all nodes, Omega_{l+1} = empty).
inline std::vector<ChainViolation> validate_chain(const NetworkGraph& net, const CutChain& c) {
    std::vector<ChainViolation> out;
    if (c.subsets.empty()) {
        out.push_back({"chain-length", "a chain needs at least one subset"});
        return out;
    }
    std::vector<detail::NodeSet> sets;
    try {
        sets = detail::chain_sets(net, c);
    } catch (const Error& e) {
        out.push_back({e.invariant(), e.what()});
        return out;
    }
    std::size_t l = sets.size();
    std::size_t nn = static_cast<std::size_t>(net.node_count());
    auto omega = [&](std::size_t j, std::size_t node) -> bool {
        if (j == 0) return true;
        if (j > l) return false;
        return sets[j - 1][node];
    };
    for (std::size_t j = 1; j < l; ++j)
        for (std::size_t v = 0; v < nn; ++v)
            if (sets[j][v] && !sets[j - 1][v])
                out.push_back({"nested",
                               "Omega_" + std::to_string(j + 1) + " contains " +
                                   net.label({static_cast<int>(v / 2), v % 2 ? NodeRole::Destination : NodeRole::Source}) +
                                   " but Omega_" + std::to_string(j) + " does not"});
    for (int p = 0; p < net.pair_count(); ++p) {
        std::size_t s = static_cast<std::size_t>(p) * 2, d = s + 1;
        for (std::size_t j = 0; j <= l; ++j) {
            bool dj = omega(j, d), sj1 = omega(j + 1, s);
            if (dj != sj1)
                out.push_back({"membership",
                               "pair " + net.pair_suffix(p) + ": " + net.label({p, NodeRole::Destination}) +
                                   (dj ? " in" : " not in") + " Omega_" + std::to_string(j) + " but " +
                                   net.label({p, NodeRole::Source}) + (sj1 ? " in" : " not in") + " Omega_" +
                                   std::to_string(j + 1)});
        }
    }
    return out;
}

inline void require_valid(const NetworkGraph& net, const CutChain& c) {
    auto v = validate_chain(net, c);
    if (!v.empty()) throw InvariantError("cut-chain-" + v[0].rule, v[0].detail);
}

/// Exit level t_i: the first j with d_i outside Omega_j. Chains and level
/// vectors in {1..l}^K are in one-to-one correspondence.
inline CutChain chain_from_levels(const NetworkGraph& net, const std::vector<int>& t, int l) {
    std::vector<std::vector<std::pair<std::tuple<int, int, int>, std::string>>> tmp(static_cast<std::size_t>(l));
    for (int j = 1; j <= l; ++j)
        for (int p = 0; p < net.pair_count(); ++p) {
            if (j <= t[p]) tmp[j - 1].push_back({net.sort_key({p, NodeRole::Source}), net.label({p, NodeRole::Source})});
            if (j < t[p])
                tmp[j - 1].push_back({net.sort_key({p, NodeRole::Destination}), net.label({p, NodeRole::Destination})});
        }
    CutChain c;
    for (auto& sub : tmp) {
        std::sort(sub.begin(), sub.end());
        std::vector<std::string> labels;
        for (auto& [k, s] : sub) labels.push_back(s);
        c.subsets.push_back(std::move(labels));
    }
    return c;
}

/// Chain whose destinations exit one per level in the given pair order.
inline CutChain chain_from_exit_order(const NetworkGraph& net, const std::vector<int>& order) {
    std::vector<int> t(static_cast<std::size_t>(net.pair_count()), 0);
    for (std::size_t i = 0; i < order.size(); ++i) t.at(static_cast<std::size_t>(order[i])) = static_cast<int>(i) + 1;
    for (int v : t)
        if (v == 0) throw InvariantError("exit-order", "every pair must exit exactly once");
    return chain_from_levels(net, t, static_cast<int>(order.size()));
}

inline std::vector<int> levels_of(const NetworkGraph& net, const CutChain& c) {
    require_valid(net, c);
    auto sets = detail::chain_sets(net, c);
    std::vector<int> t(static_cast<std::size_t>(net.pair_count()), 0);
    for (int p = 0; p < net.pair_count(); ++p) {
        int j = 1;
        while (j <= static_cast<int>(sets.size()) && sets[j - 1][p * 2 + 1]) ++j;
        t[p] = j;
    }
    return t;
}

/// Sorts every subset into canonical node order.
inline CutChain canonical(const NetworkGraph& net, const CutChain& c) {
    CutChain out;
    for (auto& sub : c.subsets) {
        std::vector<std::pair<std::tuple<int, int, int>, std::string>> tmp;
        for (auto& s : sub) {
            auto n = net.parse_label(s);
            tmp.push_back({net.sort_key(n), net.label(n)});
        }
        std::sort(tmp.begin(), tmp.end());
        std::vector<std::string> labels;
        for (auto& [k, s] : tmp) labels.push_back(s);
        out.subsets.push_back(std::move(labels));
    }
    return out;
}

/// term_j = H(Y_{Omega_j^c cap Omega_{j-1}} | X_{Omega_j^c}, Y_{Omega_{j-1}^c}), single-letter.
inline ChainValue evaluate_chain(EntropyEvaluator& ev, const CutChain& c) {
    const auto& net = ev.network();
    require_valid(net, c);
    auto sets = detail::chain_sets(net, c);
    std::size_t l = sets.size();
    auto in = [&](std::size_t j, int node) -> bool { return j == 0 ? true : sets[j - 1][node]; };
    ChainValue out;
    for (std::size_t j = 1; j <= l; ++j) {
        VarSet a, b;
        for (int p = 0; p < net.pair_count(); ++p) {
            int s = 2 * p, d = s + 1;
            if (!in(j, s)) b.push_back(X(p));
            if (!in(j - 1, d)) b.push_back(Y(p));
            if (!in(j, d) && in(j - 1, d)) a.push_back(Y(p));
        }
        double t = a.empty() ? 0.0 : ev.conditional(a, b);
        if (t < 0 && t > -1e-12) t = 0.0;
        out.terms.push_back(t);
        out.total += t;
    }
    return out;
}

inline ChainValue evaluate_chain(const NetworkGraph& net, const CutChain& c, const SourceDistribution& dist) {
    EntropyEvaluator ev(net, dist);
    return evaluate_chain(ev, c);
}

inline bool chain_less(const NetworkGraph& net, const CutChain& a, const CutChain& b) {
    if (a.length() != b.length()) return a.length() < b.length();
    auto key = [&](const CutChain& c) {
        std::vector<std::vector<std::tuple<int, int, int>>> k;
        for (auto& sub : c.subsets) {
            k.emplace_back();
            for (auto& s : sub) k.back().push_back(net.sort_key(net.parse_label(s)));
        }
        return k;
    };
    return key(a) < key(b);
}

inline constexpr std::size_t kMaxEnumeratedChains = 1u << 20;

/// Every valid chain of length 1..max_l, each exactly once, in canonical order.
inline std::vector<CutChain> enumerate_chains(const NetworkGraph& net, int max_l) {
    if (max_l < 1) throw InvariantError("chain-length", "max_l must be >= 1");
    int k = net.pair_count();
    long double total = 0;
    for (int l = 1; l <= max_l; ++l) total += std::pow(static_cast<long double>(l), k);
    if (total > kMaxEnumeratedChains)
        throw BudgetError("enumeration would produce " + std::to_string(static_cast<double>(total)) + " chains");
    std::vector<CutChain> out;
    for (int l = 1; l <= max_l; ++l) {
        std::vector<int> t(static_cast<std::size_t>(k), 1);
        while (true) {
            out.push_back(chain_from_levels(net, t, l));
            int i = k - 1;
            while (i >= 0 && t[i] == l) t[i--] = 1;
            if (i < 0) break;
            ++t[i];
        }
    }
    std::sort(out.begin(), out.end(), [&](const CutChain& a, const CutChain& b) { return chain_less(net, a, b); });
    return out;
}

struct ChainBound {
    CutChain chain;
    ChainValue value;
};

/// Minimum over enumerate_chains; ties keep the earlier chain in canonical order.
inline ChainBound min_chain_bound(const NetworkGraph& net, const SourceDistribution& dist, int max_l) {
    auto chains = enumerate_chains(net, max_l);
    EntropyEvaluator ev(net, dist);
    ChainBound best;
    double best_total = std::numeric_limits<double>::infinity();
    for (auto& c : chains) {
        auto v = evaluate_chain(ev, c);
        if (v.total < best_total - 1e-12) {
            best_total = v.total;
            best = {c, v};
        }
    }
    return best;
}

inline CutChain chain_from_json(const nlohmann::json& j) {
    CutChain c;
    const auto& arr = j.is_object() ? j.at("subsets") : j;
    c.subsets = arr.get<std::vector<std::vector<std::string>>>();
    return c;
}

inline nlohmann::json chain_to_json(const CutChain& c) { return c.subsets; }

inline std::string chain_to_string(const CutChain& c) {
    std::string s = "[";
    for (std::size_t j = 0; j < c.subsets.size(); ++j) {
        if (j) s += ",";
        s += "{";
        for (std::size_t i = 0; i < c.subsets[j].size(); ++i) {
            if (i) s += ",";
            s += c.subsets[j][i];
        }
        s += "}";
    }
    return s + "]";
}

}  // namespace dicbound
