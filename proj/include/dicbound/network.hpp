#pragma once

#include <memory>
#include <string>
#include <tuple>
#include <vector>

#include "dicbound/channel.hpp"
#include "dicbound/errors.hpp"

namespace dicbound {

/// One unicast pair s -> d. `user` is 0-based, `replica` 1-based.
/// interferers[t] is the pair whose V reaches d, for the t-th other user.
struct UnicastPair {
    int user = 0;
    int replica = 1;
    int weight = 1;
    std::vector<int> interferers;
};

enum class NodeRole { Source, Destination };

struct NodeRef {
    int pair = 0;
    NodeRole role = NodeRole::Source;
    bool operator==(const NodeRef&) const = default;
};

/// One-hop K-unicast deterministic network. Sources only transmit,
/// destinations only receive; every destination reuses its user's f table.
class NetworkGraph {
public:
    NetworkGraph(std::shared_ptr<const DeterministicChannel> ch, std::vector<UnicastPair> pairs,
                 bool replica_labels)
        : ch_(std::move(ch)), pairs_(std::move(pairs)), replica_labels_(replica_labels) {
        check();
    }

    const DeterministicChannel& channel() const { return *ch_; }
    std::shared_ptr<const DeterministicChannel> channel_ptr() const { return ch_; }
    const std::vector<UnicastPair>& pairs() const { return pairs_; }
    const UnicastPair& pair(int p) const { return pairs_[p]; }
    int pair_count() const { return static_cast<int>(pairs_.size()); }
    int node_count() const { return 2 * pair_count(); }

    /// Pair index of (user, replica), or -1.
    int find_pair(int user, int replica) const {
        for (int p = 0; p < pair_count(); ++p)
            if (pairs_[p].user == user && pairs_[p].replica == replica) return p;
        return -1;
    }

    int replica_count(int user) const {
        int n = 0;
        for (auto& p : pairs_) n += p.user == user;
        return n;
    }

    std::string pair_suffix(int p) const {
        std::string s = std::to_string(pairs_[p].user + 1);
        if (replica_labels_) s += "." + std::to_string(pairs_[p].replica);
        return s;
    }

    std::string label(NodeRef n) const {
        return (n.role == NodeRole::Source ? "S" : "D") + pair_suffix(n.pair);
    }

    /// Accepts "S1", "D2", "S1.3". A bare "S1" on a replicated network means replica 1.
    NodeRef parse_label(const std::string& s) const {
        auto bad = [&] { return InvariantError("node-label", "unknown node '" + s + "'"); };
        if (s.size() < 2 || (s[0] != 'S' && s[0] != 'D')) throw bad();
        NodeRole role = s[0] == 'S' ? NodeRole::Source : NodeRole::Destination;
        int user = 0, rep = 1;
        try {
            auto dot = s.find('.');
            user = std::stoi(s.substr(1, dot == std::string::npos ? std::string::npos : dot - 1)) - 1;
            if (dot != std::string::npos) rep = std::stoi(s.substr(dot + 1));
        } catch (const std::exception&) {
            throw bad();
        }
        int p = find_pair(user, rep);
        if (p < 0) throw bad();
        return {p, role};
    }

    /// Canonical node order: sources before destinations, then user, then replica.
    std::tuple<int, int, int> sort_key(NodeRef n) const {
        return {n.role == NodeRole::Source ? 0 : 1, pairs_[n.pair].user, pairs_[n.pair].replica};
    }

    bool replica_labels() const { return replica_labels_; }

private:
    void check() const {
        const auto& c = *ch_;
        auto rep = validate_channel(c);
        if (!rep.valid)
            throw InvariantError("interference-injectivity",
                                 "receive function of user " + std::to_string(rep.violations[0].user + 1) +
                                     " is not injective in the interference tuple");
        for (int p = 0; p < pair_count(); ++p) {
            const auto& pr = pairs_[p];
            if (pr.user < 0 || pr.user >= c.user_count())
                throw InvariantError("pair-user", "pair " + std::to_string(p) + " has no such user");
            if (pr.weight < 1) throw InvariantError("pair-weight", "weights must be positive");
            auto oth = c.others(pr.user);
            if (pr.interferers.size() != oth.size())
                throw InvariantError("one-interferer-per-user",
                                     "destination " + label({p, NodeRole::Destination}) +
                                         " needs exactly one interfering replica per other user");
            for (std::size_t t = 0; t < oth.size(); ++t) {
                int q = pr.interferers[t];
                if (q < 0 || q >= pair_count() || pairs_[q].user != oth[t])
                    throw InvariantError("wiring-range", "destination " + label({p, NodeRole::Destination}) +
                                                             " references a missing replica of user " +
                                                             std::to_string(oth[t] + 1));
            }
            for (int q = 0; q < p; ++q)
                if (pairs_[q].user == pr.user && pairs_[q].replica == pr.replica)
                    throw InvariantError("replica-unique", "duplicate replica " + pair_suffix(p));
        }
    }

    std::shared_ptr<const DeterministicChannel> ch_;
    std::vector<UnicastPair> pairs_;
    bool replica_labels_ = false;
};

/// The channel itself as a network: S1..SK, D1..DK.
inline NetworkGraph base_network(const DeterministicChannel& c) {
    auto ch = std::make_shared<const DeterministicChannel>(c);
    std::vector<UnicastPair> pairs;
    for (int u = 0; u < c.user_count(); ++u) pairs.push_back({u, 1, 1, c.others(u)});
    return NetworkGraph(ch, std::move(pairs), false);
}

}  // namespace dicbound
