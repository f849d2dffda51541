#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"

#include "dicbound/errors.hpp"
#include "dicbound/network.hpp"

namespace dicbound {

/// Input law of the sources. Product mode holds one marginal per source;
/// joint mode holds one row-major table over the source tuple.
struct SourceDistribution {
    enum class Mode { Product, Joint };
    Mode mode = Mode::Product;
    std::vector<std::vector<double>> marginals;
    std::vector<int> joint_sizes;
    std::vector<double> joint;

    static SourceDistribution product(std::vector<std::vector<double>> m) {
        SourceDistribution d;
        d.marginals = std::move(m);
        return d;
    }

    static SourceDistribution joint_table(std::vector<int> sizes, std::vector<double> p) {
        SourceDistribution d;
        d.mode = Mode::Joint;
        d.joint_sizes = std::move(sizes);
        d.joint = std::move(p);
        return d;
    }

    static SourceDistribution uniform(const std::vector<int>& sizes) {
        std::vector<std::vector<double>> m;
        for (int s : sizes) m.emplace_back(static_cast<std::size_t>(s), 1.0 / s);
        return product(std::move(m));
    }

    static SourceDistribution point_mass(const std::vector<int>& sizes, const std::vector<int>& at) {
        std::vector<std::vector<double>> m;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            m.emplace_back(static_cast<std::size_t>(sizes[i]), 0.0);
            m.back().at(static_cast<std::size_t>(at.at(i))) = 1.0;
        }
        return product(std::move(m));
    }

    bool is_product() const { return mode == Mode::Product; }

    std::size_t source_count() const { return is_product() ? marginals.size() : joint_sizes.size(); }

    /// Throws unless the law matches `sizes` and is normalized within 1e-9.
    void check(const std::vector<int>& sizes) const {
        auto normalized = [](const std::vector<double>& p, const std::string& what) {
            double s = 0;
            for (double x : p) {
                if (!(x >= 0.0)) throw NormalizationError(what + ": negative or NaN probability");
                s += x;
            }
            if (std::fabs(s - 1.0) > 1e-9)
                throw NormalizationError(what + ": probabilities sum to " + std::to_string(s));
        };
        if (is_product()) {
            if (marginals.size() != sizes.size())
                throw DimensionError("expected " + std::to_string(sizes.size()) + " source marginals, got " +
                                     std::to_string(marginals.size()));
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                if (marginals[i].size() != static_cast<std::size_t>(sizes[i]))
                    throw DimensionError("source " + std::to_string(i + 1) + ": expected " +
                                         std::to_string(sizes[i]) + " probabilities");
                normalized(marginals[i], "source " + std::to_string(i + 1));
            }
        } else {
            if (joint_sizes != sizes) throw DimensionError("joint table dimensions do not match the sources");
            std::size_t n = 1;
            for (int s : sizes) n *= static_cast<std::size_t>(s);
            if (joint.size() != n)
                throw DimensionError("joint table: expected " + std::to_string(n) + " entries");
            normalized(joint, "joint table");
        }
    }
};

/// Source alphabet sizes of a network, in pair order.
inline std::vector<int> source_sizes(const NetworkGraph& net) {
    std::vector<int> s;
    for (auto& p : net.pairs()) s.push_back(net.channel().x_size(p.user));
    return s;
}

/// Copies a per-user product law onto every replica of that user.
inline SourceDistribution replicate(const SourceDistribution& per_user, const NetworkGraph& net) {
    if (!per_user.is_product()) throw DimensionError("replicated inputs need a product distribution");
    if (per_user.marginals.size() != static_cast<std::size_t>(net.channel().user_count()))
        throw DimensionError("expected one marginal per user");
    std::vector<std::vector<double>> m;
    for (auto& p : net.pairs()) m.push_back(per_user.marginals[p.user]);
    return SourceDistribution::product(std::move(m));
}

// ---------------------------------------------------------------- sampling

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent stream for (seed, index); the counter split keeps samples
/// reproducible regardless of evaluation order.
inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(index + 0x51ed2701f3a5c7b9ULL)));
}

/// Per-source Dirichlet(1,...,1) draws.
inline SourceDistribution dirichlet_product(const std::vector<int>& sizes, std::uint64_t seed, std::uint64_t index) {
    auto gen = stream_for(seed, index);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> m;
    for (int s : sizes) {
        std::vector<double> w(static_cast<std::size_t>(s));
        double tot = 0;
        for (auto& x : w) {
            double u = unif(gen);
            x = -std::log1p(-u);
            tot += x;
        }
        for (auto& x : w) x /= tot;
        m.push_back(std::move(w));
    }
    return SourceDistribution::product(std::move(m));
}

/// Dirichlet(1) over the whole source tuple.
inline SourceDistribution dirichlet_joint(const std::vector<int>& sizes, std::uint64_t seed, std::uint64_t index) {
    auto gen = stream_for(seed, index);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::size_t n = 1;
    for (int s : sizes) n *= static_cast<std::size_t>(s);
    std::vector<double> p(n);
    double tot = 0;
    for (auto& x : p) {
        x = -std::log1p(-unif(gen));
        tot += x;
    }
    for (auto& x : p) x /= tot;
    return SourceDistribution::joint_table(sizes, std::move(p));
}

/// The sampler family: uniform first, then every product point mass in
/// lexicographic order, then Dirichlet draws. Sample i depends only on (seed, i).
inline SourceDistribution family_sample(const std::vector<int>& sizes, std::uint64_t seed, std::uint64_t i) {
    if (i == 0) return SourceDistribution::uniform(sizes);
    std::uint64_t corners = 1;
    for (int s : sizes) corners *= static_cast<std::uint64_t>(s);
    if (i - 1 < corners) {
        std::uint64_t r = i - 1;
        std::vector<int> at(sizes.size());
        for (int t = static_cast<int>(sizes.size()) - 1; t >= 0; --t) {
            at[t] = static_cast<int>(r % static_cast<std::uint64_t>(sizes[t]));
            r /= static_cast<std::uint64_t>(sizes[t]);
        }
        return SourceDistribution::point_mass(sizes, at);
    }
    return dirichlet_product(sizes, seed, i - 1 - corners);
}

// ---------------------------------------------------------------- JSON

inline SourceDistribution distribution_from_json(const nlohmann::json& j) {
    std::string mode = j.value("mode", std::string("product"));
    if (mode == "product") return SourceDistribution::product(j.at("p").get<std::vector<std::vector<double>>>());
    if (mode == "joint")
        return SourceDistribution::joint_table(j.at("sizes").get<std::vector<int>>(),
                                               j.at("p").get<std::vector<double>>());
    throw DimensionError("unknown distribution mode '" + mode + "'");
}

inline nlohmann::json distribution_to_json(const SourceDistribution& d) {
    if (d.is_product()) return {{"mode", "product"}, {"p", d.marginals}};
    return {{"mode", "joint"}, {"sizes", d.joint_sizes}, {"p", d.joint}};
}

}  // namespace dicbound
