#include <gtest/gtest.h>

#include "dicbound/dicbound.hpp"
#include "oracle.hpp"

using namespace dicbound;

namespace {

const std::vector<std::string> kTwoUser{"4a", "4b", "4c", "4d", "4e", "4f", "4g"};

std::vector<std::string> supported_ineqs() {
    std::vector<std::string> out;
    for (auto& r : builtin_recipes())
        if (r.users == 3 && r.supported) out.push_back(r.id);
    return out;
}

}  // namespace

TEST(Extended, RecipeShapes) {
    auto a = builtin_recipe("4a", 3);
    EXPECT_EQ(a.replication.counts, (std::vector<int>{3, 1}));
    EXPECT_EQ(a.weights, (std::vector<int>{3, 1}));
    EXPECT_EQ(a.exit_order.size(), 4u);
    auto e = builtin_recipe("4e", 2);
    EXPECT_EQ(e.weights, (std::vector<int>{2, 2}));
    EXPECT_EQ(e.exit_order.size(), 4u);
    auto f = builtin_recipe("4f", 5);  // constant size: k is ignored
    EXPECT_EQ(f.weights, (std::vector<int>{2, 1}));
    EXPECT_EQ(f.exit_order.size(), 3u);
    // every pair exits exactly once
    for (auto& r : builtin_recipes())
        for (int k = 1; k <= 3; ++k) {
            auto in = instantiate(r, k);
            int pairs = 0;
            for (int n : in.replication.counts) pairs += n;
            EXPECT_EQ(static_cast<int>(in.exit_order.size()), pairs) << r.id;
            auto net = in.network(builtin_channel(r.users == 2 ? "xor2" : "concat3"));
            EXPECT_TRUE(validate_chain(net, in.chain(net)).empty()) << r.id << " k=" << k;
        }
    EXPECT_GE(supported_ineqs().size(), 20u);
    EXPECT_THROW(find_recipe("ineq99"), InvariantError);
    EXPECT_THROW(builtin_recipe("4a", 0), InvariantError);
}

TEST(Extended, WiringErrors) {
    auto c = builtin_channel("xor2");
    auto expect = [&](const ReplicationRecipe& r, const std::string& inv) {
        try {
            build_extended(c, r);
            ADD_FAILURE() << "expected " << inv;
        } catch (const InvariantError& e) {
            EXPECT_EQ(e.invariant(), inv);
        }
    };
    expect({{2, 1}, {{{0, 1}, {1}}, {{1, 1}, {1}}}}, "one-interferer-per-user");
    expect({{2, 1}, {{{0, 1}, {1}}, {{0, 2}, {2}}, {{1, 1}, {1}}}}, "wiring-range");
    expect({{2, 1}, {{{0, 1}, {1, 1}}, {{0, 2}, {1}}, {{1, 1}, {1}}}}, "one-interferer-per-user");
    expect({{0, 1}, {}}, "replica-counts");
    expect({{1}, {}}, "replica-counts");
    auto r = replication_from_json(nlohmann::json::parse(R"({"counts":[3,1],"wiring":{"1.1":{"2":1},"1.2":{"2":1},"1.3":{"2":1},"2.1":{"1":2}}})"),
                                   2);
    auto net = build_extended(c, r);
    EXPECT_EQ(net.pair_count(), 4);
    EXPECT_EQ(net.label({3, NodeRole::Destination}), "D2.1");
    EXPECT_THROW(replication_from_json(nlohmann::json::parse(R"({"counts":[1,1],"wiring":{"1.1":{},"2.1":{"1":1}}})"), 2),
                 InvariantError);
}

TEST(Extended, ChainsMatchEnumerationOracle) {
    // library chain value on the built network against per-term enumeration
    for (auto& c : {builtin_channel("xor2"), oracle::mix2()}) {
        auto d = dirichlet_product(c.x_sizes(), 3, 1);
        for (auto& id : kTwoUser)
            for (int k = 1; k <= 2; ++k) {
                auto in = builtin_recipe(id, k);
                auto net = in.network(c);
                auto rd = replicate(d, net);
                EXPECT_NEAR(recipe_chain_value(in, c, d).total, oracle::chain_value(net, rd, in.chain(net)), 1e-12)
                    << id << " k=" << k;
            }
    }
}

TEST(Extended, StatedClosedForms) {
    auto c = builtin_channel("xor2");
    auto u = SourceDistribution::uniform(c.x_sizes());
    EXPECT_NEAR(chain_closed_form(find_recipe("4a"), c, u, 3, FormKind::Stated), 3.0, 1e-12);
    EXPECT_NEAR(chain_closed_form(find_recipe("4e"), c, u, 2, FormKind::Stated), 4.0, 1e-12);
    EXPECT_NEAR(chain_closed_form(find_recipe("4e"), c, u, 2), 3.0, 1e-12);
    EXPECT_NEAR(recipe_chain_value(builtin_recipe("4e", 2), c, u).total, 3.0, 1e-12);
    EXPECT_THROW(chain_closed_form(find_recipe("ineq1"), builtin_channel("concat3"),
                                   SourceDistribution::uniform({2, 2, 2}), 1, FormKind::Stated),
                 InvariantError);
    // stated and exact forms share their growth in k
    for (auto& r : builtin_recipes()) {
        if (!r.stated) continue;
        auto cc = r.users == 2 ? oracle::mix2() : oracle::mix3();
        auto d = dirichlet_product(cc.x_sizes(), 8, 2);
        double s = chain_closed_form(r, cc, d, 3, FormKind::Stated) - chain_closed_form(r, cc, d, 2, FormKind::Stated);
        double e = chain_closed_form(r, cc, d, 3) - chain_closed_form(r, cc, d, 2);
        EXPECT_NEAR(s, e, 1e-12) << r.id;
        // a stated form is an upper bound on the chain, never below it
        for (int k = 1; k <= 3; ++k)
            EXPECT_LE(recipe_chain_value(instantiate(r, k), cc, d).total,
                      chain_closed_form(r, cc, d, k, FormKind::Stated) + 1e-9)
                << r.id << " k=" << k;
    }
}

TEST(Extended, TwoUserIdentities) {
    std::vector<DeterministicChannel> cs = oracle::two_user_channels();
    for (auto& c : cs)
        for (std::uint64_t s = 0; s < 3; ++s) {
            auto d = family_sample(c.x_sizes(), 21, s * 11);
            for (auto& id : kTwoUser) {
                auto rep = verify_chain_identity(id, c, d, {1, 2, 3});
                EXPECT_TRUE(rep.ok()) << id << " " << c.name() << " " << rep.rows.back().diagnostic;
                for (auto& row : rep.rows) EXPECT_LE(std::fabs(row.difference), 1e-9);
            }
        }
}

TEST(Extended, ThreeUserIdentities) {
    for (auto& c : {builtin_channel("concat3"), oracle::mix3()}) {
        auto d = dirichlet_product(c.x_sizes(), 6, 0);
        for (auto& id : supported_ineqs()) {
            auto rep = verify_chain_identity(id, c, d, {1, 2});
            EXPECT_TRUE(rep.ok()) << id << " " << c.name() << " " << rep.rows.back().diagnostic;
        }
    }
}

TEST(Extended, ChainTermsFollowPrediction) {
    // each exit contributes exactly its predicted base term
    auto c = oracle::mix2();
    auto d = dirichlet_product(c.x_sizes(), 40, 3);
    EntropyEvaluator base(base_network(c), d);
    for (auto& id : kTwoUser) {
        auto in = builtin_recipe(id, 3);
        auto cv = recipe_chain_value(in, c, d);
        auto pred = predicted_terms(in, 2);
        ASSERT_EQ(pred.size(), cv.terms.size());
        for (std::size_t t = 0; t < pred.size(); ++t) EXPECT_NEAR(cv.terms[t], evaluate_term(base, pred[t]), 1e-12) << id;
    }
}

TEST(Extended, LimitBounds) {
    auto c = builtin_channel("xor2");
    auto u = SourceDistribution::uniform(c.x_sizes());
    auto a = limit_bound("4a", c, u);
    EXPECT_EQ(a.weights, (std::vector<int>{1, 0}));
    EXPECT_NEAR(a.bits, 1.0, 1e-12);
    auto e = limit_bound("4e", c, u);
    EXPECT_EQ(e.weights, (std::vector<int>{1, 1}));
    EXPECT_NEAR(e.bits, 2.0, 1e-12);
    auto f = limit_bound("4f", c, u);
    EXPECT_EQ(f.weights, (std::vector<int>{2, 1}));
    EXPECT_NEAR(f.bits, 2.0, 1e-12);

    // the limit reproduces the matching single-letter bound
    std::map<std::string, std::string> match{{"4a", "4a"}, {"4b", "4b"}, {"4e", "4e"}, {"4f", "4f"}, {"4g", "4g"}};
    for (auto& ch : oracle::two_user_channels())
        for (std::uint64_t s = 0; s < 5; ++s) {
            auto d = family_sample(ch.x_sizes(), 12, s * 5);
            auto bv = bound_vector(ch, d);
            for (auto& [id, b] : match) EXPECT_NEAR(limit_bound(id, ch, d).bits, bv.at(b), 1e-9) << id << " " << ch.name();
        }
}

TEST(Extended, ReplicaRates) {
    for (auto& c : {builtin_channel("xor2"), oracle::mix2()}) {
        auto d = dirichlet_product(c.x_sizes(), 2, 2);
        for (auto& id : kTwoUser)
            for (int k = 1; k <= 3; ++k) {
                auto rep = verify_replica_rates(c, builtin_recipe(id, k).replication, d);
                EXPECT_LE(rep.max_deviation, 1e-12) << id;
                EXPECT_EQ(rep.replicas.size(), rep.mutual_information.size());
            }
    }
}

TEST(Extended, DiagnosticsOnMismatch) {
    // a 3-user recipe on a 2-user channel is refused outright
    EXPECT_THROW(verify_chain_identity("ineq1", builtin_channel("xor2"), SourceDistribution::uniform({2, 2}), {1}),
                 InvariantError);
    auto rep = verify_chain_identity("4a", builtin_channel("xor2"), SourceDistribution::uniform({2, 2}), {1, 2, 3});
    ASSERT_EQ(rep.rows.size(), 3u);
    EXPECT_FALSE(rep.rows[0].increment.has_value());
    ASSERT_TRUE(rep.rows[2].increment.has_value());
    EXPECT_NEAR(*rep.rows[2].increment, 1.0, 1e-12);
    EXPECT_EQ(rep.rows[1].first_diverging_term, -1);
}
