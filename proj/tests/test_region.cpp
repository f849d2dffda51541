#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dicbound/dicbound.hpp"
#include "oracle.hpp"

using namespace dicbound;

namespace {

/// Template value with every entropy computed by enumeration.
double oracle_value(const NetworkGraph& net, const SourceDistribution& d, const BoundTemplate& t) {
    double s = 0;
    for (auto& e : t.expression) {
        VarSet cond;
        for (int j = 0; j < t.users; ++j)
            if (e.cond >> j & 1u) cond.push_back(V(j));
        s += e.coef * oracle::cond(net, d, {Y(e.user)}, cond);
    }
    return s;
}

}  // namespace

TEST(Region, Xor2UniformVector) {
    auto c = builtin_channel("xor2");
    auto net = base_network(c);
    auto u = SourceDistribution::uniform(c.x_sizes());
    auto bv = bound_vector(c, u);
    std::vector<double> want{1, 1, 1, 1, 2, 2, 2};
    ASSERT_EQ(bv.values.size(), 7u);
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(bv.values[i], want[i], 1e-9) << bv.ids[i];

    // the same seven right-hand sides written out by hand
    auto h = [&](VarSet a, VarSet b) { return oracle::cond(net, u, std::move(a), b); };
    std::vector<double> hand{
        h({Y(0)}, {V(1)}),
        h({Y(1)}, {V(0)}),
        h({Y(0)}, {}) + h({Y(1)}, {V(0), V(1)}),
        h({Y(1)}, {}) + h({Y(0)}, {V(0), V(1)}),
        h({Y(0)}, {V(0)}) + h({Y(1)}, {V(1)}),
        h({Y(0)}, {}) + h({Y(1)}, {V(1)}) + h({Y(0)}, {V(0), V(1)}),
        h({Y(1)}, {}) + h({Y(0)}, {V(0)}) + h({Y(1)}, {V(0), V(1)}),
    };
    for (std::size_t i = 0; i < 7; ++i) EXPECT_NEAR(hand[i], want[i], 1e-9);
}

TEST(Region, Concat3UniformVector) {
    auto c = builtin_channel("concat3");
    auto net = base_network(c);
    auto u = SourceDistribution::uniform(c.x_sizes());
    auto bv = bound_vector(c, u);
    ASSERT_EQ(bv.values.size(), 28u);
    EXPECT_NEAR(bv.at("ineq1"), 1.0, 1e-9);
    EXPECT_NEAR(bv.at("ineq8"), 3.0, 1e-9);
    EXPECT_NEAR(oracle::cond(net, u, {Y(0)}, {V(1), V(2)}), 1.0, 1e-9);
    EXPECT_NEAR(oracle::entropy(net, u, {Y(2)}), 3.0, 1e-9);
    EXPECT_THROW(bv.at("4a"), InvariantError);
}

TEST(Region, EveryTemplateMatchesEnumeration) {
    std::vector<DeterministicChannel> cs = oracle::two_user_channels();
    cs.push_back(builtin_channel("concat3"));
    cs.push_back(oracle::mix3());
    for (auto& c : cs) {
        auto net = base_network(c);
        const auto& ts = builtin_templates(c.user_count());
        for (std::uint64_t s = 0; s < 4; ++s) {
            auto d = dirichlet_product(c.x_sizes(), 31, s);
            auto bv = bound_vector(c, d);
            for (std::size_t i = 0; i < ts.size(); ++i)
                EXPECT_NEAR(bv.values[i], oracle_value(net, d, ts[i]), 1e-12) << c.name() << " " << ts[i].id;
        }
    }
}

TEST(Region, TemplateTexts) {
    const auto& f = find_template("4f");
    EXPECT_EQ(f.rate_coefficients, (std::vector<int>{2, 1}));
    EXPECT_EQ(f.expression.size(), 3u);
    EXPECT_EQ(template_to_string(f), "2R1 + R2 <= H(Y1) + H(Y2|V2) + H(Y1|V1,V2)");
    const auto& last = find_template("ineq28");
    EXPECT_EQ(last.rate_coefficients, (std::vector<int>{4, 2, 1}));
    EXPECT_EQ(last.expression[0].coef, 3);
    for (int users : {2, 3})
        for (auto& t : builtin_templates(users)) {
            auto back = parse_template(t.id, users, template_to_string(t));
            EXPECT_TRUE(same_bound(back, t)) << t.id;
        }
    EXPECT_THROW(find_template("4q"), InvariantError);
    EXPECT_THROW(parse_template("x", 2, "R1 <= H(Y3)"), InvariantError);
}

TEST(Region, PointMassesGiveZero) {
    for (auto c : {builtin_channel("xor2"), builtin_channel("concat3"), oracle::mix3()}) {
        auto bv = bound_vector(c, family_sample(c.x_sizes(), 0, 1));
        for (double v : bv.values) EXPECT_EQ(v, 0.0);
    }
}

TEST(Region, EntriesAreBoundedByOutputAlphabets) {
    // a weighted bound can reach sum |coef| log|Y_u| over its terms
    std::vector<DeterministicChannel> cs = oracle::two_user_channels();
    cs.push_back(builtin_channel("concat3"));
    for (auto& c : cs) {
        const auto& ts = builtin_templates(c.user_count());
        for (std::uint64_t s = 0; s < 20; ++s) {
            auto bv = bound_vector(c, family_sample(c.x_sizes(), 8, s));
            for (std::size_t i = 0; i < ts.size(); ++i) {
                double cap = 0;
                for (auto& e : ts[i].expression) cap += std::abs(e.coef) * std::log2(c.y_size(e.user));
                EXPECT_GE(bv.values[i], 0.0);
                EXPECT_LE(bv.values[i], cap + 1e-9);
            }
        }
    }
}

TEST(Region, JointLawsAreRejected) {
    auto c = builtin_channel("xor2");
    try {
        bound_vector(c, dirichlet_joint(c.x_sizes(), 1, 0));
        FAIL();
    } catch (const InvariantError& e) {
        EXPECT_EQ(e.invariant(), "product-distribution");
    }
}

TEST(Region, Xor2Polytope) {
    auto c = builtin_channel("xor2");
    const auto& ts = builtin_templates(2);
    auto poly = region_polytope(bound_vector(c, SourceDistribution::uniform(c.x_sizes())), ts);
    EXPECT_EQ(poly.dimension, 2);
    ASSERT_EQ(poly.halfspaces.size(), 7u);
    EXPECT_EQ(poly.halfspaces[5].coef, (std::vector<double>{2, 1}));
    EXPECT_NEAR(poly.halfspaces[5].rhs, 2.0, 1e-9);
    EXPECT_TRUE(contains(poly, {0.4, 0.4}));
    EXPECT_FALSE(contains(poly, {0.7, 0.5}));
    EXPECT_TRUE(contains(poly, {0.0, 0.0}));
    EXPECT_FALSE(contains(poly, {-0.1, 0.0}));
    auto vs = polygon_vertices(poly);
    ASSERT_EQ(vs.size(), 3u);
    EXPECT_NEAR(vs[0].first, 0, 1e-12);
    EXPECT_NEAR(vs[1].first, 1, 1e-12);
    EXPECT_NEAR(vs[2].second, 1, 1e-12);
    auto svg = region_svg({poly}, "xor2");
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("<polygon"), std::string::npos);
}

TEST(Region, ZeroVectorOnlyContainsOrigin) {
    const auto& ts = builtin_templates(3);
    BoundVector zero;
    for (auto& t : ts) {
        zero.ids.push_back(t.id);
        zero.values.push_back(0.0);
    }
    auto poly = region_polytope(zero, ts);
    EXPECT_EQ(poly.dimension, 3);
    EXPECT_TRUE(contains(poly, {0, 0, 0}));
    EXPECT_FALSE(contains(poly, {1e-6, 0, 0}));
    EXPECT_FALSE(contains(poly, {0, 0, 1e-6}));
}

TEST(Region, DroppingHalfspacesNeverRemovesPoints) {
    auto c = oracle::mix2();
    const auto& ts = builtin_templates(2);
    auto bv = bound_vector(c, dirichlet_product(c.x_sizes(), 4, 4));
    auto full = region_polytope(bv, ts);
    std::mt19937_64 gen(9);
    std::uniform_real_distribution<double> u(0, 2);
    for (int drop = 0; drop < 7; ++drop) {
        auto part = full;
        part.halfspaces.erase(part.halfspaces.begin() + drop);
        for (int t = 0; t < 500; ++t) {
            std::vector<double> r{u(gen), u(gen)};
            if (contains(full, r)) {
                EXPECT_TRUE(contains(part, r));
            }
        }
    }
}

TEST(Region, Permutations) {
    const auto& two = builtin_templates(2);
    EXPECT_TRUE(same_bound(permute_template(find_template("4a"), {0, 1}), find_template("4a")));
    auto swapped = permute_template(find_template("4a"), {1, 0});
    EXPECT_TRUE(same_bound(swapped, find_template("4b")));
    EXPECT_EQ(template_to_string(swapped), "R2 <= H(Y2|V1)");
    EXPECT_TRUE(same_bound(permute_template(find_template("4c"), {1, 0}), find_template("4d")));
    EXPECT_TRUE(same_bound(permute_template(find_template("4f"), {1, 0}), find_template("4g")));
    for (auto& t : two) EXPECT_TRUE(same_bound(permute_template(permute_template(t, {1, 0}), {1, 0}), t));
    EXPECT_THROW(permute_template(find_template("4a"), {0, 0}), InvariantError);

    // relabeled bounds on a symmetric channel equal the originals on relabeled inputs
    auto c = builtin_channel("concat3");
    const auto& three = builtin_templates(3);
    std::vector<std::vector<int>> perms{{0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
    for (auto& perm : perms) {
        auto pts = permute_templates(three, perm);
        for (std::uint64_t s = 0; s < 5; ++s) {
            auto d = dirichlet_product(c.x_sizes(), 12, s);
            std::vector<std::vector<double>> moved(3);
            for (int i = 0; i < 3; ++i) moved[perm[i]] = d.marginals[i];
            auto a = bound_vector(c, SourceDistribution::product(moved), pts);
            auto b = bound_vector(c, d, three);
            for (std::size_t i = 0; i < three.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12);
        }
    }
}

TEST(Region, SampledFamilies) {
    auto c = builtin_channel("shift2", {2, 2, 1});
    auto one = sample_region(c, 5, 1);
    ASSERT_EQ(one.polytopes.size(), 1u);
    auto uni = region_polytope(bound_vector(c, SourceDistribution::uniform(c.x_sizes())), builtin_templates(2));
    for (std::size_t i = 0; i < uni.halfspaces.size(); ++i)
        EXPECT_EQ(one.polytopes[0].halfspaces[i].rhs, uni.halfspaces[i].rhs);

    auto a = sample_region(c, 42, 30), b = sample_region(c, 42, 30);
    for (std::size_t s = 0; s < 30; ++s) EXPECT_EQ(a.vectors[s].values, b.vectors[s].values);
    // a point inside any member is inside the union
    for (auto& p : a.polytopes) {
        auto vs = polygon_vertices(p);
        double cx = 0, cy = 0;
        for (auto& [x, y] : vs) {
            cx += x / vs.size();
            cy += y / vs.size();
        }
        EXPECT_TRUE(a.contains({cx, cy}));
    }
    EXPECT_FALSE(a.contains({3.0, 3.0}));
    EXPECT_THROW(sample_region(c, 1, 0), InvariantError);
}
