#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dicbound/channel.hpp"
#include "dicbound/data_files.hpp"
#include "dicbound/distribution.hpp"
#include "dicbound/entropy.hpp"
#include "dicbound/errors.hpp"
#include "dicbound/network.hpp"

namespace dicbound {

/// coef * H(Y_user | V_j for j in cond). `user` is 0-based, cond a bitmask.
struct EntropyTerm {
    int coef = 1;
    int user = 0;
    unsigned cond = 0;
    bool operator==(const EntropyTerm&) const = default;
    bool operator<(const EntropyTerm& o) const {
        return std::tie(user, cond, coef) < std::tie(o.user, o.cond, o.coef);
    }
};

/// sum_i rate_coefficients[i] R_i <= sum expression.
struct BoundTemplate {
    std::string id;
    int users = 2;
    std::vector<int> rate_coefficients;
    std::vector<EntropyTerm> expression;
    bool operator==(const BoundTemplate&) const = default;
};

inline std::string term_to_string(const EntropyTerm& t) {
    std::string s = t.coef == 1 ? "" : std::to_string(t.coef);
    s += "H(Y" + std::to_string(t.user + 1);
    if (t.cond) {
        s += "|";
        bool first = true;
        for (int j = 0; j < 3; ++j)
            if (t.cond >> j & 1u) {
                if (!first) s += ",";
                s += "V" + std::to_string(j + 1);
                first = false;
            }
    }
    return s + ")";
}

inline std::string template_to_string(const BoundTemplate& t) {
    std::string s;
    for (int i = 0; i < t.users; ++i) {
        int c = t.rate_coefficients[i];
        if (!c) continue;
        if (!s.empty()) s += " + ";
        if (c != 1) s += std::to_string(c);
        s += "R" + std::to_string(i + 1);
    }
    s += " <=";
    for (std::size_t i = 0; i < t.expression.size(); ++i) s += (i ? " + " : " ") + term_to_string(t.expression[i]);
    return s;
}

/// Parses "2R1 + R2 <= H(Y1) + H(Y2|V2) + H(Y1|V1,V2)". Terms keep their
/// written order; repeated terms may be written as "2H(...)".
inline BoundTemplate parse_template(const std::string& id, int users, const std::string& text) {
    auto bad = [&](const std::string& why) {
        return InvariantError("template-syntax", id + ": " + why + " in '" + text + "'");
    };
    auto le = text.find("<=");
    if (le == std::string::npos) throw bad("missing '<='");
    std::string lhs = text.substr(0, le), rhs = text.substr(le + 2);
    BoundTemplate t;
    t.id = id;
    t.users = users;
    t.rate_coefficients.assign(static_cast<std::size_t>(users), 0);
    static const std::regex rate(R"(\s*(\d*)\s*R(\d)\s*(\+|$))");
    static const std::regex term(R"(\s*(\d*)\s*H\(Y(\d)(?:\|([V\d,\s]+))?\)\s*(\+|$))");
    auto it = lhs.cbegin();
    std::smatch m;
    while (it != lhs.cend() && std::regex_search(it, lhs.cend(), m, rate, std::regex_constants::match_continuous)) {
        int u = std::stoi(m[2]) - 1;
        if (u < 0 || u >= users) throw bad("rate index out of range");
        t.rate_coefficients[u] += m[1].length() ? std::stoi(m[1]) : 1;
        it = m[0].second;
        if (m[0].length() == 0) break;
    }
    if (std::any_of(it, lhs.cend(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }))
        throw bad("unparsed rate text");
    it = rhs.cbegin();
    while (it != rhs.cend() && std::regex_search(it, rhs.cend(), m, term, std::regex_constants::match_continuous)) {
        EntropyTerm e;
        e.coef = m[1].length() ? std::stoi(m[1]) : 1;
        e.user = std::stoi(m[2]) - 1;
        if (e.user < 0 || e.user >= users) throw bad("Y index out of range");
        std::string cond = m[3];
        for (std::size_t p = 0; p < cond.size(); ++p)
            if (cond[p] == 'V') {
                int j = cond.at(p + 1) - '1';
                if (j < 0 || j >= users) throw bad("V index out of range");
                e.cond |= 1u << j;
            }
        t.expression.push_back(e);
        it = m[0].second;
        if (m[0].length() == 0) break;
    }
    if (std::any_of(it, rhs.cend(), [](char c) { return !std::isspace(static_cast<unsigned char>(c)); }))
        throw bad("unparsed entropy text");
    if (t.expression.empty()) throw bad("empty right-hand side");
    return t;
}

inline std::vector<BoundTemplate> templates_from_json(const nlohmann::json& doc, int users) {
    std::vector<BoundTemplate> out;
    for (auto& e : doc.at(users == 2 ? "two_user" : "three_user"))
        out.push_back(parse_template(e.at("id").get<std::string>(), users, e.at("bound").get<std::string>()));
    return out;
}

/// Bundled lists: 4a..4g for two users, ineq1..ineq28 for three.
inline const std::vector<BoundTemplate>& builtin_templates(int users) {
    static const auto doc = nlohmann::json::parse(data::kTemplatesJson);
    static const auto two = templates_from_json(doc, 2);
    static const auto three = templates_from_json(doc, 3);
    if (users == 2) return two;
    if (users == 3) return three;
    throw InvariantError("user-count", "templates exist for 2 or 3 users");
}

inline const BoundTemplate& find_template(const std::string& id) {
    for (int u : {2, 3})
        for (auto& t : builtin_templates(u))
            if (t.id == id) return t;
    throw InvariantError("bound-id", "unknown bound id '" + id + "'");
}

/// perm[i] is the new 0-based label of user i.
inline BoundTemplate permute_template(const BoundTemplate& t, const std::vector<int>& perm) {
    if (static_cast<int>(perm.size()) != t.users) throw InvariantError("permutation", "size mismatch");
    std::vector<int> seen(perm.size(), 0);
    for (int p : perm) {
        if (p < 0 || p >= t.users || seen[p]++) throw InvariantError("permutation", "not a permutation");
    }
    BoundTemplate o = t;
    bool identity = true;
    for (int i = 0; i < t.users; ++i) {
        o.rate_coefficients[perm[i]] = t.rate_coefficients[i];
        identity = identity && perm[i] == i;
    }
    for (auto& e : o.expression) {
        e.user = perm[e.user];
        unsigned c = 0;
        for (int j = 0; j < t.users; ++j)
            if (e.cond >> j & 1u) c |= 1u << perm[j];
        e.cond = c;
    }
    if (!identity) {
        o.id += "@";
        for (int p : perm) o.id += std::to_string(p + 1);
    }
    return o;
}

inline std::vector<BoundTemplate> permute_templates(const std::vector<BoundTemplate>& ts, const std::vector<int>& perm) {
    std::vector<BoundTemplate> out;
    for (auto& t : ts) out.push_back(permute_template(t, perm));
    return out;
}

/// Same bound up to term order and id.
inline bool same_bound(const BoundTemplate& a, const BoundTemplate& b) {
    if (a.users != b.users || a.rate_coefficients != b.rate_coefficients) return false;
    auto norm = [](std::vector<EntropyTerm> e) {
        std::map<std::pair<int, unsigned>, int> m;
        for (auto& t : e) m[{t.user, t.cond}] += t.coef;
        return m;
    };
    return norm(a.expression) == norm(b.expression);
}

// ---------------------------------------------------------------- evaluation

inline double evaluate_term(EntropyEvaluator& ev, const EntropyTerm& t) {
    VarSet cond;
    for (int j = 0; j < ev.network().channel().user_count(); ++j)
        if (t.cond >> j & 1u) cond.push_back(V(j));
    double h = ev.conditional({Y(t.user)}, cond);
    if (h < 0 && h > -1e-12) h = 0;
    return t.coef * h;
}

/// Right-hand side evaluated on the base channel.
inline double evaluate_template(EntropyEvaluator& ev, const BoundTemplate& t) {
    double s = 0;
    for (auto& e : t.expression) s += evaluate_term(ev, e);
    return s;
}

struct BoundVector {
    std::vector<std::string> ids;
    std::vector<double> values;
    double at(const std::string& id) const {
        for (std::size_t i = 0; i < ids.size(); ++i)
            if (ids[i] == id) return values[i];
        throw InvariantError("bound-id", "no entry '" + id + "'");
    }
};

inline BoundVector bound_vector(const DeterministicChannel& c, const SourceDistribution& dist,
                                const std::vector<BoundTemplate>& ts) {
    if (!dist.is_product())
        throw InvariantError("product-distribution", "bound evaluation takes product distributions only");
    EntropyEvaluator ev(base_network(c), dist);
    BoundVector bv;
    for (auto& t : ts) {
        if (t.users != c.user_count()) throw InvariantError("user-count", t.id + " does not match the channel");
        bv.ids.push_back(t.id);
        bv.values.push_back(evaluate_template(ev, t));
    }
    return bv;
}

inline BoundVector bound_vector(const DeterministicChannel& c, const SourceDistribution& dist) {
    return bound_vector(c, dist, builtin_templates(c.user_count()));
}

// ---------------------------------------------------------------- polytopes

struct Halfspace {
    std::string id;
    std::vector<double> coef;
    double rhs = 0;
};

/// { R : R >= 0, coef . R <= rhs for every halfspace }.
struct RegionPolytope {
    int dimension = 2;
    std::vector<Halfspace> halfspaces;
};

inline RegionPolytope region_polytope(const BoundVector& bv, const std::vector<BoundTemplate>& ts) {
    if (bv.values.size() != ts.size()) throw InvariantError("template-alignment", "bound vector and templates differ in length");
    RegionPolytope poly;
    poly.dimension = ts.empty() ? 2 : ts[0].users;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (bv.ids[i] != ts[i].id) throw InvariantError("template-alignment", bv.ids[i] + " vs " + ts[i].id);
        Halfspace h{ts[i].id, {}, bv.values[i]};
        for (int c : ts[i].rate_coefficients) h.coef.push_back(c);
        poly.halfspaces.push_back(std::move(h));
    }
    return poly;
}

inline bool contains(const RegionPolytope& poly, const std::vector<double>& r, double tol = 1e-9) {
    if (static_cast<int>(r.size()) != poly.dimension) throw InvariantError("dimension", "rate tuple size mismatch");
    for (double x : r)
        if (x < -tol) return false;
    for (auto& h : poly.halfspaces) {
        double s = 0;
        for (std::size_t i = 0; i < r.size(); ++i) s += h.coef[i] * r[i];
        if (s > h.rhs + tol) return false;
    }
    return true;
}

/// Inner approximation of the union over product inputs by a sampled family.
struct RegionFamily {
    std::vector<SourceDistribution> distributions;
    std::vector<BoundVector> vectors;
    std::vector<RegionPolytope> polytopes;

    bool contains(const std::vector<double>& r, double tol = 1e-9) const {
        for (auto& p : polytopes)
            if (dicbound::contains(p, r, tol)) return true;
        return false;
    }
};

inline RegionFamily sample_region(const DeterministicChannel& c, std::uint64_t seed, std::size_t n_samples,
                                  const std::vector<BoundTemplate>& ts) {
    if (n_samples < 1) throw InvariantError("sample-count", "n_samples must be >= 1");
    RegionFamily fam;
    for (std::size_t i = 0; i < n_samples; ++i) {
        auto d = family_sample(c.x_sizes(), seed, i);
        auto bv = bound_vector(c, d, ts);
        fam.polytopes.push_back(region_polytope(bv, ts));
        fam.vectors.push_back(std::move(bv));
        fam.distributions.push_back(std::move(d));
    }
    return fam;
}

inline RegionFamily sample_region(const DeterministicChannel& c, std::uint64_t seed, std::size_t n_samples) {
    return sample_region(c, seed, n_samples, builtin_templates(c.user_count()));
}

/// Vertices of a 2-D polytope, counter-clockwise from the origin.
inline std::vector<std::pair<double, double>> polygon_vertices(const RegionPolytope& poly) {
    if (poly.dimension != 2) throw InvariantError("dimension", "outline needs a 2-D region");
    std::vector<std::array<double, 3>> lines;  // a x + b y <= c
    lines.push_back({-1, 0, 0});
    lines.push_back({0, -1, 0});
    for (auto& h : poly.halfspaces) lines.push_back({h.coef[0], h.coef[1], h.rhs});
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            double det = lines[i][0] * lines[j][1] - lines[i][1] * lines[j][0];
            if (std::fabs(det) < 1e-15) continue;
            double x = (lines[i][2] * lines[j][1] - lines[i][1] * lines[j][2]) / det;
            double y = (lines[i][0] * lines[j][2] - lines[i][2] * lines[j][0]) / det;
            if (!contains(poly, {x, y}, 1e-9)) continue;
            bool dup = false;
            for (auto& p : pts) dup = dup || (std::fabs(p.first - x) < 1e-9 && std::fabs(p.second - y) < 1e-9);
            if (!dup) pts.push_back({x + 0.0, y + 0.0});
        }
    std::sort(pts.begin(), pts.end(), [](auto& a, auto& b) {
        return std::atan2(a.second, a.first) < std::atan2(b.second, b.first) ||
               (std::atan2(a.second, a.first) == std::atan2(b.second, b.first) &&
                a.first * a.first + a.second * a.second < b.first * b.first + b.second * b.second);
    });
    return pts;
}

inline std::string region_svg(const std::vector<RegionPolytope>& polys, const std::string& title) {
    double max_r = 1e-9;
    std::vector<std::vector<std::pair<double, double>>> outlines;
    for (auto& p : polys) {
        outlines.push_back(polygon_vertices(p));
        for (auto& [x, y] : outlines.back()) max_r = std::max({max_r, x, y});
    }
    const double size = 400, pad = 40, scale = (size - 2 * pad) / max_r;
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(3);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size << "\">\n";
    os << "<title>" << title << "</title>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << size - pad << "\" x2=\"" << size - pad / 2 << "\" y2=\"" << size - pad
       << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << pad << "\" y1=\"" << size - pad << "\" x2=\"" << pad << "\" y2=\"" << pad / 2
       << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << size - pad << "\" y=\"" << size - pad / 4 << "\">R1</text>\n";
    os << "<text x=\"" << pad / 4 << "\" y=\"" << pad << "\">R2</text>\n";
    os << "<text x=\"" << pad << "\" y=\"" << size - pad / 4 << "\">0</text>\n";
    os << "<text x=\"" << size - pad - 20 << "\" y=\"" << size - pad + 15 << "\">" << max_r << "</text>\n";
    for (auto& pts : outlines) {
        os << "<polygon fill=\"steelblue\" fill-opacity=\"0.15\" stroke=\"steelblue\" points=\"";
        for (std::size_t i = 0; i < pts.size(); ++i)
            os << (i ? " " : "") << pad + pts[i].first * scale << "," << size - pad - pts[i].second * scale;
        os << "\"/>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace dicbound
