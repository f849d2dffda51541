#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dicbound/channel.hpp"
#include "dicbound/data_files.hpp"
#include "dicbound/distribution.hpp"
#include "dicbound/entropy.hpp"
#include "dicbound/errors.hpp"
#include "dicbound/gcs.hpp"
#include "dicbound/network.hpp"
#include "dicbound/templates.hpp"

namespace dicbound {

// ---------------------------------------------------------------- replication

/// Replica counts plus, for every receiver (user, replica), the interfering
/// replica of each other user (others(user) order). Users 0-based, replicas 1-based.
struct ReplicationRecipe {
    std::vector<int> counts;
    std::map<std::pair<int, int>, std::vector<int>> wiring;
};

/// Every replica reuses the base f_i and g_i; interference follows the wiring.
inline NetworkGraph build_extended(const DeterministicChannel& c, const ReplicationRecipe& r) {
    if (static_cast<int>(r.counts.size()) != c.user_count())
        throw InvariantError("replica-counts", "one count per user expected");
    for (int n : r.counts)
        if (n < 1) throw InvariantError("replica-counts", "counts must be positive");
    std::vector<UnicastPair> pairs;
    std::map<std::pair<int, int>, int> index;
    for (int u = 0; u < c.user_count(); ++u)
        for (int j = 1; j <= r.counts[u]; ++j) {
            index[{u, j}] = static_cast<int>(pairs.size());
            pairs.push_back({u, j, 1, {}});
        }
    for (auto& p : pairs) {
        auto it = r.wiring.find({p.user, p.replica});
        auto oth = c.others(p.user);
        if (it == r.wiring.end())
            throw InvariantError("one-interferer-per-user", "receiver " + std::to_string(p.user + 1) + "." +
                                                                std::to_string(p.replica) + " has no wiring");
        if (it->second.size() != oth.size())
            throw InvariantError("one-interferer-per-user", "receiver " + std::to_string(p.user + 1) + "." +
                                                                std::to_string(p.replica) +
                                                                " needs one replica per other user");
        for (std::size_t t = 0; t < oth.size(); ++t) {
            int rep = it->second[t];
            if (rep < 1 || rep > r.counts[oth[t]])
                throw InvariantError("wiring-range", "receiver " + std::to_string(p.user + 1) + "." +
                                                         std::to_string(p.replica) + " references replica " +
                                                         std::to_string(oth[t] + 1) + "." + std::to_string(rep) +
                                                         " of " + std::to_string(r.counts[oth[t]]));
            p.interferers.push_back(index.at({oth[t], rep}));
        }
    }
    for (auto& [key, v] : r.wiring)
        if (key.first < 0 || key.first >= c.user_count() || key.second < 1 || key.second > r.counts[key.first])
            throw InvariantError("wiring-range", "wiring for a receiver that does not exist");
    return NetworkGraph(std::make_shared<const DeterministicChannel>(c), std::move(pairs), true);
}

/// {"counts": [3,1], "wiring": {"1.2": {"2": 1}, ...}}; keys are "user.replica".
inline ReplicationRecipe replication_from_json(const nlohmann::json& j, int users) {
    ReplicationRecipe r;
    r.counts = j.at("counts").get<std::vector<int>>();
    for (auto& [key, val] : j.at("wiring").items()) {
        auto dot = key.find('.');
        if (dot == std::string::npos) throw InvariantError("recipe-syntax", "receiver key '" + key + "'");
        int u = std::stoi(key.substr(0, dot)) - 1, rep = std::stoi(key.substr(dot + 1));
        std::vector<int> from;
        for (int w = 0; w < users; ++w) {
            if (w == u) continue;
            auto k = std::to_string(w + 1);
            if (!val.contains(k)) throw InvariantError("one-interferer-per-user", "receiver " + key + " lacks user " + k);
            from.push_back(val.at(k).get<int>());
        }
        r.wiring[{u, rep}] = from;
    }
    return r;
}

// ---------------------------------------------------------------- bundled recipes

/// c_j * j + c_k * k + c0.
struct AffineExpr {
    int cj = 0, ck = 0, c0 = 0;

    static AffineExpr parse(const std::string& text) {
        AffineExpr e;
        std::string s;
        for (char ch : text)
            if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
        if (s.empty()) throw InvariantError("recipe-syntax", "empty index expression");
        static const std::regex tok(R"(([+-]?)(\d*)([jk]?))");
        auto it = s.cbegin();
        std::smatch m;
        while (it != s.cend()) {
            if (!std::regex_search(it, s.cend(), m, tok, std::regex_constants::match_continuous) || m[0].length() == 0)
                throw InvariantError("recipe-syntax", "bad index expression '" + text + "'");
            if (m[2].length() == 0 && m[3].length() == 0)
                throw InvariantError("recipe-syntax", "bad index expression '" + text + "'");
            int v = m[2].length() ? std::stoi(m[2]) : 1;
            if (m[1] == "-") v = -v;
            if (m[3] == "j")
                e.cj += v;
            else if (m[3] == "k")
                e.ck += v;
            else
                e.c0 += v;
            it = m[0].second;
        }
        return e;
    }

    int eval(int j, int k) const { return cj * j + ck * k + c0; }
};

struct RecipeReceiver {
    int user = 0;  // 0-based
    AffineExpr index;
    bool ranged = false;
    AffineExpr lo, hi;
    std::vector<std::pair<int, AffineExpr>> from;  // (other user, replica index)
};

struct OrderItem {
    bool loop = false;
    int user = 0;
    AffineExpr index;
    AffineExpr from, to;
    std::vector<std::pair<int, AffineExpr>> body;
};

/// const + k * per_k, each a list of signed multiples of H(Y_u | V_S).
struct ClosedForm {
    std::vector<EntropyTerm> constant;
    std::vector<EntropyTerm> per_k;
};

struct BoundRecipe {
    std::string id;
    int users = 2;
    std::vector<AffineExpr> counts;
    bool fixed = false;
    std::vector<RecipeReceiver> receivers;
    std::vector<OrderItem> order;
    ClosedForm exact;
    std::optional<ClosedForm> stated;
    std::vector<std::string> relations;
    bool reconstructed = false;
    bool supported = true;
    std::string notes;
};

namespace detail {

inline EntropyTerm parse_compact_term(int coef, const std::string& s) {
    static const std::regex re(R"(Y(\d)(?:\|((?:V\d)+))?)");
    std::smatch m;
    if (!std::regex_match(s, m, re)) throw InvariantError("recipe-syntax", "bad term '" + s + "'");
    EntropyTerm t;
    t.coef = coef;
    t.user = std::stoi(m[1]) - 1;
    std::string c = m[2];
    for (std::size_t i = 0; i + 1 < c.size(); i += 2) t.cond |= 1u << (c[i + 1] - '1');
    return t;
}

inline std::vector<EntropyTerm> parse_terms(const nlohmann::json& j) {
    std::vector<EntropyTerm> out;
    for (auto& e : j) out.push_back(parse_compact_term(e.at(0).get<int>(), e.at(1).get<std::string>()));
    return out;
}

inline ClosedForm parse_form(const nlohmann::json& j) {
    return {parse_terms(j.at("const")), parse_terms(j.at("per_k"))};
}

inline std::vector<std::pair<int, AffineExpr>> parse_from(const nlohmann::json& j) {
    std::vector<std::pair<int, AffineExpr>> out;
    for (auto& [w, e] : j.items()) out.push_back({std::stoi(w) - 1, AffineExpr::parse(e.get<std::string>())});
    std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.first < b.first; });
    return out;
}

inline BoundRecipe recipe_from_json(const nlohmann::json& j) {
    BoundRecipe r;
    r.id = j.at("id").get<std::string>();
    r.users = j.at("users").get<int>();
    for (auto& c : j.at("counts")) r.counts.push_back(AffineExpr::parse(c.get<std::string>()));
    r.fixed = j.at("k_range").is_null();
    for (auto& e : j.at("receivers")) {
        RecipeReceiver rx;
        rx.user = e.at("user").get<int>() - 1;
        rx.index = AffineExpr::parse(e.at("index").get<std::string>());
        if (e.contains("j")) {
            rx.ranged = true;
            rx.lo = AffineExpr::parse(e.at("j").at(0).get<std::string>());
            rx.hi = AffineExpr::parse(e.at("j").at(1).get<std::string>());
        }
        rx.from = parse_from(e.at("from"));
        r.receivers.push_back(std::move(rx));
    }
    for (auto& e : j.at("order")) {
        OrderItem it;
        if (e.is_object()) {
            it.loop = true;
            it.from = AffineExpr::parse(e.at("from").get<std::string>());
            it.to = AffineExpr::parse(e.at("to").get<std::string>());
            for (auto& b : e.at("body"))
                it.body.push_back({b.at(0).get<int>() - 1, AffineExpr::parse(b.at(1).get<std::string>())});
        } else {
            it.user = e.at(0).get<int>() - 1;
            it.index = AffineExpr::parse(e.at(1).get<std::string>());
        }
        r.order.push_back(std::move(it));
    }
    r.exact = parse_form(j.at("exact_form"));
    if (j.contains("stated_form")) r.stated = parse_form(j.at("stated_form"));
    if (j.contains("relations")) r.relations = j.at("relations").get<std::vector<std::string>>();
    r.reconstructed = j.value("reconstructed", false);
    r.supported = j.value("supported", true);
    r.notes = j.value("notes", std::string());
    return r;
}

}  // namespace detail

inline const std::vector<BoundRecipe>& builtin_recipes() {
    static const std::vector<BoundRecipe> all = [] {
        std::vector<BoundRecipe> v;
        auto doc = nlohmann::json::parse(data::kRecipesJson);
        for (auto& e : doc.at("recipes")) v.push_back(detail::recipe_from_json(e));
        return v;
    }();
    return all;
}

inline const BoundRecipe& find_recipe(const std::string& id) {
    for (auto& r : builtin_recipes())
        if (r.id == id) return r;
    throw InvariantError("bound-id", "unknown bound id '" + id + "'");
}

/// A recipe expanded at one k: replication, exit order, rate weights.
struct RecipeInstance {
    std::string bound_id;
    int k = 1;
    ReplicationRecipe replication;
    std::vector<std::pair<int, int>> exit_order;  // (user, replica), one destination per cut
    std::vector<int> weights;

    NetworkGraph network(const DeterministicChannel& c) const { return build_extended(c, replication); }

    CutChain chain(const NetworkGraph& net) const {
        std::vector<int> order;
        for (auto& [u, j] : exit_order) order.push_back(net.find_pair(u, j));
        return chain_from_exit_order(net, order);
    }
};

inline RecipeInstance instantiate(const BoundRecipe& r, int k) {
    if (!r.supported) throw InvariantError("bound-supported", r.id + " has no shipped recipe");
    if (r.fixed) k = 1;
    if (k < 1) throw InvariantError("k-range", "k must be >= 1");
    RecipeInstance in;
    in.bound_id = r.id;
    in.k = k;
    for (auto& c : r.counts) in.replication.counts.push_back(c.eval(0, k));
    in.weights = in.replication.counts;
    for (auto& rx : r.receivers) {
        int lo = rx.ranged ? rx.lo.eval(0, k) : 0, hi = rx.ranged ? rx.hi.eval(0, k) : 0;
        for (int j = lo; j <= hi; ++j) {
            std::vector<int> from;
            for (auto& [w, e] : rx.from) from.push_back(e.eval(j, k));
            in.replication.wiring[{rx.user, rx.index.eval(j, k)}] = from;
        }
    }
    for (auto& it : r.order) {
        if (!it.loop) {
            in.exit_order.push_back({it.user, it.index.eval(0, k)});
            continue;
        }
        int a = it.from.eval(0, k), b = it.to.eval(0, k), step = a > b ? -1 : 1;
        for (int j = a;; j += step) {
            for (auto& [u, e] : it.body) in.exit_order.push_back({u, e.eval(j, k)});
            if (j == b) break;
        }
    }
    return in;
}

inline RecipeInstance builtin_recipe(const std::string& id, int k) { return instantiate(find_recipe(id), k); }

// ---------------------------------------------------------------- evaluation

inline double evaluate_terms(EntropyEvaluator& base, const std::vector<EntropyTerm>& ts) {
    double s = 0;
    for (auto& t : ts) s += evaluate_term(base, t);
    return s;
}

enum class FormKind { Exact, Stated };

/// sum multiplicity(k) * term on the base channel.
inline double chain_closed_form(const BoundRecipe& r, const DeterministicChannel& c, const SourceDistribution& dist,
                                int k, FormKind kind = FormKind::Exact) {
    if (r.fixed) k = 1;
    const ClosedForm* f = &r.exact;
    if (kind == FormKind::Stated) {
        if (!r.stated) throw InvariantError("closed-form", r.id + " has no stated form");
        f = &*r.stated;
    }
    EntropyEvaluator ev(base_network(c), dist);
    return evaluate_terms(ev, f->constant) + k * evaluate_terms(ev, f->per_k);
}

/// Single-letter value of the recipe chain on the built network with
/// i.i.d. replica inputs.
inline ChainValue recipe_chain_value(const RecipeInstance& in, const DeterministicChannel& c,
                                     const SourceDistribution& per_user) {
    auto net = in.network(c);
    EntropyEvaluator ev(net, replicate(per_user, net));
    return evaluate_chain(ev, in.chain(net));
}

/// Per-exit base term H(Y_u | V_S) predicted for i.i.d. replicas: own V is
/// known once an earlier exit was interfered by this replica; an interferer's
/// V is known once it exited or interfered with an earlier exit.
inline std::vector<EntropyTerm> predicted_terms(const RecipeInstance& in, int users) {
    std::set<std::pair<int, int>> exited, revealed;
    std::vector<EntropyTerm> out;
    for (auto& r : in.exit_order) {
        EntropyTerm t{1, r.first, 0};
        if (revealed.count(r)) t.cond |= 1u << r.first;
        const auto& from = in.replication.wiring.at(r);
        std::vector<std::pair<int, int>> qs;
        int idx = 0;
        for (int w = 0; w < users; ++w) {
            if (w == r.first) continue;
            qs.push_back({w, from[idx++]});
        }
        for (auto& q : qs)
            if (exited.count(q) || revealed.count(q)) t.cond |= 1u << q.first;
        out.push_back(t);
        exited.insert(r);
        for (auto& q : qs) revealed.insert(q);
    }
    return out;
}

struct IdentityRow {
    int k = 1;
    double chain = 0;
    double closed_form = 0;
    double difference = 0;
    bool ok = true;
    std::optional<double> increment;  // chain(k) - chain(k-1)
    int first_diverging_term = -1;   // 0-based exit index, -1 if none
    std::string diagnostic;
};

struct IdentityReport {
    std::string bound_id;
    std::vector<IdentityRow> rows;
    bool ok() const {
        return std::all_of(rows.begin(), rows.end(), [](const IdentityRow& r) { return r.ok; });
    }
};

inline constexpr double kIdentityTol = 1e-9;

inline IdentityReport verify_chain_identity(const std::string& id, const DeterministicChannel& c,
                                            const SourceDistribution& per_user, const std::vector<int>& ks) {
    const auto& r = find_recipe(id);
    if (r.users != c.user_count()) throw InvariantError("user-count", id + " needs a " + std::to_string(r.users) + "-user channel");
    IdentityReport rep;
    rep.bound_id = id;
    EntropyEvaluator base(base_network(c), per_user);
    std::optional<double> prev;
    int prev_k = 0;
    for (int k : ks) {
        auto in = instantiate(r, k);
        auto cv = recipe_chain_value(in, c, per_user);
        IdentityRow row;
        row.k = k;
        row.chain = cv.total;
        row.closed_form = evaluate_terms(base, r.exact.constant) + (r.fixed ? 1 : k) * evaluate_terms(base, r.exact.per_k);
        row.difference = row.chain - row.closed_form;
        row.ok = std::fabs(row.difference) <= kIdentityTol;
        if (prev && k == prev_k + 1) row.increment = row.chain - *prev;
        if (!row.ok) {
            auto pred = predicted_terms(in, c.user_count());
            for (std::size_t t = 0; t < pred.size(); ++t) {
                double want = evaluate_term(base, pred[t]);
                if (std::fabs(want - cv.terms[t]) > kIdentityTol) {
                    row.first_diverging_term = static_cast<int>(t);
                    row.diagnostic = "term " + std::to_string(t + 1) + ": chain gives " + std::to_string(cv.terms[t]) +
                                     ", expected " + term_to_string(pred[t]) + " = " + std::to_string(want);
                    break;
                }
            }
            if (row.diagnostic.empty()) row.diagnostic = "per-term values agree; closed form disagrees with their sum";
        }
        prev = row.chain;
        prev_k = k;
        rep.rows.push_back(row);
    }
    return rep;
}

struct LimitBound {
    std::vector<int> weights;
    double bits = 0;
};

/// Per-k increment of the chain (the k -> infinity weighted-rate bound), or
/// the whole weighted bound for constant-size recipes.
inline LimitBound limit_bound(const std::string& id, const DeterministicChannel& c, const SourceDistribution& per_user) {
    const auto& r = find_recipe(id);
    if (r.fixed) {
        auto in = instantiate(r, 1);
        return {in.weights, recipe_chain_value(in, c, per_user).total};
    }
    auto a = instantiate(r, 1), b = instantiate(r, 2);
    LimitBound lb;
    for (std::size_t i = 0; i < a.weights.size(); ++i) lb.weights.push_back(b.weights[i] - a.weights[i]);
    lb.bits = recipe_chain_value(b, c, per_user).total - recipe_chain_value(a, c, per_user).total;
    return lb;
}

struct RateReport {
    std::vector<std::string> replicas;
    std::vector<double> mutual_information;
    std::vector<double> base_value;  // I(X_u; Y_u) on the base channel, per replica's user
    double max_deviation = 0;
};

/// Single-letter check that every replica sees its base channel: I(X;Y)
/// per replica against the base value under identical independent inputs.
inline RateReport verify_replica_rates(const DeterministicChannel& c, const ReplicationRecipe& recipe,
                                       const SourceDistribution& per_user) {
    auto net = build_extended(c, recipe);
    EntropyEvaluator ev(net, replicate(per_user, net));
    EntropyEvaluator base(base_network(c), per_user);
    RateReport rep;
    for (int p = 0; p < net.pair_count(); ++p) {
        int u = net.pair(p).user;
        double i_rep = ev.mutual({X(p)}, {Y(p)});
        double i_base = base.mutual({X(u)}, {Y(u)});
        rep.replicas.push_back(net.pair_suffix(p));
        rep.mutual_information.push_back(i_rep);
        rep.base_value.push_back(i_base);
        rep.max_deviation = std::max(rep.max_deviation, std::fabs(i_rep - i_base));
    }
    return rep;
}

}  // namespace dicbound
