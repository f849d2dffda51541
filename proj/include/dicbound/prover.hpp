#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <tuple>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <gmpxx.h>

#include "json.hpp"

#include "dicbound/entropy.hpp"
#include "dicbound/errors.hpp"
#include "dicbound/network.hpp"
#include "dicbound/recipe.hpp"

namespace dicbound {

using Rational = mpq_class;

inline constexpr int kMaxProverVariables = 12;

/// Sparse linear form over joint entropies; key = non-empty variable bitmask.
struct LinearEntropyExpr {
    std::map<unsigned, Rational> coef;

    void add(unsigned mask, const Rational& c) {
        if (mask == 0 || c == 0) return;
        auto& v = coef[mask];
        v += c;
        if (v == 0) coef.erase(mask);
    }
    LinearEntropyExpr& operator+=(const LinearEntropyExpr& o) {
        for (auto& [m, c] : o.coef) add(m, c);
        return *this;
    }
    LinearEntropyExpr& operator-=(const LinearEntropyExpr& o) {
        for (auto& [m, c] : o.coef) add(m, -c);
        return *this;
    }
    LinearEntropyExpr scaled(const Rational& s) const {
        LinearEntropyExpr e;
        for (auto& [m, c] : coef) e.add(m, c * s);
        return e;
    }
    bool is_zero() const { return coef.empty(); }
    unsigned support() const {
        unsigned s = 0;
        for (auto& [m, c] : coef) s |= m;
        return s;
    }
    bool operator==(const LinearEntropyExpr& o) const { return coef == o.coef; }
};

inline LinearEntropyExpr operator+(LinearEntropyExpr a, const LinearEntropyExpr& b) { return a += b; }
inline LinearEntropyExpr operator-(LinearEntropyExpr a, const LinearEntropyExpr& b) { return a -= b; }

inline LinearEntropyExpr entropy_of(unsigned a) {
    LinearEntropyExpr e;
    e.add(a, 1);
    return e;
}

/// H(A|B) = H(AB) - H(B).
inline LinearEntropyExpr cond_entropy(unsigned a, unsigned b) {
    LinearEntropyExpr e;
    e.add(a | b, 1);
    e.add(b, -1);
    return e;
}

/// I(A;B|C) = H(AC) + H(BC) - H(ABC) - H(C).
inline LinearEntropyExpr cond_mutual(unsigned a, unsigned b, unsigned c) {
    LinearEntropyExpr e;
    e.add(a | c, 1);
    e.add(b | c, 1);
    e.add(a | b | c, -1);
    e.add(c, -1);
    return e;
}

inline std::string mask_labels(unsigned m, const std::vector<std::string>& labels) {
    std::string s;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (m >> i & 1u) s += (s.empty() ? "" : ",") + labels[i];
    return s;
}

inline std::string expr_to_string(const LinearEntropyExpr& e, const std::vector<std::string>& labels) {
    if (e.is_zero()) return "0";
    std::string s;
    for (auto& [m, c] : e.coef) {
        Rational a = abs(c);
        s += c < 0 ? (s.empty() ? "-" : " - ") : (s.empty() ? "" : " + ");
        if (a != 1) s += a.get_str() + " ";
        s += "H(" + mask_labels(m, labels) + ")";
    }
    return s;
}

// ---------------------------------------------------------------- elementals

struct ElementalInequality {
    bool monotone = true;
    int i = 0, j = 0;  // for monotone only i is used
    unsigned k = 0;
    LinearEntropyExpr expr;

    std::string describe(const std::vector<std::string>& labels) const {
        unsigned all = labels.size() >= 32 ? ~0u : (1u << labels.size()) - 1;
        if (monotone) {
            unsigned rest = all & ~(1u << i);
            return "H(" + labels[i] + (rest ? "|" + mask_labels(rest, labels) : "") + ") >= 0";
        }
        return "I(" + labels[i] + ";" + labels[j] + (k ? "|" + mask_labels(k, labels) : "") + ") >= 0";
    }
};

/// Canonical generators of the Shannon cone: H(X_i | rest) >= 0 for each i,
/// then I(X_i; X_j | X_K) >= 0 for i < j and K over the other variables in
/// increasing bitmask order. Count n + C(n,2) 2^(n-2).
inline std::vector<ElementalInequality> elemental_inequalities(int n) {
    if (n < 1 || n > kMaxProverVariables) throw BudgetError("elemental inequalities need 1 <= n <= 12");
    unsigned all = (1u << n) - 1;
    std::vector<ElementalInequality> out;
    for (int i = 0; i < n; ++i) {
        ElementalInequality e;
        e.i = i;
        e.expr = cond_entropy(1u << i, all & ~(1u << i));
        out.push_back(std::move(e));
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            unsigned others = all & ~(1u << i) & ~(1u << j);
            for (unsigned k = 0; k <= all; ++k) {
                if (k & ~others) continue;
                ElementalInequality e;
                e.monotone = false;
                e.i = i;
                e.j = j;
                e.k = k;
                e.expr = cond_mutual(1u << i, 1u << j, k);
                out.push_back(std::move(e));
            }
        }
    return out;
}

// ---------------------------------------------------------------- problems

struct ProverProblem {
    std::string name;
    int n = 0;
    std::vector<std::string> labels;
    std::vector<LinearEntropyExpr> constraints;  // each = 0
    std::vector<std::string> constraint_names;
    LinearEntropyExpr target;                    // claimed >= 0

    unsigned mask_of(const std::vector<std::string>& names) const {
        unsigned m = 0;
        for (auto& s : names) {
            auto it = std::find(labels.begin(), labels.end(), s);
            if (it == labels.end()) throw InvariantError("unknown-variable", "'" + s + "' is not declared");
            m |= 1u << (it - labels.begin());
        }
        return m;
    }

    void check() const {
        if (n != static_cast<int>(labels.size())) throw InvariantError("prover-problem", "label count differs from n");
        if (n < 1 || n > kMaxProverVariables)
            throw BudgetError("prover problems need 1..12 variables, got " + std::to_string(n));
        unsigned all = (1u << n) - 1;
        auto ok = [&](const LinearEntropyExpr& e) { return (e.support() & ~all) == 0; };
        if (!ok(target)) throw InvariantError("prover-problem", "target references undeclared variables");
        for (auto& c : constraints)
            if (!ok(c)) throw InvariantError("prover-problem", "constraint references undeclared variables");
    }
};

enum class ProofStatus { Provable, NotProvable };

struct CertificateEntry {
    bool elemental = true;
    std::size_t index = 0;
    Rational multiplier;
    std::string description;
};

struct ProofResult {
    ProofStatus status = ProofStatus::NotProvable;
    std::vector<CertificateEntry> certificate;
    /// For NotProvable: a point of the Shannon outer cone meeting every
    /// constraint on which the target is negative (key = subset mask).
    std::map<unsigned, Rational> counterpoint;
    bool verified = false;
    std::size_t pivots = 0;

    std::string verdict() const {
        return status == ProofStatus::Provable ? "Provable"
                                               : "NotProvable (not Shannon-derivable under the given constraints)";
    }
};

inline Rational evaluate_at(const LinearEntropyExpr& e, const std::map<unsigned, Rational>& h) {
    Rational s = 0;
    for (auto& [m, c] : e.coef) {
        auto it = h.find(m);
        if (it != h.end()) s += c * it->second;
    }
    return s;
}

/// Exact re-check of a result: multipliers must re-sum to the target, or the
/// counterpoint must satisfy every elemental and constraint and violate the target.
inline bool verify_result(const ProverProblem& p, const ProofResult& r) {
    auto el = elemental_inequalities(p.n);
    if (r.status == ProofStatus::Provable) {
        LinearEntropyExpr sum;
        for (auto& c : r.certificate) {
            if (c.elemental) {
                if (c.multiplier < 0 || c.index >= el.size()) return false;
                sum += el[c.index].expr.scaled(c.multiplier);
            } else {
                if (c.index >= p.constraints.size()) return false;
                sum += p.constraints[c.index].scaled(c.multiplier);
            }
        }
        return sum == p.target;
    }
    for (auto& e : el)
        if (evaluate_at(e.expr, r.counterpoint) < 0) return false;
    for (auto& c : p.constraints)
        if (evaluate_at(c, r.counterpoint) != 0) return false;
    return evaluate_at(p.target, r.counterpoint) < 0;
}

namespace detail {

/// Phase-1 revised simplex in exact rationals with a product-form inverse:
/// is b in the cone of the columns? Entering column and leaving row follow
/// Bland's rule (smallest eligible index), so runs are deterministic.
class ConeSimplex {
public:
    using Col = std::vector<std::pair<int, Rational>>;

    ConeSimplex(int m, std::vector<Col> cols, std::vector<Rational> b)
        : m_(m), cols_(std::move(cols)), sign_(static_cast<std::size_t>(m), 1), x_(std::move(b)) {
        for (int i = 0; i < m_; ++i)
            if (x_[i] < 0) {
                sign_[i] = -1;
                x_[i] = -x_[i];
            }
        n_ = static_cast<int>(cols_.size());
        basis_.resize(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) basis_[i] = n_ + i;
    }

    /// True if feasible (b in cone).
    bool run() {
        while (true) {
            if (objective() == 0) return true;
            auto y = btran();
            int q = -1;
            for (int j = 0; j < n_ && q < 0; ++j) {
                Rational d = 0;
                for (auto& [i, a] : cols_[j]) d -= y[i] * (sign_[i] > 0 ? a : Rational(-a));
                if (d < 0) q = j;
            }
            if (q < 0) {
                y_ = std::move(y);
                return false;
            }
            auto a = ftran(q);
            int r = -1;
            Rational best;
            for (int i = 0; i < m_; ++i) {
                if (a[i] <= 0) continue;
                Rational ratio = x_[i] / a[i];
                if (r < 0 || ratio < best || (ratio == best && basis_[i] < basis_[r])) {
                    r = i;
                    best = ratio;
                }
            }
            if (r < 0) throw InvariantError("prover-lp", "unbounded phase-1 direction");
            pivot(q, r, a, best);
            ++pivots_;
        }
    }

    /// Basic structural columns with positive value.
    std::vector<std::pair<int, Rational>> solution() const {
        std::vector<std::pair<int, Rational>> out;
        for (int i = 0; i < m_; ++i)
            if (basis_[i] < n_ && x_[i] > 0) out.push_back({basis_[i], x_[i]});
        std::sort(out.begin(), out.end(), [](auto& a, auto& b) { return a.first < b.first; });
        return out;
    }

    /// Farkas vector in original row signs: w.A_j <= 0 for all j, w.b > 0.
    std::vector<Rational> farkas() const {
        std::vector<Rational> w(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) w[i] = sign_[i] > 0 ? y_[i] : Rational(-y_[i]);
        return w;
    }

    std::size_t pivots() const { return pivots_; }

private:
    struct Eta {
        int r;
        std::vector<std::pair<int, Rational>> v;  // includes row r
    };

    Rational objective() const {
        Rational s = 0;
        for (int i = 0; i < m_; ++i)
            if (basis_[i] >= n_) s += x_[i];
        return s;
    }

    std::vector<Rational> btran() const {
        std::vector<Rational> y(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) y[i] = basis_[i] >= n_ ? 1 : 0;
        for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
            Rational s = 0;
            for (auto& [i, e] : it->v) s += y[i] * e;
            y[it->r] = s;
        }
        return y;
    }

    std::vector<Rational> ftran(int q) const {
        std::vector<Rational> a(static_cast<std::size_t>(m_));
        for (auto& [i, v] : cols_[q]) a[i] = sign_[i] > 0 ? v : Rational(-v);
        for (auto& e : etas_) {
            if (a[e.r] == 0) continue;
            Rational t = a[e.r];
            for (auto& [i, v] : e.v) {
                if (i == e.r)
                    a[i] = v * t;
                else
                    a[i] += v * t;
            }
        }
        return a;
    }

    void pivot(int q, int r, const std::vector<Rational>& a, const Rational& theta) {
        for (int i = 0; i < m_; ++i)
            if (i != r && a[i] != 0) x_[i] -= theta * a[i];
        x_[r] = theta;
        Eta e;
        e.r = r;
        for (int i = 0; i < m_; ++i) {
            if (i == r)
                e.v.push_back({i, Rational(1) / a[r]});
            else if (a[i] != 0)
                e.v.push_back({i, Rational(-a[i] / a[r])});
        }
        etas_.push_back(std::move(e));
        basis_[r] = q;
    }

    int m_, n_ = 0;
    std::vector<Col> cols_;
    std::vector<int> sign_;
    std::vector<Rational> x_;
    std::vector<int> basis_;
    std::vector<Eta> etas_;
    std::vector<Rational> y_;
    std::size_t pivots_ = 0;
};

}  // namespace detail

namespace detail {

/// A constraint of the form scale * (H(T,S) - H(T)) = 0: T determines S.
struct Dependency {
    unsigned given = 0;
    unsigned determined = 0;
    std::size_t constraint = 0;
    Rational scale;
};

inline std::optional<Dependency> as_dependency(const LinearEntropyExpr& e, std::size_t idx) {
    if (e.coef.size() == 1) {
        auto& [m, c] = *e.coef.begin();
        return Dependency{0, m, idx, c};
    }
    if (e.coef.size() != 2) return std::nullopt;
    auto it = e.coef.begin();
    auto [m1, c1] = *it++;
    auto [m2, c2] = *it;
    if (c1 != -c2) return std::nullopt;
    if ((m1 & m2) == m1) return Dependency{m1, m2 & ~m1, idx, c2};
    if ((m1 & m2) == m2) return Dependency{m2, m1 & ~m2, idx, c1};
    return std::nullopt;
}

class Closure {
public:
    explicit Closure(std::vector<Dependency> deps) : deps_(std::move(deps)) {}

    unsigned operator()(unsigned m) const {
        for (auto& [d, before] : steps(m)) m |= deps_[d].determined;
        return m;
    }

    /// Dependencies applied, in order, with the set each one was applied to.
    std::vector<std::pair<std::size_t, unsigned>> steps(unsigned m) const {
        std::vector<std::pair<std::size_t, unsigned>> out;
        bool grew = true;
        while (grew) {
            grew = false;
            for (std::size_t d = 0; d < deps_.size(); ++d)
                if ((deps_[d].given & ~m) == 0 && (deps_[d].determined & ~m) != 0) {
                    out.push_back({d, m});
                    m |= deps_[d].determined;
                    grew = true;
                }
        }
        return out;
    }

    const Dependency& operator[](std::size_t d) const { return deps_[d]; }
    bool empty() const { return deps_.empty(); }

private:
    std::vector<Dependency> deps_;
};

/// Accumulates non-negative elemental multipliers and free constraint
/// multipliers, expanding entropy differences into elementals.
class CertificateBuilder {
public:
    CertificateBuilder(int n, const std::vector<ElementalInequality>& el) : n_(n) {
        for (std::size_t t = 0; t < el.size(); ++t)
            if (!el[t].monotone) index_[{el[t].i, el[t].j, el[t].k}] = t;
    }

    std::map<std::size_t, Rational> lambda, mu;

    /// c * (H(big) - H(small)), small a subset of big, c >= 0.
    void add_difference(unsigned big, unsigned small, const Rational& c) {
        unsigned all = (1u << n_) - 1;
        for (int i = 0; i < n_; ++i) {
            unsigned bit = 1u << i;
            if (!(big & bit) || (small & bit)) continue;
            lambda[static_cast<std::size_t>(i)] += c;
            add_mutual(bit, all & ~(small | bit), small, c);
            small |= bit;
        }
    }

    /// c * I(A; B | C), c >= 0.
    void add_mutual(unsigned a, unsigned b, unsigned c, const Rational& w) {
        a &= ~c;
        b &= ~c;
        if (unsigned d = a & b) {
            add_difference(c | d, c, w);
            c |= d;
            a &= ~d;
            b &= ~d;
        }
        unsigned ca = c;
        for (int i = 0; i < n_; ++i) {
            if (!(a >> i & 1u)) continue;
            unsigned k = ca;
            for (int j = 0; j < n_; ++j) {
                if (!(b >> j & 1u)) continue;
                lambda[index_.at({std::min(i, j), std::max(i, j), k})] += w;
                k |= 1u << j;
            }
            ca |= 1u << i;
        }
    }

private:
    int n_;
    std::map<std::tuple<int, int, unsigned>, std::size_t> index_;
};

}  // namespace detail

/// Provable iff target = sum lambda_e e + sum mu_c c with lambda >= 0.
/// Equalities enter as two columns (+c, -c). Constraints that say one set
/// determines another are used to merge coordinates first (H(M) = H(cl M)),
/// the exact simplex runs on the smaller problem, and the certificate is
/// expanded back to the full set of elementals and constraints.
inline ProofResult prove(const ProverProblem& p) {
    p.check();
    auto el = elemental_inequalities(p.n);
    unsigned full = (1u << p.n) - 1;

    std::vector<detail::Dependency> deps;
    std::vector<std::size_t> others;
    for (std::size_t c = 0; c < p.constraints.size(); ++c) {
        if (auto d = detail::as_dependency(p.constraints[c], c))
            deps.push_back(*d);
        else
            others.push_back(c);
    }
    detail::Closure cl(std::move(deps));
    unsigned zero = cl(0);  // coordinates forced to zero
    std::vector<int> row(static_cast<std::size_t>(full) + 1, -1);
    int m = 0;
    for (unsigned s = 1; s <= full; ++s)
        if (s != zero && cl(s) == s) row[s] = m++;
    std::vector<int> row_of(static_cast<std::size_t>(full) + 1, -1);
    for (unsigned s = 1; s <= full; ++s) row_of[s] = row[cl(s)];

    using Col = detail::ConeSimplex::Col;
    auto reduce = [&](const LinearEntropyExpr& e, int sgn) {
        std::map<int, Rational> acc;
        for (auto& [mask, v] : e.coef)
            if (int r = row_of[mask]; r >= 0) acc[r] += sgn > 0 ? v : Rational(-v);
        Col c;
        for (auto& [r, v] : acc)
            if (v != 0) c.push_back({r, v});
        return c;
    };
    std::vector<Col> cols;
    std::vector<std::pair<bool, std::size_t>> origin;  // (elemental, index); constraints carry sign in bit 0
    std::set<Col> seen;
    for (std::size_t t = 0; t < el.size(); ++t) {
        auto c = reduce(el[t].expr, 1);
        if (c.empty() || !seen.insert(c).second) continue;
        cols.push_back(std::move(c));
        origin.push_back({true, t});
    }
    for (std::size_t c : others)
        for (int sgn : {1, -1}) {
            cols.push_back(reduce(p.constraints[c], sgn));
            origin.push_back({false, c * 2 + (sgn > 0 ? 0 : 1)});
        }
    std::vector<Rational> b(static_cast<std::size_t>(m));
    for (auto& [r, v] : reduce(p.target, 1)) b[r] = v;

    detail::ConeSimplex lp(m, std::move(cols), b);
    ProofResult res;
    bool feasible = lp.run();
    res.pivots = lp.pivots();
    if (feasible) {
        res.status = ProofStatus::Provable;
        detail::CertificateBuilder cert(p.n, el);
        for (auto& [j, v] : lp.solution()) {
            auto [is_el, idx] = origin[j];
            if (is_el)
                cert.lambda[idx] += v;
            else
                cert.mu[idx / 2] += idx % 2 ? Rational(-v) : v;
        }
        // what is left differs from the target only by H(M) - H(cl M) terms
        LinearEntropyExpr rest = p.target;
        for (auto& [t, v] : cert.lambda) rest -= el[t].expr.scaled(v);
        for (auto& [c, v] : cert.mu) rest -= p.constraints[c].scaled(v);
        auto close_gap = [&](unsigned from, const Rational& r) {
            // r * (H(from) - H(cl from))
            if (r < 0) {
                cert.add_difference(cl(from), from, -r);
                return;
            }
            for (auto& [d, before] : cl.steps(from)) {
                const auto& dep = cl[d];
                cert.add_mutual(dep.determined, before, dep.given, r);
                cert.mu[dep.constraint] -= r / dep.scale;
            }
        };
        std::map<unsigned, Rational> closed;
        for (auto& [mask, v] : rest.coef) {
            unsigned c = cl(mask);
            if (c != mask) close_gap(mask, v);
            closed[c] += v;
        }
        if (zero != 0 && closed.count(zero)) close_gap(0, -closed[zero]);
        for (auto& [t, v] : cert.lambda)
            if (v != 0) res.certificate.push_back({true, t, v, el[t].describe(p.labels)});
        for (auto& [c, v] : cert.mu) {
            if (v == 0) continue;
            std::string d = c < p.constraint_names.size() && !p.constraint_names[c].empty()
                                ? p.constraint_names[c]
                                : expr_to_string(p.constraints[c], p.labels) + " = 0";
            res.certificate.push_back({false, c, v, d});
        }
    } else {
        res.status = ProofStatus::NotProvable;
        auto w = lp.farkas();
        for (unsigned s = 1; s <= full; ++s)
            if (int r = row_of[s]; r >= 0 && w[r] != 0) res.counterpoint[s] = -w[r];
    }
    res.verified = verify_result(p, res);
    if (!res.verified) throw InvariantError("certificate-soundness", "certificate failed exact re-summation");
    return res;
}

// ---------------------------------------------------------------- DIC structure

/// Variable order used for network problems: X, V, Y of each listed pair.
inline std::vector<VariableId> triples(const std::vector<int>& pairs) {
    std::vector<VariableId> v;
    for (int p : pairs)
        for (auto k : {VarKind::X, VarKind::V, VarKind::Y}) v.push_back({k, p});
    return v;
}

/// Structural constraints restricted to `vars`; a constraint is emitted only
/// if all its variables are present, so every one is a true marginal fact.
///   H(V|X) = 0, H(Y|X, interfering V's) = 0, H(interfering V's|X,Y) = 0
///   (tuple and each one), H(Y|X) - H(interfering V's) = 0, and independence
///   of the present sources.
inline void dic_constraints(const std::vector<UnicastPair>& topo, const std::vector<VariableId>& vars,
                            const std::vector<std::string>& labels, std::vector<LinearEntropyExpr>& out,
                            std::vector<std::string>& names) {
    auto bit = [&](VariableId v) -> std::optional<unsigned> {
        for (std::size_t i = 0; i < vars.size(); ++i)
            if (vars[i] == v) return 1u << i;
        return std::nullopt;
    };
    auto all = [&](std::initializer_list<VariableId> vs, const std::vector<VariableId>& more = {}) -> std::optional<unsigned> {
        unsigned m = 0;
        for (auto v : vs) {
            auto b = bit(v);
            if (!b) return std::nullopt;
            m |= *b;
        }
        for (auto v : more) {
            auto b = bit(v);
            if (!b) return std::nullopt;
            m |= *b;
        }
        return m;
    };
    auto push = [&](const LinearEntropyExpr& e, const std::string& name) {
        if (e.is_zero()) return;
        for (auto& o : out)
            if (o == e) return;
        out.push_back(e);
        names.push_back(name);
    };
    for (int p = 0; p < static_cast<int>(topo.size()); ++p) {
        auto x = bit(X(p)), v = bit(V(p)), y = bit(Y(p));
        std::vector<VariableId> iv;
        for (int q : topo[p].interferers) iv.push_back(V(q));
        if (x && v) push(cond_entropy(*v, *x), "H(" + mask_labels(*v, labels) + "|" + mask_labels(*x, labels) + ") = 0");
        auto ivm = all({}, iv);
        if (x && y && ivm)
            push(cond_entropy(*y, *x | *ivm), "H(" + mask_labels(*y, labels) + "|" + mask_labels(*x | *ivm, labels) + ") = 0");
        if (x && y && ivm) {
            push(cond_entropy(*ivm, *x | *y), "H(" + mask_labels(*ivm, labels) + "|" + mask_labels(*x | *y, labels) + ") = 0");
        }
        if (x && y)
            for (auto w : iv)
                if (auto b = bit(w))
                    push(cond_entropy(*b, *x | *y), "H(" + mask_labels(*b, labels) + "|" + mask_labels(*x | *y, labels) + ") = 0");
        if (x && y && ivm)
            push(cond_entropy(*y, *x) - entropy_of(*ivm),
                 "H(" + mask_labels(*y, labels) + "|" + mask_labels(*x, labels) + ") - H(" + mask_labels(*ivm, labels) + ") = 0");
    }
    unsigned xs = 0;
    int nx = 0;
    LinearEntropyExpr ind;
    for (int p = 0; p < static_cast<int>(topo.size()); ++p)
        if (auto b = bit(X(p))) {
            xs |= *b;
            ++nx;
            ind.add(*b, -1);
        }
    if (nx >= 2) {
        ind.add(xs, 1);
        push(ind, "sources independent: H(" + mask_labels(xs, labels) + ") - sum H(X) = 0");
    }
}

/// Pairs of a replication recipe without a channel (wiring only).
inline std::vector<UnicastPair> topology(int users, const ReplicationRecipe& r) {
    std::vector<UnicastPair> pairs;
    std::map<std::pair<int, int>, int> index;
    for (int u = 0; u < users; ++u)
        for (int j = 1; j <= r.counts.at(static_cast<std::size_t>(u)); ++j) {
            index[{u, j}] = static_cast<int>(pairs.size());
            pairs.push_back({u, j, 1, {}});
        }
    for (auto& p : pairs) {
        auto& from = r.wiring.at({p.user, p.replica});
        int t = 0;
        for (int w = 0; w < users; ++w) {
            if (w == p.user) continue;
            auto it = index.find({w, from.at(static_cast<std::size_t>(t++))});
            if (it == index.end()) throw InvariantError("wiring-range", "wiring references a missing replica");
            p.interferers.push_back(it->second);
        }
    }
    return pairs;
}

inline std::string pair_name(const UnicastPair& p, bool replica_labels) {
    return std::to_string(p.user + 1) + (replica_labels ? "." + std::to_string(p.replica) : "");
}

inline std::vector<std::string> variable_labels(const std::vector<UnicastPair>& topo, const std::vector<VariableId>& vars,
                                                bool replica_labels) {
    static const char* k = "XVY";
    std::vector<std::string> out;
    for (auto v : vars) out.push_back(k[static_cast<int>(v.kind)] + pair_name(topo[v.pair], replica_labels));
    return out;
}

struct ConstraintSet {
    std::vector<std::string> labels;
    std::vector<LinearEntropyExpr> constraints;
    std::vector<std::string> names;
};

/// Constraints over every X, V, Y of the (replicated) network.
inline ConstraintSet dic_constraints(int users, const ReplicationRecipe& r) {
    auto topo = topology(users, r);
    std::vector<int> ps;
    for (int p = 0; p < static_cast<int>(topo.size()); ++p) ps.push_back(p);
    auto vars = triples(ps);
    bool replicated = std::any_of(r.counts.begin(), r.counts.end(), [](int c) { return c > 1; });
    ConstraintSet cs;
    cs.labels = variable_labels(topo, vars, replicated);
    dic_constraints(topo, vars, cs.labels, cs.constraints, cs.names);
    return cs;
}

inline ReplicationRecipe base_replication(int users) {
    ReplicationRecipe r;
    r.counts.assign(static_cast<std::size_t>(users), 1);
    for (int u = 0; u < users; ++u) r.wiring[{u, 1}] = std::vector<int>(static_cast<std::size_t>(users - 1), 1);
    return r;
}

/// Problem over the base channel's 3K variables (X1,V1,Y1,X2,...).
inline ProverProblem base_problem(int users, const LinearEntropyExpr& target, const std::string& name = "") {
    auto cs = dic_constraints(users, base_replication(users));
    ProverProblem p;
    p.name = name;
    p.n = static_cast<int>(cs.labels.size());
    p.labels = cs.labels;
    p.constraints = cs.constraints;
    p.constraint_names = cs.names;
    p.target = target;
    return p;
}

// ---------------------------------------------------------------- expression text

/// Parses e.g. "H(Y1|V1,V2) - H(Y1|X2,Y2)", "2 I(X1;Y1|V2)", "1/2 H(X1)".
inline LinearEntropyExpr parse_expression(const std::string& text, const std::vector<std::string>& labels) {
    std::size_t pos = 0;
    auto fail = [&](const std::string& why) {
        return InvariantError("expression-syntax", why + " at offset " + std::to_string(pos) + " in '" + text + "'");
    };
    auto skip = [&] {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    };
    auto var_list = [&](const std::string& stops) {
        unsigned m = 0;
        while (true) {
            skip();
            std::size_t start = pos;
            while (pos < text.size() && stops.find(text[pos]) == std::string::npos && text[pos] != ',' &&
                   !std::isspace(static_cast<unsigned char>(text[pos])))
                ++pos;
            std::string name = text.substr(start, pos - start);
            auto it = std::find(labels.begin(), labels.end(), name);
            if (name.empty()) throw fail("expected a variable name");
            if (it == labels.end())
                throw InvariantError("unknown-variable", "'" + name + "' is not declared in '" + text + "'");
            m |= 1u << (it - labels.begin());
            skip();
            if (pos < text.size() && text[pos] == ',') {
                ++pos;
                continue;
            }
            return m;
        }
    };
    LinearEntropyExpr out;
    bool first = true;
    while (true) {
        skip();
        if (pos >= text.size()) break;
        int sign = 1;
        if (text[pos] == '+' || text[pos] == '-') {
            sign = text[pos] == '-' ? -1 : 1;
            ++pos;
            skip();
        } else if (!first) {
            throw fail("expected '+' or '-'");
        }
        first = false;
        Rational c = 1;
        std::size_t start = pos;
        while (pos < text.size() && (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '/')) ++pos;
        if (pos > start) c = Rational(text.substr(start, pos - start));
        c.canonicalize();
        skip();
        if (pos + 1 >= text.size() || text[pos + 1] != '(') throw fail("expected H( or I(");
        char f = text[pos];
        pos += 2;
        if (f == 'H') {
            unsigned a = var_list("|)");
            unsigned b = 0;
            if (pos < text.size() && text[pos] == '|') {
                ++pos;
                b = var_list(")");
            }
            if (pos >= text.size() || text[pos] != ')') throw fail("expected ')'");
            ++pos;
            out += cond_entropy(a, b).scaled(c * sign);
        } else if (f == 'I') {
            unsigned a = var_list(";");
            if (pos >= text.size() || text[pos] != ';') throw fail("expected ';'");
            ++pos;
            unsigned b = var_list("|)");
            unsigned k = 0;
            if (pos < text.size() && text[pos] == '|') {
                ++pos;
                k = var_list(")");
            }
            if (pos >= text.size() || text[pos] != ')') throw fail("expected ')'");
            ++pos;
            out += cond_mutual(a, b, k).scaled(c * sign);
        } else {
            throw fail("expected H( or I(");
        }
    }
    return out;
}

/// {"variables": [...], "constraints": ["H(V1|X1)", ...], "target": "..."}.
/// Constraints are expressions declared equal to zero; "dic": {"users": 2}
/// adds the structural constraints of the base channel (variables then
/// default to X1,V1,Y1,...).
inline ProverProblem problem_from_json(const nlohmann::json& j) {
    ProverProblem p;
    p.name = j.value("name", std::string("problem"));
    if (j.contains("dic")) {
        int users = j.at("dic").at("users").get<int>();
        p = base_problem(users, {}, p.name);
    }
    if (j.contains("variables")) {
        auto vars = j.at("variables").get<std::vector<std::string>>();
        if (!p.labels.empty() && vars != p.labels)
            throw InvariantError("prover-problem", "variables must match the structural variable list");
        p.labels = vars;
        p.n = static_cast<int>(vars.size());
    }
    if (p.n < 1 || p.n > kMaxProverVariables)
        throw BudgetError("prover problems need 1..12 variables, got " + std::to_string(p.n));
    for (auto& c : j.value("constraints", nlohmann::json::array())) {
        std::string s = c.get<std::string>();
        p.constraints.push_back(parse_expression(s, p.labels));
        p.constraint_names.push_back(s + " = 0");
    }
    p.target = parse_expression(j.at("target").get<std::string>(), p.labels);
    p.check();
    return p;
}

// ---------------------------------------------------------------- numeric side

/// Value of an expression on a network whose pairs match `labels` through
/// parse_variable.
inline double evaluate_numeric(EntropyEvaluator& ev, const ProverProblem& p, const LinearEntropyExpr& e) {
    std::vector<VariableId> ids;
    for (auto& s : p.labels) ids.push_back(parse_variable(ev.network(), s));
    double v = 0;
    for (auto& [m, c] : e.coef) {
        VarSet set;
        for (int i = 0; i < p.n; ++i)
            if (m >> i & 1u) set.push_back(ids[i]);
        v += c.get_d() * ev.entropy(set);
    }
    return v;
}

// ---------------------------------------------------------------- chain steps

struct TargetProblem {
    ProverProblem problem;
    int exit_index = 0;          // 0-based position in the exit order
    std::string step;            // human-readable inequality
    bool skipped = false;
    std::string reason;
    bool minimal_variables = false;
};

inline constexpr int kTargetVariableBudget = 10;

/// The instantiation used for proofs: k = 2 for parametrized recipes so the
/// repeated block appears in full.
inline int proof_k(const BoundRecipe& r) { return r.fixed ? 1 : 2; }

/// One problem per exit whose base term has a non-empty conditioning set:
///   H(Y_r | V_S) - H(Y_r | X_E, Y_E) >= 0
/// with E the smallest set of earlier exits from which every V in S is a
/// function. Variables are the X, V, Y of r, E and the replicas behind S;
/// above the budget, replicas outside {r} and E keep only their V.
inline std::vector<TargetProblem> appendix_targets(const std::string& bound_id) {
    const auto& r = find_recipe(bound_id);
    auto in = instantiate(r, proof_k(r));
    int users = r.users;
    auto topo = topology(users, in.replication);
    auto pair_of = [&](std::pair<int, int> ur) {
        for (int p = 0; p < static_cast<int>(topo.size()); ++p)
            if (topo[p].user == ur.first && topo[p].replica == ur.second) return p;
        throw InvariantError("wiring-range", "exit references a missing replica");
    };
    std::vector<int> order;
    for (auto& e : in.exit_order) order.push_back(pair_of(e));
    auto terms = predicted_terms(in, users);
    std::vector<TargetProblem> out;
    for (std::size_t t = 0; t < order.size(); ++t) {
        if (terms[t].cond == 0) continue;
        int rp = order[t];
        // replicas whose V appears in the conditioning
        std::vector<int> q;
        if (terms[t].cond >> topo[rp].user & 1u) q.push_back(rp);
        for (int w : topo[rp].interferers)
            if (terms[t].cond >> topo[w].user & 1u) q.push_back(w);
        std::vector<int> earlier(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(t));
        auto reveals = [&](int e, int target) {
            if (e == target) return true;
            const auto& iv = topo[e].interferers;
            return std::find(iv.begin(), iv.end(), target) != iv.end();
        };
        std::vector<int> best;
        bool found = false;
        for (std::size_t size = 1; size <= q.size() && !found; ++size) {
            std::vector<int> pick(size);
            std::vector<std::size_t> idx(size);
            for (std::size_t i = 0; i < size; ++i) idx[i] = i;
            while (idx.size() && idx.back() < earlier.size()) {
                for (std::size_t i = 0; i < size; ++i) pick[i] = earlier[idx[i]];
                bool ok = true;
                for (int need : q) {
                    bool any = false;
                    for (int e : pick) any = any || reveals(e, need);
                    ok = ok && any;
                }
                if (ok) {
                    best = pick;
                    found = true;
                    break;
                }
                int i = static_cast<int>(size) - 1;
                while (i >= 0 && idx[i] == earlier.size() - size + i) --i;
                if (i < 0) break;
                ++idx[i];
                for (std::size_t k2 = static_cast<std::size_t>(i) + 1; k2 < size; ++k2) idx[k2] = idx[k2 - 1] + 1;
            }
        }
        if (!found) throw InvariantError("chain-step", "conditioning of exit " + std::to_string(t + 1) + " is not revealed");

        std::vector<int> full{rp};
        for (int e : best)
            if (std::find(full.begin(), full.end(), e) == full.end()) full.push_back(e);
        for (int w : q)
            if (std::find(full.begin(), full.end(), w) == full.end()) full.push_back(w);
        std::sort(full.begin(), full.end());
        std::vector<VariableId> vars = triples(full);
        bool minimal = false;
        if (static_cast<int>(vars.size()) > kTargetVariableBudget) {
            minimal = true;
            vars.clear();
            for (int p : full) {
                bool core = p == rp || std::find(best.begin(), best.end(), p) != best.end();
                if (core)
                    for (auto k : {VarKind::X, VarKind::V, VarKind::Y}) vars.push_back({k, p});
                else
                    vars.push_back(V(p));
            }
        }
        TargetProblem tp;
        tp.exit_index = static_cast<int>(t);
        tp.minimal_variables = minimal;
        auto labels = variable_labels(topo, vars, true);
        auto bit = [&](VariableId v) {
            for (std::size_t i = 0; i < vars.size(); ++i)
                if (vars[i] == v) return 1u << i;
            throw InvariantError("chain-step", "missing variable");
        };
        unsigned s_mask = 0;
        for (int w : q) s_mask |= bit(V(w));
        unsigned e_mask = 0;
        for (int e : best) e_mask |= bit(X(e)) | bit(Y(e));
        unsigned y = bit(Y(rp));
        tp.problem.name = bound_id + " exit " + std::to_string(t + 1);
        tp.problem.n = static_cast<int>(vars.size());
        tp.problem.labels = labels;
        dic_constraints(topo, vars, labels, tp.problem.constraints, tp.problem.constraint_names);
        tp.problem.target = cond_entropy(y, s_mask) - cond_entropy(y, e_mask);
        tp.step = "H(" + mask_labels(y, labels) + "|" + mask_labels(s_mask, labels) + ") >= H(" +
                  mask_labels(y, labels) + "|" + mask_labels(e_mask, labels) + ")";
        if (tp.problem.n > kTargetVariableBudget) {
            tp.skipped = true;
            tp.reason = "needs " + std::to_string(tp.problem.n) + " variables, budget is " +
                        std::to_string(kTargetVariableBudget);
        }
        out.push_back(std::move(tp));
    }
    return out;
}

inline nlohmann::json result_to_json(const ProverProblem& p, const ProofResult& r) {
    nlohmann::json j;
    j["name"] = p.name;
    j["verdict"] = r.verdict();
    j["verified"] = r.verified;
    if (r.status == ProofStatus::Provable) {
        auto& c = j["certificate"] = nlohmann::json::array();
        for (auto& e : r.certificate)
            c.push_back({{"kind", e.elemental ? "elemental" : "constraint"},
                         {"index", e.index},
                         {"multiplier", e.multiplier.get_str()},
                         {"inequality", e.description}});
    } else {
        auto& c = j["counterpoint"] = nlohmann::json::object();
        for (auto& [m, v] : r.counterpoint) c["H(" + mask_labels(m, p.labels) + ")"] = v.get_str();
    }
    return j;
}

}  // namespace dicbound
