// dicbound: outer bounds on deterministic interference channels.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dicbound/dicbound.hpp"

namespace db = dicbound;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    if (v == 0.0) v = 0.0;  // no "-0"
    std::ostringstream os;
    os << std::fixed << std::setprecision(12) << v;
    return os.str();
}

json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw UsageError("'" + path + "' is not valid JSON: " + e.what());
    }
}

db::DeterministicChannel load_channel(const std::string& ref) {
    if (std::filesystem::exists(ref)) return db::channel_from_json(read_json_file(ref));
    return db::builtin_channel_from_name(ref);
}

/// "uniform", "seed:<u64>", or a distribution file.
db::SourceDistribution load_dist(const std::string& ref, const std::vector<int>& sizes) {
    if (ref == "uniform") return db::SourceDistribution::uniform(sizes);
    if (ref.rfind("seed:", 0) == 0) {
        std::uint64_t s = 0;
        try {
            s = std::stoull(ref.substr(5));
        } catch (const std::exception&) {
            throw UsageError("bad seed in '" + ref + "'");
        }
        return db::dirichlet_product(sizes, s, 0);
    }
    auto d = db::distribution_from_json(read_json_file(ref));
    d.check(sizes);
    return d;
}

std::vector<int> parse_k_range(const std::string& s) {
    auto dots = s.find("..");
    try {
        if (dots == std::string::npos) return {std::stoi(s)};
        int a = std::stoi(s.substr(0, dots)), b = std::stoi(s.substr(dots + 2));
        if (a < 1 || b < a) throw UsageError("bad k range '" + s + "'");
        std::vector<int> ks;
        for (int k = a; k <= b; ++k) ks.push_back(k);
        return ks;
    } catch (const std::invalid_argument&) {
        throw UsageError("bad k range '" + s + "'");
    }
}

class Output {
public:
    explicit Output(const std::string& path) {
        if (!path.empty() && path != "-") {
            file_.open(path);
            if (!file_) throw UsageError("cannot write '" + path + "'");
        }
    }
    std::ostream& os() { return file_.is_open() ? file_ : std::cout; }

private:
    std::ofstream file_;
};

bool is_usage(const db::Error& e) {
    static const std::vector<std::string> usage{"bound-id", "channel-family", "family-parameters",
                                                "node-label", "unknown-variable", "expression-syntax",
                                                "distribution-dimension", "recipe-syntax"};
    return std::find(usage.begin(), usage.end(), e.invariant()) != usage.end();
}

// ---------------------------------------------------------------- subcommands

int cmd_validate(const std::string& channel_ref, std::ostream& os) {
    auto c = load_channel(channel_ref);
    auto rep = db::validate_channel(c);
    os << "channel " << c.name() << ": " << (rep.valid ? "valid" : "invalid") << "\n";
    for (auto& v : rep.violations) {
        os << "  interference-injectivity: user " << v.user + 1 << " x=" << v.x << " y=" << v.y << " from";
        for (auto& t : v.tuples) {
            os << " (";
            for (std::size_t i = 0; i < t.size(); ++i) os << (i ? "," : "") << t[i];
            os << ")";
        }
        os << "\n";
    }
    return rep.valid ? 0 : 1;
}

int cmd_region(const std::string& channel_ref, const std::string& dist_ref, std::size_t samples,
               std::optional<std::uint64_t> seed, const std::string& format, std::ostream& os) {
    auto c = load_channel(channel_ref);
    const auto& ts = db::builtin_templates(c.user_count());
    std::vector<db::SourceDistribution> dists;
    if (samples > 1) {
        if (!seed) throw UsageError("--seed is required with --samples > 1");
        auto fam = db::sample_region(c, *seed, samples, ts);
        dists = fam.distributions;
    } else {
        dists.push_back(load_dist(dist_ref, c.x_sizes()));
    }
    std::vector<db::BoundVector> vecs;
    std::vector<db::RegionPolytope> polys;
    for (auto& d : dists) {
        vecs.push_back(db::bound_vector(c, d, ts));
        polys.push_back(db::region_polytope(vecs.back(), ts));
    }
    if (format == "svg") {
        if (c.user_count() != 2) throw UsageError("svg output is for 2-user channels only");
        os << db::region_svg(polys, c.name());
        return 0;
    }
    bool many = vecs.size() > 1;
    if (format == "csv") {
        os << (many ? "sample,bound,rhs_bits\n" : "bound,rhs_bits\n");
        for (std::size_t s = 0; s < vecs.size(); ++s)
            for (std::size_t i = 0; i < ts.size(); ++i)
                os << (many ? std::to_string(s) + "," : "") << vecs[s].ids[i] << "," << fmt(vecs[s].values[i]) << "\n";
        return 0;
    }
    for (std::size_t s = 0; s < vecs.size(); ++s) {
        if (many) os << "sample " << s << "\n";
        for (std::size_t i = 0; i < ts.size(); ++i)
            os << "  " << std::left << std::setw(7) << ts[i].id << fmt(vecs[s].values[i]) << "   "
               << db::template_to_string(ts[i]) << "\n";
    }
    return 0;
}

struct NetworkChoice {
    std::optional<db::NetworkGraph> net;
    std::optional<db::RecipeInstance> instance;
};

NetworkChoice load_network(const db::DeterministicChannel& c, const std::string& recipe_file,
                           const std::string& bound, int k) {
    NetworkChoice nc;
    if (!recipe_file.empty()) {
        nc.net = db::build_extended(c, db::replication_from_json(read_json_file(recipe_file), c.user_count()));
    } else if (!bound.empty()) {
        nc.instance = db::builtin_recipe(bound, k);
        nc.net = nc.instance->network(c);
    } else {
        nc.net = db::base_network(c);
    }
    return nc;
}

db::SourceDistribution network_dist(const db::NetworkGraph& net, const db::DeterministicChannel& c,
                                    const std::string& ref) {
    auto sizes = db::source_sizes(net);
    if (ref == "uniform") return db::SourceDistribution::uniform(sizes);
    // per-user laws are copied onto replicas; a file may also give one law per source
    if (ref.rfind("seed:", 0) == 0) return db::replicate(load_dist(ref, c.x_sizes()), net);
    auto d = db::distribution_from_json(read_json_file(ref));
    if (d.is_product() && d.marginals.size() == static_cast<std::size_t>(c.user_count()) &&
        sizes.size() != d.marginals.size())
        d = db::replicate(d, net);
    d.check(sizes);
    return d;
}

int cmd_gcs(const std::string& channel_ref, const std::string& recipe_file, const std::string& bound, int k,
            const std::string& chain_file, bool enumerate, int max_l, const std::string& dist_ref,
            const std::string& format, std::ostream& os) {
    auto c = load_channel(channel_ref);
    auto nc = load_network(c, recipe_file, bound, k);
    const auto& net = *nc.net;
    auto dist = network_dist(net, c, dist_ref);
    db::EntropyEvaluator ev(net, dist);
    bool csv = format == "csv";
    if (enumerate) {
        auto chains = db::enumerate_chains(net, max_l);
        if (csv) os << "chain,length,total_bits\n";
        for (auto& ch : chains) {
            auto v = db::evaluate_chain(ev, ch);
            if (csv)
                os << "\"" << db::chain_to_string(ch) << "\"," << ch.length() << "," << fmt(v.total) << "\n";
            else
                os << db::chain_to_string(ch) << "  " << fmt(v.total) << "\n";
        }
        auto best = db::min_chain_bound(net, dist, max_l);
        if (!csv)
            os << "chains: " << chains.size() << "\nminimum: " << fmt(best.value.total) << " at "
               << db::chain_to_string(best.chain) << "\n";
        return 0;
    }
    db::CutChain chain;
    if (!chain_file.empty())
        chain = db::chain_from_json(read_json_file(chain_file));
    else if (nc.instance)
        chain = nc.instance->chain(net);
    else
        throw UsageError("gcs needs --chain, --enumerate or --bound");
    auto viol = db::validate_chain(net, chain);
    if (!viol.empty()) {
        for (auto& v : viol) os << "cut-chain-" << v.rule << ": " << v.detail << "\n";
        return 1;
    }
    auto v = db::evaluate_chain(ev, chain);
    if (csv) {
        os << "term,bits\n";
        for (std::size_t j = 0; j < v.terms.size(); ++j) os << j + 1 << "," << fmt(v.terms[j]) << "\n";
        os << "total," << fmt(v.total) << "\n";
    } else {
        os << "chain " << db::chain_to_string(chain) << "\n";
        for (std::size_t j = 0; j < v.terms.size(); ++j) os << "  term " << j + 1 << ": " << fmt(v.terms[j]) << "\n";
        os << "  total: " << fmt(v.total) << "\n";
    }
    return 0;
}

int cmd_extend(const std::string& bound, const std::string& k_spec, const std::string& channel_ref,
               const std::string& dist_ref, bool verify, const std::string& format, std::ostream& os) {
    auto c = load_channel(channel_ref);
    const auto& r = db::find_recipe(bound);
    if (r.users != c.user_count())
        throw UsageError(bound + " needs a " + std::to_string(r.users) + "-user channel");
    auto per_user = load_dist(dist_ref, c.x_sizes());
    auto ks = r.fixed ? std::vector<int>{1} : parse_k_range(k_spec);
    bool csv = format == "csv";
    if (!verify) {
        if (csv) os << "k,pairs,chain_bits,closed_form_bits\n";
        for (int k : ks) {
            auto in = db::instantiate(r, k);
            auto net = in.network(c);
            auto v = db::recipe_chain_value(in, c, per_user);
            double cf = db::chain_closed_form(r, c, per_user, k);
            if (csv) {
                os << k << "," << net.pair_count() << "," << fmt(v.total) << "," << fmt(cf) << "\n";
            } else {
                os << bound << " k=" << k << ": " << net.pair_count() << " pairs, weights (";
                for (std::size_t i = 0; i < in.weights.size(); ++i) os << (i ? "," : "") << in.weights[i];
                os << "), chain " << db::chain_to_string(in.chain(net)) << "\n  value " << fmt(v.total)
                   << ", closed form " << fmt(cf) << "\n";
            }
        }
        return 0;
    }
    auto rep = db::verify_chain_identity(bound, c, per_user, ks);
    auto lb = db::limit_bound(bound, c, per_user);
    if (csv) os << "k,chain_bits,closed_form_bits,difference,increment,ok\n";
    for (auto& row : rep.rows) {
        if (csv) {
            os << row.k << "," << fmt(row.chain) << "," << fmt(row.closed_form) << "," << fmt(row.difference) << ","
               << (row.increment ? fmt(*row.increment) : "") << "," << (row.ok ? "true" : "false") << "\n";
        } else {
            os << bound << " k=" << row.k << ": chain " << fmt(row.chain) << ", closed form " << fmt(row.closed_form)
               << (row.ok ? "  identity holds" : "  chain-identity FAILED");
            if (row.increment) os << ", increment " << fmt(*row.increment);
            os << "\n";
            if (!row.ok) os << "  " << row.diagnostic << "\n";
        }
    }
    if (!csv) {
        os << "limit bound: weights (";
        for (std::size_t i = 0; i < lb.weights.size(); ++i) os << (i ? "," : "") << lb.weights[i];
        os << ") <= " << fmt(lb.bits) << "\n";
    }
    return rep.ok() ? 0 : 1;
}

void print_result(std::ostream& os, const db::ProverProblem& p, const db::ProofResult& r, bool as_json) {
    if (as_json) {
        os << db::result_to_json(p, r).dump(1) << "\n";
        return;
    }
    os << p.name << ": " << db::expr_to_string(p.target, p.labels) << " >= 0\n  " << r.verdict()
       << (r.verified ? ", checked exactly" : "") << "\n";
    if (r.status == db::ProofStatus::Provable) {
        for (auto& e : r.certificate) os << "    " << e.multiplier.get_str() << " * [" << e.description << "]\n";
    } else {
        os << "    counterpoint:";
        for (auto& [m, v] : r.counterpoint) os << " H(" << db::mask_labels(m, p.labels) << ")=" << v.get_str();
        os << "\n";
    }
}

int cmd_prove(const std::string& bound, const std::string& problem_file, bool as_json, std::ostream& os) {
    if (bound.empty() == problem_file.empty()) throw UsageError("prove needs exactly one of --bound or --problem");
    if (!problem_file.empty()) {
        auto p = db::problem_from_json(read_json_file(problem_file));
        auto r = db::prove(p);
        print_result(os, p, r, as_json);
        return r.status == db::ProofStatus::Provable ? 0 : 1;
    }
    auto targets = db::appendix_targets(bound);
    bool all = true;
    if (targets.empty()) os << bound << ": no conditional steps to prove\n";
    for (auto& t : targets) {
        if (t.skipped) {
            os << t.problem.name << ": skipped (" << t.reason << ")\n";
            continue;
        }
        auto r = db::prove(t.problem);
        all = all && r.status == db::ProofStatus::Provable;
        print_result(os, t.problem, r, as_json);
    }
    return all ? 0 : 1;
}

/// Single-letter bound values against the extended-network limit bounds at sampled
/// product inputs. CSV rows are sorted by sample index, then bound id.
int cmd_compare(const std::string& channel_ref, std::optional<std::uint64_t> seed, std::size_t samples,
                const std::string& format, std::ostream& os) {
    if (!seed) throw UsageError("compare samples inputs and needs --seed");
    auto c = load_channel(channel_ref);
    const auto& ts = db::builtin_templates(c.user_count());
    std::vector<std::string> ids;
    for (auto& t : ts)
        for (auto& r : db::builtin_recipes())
            if (r.id == t.id && r.supported) ids.push_back(t.id);
    bool csv = format != "text";
    if (csv) os << "sample,bound,weights,single_letter_bits,extended_bits,difference\n";
    int worst = 0;
    for (std::size_t s = 0; s < samples; ++s) {
        auto d = db::family_sample(c.x_sizes(), *seed, s);
        auto bv = db::bound_vector(c, d, ts);
        for (auto& id : ids) {
            auto lb = db::limit_bound(id, c, d);
            double th = bv.at(id);
            std::string w;
            for (std::size_t i = 0; i < lb.weights.size(); ++i) w += (i ? " " : "") + std::to_string(lb.weights[i]);
            double diff = lb.bits - th;
            if (std::fabs(diff) > 1e-9) worst = 1;
            if (csv)
                os << s << "," << id << "," << w << "," << fmt(th) << "," << fmt(lb.bits) << "," << fmt(diff) << "\n";
            else
                os << "sample " << s << " " << id << ": single-letter " << fmt(th) << ", extended " << fmt(lb.bits) << "\n";
        }
    }
    return worst;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dicbound: outer bounds on deterministic interference channels"};
    app.require_subcommand(1);

    std::string channel = "xor2", dist = "uniform", out = "text", output, bound, k_spec = "1", chain_file,
                recipe_file, problem_file;
    std::size_t samples = 1;
    std::optional<std::uint64_t> seed;
    std::uint64_t seed_value = 0;
    bool verify = false, enumerate = false, as_json = false;
    int max_l = 2, k = 1;

    auto add_common = [&](CLI::App* sc) {
        sc->add_option("-o,--output", output, "Write to file instead of stdout");
    };

    auto* v = app.add_subcommand("validate", "Check interference injectivity of a channel");
    v->add_option("--channel", channel, "Channel file or builtin (xor2, shift2(q,nd,nc), concat3)");
    add_common(v);

    auto* rg = app.add_subcommand("region", "Evaluate bound templates and rate regions");
    rg->add_option("--channel", channel, "Channel file or builtin");
    rg->add_option("--dist", dist, "uniform | seed:<u64> | distribution file");
    rg->add_option("--samples", samples, "Sampled inputs (uniform, point masses, Dirichlet)")->check(CLI::PositiveNumber);
    rg->add_option("--seed", seed_value, "Sampler seed");
    rg->add_option("--out", out, "text | csv | svg")->check(CLI::IsMember({"text", "csv", "svg"}));
    add_common(rg);

    auto* g = app.add_subcommand("gcs", "Validate, evaluate and enumerate cut chains");
    g->add_option("--channel,--network", channel, "Channel file or builtin (base network)");
    g->add_option("--recipe", recipe_file, "Replication recipe file (extended network)");
    g->add_option("--bound", bound, "Use a bundled recipe's network and chain");
    g->add_option("--k", k, "k for --bound");
    g->add_option("--chain", chain_file, "Chain file: JSON list of node-label lists");
    g->add_flag("--enumerate", enumerate, "Enumerate all chains up to --max-l");
    g->add_option("--max-l", max_l, "Longest chain for --enumerate");
    g->add_option("--dist", dist, "uniform | seed:<u64> | distribution file");
    g->add_option("--out", out, "text | csv")->check(CLI::IsMember({"text", "csv"}));
    add_common(g);

    auto* e = app.add_subcommand("extend", "Extended networks and chain identities");
    e->add_option("--bound", bound, "Bound id (4a..4g, ineq1..ineq28)")->required();
    e->add_option("--k", k_spec, "k or range lo..hi");
    e->add_option("--channel", channel, "Channel file or builtin");
    e->add_option("--dist", dist, "Per-user law: uniform | seed:<u64> | file");
    e->add_flag("--verify", verify, "Check chain value against the closed form");
    e->add_option("--out", out, "text | csv")->check(CLI::IsMember({"text", "csv"}));
    add_common(e);

    auto* p = app.add_subcommand("prove", "Shannon-inequality prover");
    p->add_option("--bound", bound, "Prove the conditional steps of a bound's chain");
    p->add_option("--problem", problem_file, "Problem file");
    p->add_flag("--json", as_json, "Certificates as JSON");
    add_common(p);

    auto* cmp = app.add_subcommand("compare", "Single-letter bounds against extended-network limits");
    cmp->add_option("--channel", channel, "Channel file or builtin");
    cmp->add_option("--samples", samples, "Number of sampled inputs")->check(CLI::PositiveNumber);
    cmp->add_option("--seed", seed_value, "Sampler seed");
    cmp->add_option("--out", out, "csv | text")->check(CLI::IsMember({"text", "csv"}));
    add_common(cmp);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        int rc = app.exit(err);
        return rc == 0 ? 0 : 2;
    }
    if (rg->count("--seed") || cmp->count("--seed")) seed = seed_value;
    if (cmp->parsed() && !cmp->count("--out")) out = "csv";

    try {
        Output o(output);
        auto& os = o.os();
        if (v->parsed()) return cmd_validate(channel, os);
        if (rg->parsed()) return cmd_region(channel, dist, samples, seed, out, os);
        if (g->parsed()) return cmd_gcs(channel, recipe_file, bound, k, chain_file, enumerate, max_l, dist, out, os);
        if (e->parsed()) return cmd_extend(bound, k_spec, channel, dist, verify, out, os);
        if (p->parsed()) return cmd_prove(bound, problem_file, as_json, os);
        if (cmp->parsed()) return cmd_compare(channel, seed, samples, out, os);
    } catch (const UsageError& err) {
        std::cerr << "usage error: " << err.what() << "\n";
        return 2;
    } catch (const db::Error& err) {
        std::cerr << "error: " << err.what() << "\n";
        return is_usage(err) ? 2 : 1;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}
