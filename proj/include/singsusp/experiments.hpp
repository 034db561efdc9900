#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "discrete_systems.hpp"
#include "entropy.hpp"
#include "expansiveness.hpp"
#include "json_io.hpp"
#include "mapping_torus.hpp"
#include "singular_suspension.hpp"
#include "symbolic.hpp"

namespace singsusp {

inline const std::vector<std::string> &verdict_names()
{
    static const std::vector<std::string> v = {"EntropyPositive", "EntropyZero", "ExpansiveEvidence",
                                               "NonExpansive",    "GammaDiverges", "GammaFinite"};
    return v;
}

inline const std::vector<std::string> &analysis_names()
{
    static const std::vector<std::string> v = {"singularity_check", "a_sing",         "avoidance",     "entropy_map",
                                               "entropy_flow",      "expected_gamma", "gamma_probe",   "expansive_map",
                                               "expansive_flow"};
    return v;
}

struct Scenario {
    std::string name;
    std::string citation;
    std::string description;
    std::uint64_t seed = 1;
    json system;
    json brake; // null: alpha = 1
    json measure;
    json analyses = json::object();
    std::vector<std::string> expected;
    json thresholds = json::object();

    json to_json() const
    {
        json j;
        j["name"] = name;
        j["citation"] = citation;
        j["description"] = description;
        j["seed"] = seed;
        j["system"] = system;
        j["brake"] = brake;
        j["measure"] = measure;
        j["analyses"] = analyses;
        j["expected"] = expected;
        j["thresholds"] = thresholds;
        return j;
    }

    static Scenario from_json(const json &j)
    {
        if (!j.is_object()) throw UsageError("scenario must be a JSON object");
        static const std::set<std::string> keys = {"name",     "citation", "description", "seed",     "system",
                                                   "brake",    "measure",  "analyses",    "expected", "thresholds"};
        for (const auto &[k, v] : j.items())
            if (!keys.count(k)) throw UsageError("unknown scenario field \"" + k + "\"");
        Scenario s;
        s.name = need(j, "name").get<std::string>();
        s.citation = need(j, "citation").get<std::string>();
        s.description = opt<std::string>(j, "description", "");
        s.seed = opt<std::uint64_t>(j, "seed", 1);
        s.system = need(j, "system");
        s.brake = j.contains("brake") ? j["brake"] : json();
        s.measure = opt<json>(j, "measure", json{{"kind", "LebesgueOnBase"}});
        s.analyses = opt<json>(j, "analyses", json::object());
        if (!s.analyses.is_object()) throw UsageError("analyses must be an object");
        for (const auto &[k, v] : s.analyses.items())
            if (std::find(analysis_names().begin(), analysis_names().end(), k) == analysis_names().end())
                throw UsageError("unknown analysis \"" + k + "\"");
        const json &ex = need(j, "expected");
        if (ex.is_string()) s.expected = {ex.get<std::string>()};
        else s.expected = ex.get<std::vector<std::string>>();
        if (s.expected.empty()) throw UsageError("scenario lists no expected verdict");
        for (const auto &v : s.expected)
            if (std::find(verdict_names().begin(), verdict_names().end(), v) == verdict_names().end())
                throw UsageError("unknown verdict \"" + v + "\"");
        s.thresholds = opt<json>(j, "thresholds", json::object());
        if (s.name.empty()) throw UsageError("scenario name is empty");
        if (s.citation.empty()) throw UsageError("scenario citation is empty");
        return s;
    }
};

struct Report {
    json body;
    bool pass = false;

    std::string dump() const { return body.dump(2) + "\n"; }
};

namespace detail {

inline std::vector<int> int_grid(const json &j, std::vector<int> dflt)
{
    if (j.is_null()) return dflt;
    if (j.is_array()) return j.get<std::vector<int>>();
    std::vector<int> g;
    const int a = need(j, "from").get<int>(), b = need(j, "to").get<int>(), st = opt<int>(j, "step", 1);
    if (st <= 0) throw UsageError("grid step must be positive");
    for (int n = a; n <= b; n += st) g.push_back(n);
    return g;
}

inline EntropyOptions entropy_options(const json &j, std::uint64_t seed)
{
    EntropyOptions o;
    o.n_grid = int_grid(opt<json>(j, "n_grid", json()), {});
    if (j.contains("eps_grid")) o.eps_grid = j["eps_grid"].get<std::vector<double>>();
    o.samples = opt<std::size_t>(j, "samples", o.samples);
    o.exhaustive = opt<bool>(j, "exhaustive", false);
    o.saturation_fraction = opt<double>(j, "saturation_fraction", o.saturation_fraction);
    o.linearity = opt<double>(j, "linearity", o.linearity);
    o.seed = opt<std::uint64_t>(j, "seed", seed);
    return o;
}

struct Context {
    DiscreteSystem sys;
    SingularSuspension ss;
    MeasureSampler mu;
    bool measure_from_avoidance = false;
    std::shared_ptr<const Subshift> support; // UniformOnSubshift support
};

inline std::string error_kind(const std::exception &e)
{
    if (dynamic_cast<const UsageError *>(&e)) return "UsageError";
    if (dynamic_cast<const DomainError *>(&e)) return "DomainError";
    if (dynamic_cast<const NumericalError *>(&e)) return "NumericalError";
    return "Error";
}

inline std::vector<Word> forbidden_windows(const Context &cx, int depth, int len)
{
    if (cx.sys.kind != SystemKind::FullShift) throw UsageError("avoidance needs a FullShift base");
    if (len < 1) throw UsageError("window_len must be positive");
    const auto sample = a_sing_sample(cx.ss, depth);
    if (sample.all_of_base) throw DomainError("A_Sing is the whole base; no subshift can avoid it");
    std::vector<Word> out;
    const int lo = -(len / 2);
    for (const auto &p : sample.points) {
        Word w;
        for (int i = lo; i < lo + len; ++i) w.push_back(p.seq[0].at(i));
        out.push_back(std::move(w));
    }
    return out;
}

inline json run_avoidance(Context &cx, const json &a)
{
    const int depth = opt<int>(a, "depth", 8);
    const int len = opt<int>(a, "window_len", 32);
    const auto targets = opt<std::vector<double>>(a, "targets", {0.3, 0.45, 0.15});
    const int levels = opt<int>(a, "levels", 3);
    const double tol = opt<double>(a, "tol", 0.02);
    const auto forb = forbidden_windows(cx, depth, len);
    AvoidanceResult r = choose_subshift_avoiding(forb, targets, levels, tol, cx.sys.alphabet);
    // re-check every forbidden window against the chosen language
    bool clean = true;
    {
        LanguageIndex idx(r.subshift, static_cast<std::size_t>(len));
        for (const auto &w : forb) clean = clean && !idx.contains(w);
    }
    json j;
    j["forbidden_windows"] = forb.size();
    j["window_len"] = len;
    j["chosen_target_index"] = r.target_index;
    j["chosen_target"] = r.target;
    j["rejected_targets"] = r.rejected;
    j["measured_entropy"] = measured_entropy(r.subshift);
    j["l1"] = r.subshift.l1();
    j["l2"] = r.subshift.l2();
    j["period"] = r.subshift.period();
    j["verified_disjoint"] = clean;
    if (cx.measure_from_avoidance) {
        cx.support = std::make_shared<const Subshift>(std::move(r.subshift));
        cx.mu.subshift = cx.support;
    }
    return j;
}

inline json run_entropy_map(const Context &cx, const json &a, std::uint64_t seed)
{
    EntropyOptions o = entropy_options(a, seed);
    const auto on = opt<std::string>(a, "system", "base");
    DiscreteSystem sys = cx.sys;
    MeasureSampler mu = cx.mu;
    if (on == "support") {
        if (!cx.support) throw UsageError("entropy_map on the support needs a UniformOnSubshift measure");
        sys = subshift_system(cx.support);
        mu = MeasureSampler{};
        mu.seed = cx.mu.seed;
    } else if (on != "base") {
        throw UsageError("entropy_map.system must be \"base\" or \"support\"");
    }
    json j = estimate_to_json(entropy_estimate_map(sys, mu, o));
    j["system"] = on;
    return j;
}

inline json run_gamma_probe(const Context &cx, const json &a)
{
    if (cx.ss.singular.empty()) throw UsageError("gamma_probe needs a point singular set");
    const int n_max = opt<int>(a, "n_max", 30);
    SingularSuspension local = cx.ss;
    local.quad.cap = opt<double>(a, "cap", 1e12);
    const BasePoint xs = cx.ss.singular[0].p.base;
    json vals = json::array();
    std::vector<double> v;
    for (int n = 1; n <= n_max; ++n) {
        BasePoint x = xs;
        if (!x.x.empty()) {
            x.x[0] = wrap01(x.x[0] + std::ldexp(1.0, -n));
        } else {
            auto d = std::make_shared<SymbolSeq::Data>(*x.seq[0].data());
            const auto per = static_cast<std::int64_t>(d->size());
            std::int64_t at = (x.seq[0].phase() + n) % per;
            (*d)[static_cast<std::size_t>(at)] = static_cast<std::uint8_t>(((*d)[static_cast<std::size_t>(at)] + 1) % cx.sys.alphabet);
            x.seq[0] = SymbolSeq(std::move(d), x.seq[0].phase());
        }
        const ClockResult r = gamma_eval(local, x);
        v.push_back(r.value);
        vals.push_back(num(r.value));
    }
    // increasing while finite; past the cap every later value must stay certified infinite
    bool incr = true;
    int first_cap = -1;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::isinf(v[i - 1])) incr = incr && std::isinf(v[i]);
        else incr = incr && v[i] > v[i - 1];
    }
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::isinf(v[i])) {
            first_cap = static_cast<int>(i) + 1;
            break;
        }
    json j;
    j["gamma_at_singular_base"] = gamma_to_json(gamma_eval(local, xs));
    j["gamma_sequence"] = vals;
    j["cap"] = local.quad.cap;
    j["monotone_divergence"] = incr;
    j["first_n_over_cap"] = first_cap;
    j["final"] = num(v.empty() ? 0.0 : v.back());
    return j;
}

inline json run_expansive_map(const Context &cx, const json &a, std::uint64_t seed)
{
    PairSampler ps = pairs_from_json(opt<json>(a, "pairs", json::object()));
    if (!a.contains("pairs") || !a["pairs"].contains("seed")) ps.seed = seed;
    const double e = opt<double>(a, "e", 0.25);
    const int horizon = opt<int>(a, "horizon", 10);
    const auto n = opt<std::size_t>(a, "n_pairs", 1000);
    auto r = map_expansiveness_falsifier(cx.sys, e, ps, n, horizon);
    json j;
    j["result"] = r.counterexample ? "Counterexample" : "NoCounterexample";
    j["tested"] = r.tested;
    j["e"] = e;
    j["horizon"] = horizon;
    j["pairs"] = pairs_to_json(ps);
    j["min_orbit_max_distance"] = num(r.min_max_distance);
    if (r.witness) {
        j["witness"] = map_witness_to_json(*r.witness);
        j["witness_replays"] = replay_map_witness(cx.sys, *r.witness);
    }
    return j;
}

inline json run_expansive_flow(const Context &cx, const json &a, std::uint64_t seed)
{
    PairSampler ps = pairs_from_json(opt<json>(a, "pairs", json::object()));
    if (!a.contains("pairs") || !a["pairs"].contains("seed")) ps.seed = seed;
    const double eps = opt<double>(a, "eps", 0.25), delta = opt<double>(a, "delta", 0.05);
    const double inside = opt<double>(a, "inside_tol", 1e-6);
    const ReparamGrid g = grid_from_json(opt<json>(a, "grid", json::object()));
    const auto n = opt<std::size_t>(a, "n_pairs", 1000);
    auto r = flow_expansiveness_falsifier(cx.ss, eps, delta, ps, n, g, inside);
    json j;
    j["result"] = r.counterexample ? "Counterexample" : "NoCounterexample";
    j["tested"] = r.tested;
    j["eps"] = eps;
    j["delta"] = delta;
    j["grid"] = grid_to_json(g);
    j["pairs"] = pairs_to_json(ps);
    j["truncated_pairs"] = r.truncated;
    j["min_tracking"] = num(r.min_tracking);
    if (r.witness) {
        std::string why;
        j["witness"] = flow_witness_to_json(*r.witness);
        j["witness_replays"] = replay_flow_witness(cx.ss, *r.witness, &why);
        if (!why.empty()) j["replay_failure"] = why;
    }
    return j;
}

inline double thr(const json &t, const char *key, double dflt) { return opt<double>(t, key, dflt); }

inline json verdict(const std::string &name, const json &an, const json &t)
{
    json v{{"verdict", name}, {"pass", false}, {"detail", ""}};
    auto missing = [&](const char *a) -> bool {
        if (!an.contains(a)) {
            v["detail"] = std::string("analysis ") + a + " was not run";
            return true;
        }
        if (an[a].contains("error")) {
            v["detail"] = std::string("analysis ") + a + " failed: " + an[a]["error"].get<std::string>();
            return true;
        }
        return false;
    };
    char buf[256];
    if (name == "EntropyPositive" || name == "EntropyZero") {
        if (missing("entropy_flow")) return v;
        const auto &f = an["entropy_flow"];
        const double h = f["headline"].get<double>();
        if (f["inconclusive"].get<bool>()) {
            v["detail"] = "flow estimate inconclusive";
            return v;
        }
        if (name == "EntropyPositive") {
            const double lo = thr(t, "positive_min", 0.1);
            bool ok = h >= lo;
            std::snprintf(buf, sizeof buf, "flow headline %.4f >= %.4f", h, lo);
            std::string d = buf;
            const bool have_base = an.contains("entropy_map") && !an["entropy_map"].contains("error");
            if (t.contains("base_fraction") || t.contains("match_base")) {
                if (!have_base) {
                    v["detail"] = "base entropy estimate unavailable";
                    return v;
                }
                const double b = an["entropy_map"]["headline"].get<double>();
                if (t.contains("base_fraction")) {
                    const double fr = thr(t, "base_fraction", 0.5);
                    ok = ok && h >= fr * b;
                    std::snprintf(buf, sizeof buf, "; >= %.2f x base %.4f", fr, b);
                    d += buf;
                }
                if (t.contains("match_base")) {
                    const double m = thr(t, "match_base", 0.1);
                    ok = ok && std::fabs(h - b) <= m;
                    std::snprintf(buf, sizeof buf, "; |flow - base %.4f| = %.4f <= %.2f", b, std::fabs(h - b), m);
                    d += buf;
                }
            }
            v["pass"] = ok;
            v["detail"] = d;
        } else {
            const double hi = thr(t, "zero_max", 0.05), tail_hi = thr(t, "tail_max", 0.05);
            double tail = 0;
            for (const auto &s : f["tail_slopes"]) tail = std::max(tail, s.get<double>());
            v["pass"] = h <= hi && tail <= tail_hi;
            std::snprintf(buf, sizeof buf, "flow headline %.4f <= %.3f; max tail slope %.4f <= %.3f", h, hi, tail, tail_hi);
            v["detail"] = buf;
        }
        return v;
    }
    if (name == "GammaFinite" || name == "GammaDiverges") {
        if (missing("expected_gamma")) return v;
        const bool fin = an["expected_gamma"]["result"] == "Finite";
        v["pass"] = (name == "GammaFinite") == fin;
        v["detail"] = std::string("expected_gamma: ") + an["expected_gamma"]["result"].get<std::string>();
        return v;
    }
    if (name == "ExpansiveEvidence") {
        if (missing("expansive_flow")) return v;
        bool ok = an["expansive_flow"]["result"] == "NoCounterexample";
        std::string d = "flow falsifier: " + an["expansive_flow"]["result"].get<std::string>() + " over " +
                        std::to_string(an["expansive_flow"]["tested"].get<std::size_t>()) + " pairs";
        if (an.contains("expansive_map")) {
            if (missing("expansive_map")) return v;
            ok = ok && an["expansive_map"]["result"] == "NoCounterexample";
            d += "; map falsifier: " + an["expansive_map"]["result"].get<std::string>() + " over " +
                 std::to_string(an["expansive_map"]["tested"].get<std::size_t>()) + " pairs";
        }
        v["pass"] = ok;
        v["detail"] = d;
        return v;
    }
    if (name == "NonExpansive") {
        if (missing("expansive_flow")) return v;
        const auto &f = an["expansive_flow"];
        const bool ok = f["result"] == "Counterexample" && f.value("witness_replays", false);
        v["pass"] = ok;
        v["detail"] = "flow falsifier: " + f["result"].get<std::string>() + " after " +
                      std::to_string(f["tested"].get<std::size_t>()) + " pairs" +
                      (f.contains("witness_replays") ? (f["witness_replays"].get<bool>() ? ", witness replays" : ", witness does not replay") : "");
        return v;
    }
    v["detail"] = "unknown verdict";
    return v;
}

} // namespace detail

inline Report run_scenario(const Scenario &sc)
{
    json rep;
    rep["scenario"] = sc.name;
    rep["seed"] = sc.seed;
    rep["citation"] = sc.citation;
    rep["description"] = sc.description;
    rep["expected"] = sc.expected;
    json an = json::object();
    detail::Context cx;
    try {
        cx.sys = system_from_json(sc.system);
        cx.ss = make_singular_suspension(MappingTorus{cx.sys}, brake_from_json(cx.sys, sc.brake));
        const auto mk = opt<std::string>(sc.measure, "kind", "LebesgueOnBase");
        cx.mu.seed = opt<std::uint64_t>(sc.measure, "seed", derive_seed(sc.seed, 1));
        if (mk == "LebesgueOnBase") {
            cx.mu.kind = MeasureKind::LebesgueOnBase;
        } else if (mk == "ErgodicAlongOrbit") {
            cx.mu.kind = MeasureKind::ErgodicAlongOrbit;
            cx.mu.orbit_start = point_from_json(cx.sys, need(sc.measure, "start"));
            cx.mu.burn_in = opt<int>(sc.measure, "burn_in", 100);
        } else if (mk == "UniformOnSubshift") {
            cx.mu.kind = MeasureKind::UniformOnSubshift;
            const json &s = need(sc.measure, "subshift");
            if (s.is_string()) {
                if (s.get<std::string>() != "avoidance") throw UsageError("measure.subshift must be a subshift object or \"avoidance\"");
                if (!sc.analyses.contains("avoidance")) throw UsageError("measure from avoidance needs the avoidance analysis");
                cx.measure_from_avoidance = true;
            } else {
                cx.support = subshift_from_json(s);
                cx.mu.subshift = cx.support;
            }
        } else {
            throw UsageError("unknown measure kind " + mk);
        }
    } catch (const std::exception &e) {
        rep["setup_error"] = e.what();
        rep["verdicts"] = json::array();
        rep["pass"] = false;
        return Report{rep, false};
    }
    rep["system"] = system_to_json(cx.sys);
    rep["brake_kind"] = singular_kind_name(cx.ss.brake.kind);
    rep["measure"] = measure_to_json(cx.mu);

    auto run = [&](const char *name, const std::function<json(const json &)> &fn) {
        if (!sc.analyses.contains(name)) return;
        try {
            an[name] = fn(sc.analyses[name]);
        } catch (const std::exception &e) {
            an[name] = {{"error", e.what()}, {"error_kind", detail::error_kind(e)}};
        }
    };
    run("singularity_check", [&](const json &) {
        const auto c = singularity_count_check(cx.ss);
        json j{{"status", sing_check_name(c.status)}, {"count", c.count}, {"min_distance", num(c.min_distance)}};
        if (!c.message.empty()) j["message"] = c.message;
        return j;
    });
    run("a_sing", [&](const json &a) {
        const auto s = a_sing_sample(cx.ss, opt<int>(a, "depth", 2));
        return json{{"all_of_base", s.all_of_base}, {"points", s.points.size()}};
    });
    run("avoidance", [&](const json &a) { return detail::run_avoidance(cx, a); });
    if (cx.measure_from_avoidance && !cx.mu.subshift) {
        an["measure_error"] = "avoidance failed, no support measure";
    }
    run("entropy_map", [&](const json &a) { return detail::run_entropy_map(cx, a, derive_seed(sc.seed, 2)); });
    run("entropy_flow", [&](const json &a) {
        return estimate_to_json(entropy_estimate_flow(cx.ss, cx.mu, detail::entropy_options(a, derive_seed(sc.seed, 3))));
    });
    run("expected_gamma", [&](const json &a) {
        return expected_gamma_to_json(expected_gamma(cx.ss, cx.mu, opt<std::size_t>(a, "samples", 1000), opt<double>(a, "cap", 1e6)));
    });
    run("gamma_probe", [&](const json &a) { return detail::run_gamma_probe(cx, a); });
    run("expansive_map", [&](const json &a) { return detail::run_expansive_map(cx, a, derive_seed(sc.seed, 4)); });
    run("expansive_flow", [&](const json &a) { return detail::run_expansive_flow(cx, a, derive_seed(sc.seed, 5)); });
    rep["analyses"] = an;

    json vs = json::array();
    bool pass = true;
    for (const auto &v : sc.expected) {
        json r = detail::verdict(v, an, sc.thresholds);
        pass = pass && r["pass"].get<bool>();
        vs.push_back(std::move(r));
    }
    rep["verdicts"] = vs;
    rep["pass"] = pass;
    return Report{rep, pass};
}

inline Report run_scenario(Scenario sc, std::uint64_t seed)
{
    sc.seed = seed;
    return run_scenario(sc);
}

// ------------------------------------------------------------ bundled suite

namespace detail {

inline json flow_entropy(std::size_t samples, int n_from, int n_to, int step = 1)
{
    return {{"samples", samples},
            {"n_grid", {{"from", n_from}, {"to", n_to}, {"step", step}}},
            {"eps_grid", {0.5, 0.35, 0.25}}};
}

inline json golden_rotation() { return {{"kind", "CircleRotation"}, {"params", {{"preset", "golden"}}}}; }

inline Scenario make(std::string name, std::string citation, std::string description, json system, json brake, json measure,
                     json analyses, std::vector<std::string> expected, json thresholds = json::object())
{
    Scenario s;
    s.name = std::move(name);
    s.citation = std::move(citation);
    s.description = std::move(description);
    s.seed = 20240601;
    s.system = std::move(system);
    s.brake = std::move(brake);
    s.measure = std::move(measure);
    s.analyses = std::move(analyses);
    s.expected = std::move(expected);
    s.thresholds = std::move(thresholds);
    return s;
}

} // namespace detail

inline std::vector<Scenario> bundled_suite()
{
    using detail::flow_entropy;
    using detail::make;
    const json shift2 = {{"kind", "FullShift"}, {"params", {{"k", 2}}}};
    const json cat = {{"kind", "CatMap"}};
    const json leb = {{"kind", "LebesgueOnBase"}};
    const json none = nullptr;
    std::vector<Scenario> v;

    v.push_back(make("roof1-shift", "constant-roof suspension: flow entropy equals base entropy",
                     "alpha = 1 over the full 2-shift; the time-one map of the suspension flow has entropy log 2",
                     shift2, none, leb,
                     {{"entropy_map", {{"exhaustive", true}}}, {"entropy_flow", flow_entropy(16384, 1, 6)}},
                     {"EntropyPositive"}, {{"match_base", 0.1}}));
    v.push_back(make("roof1-catmap", "constant-roof suspension: flow entropy equals base entropy",
                     "alpha = 1 over the cat map; flow headline matches log((3+sqrt 5)/2)", cat, none, leb,
                     {{"entropy_map", {{"samples", 16384}}}, {"entropy_flow", flow_entropy(16384, 1, 6)}},
                     {"EntropyPositive"}, {{"match_base", 0.1}}));
    v.push_back(make("fiber-kill", "a singular fiber M x {1/2} makes the singular suspension entropy zero",
                     "WholeFiber(0.5) brake over the full 2-shift; every orbit is trapped below the fiber", shift2,
                     {{"singular_set", {{"fiber", 0.5}}}, {"profile", {{"power", 1.0}}}}, leb,
                     {{"singularity_check", json::object()},
                      {"a_sing", {{"depth", 2}}},
                      {"entropy_flow", flow_entropy(8192, 1, 14)}},
                     {"EntropyZero"}));
    v.push_back(make("circle-regular", "zero-entropy base gives a zero-entropy singular suspension",
                     "alpha = 1 over the golden rotation", detail::golden_rotation(), none, leb,
                     {{"entropy_map", json::object()}, {"entropy_flow", flow_entropy(8192, 4, 48, 4)}},
                     {"EntropyZero"}));
    v.push_back(make("circle-point-brake", "zero-entropy base gives a zero-entropy singular suspension",
                     "one Power(0.5) singularity over the golden rotation", detail::golden_rotation(),
                     {{"singular_set", {{"points", {{{"base", {{"x", {0.1}}}}, {"height", 0.5}}}}}},
                      {"profile", {{"power", 0.5}}}},
                     leb, {{"singularity_check", json::object()}, {"entropy_flow", flow_entropy(8192, 4, 48, 4)}},
                     {"EntropyZero"}));
    v.push_back(make("circle-nonexpansive", "expansive flow definition: suspensions of isometries are not expansive",
                     "alpha = 1 over the golden rotation; parallel orbits 0.01 apart track forever",
                     detail::golden_rotation(), none, leb,
                     {{"expansive_flow",
                       {{"eps", 0.25},
                        {"delta", 0.05},
                        {"n_pairs", 100},
                        {"pairs", {{"kind", "Nearby"}, {"radius", 0.01}, {"fixed_offset", true}, {"zero_fiber", true}}}}},
                      {"expansive_map",
                       {{"e", 0.25}, {"horizon", 30}, {"n_pairs", 100}, {"pairs", {{"kind", "Nearby"}, {"radius", 0.01}}}}}},
                     {"NonExpansive"}));
    v.push_back(make("expansive-shift", "finitely many singularities keep the suspension of an expansive map expansive",
                     "one Power(1) singularity over the full 2-shift; the base map is tested as well", shift2,
                     {{"singular_set", {{"points", {{{"base", {{"random", 11}}}, {"height", 0.5}}}}}},
                      {"profile", {{"power", 1.0}}}},
                     leb,
                     {{"singularity_check", json::object()},
                      {"expansive_flow",
                       {{"eps", 0.25},
                        {"delta", 0.05},
                        {"n_pairs", 1000},
                        {"pairs", {{"kind", "SymbolWindow"}, {"window", 10}, {"zero_fiber", false}}}}},
                      {"expansive_map",
                       {{"e", 0.25}, {"horizon", 10}, {"n_pairs", 1000}, {"pairs", {{"kind", "SymbolWindow"}, {"window", 10}}}}}},
                     {"ExpansiveEvidence"}));
    v.push_back(make("avoid-asing", "E_mu(gamma) finite on a positive-entropy measure away from A_Sing",
                     "singular orbit of the periodic point (001)^Z; a minimal subshift avoiding A_Sing carries the measure",
                     shift2,
                     {{"singular_set", {{"orbit", {{"seed", {{"base", {{"seq", {{{"period", "001"}, {"phase", 0}}}}}}, {"height", 0.5}}}, {"depth", 1}}}}},
                      {"profile", {{"power", 1.0}}}},
                     {{"kind", "UniformOnSubshift"}, {"subshift", "avoidance"}},
                     {{"a_sing", {{"depth", 8}}},
                      {"avoidance", {{"depth", 8}, {"window_len", 32}, {"targets", {0.3, 0.45, 0.15}}}},
                      {"entropy_map", {{"system", "support"}, {"exhaustive", true}}},
                      {"entropy_flow", flow_entropy(8192, 1, 8)},
                      {"expected_gamma", {{"samples", 1000}}}},
                     {"EntropyPositive", "GammaFinite"}, {{"base_fraction", 0.5}}));
    v.push_back(make("horseshoe-over-horseshoe", "E_mu(gamma) finite on a positive-entropy measure away from A_Sing",
                     "singular orbit sampled from a minimal subshift of entropy 0.15; a disjoint minimal subshift recovers entropy",
                     shift2,
                     {{"singular_set",
                       {{"orbit", {{"seed", {{"base", {{"subshift", subshift_spec(0.15)}, {"phase", 0}}}, {"height", 0.5}}}, {"depth", 8}}}}},
                      {"profile", {{"power", 1.0}}}},
                     {{"kind", "UniformOnSubshift"}, {"subshift", "avoidance"}},
                     {{"avoidance", {{"depth", 8}, {"window_len", 32}, {"targets", {0.15, 0.3, 0.45}}}},
                      {"entropy_map", {{"system", "support"}, {"exhaustive", true}}},
                      {"entropy_flow", flow_entropy(8192, 1, 8)},
                      {"expected_gamma", {{"samples", 1000}}}},
                     {"EntropyPositive", "GammaFinite"}, {{"base_fraction", 0.5}}));
    for (const char *prof : {"power", "exp"})
        for (int k : {1, 8, 64}) {
            const double par = std::string(prof) == "power" ? 0.1 : 0.02;
            v.push_back(make(std::string("anosov-") + prof + "-" + std::to_string(k),
                             "Anosov base: entropy vanishes iff the non-wandering set lies in pi(Sing)",
                             std::to_string(k) + " random singular points over the cat map; a countable set cannot cover the torus",
                             cat,
                             {{"singular_set", {{"random_points", {{"count", k}, {"seed", 9}}}}}, {"profile", {{prof, par}}}},
                             leb, {{"singularity_check", json::object()}, {"entropy_flow", flow_entropy(8192, 1, 8)}},
                             {"EntropyPositive"}, {{"positive_min", 0.5}}));
        }
    v.push_back(make("anosov-fiber", "Anosov base: entropy vanishes iff the non-wandering set lies in pi(Sing)",
                     "WholeFiber(0.5) over the cat map: pi(S) is the whole torus, so it covers the non-wandering set", cat,
                     {{"singular_set", {{"fiber", 0.5}}}, {"profile", {{"power", 1.0}}}}, leb,
                     {{"a_sing", {{"depth", 1}}}, {"entropy_flow", flow_entropy(8192, 1, 14)}}, {"EntropyZero"}));
    v.push_back(make("gamma-diverges-catmap", "E_mu(gamma) infinite for Lebesgue under a strong point brake",
                     "Power(4) point singularity over the cat map; the shell refinement near pi(S) does not decay", cat,
                     {{"singular_set", {{"points", {{{"base", {{"x", {0.3, 0.7}}}}, {"height", 0.5}}}}}},
                      {"profile", {{"power", 4.0}}}},
                     leb, {{"expected_gamma", {{"samples", 1000}}}, {"gamma_probe", {{"n_max", 30}, {"cap", 1e12}}}},
                     {"GammaDiverges"}));
    v.push_back(make("gamma-finite-catmap", "E_mu(gamma) finite for Lebesgue under a mild point brake",
                     "Power(0.5) point singularity over the cat map; gamma is integrable", cat,
                     {{"singular_set", {{"points", {{{"base", {{"x", {0.3, 0.7}}}}, {"height", 0.5}}}}}},
                      {"profile", {{"power", 0.5}}}},
                     leb, {{"expected_gamma", {{"samples", 1000}}}}, {"GammaFinite"}));
    return v;
}

inline const Scenario *find_bundled(const std::vector<Scenario> &suite, const std::string &name)
{
    for (const auto &s : suite)
        if (s.name == name) return &s;
    return nullptr;
}

} // namespace singsusp
