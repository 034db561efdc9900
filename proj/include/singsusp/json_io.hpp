#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "discrete_systems.hpp"
#include "entropy.hpp"
#include "expansiveness.hpp"
#include "mapping_torus.hpp"
#include "singular_suspension.hpp"
#include "symbolic.hpp"

namespace singsusp {

using json = nlohmann::ordered_json;

// infinities are written as the strings "inf" / "-inf"
inline json num(double v)
{
    if (std::isnan(v)) return nullptr;
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

inline double get_num(const json &j)
{
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return kInf;
        if (s == "-inf") return -kInf;
        throw UsageError("expected a number, got \"" + s + "\"");
    }
    if (!j.is_number()) throw UsageError("expected a number");
    return j.get<double>();
}

template <class T>
T opt(const json &j, const char *key, T dflt)
{
    if (!j.is_object() || !j.contains(key) || j[key].is_null()) return dflt;
    if constexpr (std::is_same_v<T, double>)
        return get_num(j[key]);
    else
        return j[key].get<T>();
}

inline const json &need(const json &j, const char *key)
{
    if (!j.is_object() || !j.contains(key)) throw UsageError(std::string("missing field \"") + key + "\"");
    return j[key];
}

// ------------------------------------------------------------------ subshifts

namespace detail {

inline std::string pack_word(const Word &w, int alphabet)
{
    const int bits = bits_for(alphabet);
    std::string out;
    std::uint32_t acc = 0;
    int have = 0;
    static const char *hex = "0123456789abcdef";
    auto flush_nibble = [&] {
        out.push_back(hex[(acc >> (have - 4)) & 0xF]);
        have -= 4;
    };
    for (auto c : w) {
        acc = (acc << bits) | c;
        have += bits;
        while (have >= 4) flush_nibble();
        acc &= (1u << have) - 1u;
    }
    if (have > 0) {
        acc <<= (4 - have);
        have = 4;
        flush_nibble();
    }
    return out;
}

inline Word unpack_word(const std::string &s, std::size_t len, int alphabet)
{
    const int bits = bits_for(alphabet);
    Word w;
    w.reserve(len);
    std::uint32_t acc = 0;
    int have = 0;
    for (char ch : s) {
        int v;
        if (ch >= '0' && ch <= '9') v = ch - '0';
        else if (ch >= 'a' && ch <= 'f') v = ch - 'a' + 10;
        else throw UsageError("bad hex digit in packed word");
        acc = (acc << 4) | static_cast<std::uint32_t>(v);
        have += 4;
        while (have >= bits && w.size() < len) {
            const auto c = static_cast<std::uint8_t>((acc >> (have - bits)) & ((1u << bits) - 1u));
            if (c >= alphabet) throw UsageError("packed symbol outside the alphabet");
            w.push_back(c);
            have -= bits;
        }
        acc &= (1u << have) - 1u;
    }
    if (w.size() != len) throw UsageError("packed word too short");
    return w;
}

inline const char *subshift_kind_name(SubshiftKind k)
{
    switch (k) {
    case SubshiftKind::Constructed: return "Constructed";
    case SubshiftKind::Full: return "Full";
    case SubshiftKind::Constant: return "Constant";
    }
    return "?";
}

} // namespace detail

constexpr int kSubshiftEnvelopeVersion = 1;

// Full level schedule with bit-packed block sets and the canonical period.
inline json subshift_envelope(const Subshift &sh)
{
    json j;
    j["format"] = "singsusp-subshift";
    j["version"] = kSubshiftEnvelopeVersion;
    j["kind"] = detail::subshift_kind_name(sh.kind);
    j["alphabet"] = sh.alphabet;
    j["target"] = sh.target;
    j["tol"] = sh.tol;
    j["levels_requested"] = sh.requested_levels;
    j["seed"] = sh.seed;
    json lv = json::array();
    for (const auto &l : sh.levels) {
        json b = json::array();
        for (const auto &w : l.blocks) b.push_back(detail::pack_word(w, sh.alphabet));
        lv.push_back({{"block_len", l.block_len}, {"prefix_blocks", l.prefix_blocks}, {"free_slots", l.free_slots}, {"blocks", b}});
    }
    j["levels"] = lv;
    j["period"] = sh.period();
    j["canonical"] = sh.canonical ? detail::pack_word(*sh.canonical, sh.alphabet) : "";
    return j;
}

inline Subshift subshift_from_envelope(const json &j)
{
    if (opt<std::string>(j, "format", "") != "singsusp-subshift") throw UsageError("not a subshift envelope");
    if (opt<int>(j, "version", 0) != kSubshiftEnvelopeVersion) throw UsageError("unsupported subshift envelope version");
    Subshift sh;
    const auto kind = need(j, "kind").get<std::string>();
    if (kind == "Constructed") sh.kind = SubshiftKind::Constructed;
    else if (kind == "Full") sh.kind = SubshiftKind::Full;
    else if (kind == "Constant") sh.kind = SubshiftKind::Constant;
    else throw UsageError("unknown subshift kind " + kind);
    sh.alphabet = need(j, "alphabet").get<int>();
    if (sh.alphabet < 2 || sh.alphabet > 10) throw UsageError("alphabet size must be in [2,10]");
    sh.target = opt<double>(j, "target", 0.0);
    sh.tol = opt<double>(j, "tol", 0.0);
    sh.requested_levels = opt<int>(j, "levels_requested", 0);
    sh.seed = opt<std::uint64_t>(j, "seed", 0);
    for (const auto &l : opt<json>(j, "levels", json::array())) {
        SubshiftLevel lev;
        lev.block_len = need(l, "block_len").get<int>();
        lev.prefix_blocks = opt<int>(l, "prefix_blocks", 0);
        lev.free_slots = opt<int>(l, "free_slots", 0);
        for (const auto &b : need(l, "blocks"))
            lev.blocks.push_back(detail::unpack_word(b.get<std::string>(), static_cast<std::size_t>(lev.block_len), sh.alphabet));
        sh.levels.push_back(std::move(lev));
    }
    const auto period = need(j, "period").get<std::size_t>();
    if (period == 0) throw UsageError("subshift envelope has an empty canonical point");
    sh.canonical = std::make_shared<const SymbolSeq::Data>(detail::unpack_word(need(j, "canonical").get<std::string>(), period, sh.alphabet));
    return sh;
}

// Subshifts in configs: {"target": c, "levels": L, "tol": t, "alphabet": k},
// {"full": k}, {"constant": s}, or a full envelope. Constructed subshifts are
// deterministic, so configs name them by their parameters.
inline std::shared_ptr<const Subshift> subshift_from_json(const json &j)
{
    static std::mutex mu;
    static std::map<std::tuple<double, int, double, int>, std::shared_ptr<const Subshift>> cache;
    if (j.contains("format")) return std::make_shared<const Subshift>(subshift_from_envelope(j));
    if (j.contains("full")) return std::make_shared<const Subshift>(full_shift_subshift(j["full"].get<int>()));
    if (j.contains("constant")) return std::make_shared<const Subshift>(constant_subshift(j["constant"].get<std::uint8_t>()));
    const auto key = std::make_tuple(get_num(need(j, "target")), opt<int>(j, "levels", 3), opt<double>(j, "tol", 0.02),
                                     opt<int>(j, "alphabet", 2));
    {
        std::lock_guard<std::mutex> lk(mu);
        if (auto it = cache.find(key); it != cache.end()) return it->second;
    }
    auto sh = std::make_shared<const Subshift>(
        minimal_subshift_with_entropy(std::get<0>(key), std::get<1>(key), std::get<2>(key), std::get<3>(key)));
    std::lock_guard<std::mutex> lk(mu);
    return cache.emplace(key, sh).first->second;
}

inline json subshift_spec(double target, int levels = 3, double tol = 0.02, int alphabet = 2)
{
    return {{"target", target}, {"levels", levels}, {"tol", tol}, {"alphabet", alphabet}};
}

// -------------------------------------------------------------------- systems

inline json system_to_json(const DiscreteSystem &s)
{
    json j;
    j["kind"] = kind_name(s.kind);
    switch (s.kind) {
    case SystemKind::CircleRotation: j["params"] = {{"angle", s.angle}}; break;
    case SystemKind::FullShift: j["params"] = {{"k", s.alphabet}}; break;
    case SystemKind::Product: {
        json f = json::array();
        for (const auto &x : s.factors) f.push_back(system_to_json(x));
        j["params"] = {{"factors", f}};
        break;
    }
    case SystemKind::SubshiftSystem: {
        const auto &sh = *s.subshift;
        if (sh.kind == SubshiftKind::Constructed)
            j["params"] = {{"subshift", subshift_spec(sh.target, sh.requested_levels, sh.tol, sh.alphabet)}};
        else
            j["params"] = {{"subshift", subshift_envelope(sh)}};
        break;
    }
    default: j["params"] = json::object();
    }
    return j;
}

inline DiscreteSystem system_from_json(const json &j)
{
    const auto kind = need(j, "kind").get<std::string>();
    const json params = opt<json>(j, "params", json::object());
    if (kind == "CatMap") return cat_map();
    if (kind == "SkewTorus") return skew_torus();
    if (kind == "CircleRotation") {
        if (params.contains("angle")) return circle_rotation(get_num(params["angle"]));
        if (opt<std::string>(params, "preset", "") == "golden") return circle_rotation((std::sqrt(5.0) - 1) / 2);
        throw UsageError("CircleRotation needs params.angle");
    }
    if (kind == "FullShift") return full_shift(opt<int>(params, "k", 2));
    if (kind == "Product") {
        std::vector<DiscreteSystem> f;
        for (const auto &x : need(params, "factors")) f.push_back(system_from_json(x));
        return product(std::move(f));
    }
    if (kind == "SubshiftSystem") return subshift_system(subshift_from_json(need(params, "subshift")));
    throw UsageError("unknown system kind \"" + kind + "\"");
}

// --------------------------------------------------------------------- points

inline json point_to_json(const BasePoint &p)
{
    json j = json::object();
    if (!p.x.empty()) j["x"] = p.x;
    if (!p.seq.empty()) {
        json s = json::array();
        for (const auto &q : p.seq) s.push_back({{"period", q.period_string()}, {"phase", q.phase()}});
        j["seq"] = s;
    }
    return j;
}

// {"x": [...], "seq": [{"period": "0110", "phase": 0}]}, {"random": seed},
// or {"subshift": {...}, "phase": n} for a point of a constructed subshift.
inline BasePoint point_from_json(const DiscreteSystem &sys, const json &j)
{
    BasePoint p;
    if (j.contains("random")) {
        Rng rng(j["random"].get<std::uint64_t>());
        p = sample_uniform(sys, rng);
    } else if (j.contains("subshift")) {
        auto sh = subshift_from_json(j["subshift"]);
        p.seq.push_back(sh->point(opt<std::int64_t>(j, "phase", 0)));
    } else {
        std::vector<double> x;
        if (j.contains("x")) x = j["x"].get<std::vector<double>>();
        std::vector<SymbolSeq> seq;
        if (j.contains("seq"))
            for (const auto &s : j["seq"]) seq.push_back(SymbolSeq::from_string(need(s, "period").get<std::string>(), opt<std::int64_t>(s, "phase", 0)));
        p = make_point(std::move(x), std::move(seq));
    }
    check_point(sys, p);
    return p;
}

inline json fiber_point_to_json(const FiberPoint &p) { return {{"base", point_to_json(p.base)}, {"height", p.h}}; }

inline FiberPoint fiber_point_from_json(const DiscreteSystem &sys, const json &j)
{
    const double h = opt<double>(j, "height", 0.0);
    if (!(h >= 0) || !(h < 1)) throw UsageError("height must lie in [0,1)");
    return FiberPoint{point_from_json(sys, need(j, "base")), h};
}

// --------------------------------------------------------------------- brakes

inline json profile_to_json(const Brake &b)
{
    if (b.profile == ProfileKind::Power) return {{"power", b.param}};
    return {{"exp", b.param}};
}

inline json brake_to_json(const Brake &b)
{
    json j;
    switch (b.kind) {
    case SingularKind::None: j["singular_set"] = nullptr; return j;
    case SingularKind::PointList: {
        json pts = json::array();
        for (const auto &p : b.points) pts.push_back(fiber_point_to_json(p));
        j["singular_set"] = {{"points", pts}};
        break;
    }
    case SingularKind::OrbitClosure:
        j["singular_set"] = {{"orbit", {{"seed", fiber_point_to_json(b.points.at(0))}, {"depth", b.depth}}}};
        break;
    case SingularKind::WholeFiber: j["singular_set"] = {{"fiber", b.s0}}; break;
    }
    j["profile"] = profile_to_json(b);
    return j;
}

// singular_set: null | {"points": [...]} | {"random_points": {"count": n, "seed": s, "height": h?}}
//             | {"orbit": {"seed": fp, "depth": d}} | {"fiber": s0}
// profile: {"power": k} | {"exp": c}
inline Brake brake_from_json(const DiscreteSystem &sys, const json &j)
{
    if (j.is_null()) return no_brake();
    const json &set = opt<json>(j, "singular_set", json());
    if (set.is_null()) return no_brake();
    const json &pr = need(j, "profile");
    ProfileKind kind;
    double param;
    if (pr.contains("power")) {
        kind = ProfileKind::Power;
        param = get_num(pr["power"]);
    } else if (pr.contains("exp")) {
        kind = ProfileKind::Exponential;
        param = get_num(pr["exp"]);
    } else {
        throw UsageError("profile must be {\"power\": k} or {\"exp\": c}");
    }
    if (!(param > 0)) throw UsageError("profile parameter must be positive");
    if (set.contains("fiber")) return fiber_brake(get_num(set["fiber"]), kind, param);
    if (set.contains("orbit")) {
        const json &o = set["orbit"];
        return orbit_brake(fiber_point_from_json(sys, need(o, "seed")), need(o, "depth").get<int>(), kind, param);
    }
    std::vector<FiberPoint> pts;
    if (set.contains("points"))
        for (const auto &p : set["points"]) pts.push_back(fiber_point_from_json(sys, p));
    if (set.contains("random_points")) {
        const json &r = set["random_points"];
        const auto n = need(r, "count").get<std::size_t>();
        const auto seed = opt<std::uint64_t>(r, "seed", 1);
        const bool fixed_h = r.contains("height");
        const double h = opt<double>(r, "height", 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            Rng rng(derive_seed(seed, i));
            BasePoint b = sample_uniform(sys, rng);
            pts.push_back(FiberPoint{std::move(b), fixed_h ? h : rng.uniform()});
        }
    }
    if (pts.empty()) throw UsageError("singular set lists no points");
    return point_brake(std::move(pts), kind, param);
}

// ------------------------------------------------------------------- measures

inline json measure_to_json(const MeasureSampler &m)
{
    json j;
    j["kind"] = measure_kind_name(m.kind);
    j["seed"] = m.seed;
    if (m.kind == MeasureKind::ErgodicAlongOrbit) {
        j["start"] = point_to_json(m.orbit_start);
        j["burn_in"] = m.burn_in;
    }
    return j;
}

// ------------------------------------------------------------------ estimates

inline json estimate_to_json(const EntropyEstimate &e)
{
    json j;
    j["headline"] = e.headline;
    j["inconclusive"] = e.inconclusive;
    j["exact"] = e.exact;
    j["sample_size"] = e.sample_size;
    j["n_grid"] = e.n_grid;
    j["eps_grid"] = e.eps_grid;
    json cells = json::array();
    for (const auto &c : e.cells)
        cells.push_back({{"n", c.n}, {"eps", c.eps}, {"count", c.count}, {"raw_count", c.raw_count}, {"saturated", c.saturated}});
    j["counts"] = cells;
    json fits = json::array();
    for (const auto &f : e.fits)
        fits.push_back({{"eps", f.eps}, {"ok", f.ok}, {"slope", f.slope}, {"intercept", f.intercept}, {"stderr", f.stderr_},
                        {"n_from", f.n_from}, {"n_to", f.n_to}});
    j["fits"] = fits;
    j["tail_slopes"] = tail_slopes(e);
    j["diagnostics"] = e.diagnostics;
    return j;
}

// columns: n, eps, count, log_count
inline std::string estimate_tsv(const EntropyEstimate &e)
{
    std::ostringstream os;
    os.precision(17);
    os << "n\teps\tcount\tlog_count\n";
    for (const auto &c : e.cells)
        os << c.n << '\t' << c.eps << '\t' << c.count << '\t' << std::log(static_cast<double>(std::max<std::size_t>(1, c.count))) << '\n';
    return os.str();
}

inline json gamma_to_json(const ClockResult &r)
{
    return {{"value", num(r.value)}, {"status", clock_status_name(r.status)}, {"lower_bound", num(r.lower_bound)}};
}

inline json expected_gamma_to_json(const ExpectedGamma &g)
{
    json j;
    j["result"] = g.finite ? "Finite" : "DivergenceSuspected";
    j["estimate"] = num(g.estimate);
    j["stderr"] = num(g.stderr_);
    j["samples"] = g.samples;
    j["divergent_samples"] = g.divergent_samples;
    json sh = json::array();
    for (double v : g.shell_contributions) sh.push_back(num(v));
    j["shell_contributions"] = sh;
    if (!g.shell_contributions.empty()) j["shell_ratio"] = g.shell_ratio;
    if (!g.reason.empty()) j["reason"] = g.reason;
    return j;
}

inline json grid_to_json(const ReparamGrid &g) { return {{"T", g.T}, {"dt", g.dt}, {"max_step", g.max_step}}; }

inline ReparamGrid grid_from_json(const json &j)
{
    ReparamGrid g;
    g.T = opt<double>(j, "T", g.T);
    g.dt = opt<double>(j, "dt", g.dt);
    g.max_step = opt<int>(j, "max_step", g.max_step);
    check_grid(g);
    return g;
}

inline json pairs_to_json(const PairSampler &p)
{
    json j{{"kind", pair_kind_name(p.kind)}, {"seed", p.seed}, {"zero_fiber", p.zero_fiber}};
    if (p.kind == PairKind::SymbolWindow) j["window"] = p.window;
    if (p.kind == PairKind::Nearby) {
        j["radius"] = p.radius;
        j["fixed_offset"] = p.fixed_offset;
    }
    return j;
}

inline PairSampler pairs_from_json(const json &j)
{
    PairSampler p;
    const auto k = opt<std::string>(j, "kind", "Nearby");
    if (k == "SymbolWindow") p.kind = PairKind::SymbolWindow;
    else if (k == "Nearby") p.kind = PairKind::Nearby;
    else if (k == "Uniform") p.kind = PairKind::Uniform;
    else throw UsageError("unknown pair kind " + k);
    p.window = opt<int>(j, "window", p.window);
    p.radius = opt<double>(j, "radius", p.radius);
    p.fixed_offset = opt<bool>(j, "fixed_offset", p.fixed_offset);
    p.zero_fiber = opt<bool>(j, "zero_fiber", p.zero_fiber);
    p.seed = opt<std::uint64_t>(j, "seed", p.seed);
    if (p.window < 0) throw UsageError("pair window must be nonnegative");
    if (!(p.radius > 0)) throw UsageError("pair radius must be positive");
    return p;
}

inline json matching_to_json(const std::vector<std::pair<int, int>> &m)
{
    json a = json::array();
    for (const auto &[i, j] : m) a.push_back(json::array({i, j}));
    return a;
}

inline json flow_witness_to_json(const FlowWitness &w)
{
    return {{"p", fiber_point_to_json(w.p)},
            {"q", fiber_point_to_json(w.q)},
            {"grid", grid_to_json(w.grid)},
            {"eps", w.eps},
            {"delta", w.delta},
            {"inside_tol", w.inside_tol},
            {"tracking", w.tracking},
            {"min_arc_distance", num(w.min_arc_distance)},
            {"matching", matching_to_json(w.matching)}};
}

inline FlowWitness flow_witness_from_json(const DiscreteSystem &sys, const json &j)
{
    FlowWitness w;
    w.p = fiber_point_from_json(sys, need(j, "p"));
    w.q = fiber_point_from_json(sys, need(j, "q"));
    w.grid = grid_from_json(need(j, "grid"));
    w.eps = get_num(need(j, "eps"));
    w.delta = get_num(need(j, "delta"));
    w.inside_tol = get_num(need(j, "inside_tol"));
    w.tracking = get_num(need(j, "tracking"));
    w.min_arc_distance = get_num(need(j, "min_arc_distance"));
    for (const auto &m : need(j, "matching")) w.matching.emplace_back(m.at(0).get<int>(), m.at(1).get<int>());
    return w;
}

inline json map_witness_to_json(const MapWitness &w)
{
    return {{"x", point_to_json(w.x)}, {"y", point_to_json(w.y)}, {"horizon", w.horizon}, {"e", w.e}, {"max_distance", w.max_distance}};
}

inline MapWitness map_witness_from_json(const DiscreteSystem &sys, const json &j)
{
    return MapWitness{point_from_json(sys, need(j, "x")), point_from_json(sys, need(j, "y")), need(j, "horizon").get<int>(),
                      get_num(need(j, "e")), get_num(need(j, "max_distance"))};
}

inline json read_json_file(const std::string &path)
{
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error &e) {
        throw UsageError(path + ": " + e.what());
    }
}

} // namespace singsusp
