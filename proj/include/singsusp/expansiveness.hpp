#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "discrete_systems.hpp"
#include "mapping_torus.hpp"
#include "singular_suspension.hpp"

namespace singsusp {

// Monotone lattice paths on [0,T]x[0,T] with spacing dt, steps (a,b) with
// 1 <= a,b <= max_step, from (0,0) to the far corner.
struct ReparamGrid {
    double T = 20.0;
    double dt = 0.1;
    int max_step = 4;

    int samples() const { return static_cast<int>(std::llround(T / dt)) + 1; }
};

inline void check_grid(const ReparamGrid &g)
{
    if (!(g.T > 0) || !(g.dt > 0) || g.dt > g.T) throw UsageError("reparametrization grid needs 0 < dt <= T");
    if (g.max_step < 1) throw UsageError("max_step must be >= 1");
    if (g.samples() > 20001) throw UsageError("reparametrization grid too fine");
}

struct Trajectory {
    std::vector<LiftedPoint> pts; // psi_{k dt}(p), k = 0,1,..
    bool truncated = false;
};

// Samples psi_{dir k dt}(p) for k = 0..n-1, stepping by dt. Stops after the
// first sample that sits on S.
inline Trajectory sample_trajectory(const SingularSuspension &ss, const FiberPoint &p, int n, double dt, int dir)
{
    Trajectory tr;
    tr.pts.reserve(static_cast<std::size_t>(n));
    FiberPoint cur = fiber_point(ss.torus.system, p.base, p.h);
    tr.pts.push_back(lift(ss.torus, cur));
    for (int k = 1; k < n; ++k) {
        PsiResult r = psi_flow_ex(ss, dir * dt, cur);
        cur = r.point;
        tr.pts.push_back(lift(ss.torus, cur));
        if (r.trapped) {
            tr.truncated = k + 1 < n;
            break;
        }
    }
    return tr;
}

struct DpResult {
    double value = kInf;
    std::vector<std::pair<int, int>> path; // matched sample indices, (0,0) first
};

// Bottleneck path through the cost matrix c (rows x cols, row-major).
inline DpResult bottleneck_path(const std::vector<double> &c, int rows, int cols, int max_step)
{
    DpResult out;
    if (rows <= 0 || cols <= 0) return out;
    std::vector<double> d(c.size(), kInf);
    std::vector<int> from(c.size(), -1);
    d[0] = c[0];
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) {
            if (i == 0 && j == 0) continue;
            double best = kInf;
            int arg = -1;
            for (int a = 1; a <= max_step && a <= i; ++a)
                for (int b = 1; b <= max_step && b <= j; ++b) {
                    const int k = (i - a) * cols + (j - b);
                    if (d[k] < best) {
                        best = d[k];
                        arg = k;
                    }
                }
            if (arg < 0) continue;
            const int k = i * cols + j;
            d[k] = std::max(best, c[k]);
            from[k] = arg;
        }
    const int last = rows * cols - 1;
    out.value = d[last];
    if (out.value == kInf) return out;
    for (int k = last; k >= 0; k = from[k]) {
        out.path.emplace_back(k / cols, k % cols);
        if (k == 0) break;
    }
    std::reverse(out.path.begin(), out.path.end());
    return out;
}

inline DpResult bottleneck_path(const std::vector<std::vector<double>> &c, int max_step)
{
    const int rows = static_cast<int>(c.size());
    const int cols = rows ? static_cast<int>(c[0].size()) : 0;
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(rows * cols));
    for (const auto &r : c) flat.insert(flat.end(), r.begin(), r.end());
    return bottleneck_path(flat, rows, cols, max_step);
}

struct TrackingResult {
    double distance = kInf;
    bool truncated = false;
    // signed sample indices: forward pairs (i,j), backward pairs (-i,-j)
    std::vector<std::pair<int, int>> matching;
    Trajectory fwd_p, fwd_q, bwd_p, bwd_q;
};

// min over admissible reparametrizations of max d̄ along matched samples, on
// [-T, T] (forward and backward DPs anchored at the pair, combined by max).
inline TrackingResult reparam_tracking_distance(const SingularSuspension &ss, const FiberPoint &p, const FiberPoint &q,
                                                const ReparamGrid &g)
{
    check_grid(g);
    TrackingResult out;
    const int n = g.samples();
    out.fwd_p = sample_trajectory(ss, p, n, g.dt, 1);
    out.fwd_q = sample_trajectory(ss, q, n, g.dt, 1);
    out.bwd_p = sample_trajectory(ss, p, n, g.dt, -1);
    out.bwd_q = sample_trajectory(ss, q, n, g.dt, -1);
    out.truncated = out.fwd_p.truncated || out.fwd_q.truncated || out.bwd_p.truncated || out.bwd_q.truncated;
    double total = 0;
    for (int side = 0; side < 2; ++side) {
        const auto &a = side == 0 ? out.fwd_p.pts : out.bwd_p.pts;
        const auto &b = side == 0 ? out.fwd_q.pts : out.bwd_q.pts;
        const int rows = static_cast<int>(a.size()), cols = static_cast<int>(b.size());
        std::vector<double> c(static_cast<std::size_t>(rows * cols));
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) c[i * cols + j] = bar_metric(ss.torus, a[i], b[j]);
        DpResult r = bottleneck_path(c, rows, cols, g.max_step);
        total = std::max(total, r.value);
        for (const auto &[i, j] : r.path)
            if (side == 0)
                out.matching.emplace_back(i, j);
            else if (i != 0 || j != 0)
                out.matching.emplace_back(-i, -j);
    }
    out.distance = total;
    return out;
}

// min over s in [s_lo, s_hi] of d̄(q, phi_s(p)). Along one column d̄(q, .) is
// piecewise linear in the height with kinks at q.h and q.h +- 1/2, so the
// minimum sits at a kink or a piece end.
inline double distance_to_phi_arc(const MappingTorus &mt, const LiftedPoint &q, const FiberPoint &p, double s_lo,
                                  double s_hi)
{
    if (s_lo > s_hi) std::swap(s_lo, s_hi);
    const auto &sys = mt.system;
    const double a = p.h + s_lo, b = p.h + s_hi;
    double best = kInf;
    auto eval = [&](double abs_h) { best = std::min(best, bar_metric(mt, q, lift(mt, fiber_point(sys, p.base, abs_h)))); };
    eval(a);
    eval(b);
    for (double k = std::floor(a); k <= b; k += 1.0) {
        for (double off : {q.p.h, q.p.h - 0.5, q.p.h + 0.5, 0.0, 1.0}) {
            const double h = k + off;
            if (h > a && h < b) eval(h);
        }
        // left limit at the top of the column k
        const double top = std::nextafter(k + 1.0, k);
        if (top > a && top < b) eval(top);
    }
    return best;
}

struct FlowWitness {
    FiberPoint p, q;
    ReparamGrid grid;
    double eps = 0, delta = 0, inside_tol = 0;
    double tracking = 0;          // DP bottleneck value (<= delta)
    double min_arc_distance = 0;  // min over matched t0 of d̄(q_{h(t0)}, psi_[t0-eps,t0+eps](p))
    std::vector<std::pair<int, int>> matching;
};

struct FlowFalsifierResult {
    bool counterexample = false;
    std::size_t tested = 0;
    std::size_t truncated = 0;
    double min_tracking = kInf;
    std::optional<FlowWitness> witness;
};

struct MapWitness {
    BasePoint x, y;
    int horizon = 0;
    double e = 0;
    double max_distance = 0;
};

struct MapFalsifierResult {
    bool counterexample = false;
    std::size_t tested = 0;
    double min_max_distance = kInf; // smallest orbit-wide max distance seen
    std::optional<MapWitness> witness;
};

namespace detail {

inline void slot_alphabets(const DiscreteSystem &s, std::vector<int> &out)
{
    if (s.kind == SystemKind::Product) {
        for (const auto &f : s.factors) slot_alphabets(f, out);
        return;
    }
    if (s.nseqs() == 1) out.push_back(s.alphabet);
}

} // namespace detail

enum class PairKind { SymbolWindow, Nearby, Uniform };

inline const char *pair_kind_name(PairKind k)
{
    switch (k) {
    case PairKind::SymbolWindow: return "SymbolWindow";
    case PairKind::Nearby: return "Nearby";
    case PairKind::Uniform: return "Uniform";
    }
    return "?";
}

// Pairs (x, y) of distinct base points. SymbolWindow flips one symbol at an
// index in [-window, window] of every sequence slot; Nearby offsets every
// coordinate by at most `radius`.
struct PairSampler {
    PairKind kind = PairKind::Nearby;
    int window = 10;
    double radius = 0.01;
    bool fixed_offset = false; // Nearby: offset exactly +radius in the first coordinate
    bool zero_fiber = true;    // flow pairs start at height 0, else a shared uniform height
    std::uint64_t seed = 1;

    std::pair<BasePoint, BasePoint> draw(const DiscreteSystem &sys, std::size_t i) const
    {
        Rng rng(derive_seed(seed, i));
        BasePoint x = sample_uniform(sys, rng), y;
        switch (kind) {
        case PairKind::Uniform:
            do {
                y = sample_uniform(sys, rng);
            } while (base_distance(sys, x, y) == 0.0);
            break;
        case PairKind::Nearby:
            if (sys.ncoords() == 0) throw UsageError("Nearby pairs need a system with real coordinates");
            y = x;
            if (fixed_offset) {
                y.x[0] = wrap01(y.x[0] + radius);
            } else {
                do {
                    for (std::size_t c = 0; c < y.x.size(); ++c) y.x[c] = wrap01(x.x[c] + rng.uniform(-radius, radius));
                } while (base_distance(sys, x, y) == 0.0);
            }
            break;
        case PairKind::SymbolWindow: {
            if (sys.nseqs() == 0) throw UsageError("SymbolWindow pairs need a symbolic system");
            if (sys.kind == SystemKind::SubshiftSystem) throw UsageError("SymbolWindow pairs would leave the subshift");
            y = x;
            std::vector<int> alpha;
            detail::slot_alphabets(sys, alpha);
            for (std::size_t slot = 0; slot < y.seq.size(); ++slot) {
                auto &s = y.seq[slot];
                const int k = alpha[slot];
                const auto pos = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(2 * window + 1))) - window;
                auto d = std::make_shared<SymbolSeq::Data>(*s.data());
                const auto per = static_cast<std::int64_t>(d->size());
                std::int64_t at = (s.phase() + pos) % per;
                if (at < 0) at += per;
                auto &c = (*d)[static_cast<std::size_t>(at)];
                c = static_cast<std::uint8_t>((c + 1 + rng.below(static_cast<std::uint64_t>(std::max(1, k - 1)))) % k);
                s = SymbolSeq(std::move(d), s.phase());
            }
            break;
        }
        }
        return {std::move(x), std::move(y)};
    }

    double height(std::size_t i) const
    {
        if (zero_fiber) return 0.0;
        Rng rng(derive_seed(seed ^ 0x6865696768740aULL, i));
        return rng.uniform();
    }
};

namespace detail {

// min over matched (t0, h(t0)) of d̄(q_{h(t0)}, psi_[t0-eps, t0+eps](p))
inline double min_arc_distance(const SingularSuspension &ss, const TrackingResult &tr, double eps)
{
    double best = kInf;
    for (const auto &[i, j] : tr.matching) {
        const auto &pp = i >= 0 ? tr.fwd_p.pts[static_cast<std::size_t>(i)] : tr.bwd_p.pts[static_cast<std::size_t>(-i)];
        const auto &qq = j >= 0 ? tr.fwd_q.pts[static_cast<std::size_t>(j)] : tr.bwd_q.pts[static_cast<std::size_t>(-j)];
        const double lo = psi_flow_ex(ss, -eps, pp.p).phi_time;
        const double hi = psi_flow_ex(ss, eps, pp.p).phi_time;
        best = std::min(best, distance_to_phi_arc(ss.torus, qq, pp.p, lo, hi));
        if (best == 0.0) break;
    }
    return best;
}

} // namespace detail

// Tests the pair against the expansiveness definition; fills a witness when
// the pair tracks within delta yet q never enters p's eps-orbit-window.
inline std::optional<FlowWitness> flow_pair_counterexample(const SingularSuspension &ss, const FiberPoint &p,
                                                           const FiberPoint &q, double eps, double delta,
                                                           const ReparamGrid &g, double inside_tol,
                                                           TrackingResult *keep = nullptr)
{
    TrackingResult tr = reparam_tracking_distance(ss, p, q, g);
    std::optional<FlowWitness> out;
    if (tr.distance <= delta) {
        const double arc = detail::min_arc_distance(ss, tr, eps);
        if (arc > inside_tol) out = FlowWitness{p, q, g, eps, delta, inside_tol, tr.distance, arc, tr.matching};
    }
    if (keep) *keep = std::move(tr);
    return out;
}

inline FlowFalsifierResult flow_expansiveness_falsifier(const SingularSuspension &ss, double eps, double delta,
                                                        const PairSampler &pairs, std::size_t n_pairs,
                                                        const ReparamGrid &g = {}, double inside_tol = 1e-6)
{
    if (!(eps > 0) || !(delta > 0)) throw UsageError("eps and delta must be positive");
    check_grid(g);
    const auto &sys = ss.torus.system;
    std::vector<double> dist(n_pairs, kInf);
    std::vector<char> trunc(n_pairs, 0);
    std::vector<std::optional<FlowWitness>> found(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
        auto [x, y] = pairs.draw(sys, i);
        const double h = pairs.height(i);
        TrackingResult tr;
        found[i] = flow_pair_counterexample(ss, FiberPoint{x, h}, FiberPoint{y, h}, eps, delta, g, inside_tol, &tr);
        dist[i] = tr.distance;
        trunc[i] = tr.truncated;
    });
    FlowFalsifierResult out;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        ++out.tested;
        out.truncated += trunc[i] ? 1 : 0;
        out.min_tracking = std::min(out.min_tracking, dist[i]);
        if (found[i]) {
            out.counterexample = true;
            out.witness = found[i];
            break; // first counterexample in sample order
        }
    }
    return out;
}

// Recomputes everything a flow witness claims.
inline bool replay_flow_witness(const SingularSuspension &ss, const FlowWitness &w, std::string *why = nullptr)
{
    auto fail = [&](const char *m) {
        if (why) *why = m;
        return false;
    };
    if (base_distance(ss.torus.system, w.p.base, w.q.base) == 0.0 && w.p.h == w.q.h) return fail("points coincide");
    TrackingResult tr = reparam_tracking_distance(ss, w.p, w.q, w.grid);
    if (!(tr.distance <= w.delta)) return fail("pair does not track within delta");
    // the stored matching is itself admissible and within delta
    TrackingResult replay = tr;
    replay.matching = w.matching;
    double along = 0;
    for (const auto &[i, j] : w.matching) {
        if ((i >= 0) != (j >= 0)) return fail("matching mixes time directions");
        const auto &P = i >= 0 ? tr.fwd_p.pts : tr.bwd_p.pts;
        const auto &Q = j >= 0 ? tr.fwd_q.pts : tr.bwd_q.pts;
        const auto ai = static_cast<std::size_t>(std::abs(i)), bj = static_cast<std::size_t>(std::abs(j));
        if (ai >= P.size() || bj >= Q.size()) return fail("matching index out of range");
        along = std::max(along, bar_metric(ss.torus, P[ai], Q[bj]));
    }
    if (!(along <= w.delta)) return fail("stored matching exceeds delta");
    if (!(detail::min_arc_distance(ss, replay, w.eps) > w.inside_tol)) return fail("q enters the eps-window of p");
    return true;
}

inline double map_orbit_max_distance(const DiscreteSystem &sys, const BasePoint &x, const BasePoint &y, int horizon)
{
    double m = base_distance(sys, x, y);
    BasePoint a = x, b = y;
    for (int n = 1; n <= horizon; ++n) {
        a = iterate(sys, a, 1);
        b = iterate(sys, b, 1);
        m = std::max(m, base_distance(sys, a, b));
    }
    a = x;
    b = y;
    for (int n = 1; n <= horizon; ++n) {
        a = iterate(sys, a, -1);
        b = iterate(sys, b, -1);
        m = std::max(m, base_distance(sys, a, b));
    }
    return m;
}

inline MapFalsifierResult map_expansiveness_falsifier(const DiscreteSystem &sys, double e, const PairSampler &pairs,
                                                      std::size_t n_pairs, int horizon)
{
    if (horizon < 1) throw UsageError("horizon must be >= 1");
    if (!(e > 0)) throw UsageError("e must be positive");
    std::vector<double> m(n_pairs);
    parallel_for(n_pairs, [&](std::size_t i) {
        auto [x, y] = pairs.draw(sys, i);
        m[i] = map_orbit_max_distance(sys, x, y, horizon);
    });
    MapFalsifierResult out;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        ++out.tested;
        out.min_max_distance = std::min(out.min_max_distance, m[i]);
        if (m[i] <= e) {
            auto [x, y] = pairs.draw(sys, i);
            out.counterexample = true;
            out.witness = MapWitness{std::move(x), std::move(y), horizon, e, m[i]};
            break;
        }
    }
    return out;
}

inline bool replay_map_witness(const DiscreteSystem &sys, const MapWitness &w)
{
    if (base_distance(sys, w.x, w.y) == 0.0) return false;
    return map_orbit_max_distance(sys, w.x, w.y, w.horizon) <= w.e;
}

enum class SingCheckStatus { FiniteOK, Violation, Incompatible };

inline const char *sing_check_name(SingCheckStatus s)
{
    switch (s) {
    case SingCheckStatus::FiniteOK: return "FiniteOK";
    case SingCheckStatus::Violation: return "Violation";
    case SingCheckStatus::Incompatible: return "Incompatible";
    }
    return "?";
}

struct SingCheck {
    SingCheckStatus status = SingCheckStatus::FiniteOK;
    std::size_t count = 0;
    double min_distance = kInf;
    std::pair<std::size_t, std::size_t> pair{0, 0}; // closest (or coinciding) pair
    std::string message;
};

inline SingCheck singularity_count_check(const SingularSuspension &ss, double coincide_tol = 1e-12)
{
    SingCheck out;
    if (ss.brake.kind == SingularKind::WholeFiber) {
        out.status = SingCheckStatus::Incompatible;
        out.message = "singular set is a whole fiber: infinitely many singularities, no expansive flow possible";
        return out;
    }
    out.count = ss.singular.size();
    for (std::size_t i = 0; i < ss.singular.size(); ++i)
        for (std::size_t j = i + 1; j < ss.singular.size(); ++j) {
            const double d = bar_metric(ss.torus, ss.singular[i], ss.singular[j]);
            if (d < out.min_distance) {
                out.min_distance = d;
                out.pair = {i, j};
            }
        }
    if (out.min_distance <= coincide_tol) {
        out.status = SingCheckStatus::Violation;
        out.message = "two singular points coincide";
    }
    return out;
}

} // namespace singsusp
