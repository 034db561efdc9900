#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "discrete_systems.hpp"
#include "mapping_torus.hpp"
#include "quadrature.hpp"

namespace singsusp {

enum class SingularKind { None, PointList, OrbitClosure, WholeFiber };
enum class ProfileKind { Power, Exponential };

inline const char *singular_kind_name(SingularKind k)
{
    switch (k) {
    case SingularKind::None: return "None";
    case SingularKind::PointList: return "PointList";
    case SingularKind::OrbitClosure: return "OrbitClosure";
    case SingularKind::WholeFiber: return "WholeFiber";
    }
    return "?";
}

struct Brake {
    SingularKind kind = SingularKind::None;
    std::vector<FiberPoint> points; // PointList; points[0] seeds OrbitClosure
    int depth = 0;                  // OrbitClosure
    double s0 = 0.5;                // WholeFiber
    ProfileKind profile = ProfileKind::Power;
    double param = 1.0; // exponent k or rate c
};

inline Brake no_brake() { return Brake{}; }

inline Brake point_brake(std::vector<FiberPoint> pts, ProfileKind prof, double param)
{
    Brake b;
    b.kind = pts.empty() ? SingularKind::None : SingularKind::PointList;
    b.points = std::move(pts);
    b.profile = prof;
    b.param = param;
    return b;
}

inline Brake orbit_brake(FiberPoint seed, int depth, ProfileKind prof, double param)
{
    Brake b;
    b.kind = SingularKind::OrbitClosure;
    b.points = {std::move(seed)};
    b.depth = depth;
    b.profile = prof;
    b.param = param;
    return b;
}

inline Brake fiber_brake(double s0, ProfileKind prof, double param)
{
    Brake b;
    b.kind = SingularKind::WholeFiber;
    b.s0 = wrap01(s0);
    b.profile = prof;
    b.param = param;
    return b;
}

struct QuadratureControls {
    double cap = 1e6;        // divergence certificate threshold
    double rel_tol = 1e-11;  // per-interval relative tolerance
    double abs_tol = 1e-14;  // per-unit-length absolute tolerance
    int max_intervals = 200000;
    double time_tol = 1e-11; // root-find tolerance in psi-time
};

struct SingularSuspension {
    MappingTorus torus;
    Brake brake;
    QuadratureControls quad;
    std::vector<LiftedPoint> singular;    // finite singular set (point kinds)
    std::vector<double> breakpoints;      // singular heights in [0,1)
    double lip = 2.0;                      // vertical Lipschitz constant of d̄

    bool regular() const { return brake.kind == SingularKind::None; }
};

inline SingularSuspension make_singular_suspension(const MappingTorus &mt, Brake brake, QuadratureControls q = {})
{
    if (brake.kind != SingularKind::None && !(brake.param > 0)) throw UsageError("brake profile parameter must be positive");
    SingularSuspension ss;
    ss.torus = mt;
    ss.quad = q;
    ss.lip = vertical_lipschitz(mt);
    switch (brake.kind) {
    case SingularKind::None: break;
    case SingularKind::PointList:
        for (auto &p : brake.points) {
            check_point(mt.system, p.base);
            p = fiber_point(mt.system, p.base, p.h);
            ss.singular.push_back(lift(mt, p));
        }
        break;
    case SingularKind::OrbitClosure: {
        if (brake.points.empty()) throw UsageError("orbit brake needs a seed point");
        if (brake.depth < 0) throw UsageError("orbit depth must be nonnegative");
        const FiberPoint seed = fiber_point(mt.system, brake.points[0].base, brake.points[0].h);
        check_point(mt.system, seed.base);
        for (int n = -brake.depth; n <= brake.depth; ++n)
            ss.singular.push_back(lift(mt, FiberPoint{iterate(mt.system, seed.base, n), seed.h}));
        break;
    }
    case SingularKind::WholeFiber: ss.breakpoints.push_back(brake.s0); break;
    }
    for (const auto &s : ss.singular) ss.breakpoints.push_back(s.p.h);
    std::sort(ss.breakpoints.begin(), ss.breakpoints.end());
    ss.breakpoints.erase(std::unique(ss.breakpoints.begin(), ss.breakpoints.end()), ss.breakpoints.end());
    ss.brake = std::move(brake);
    return ss;
}

inline double profile_g(const Brake &b, double r)
{
    if (r <= 0) return 0.0;
    if (b.profile == ProfileKind::Power) return std::pow(r, b.param);
    return std::exp(-b.param / r);
}

// 1/g is not integrable at r = 0
inline bool profile_nonintegrable(const Brake &b) { return b.profile == ProfileKind::Exponential || b.param >= 1.0; }

inline double distance_to_singular(const SingularSuspension &ss, const LiftedPoint &p)
{
    if (ss.brake.kind == SingularKind::WholeFiber) return height_distance(p.p.h, ss.brake.s0);
    double r = kInf;
    for (const auto &s : ss.singular) r = std::min(r, bar_metric(ss.torus, p, s));
    return r;
}

inline double alpha_eval(const SingularSuspension &ss, const LiftedPoint &p)
{
    if (ss.regular()) return 1.0;
    return profile_g(ss.brake, distance_to_singular(ss, p));
}

inline double alpha_eval(const SingularSuspension &ss, const FiberPoint &p) { return alpha_eval(ss, lift(ss.torus, p)); }

enum class ClockStatus { Finite, HitsSingularity, ExceedsCap };

inline const char *clock_status_name(ClockStatus s)
{
    switch (s) {
    case ClockStatus::Finite: return "Finite";
    case ClockStatus::HitsSingularity: return "SegmentMeetsSingularity";
    case ClockStatus::ExceedsCap: return "LowerBoundExceedsCap";
    }
    return "?";
}

struct ClockResult {
    double value = 0.0;     // +inf unless Finite
    ClockStatus status = ClockStatus::Finite;
    double lower_bound = 0; // certified lower bound when divergent
    double hit_time = kInf; // phi-time at which the segment meets S
};

namespace detail {

// One vertical piece of a phi-trajectory: the part inside a single column.
struct Piece {
    LiftedPoint at; // column base; h is overwritten during evaluation
    double h_from = 0, h_to = 0;
    bool hit = false; // the closed piece meets S at hit_h
    double hit_h = 0;
};

class ColumnWalker {
public:
    ColumnWalker(const SingularSuspension &ss, const FiberPoint &p, int dir) : ss_(ss), dir_(dir) { cur_ = lift(ss.torus, p); }

    Piece next()
    {
        if (dir_ < 0 && cur_.p.h == 0.0) {
            // continue from the top of the previous column
            cur_ = lift(ss_.torus, FiberPoint{iterate(ss_.torus.system, cur_.p.base, -1), 0.0});
            cur_.p.h = 1.0;
        }
        Piece pc;
        pc.at = cur_;
        pc.h_from = cur_.p.h;
        pc.h_to = dir_ > 0 ? 1.0 : 0.0;
        const double lo = std::min(pc.h_from, pc.h_to), hi = std::max(pc.h_from, pc.h_to);
        auto meets = [&](double sh) { return sh >= lo && sh <= hi; };
        double best = kInf;
        if (ss_.brake.kind == SingularKind::WholeFiber) {
            for (double sh : {ss_.brake.s0, ss_.brake.s0 + 1.0})
                if (meets(sh)) best = std::min(best, std::fabs(sh - pc.h_from));
        } else {
            for (const auto &s : ss_.singular) {
                if (meets(s.p.h) && base_distance(ss_.torus.system, cur_.p.base, s.p.base) <= 1e-13)
                    best = std::min(best, std::fabs(s.p.h - pc.h_from));
                // (y,0) is also the top (f^{-1}y, 1) of the column below
                if (s.p.h == 0.0 && hi == 1.0 && base_distance(ss_.torus.system, cur_.fbase, s.p.base) <= 1e-13)
                    best = std::min(best, std::fabs(1.0 - pc.h_from));
            }
        }
        if (best < kInf) {
            pc.hit = true;
            pc.hit_h = pc.h_from + dir_ * best;
        }
        if (dir_ > 0) cur_ = lift(ss_.torus, FiberPoint{cur_.fbase, 0.0});
        else cur_.p.h = 0.0;
        return pc;
    }

private:
    const SingularSuspension &ss_;
    int dir_;
    LiftedPoint cur_;
};

// r(h) = a + b h on [l, r]
struct Segment {
    double l, r, a, b;
    double at(double h) const { return std::max(0.0, a + b * h); }
};

// Distance to S along one column as a function of the height. With the base
// fixed, d̄ to each singular point is piecewise linear in h (kinks at the
// singular height and half a unit away from it), so r(h) is the lower
// envelope of finitely many lines and can be listed exactly.
class ColumnProfile {
public:
    ColumnProfile(const SingularSuspension &ss, const LiftedPoint &col)
    {
        const auto &sys = ss.torus.system;
        if (ss.brake.kind == SingularKind::WholeFiber) {
            add(ss.brake.s0, 0, 0, 0, 0);
        } else {
            for (const auto &s : ss.singular)
                add(s.p.h, base_distance(sys, col.fbase, s.fbase), base_distance(sys, col.p.base, s.fbase),
                    base_distance(sys, col.p.base, s.p.base), base_distance(sys, s.p.base, col.fbase));
        }
        std::sort(kinks_.begin(), kinks_.end());
        kinks_.erase(std::unique(kinks_.begin(), kinks_.end()), kinks_.end());
    }

    double r(double h) const
    {
        double m = kInf;
        for (const auto &f : fns_) m = std::min(m, f.eval(h));
        return std::max(0.0, m);
    }

    // lower envelope on [lo, hi] as maximal linear segments
    std::vector<Segment> envelope(double lo, double hi) const
    {
        std::vector<Segment> out;
        if (!(hi > lo)) return out;
        std::vector<double> cuts = {lo};
        for (double k : kinks_)
            if (k > lo && k < hi) cuts.push_back(k);
        cuts.push_back(hi);
        std::vector<std::pair<double, double>> lines(fns_.size());
        for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
            const double L = cuts[c], R = cuts[c + 1], mid = 0.5 * (L + R);
            for (std::size_t i = 0; i < fns_.size(); ++i) lines[i] = fns_[i].line(mid);
            double x = L;
            // current minimum at x (ties: smaller slope wins going right)
            auto pick = [&](double at) {
                std::size_t best = 0;
                double bv = kInf, bs = kInf;
                for (std::size_t i = 0; i < lines.size(); ++i) {
                    const double v = lines[i].first + lines[i].second * at;
                    if (v < bv - 1e-15 || (std::fabs(v - bv) <= 1e-15 && lines[i].second < bs)) {
                        best = i;
                        bv = v;
                        bs = lines[i].second;
                    }
                }
                return best;
            };
            std::size_t cur = pick(x);
            while (x < R) {
                const auto [a0, b0] = lines[cur];
                double nx = R;
                std::size_t nxt = cur;
                for (std::size_t i = 0; i < lines.size(); ++i) {
                    const auto [a1, b1] = lines[i];
                    if (b1 >= b0) continue;
                    const double xi = (a1 - a0) / (b0 - b1);
                    if (xi > x && xi < nx) {
                        nx = xi;
                        nxt = i;
                    }
                }
                if (!out.empty() && out.back().a == a0 && out.back().b == b0 && out.back().r == x) out.back().r = nx;
                else out.push_back(Segment{x, nx, a0, b0});
                x = nx;
                cur = nxt;
            }
        }
        return out;
    }

private:
    struct Fn {
        double t, D1, D2, D3, D4;
        // value and local line of d̄((col,h), sigma)
        std::pair<double, double> line(double h) const
        {
            double a, b;
            if (h <= t) { // column point lower
                a = t * D2 + (1 - t) * D3;
                b = D1 - D2;
                if (t - h <= 0.5) {
                    a += t;
                    b -= 1;
                } else {
                    a += 1 - t;
                    b += 1;
                }
            } else { // singular point lower
                a = t * D1 - t * D4 + D3;
                b = D4 - D3;
                if (h - t <= 0.5) {
                    a -= t;
                    b += 1;
                } else {
                    a += 1 + t;
                    b -= 1;
                }
            }
            return {a, b};
        }
        double eval(double h) const
        {
            const auto [a, b] = line(h);
            return a + b * h;
        }
    };

    void add(double t, double D1, double D2, double D3, double D4)
    {
        fns_.push_back(Fn{t, D1, D2, D3, D4});
        for (double k : {t, t - 0.5, t + 0.5})
            if (k > 0 && k < 1) kinks_.push_back(k);
    }

    std::vector<Fn> fns_;
    std::vector<double> kinks_;
};

// Integral of 1/g(a + b h) over [l, l + w]; power profiles in closed form.
inline double segment_integral(const SingularSuspension &ss, const Segment &sg, double l, double w, double cap, bool &capped)
{
    capped = false;
    if (w <= 0) return 0.0;
    const Brake &br = ss.brake;
    const double u = sg.at(l);
    if (br.profile == ProfileKind::Power) {
        const double k = br.param;
        if (u <= 0) return kInf;
        if (sg.b == 0.0) return w * std::pow(u, -k);
        const double z = sg.b * w / u;
        if (z <= -1.0) {
            // the segment runs down to alpha = 0
            if (k >= 1.0) return kInf;
            return -std::pow(u, 1 - k) / (sg.b * (1 - k));
        }
        const double L = std::log1p(z);
        if (!std::isfinite(L)) return kInf;
        if (k == 1.0) return L / sg.b;
        return std::pow(u, 1 - k) * std::expm1((1 - k) * L) / (sg.b * (1 - k));
    }
    const double c = br.param;
    auto f = [&](double h) {
        const double r = sg.at(h);
        return r > 0 ? std::exp(c / r) : kInf;
    };
    auto lower = [&](double x0, double x1) { return (x1 - x0) * std::min(f(x0), f(x1)); };
    auto res = adaptive_integrate(f, lower, l, l + w, ss.quad.rel_tol, ss.quad.abs_tol, cap, ss.quad.max_intervals);
    if (res.status == QuadStatus::NotConverged)
        throw NumericalError("quadrature did not converge near the singular set on heights [" + std::to_string(l) + ", " +
                             std::to_string(l + w) + "], " + std::to_string(res.intervals) + " intervals");
    capped = res.status == QuadStatus::ExceedsCap;
    return capped ? kInf : res.value;
}

// Width w with segment_integral(l, w) = R, or +inf if not reached within max_w.
inline double segment_invert(const SingularSuspension &ss, const Segment &sg, double l, double R, double max_w, double ttol)
{
    const Brake &br = ss.brake;
    const double u = sg.at(l);
    if (br.profile == ProfileKind::Power) {
        const double k = br.param;
        double w;
        if (sg.b == 0.0) {
            w = R * std::pow(u, k);
        } else {
            const double z = (k == 1.0) ? R * sg.b : std::log1p(R * sg.b * (1 - k) * std::pow(u, k - 1)) / (1 - k);
            if (!std::isfinite(z)) return kInf;
            w = u * std::expm1(z) / sg.b;
        }
        if (!(w >= 0) || w > max_w) return kInf;
        return w;
    }
    // monotone root of the smooth segment integral: Newton with bisection fallback
    bool capped;
    if (sg.at(l + max_w) > 0 && segment_integral(ss, sg, l, max_w, kInf, capped) < R) return kInf;
    double lo = 0, hi = max_w, cur = 0, acc = 0;
    const double c = br.param;
    for (int it = 0; it < 200; ++it) {
        const double r = sg.at(l + cur);
        double nxt = cur + (R - acc) / std::exp(c / r);
        if (!(nxt > lo && nxt < hi) || !std::isfinite(nxt)) nxt = 0.5 * (lo + hi);
        if (l + nxt == l + cur) break;
        const double a = std::min(cur, nxt), b = std::max(cur, nxt);
        const double inc = segment_integral(ss, sg, l + a, b - a, kInf, capped);
        acc += nxt >= cur ? inc : -inc;
        cur = nxt;
        if (acc < R) lo = cur;
        else hi = cur;
        if (std::fabs(acc - R) <= ttol || hi - lo <= 1e-16) break;
        if (it == 199)
            throw NumericalError("psi root-find did not converge; bracket [" + std::to_string(l + lo) + ", " + std::to_string(l + hi) + "]");
    }
    return cur;
}

struct PieceIntegral {
    double value = 0;
    bool capped = false;
};

// Integral of 1/alpha over heights [a, b] of one column
inline PieceIntegral integrate_piece(const SingularSuspension &ss, const ColumnProfile &prof, double a, double b, double cap)
{
    PieceIntegral out;
    if (!(b > a)) return out;
    if (ss.regular()) {
        out.value = b - a;
        return out;
    }
    for (const auto &sg : prof.envelope(a, b)) {
        bool capped;
        const double v = segment_integral(ss, sg, sg.l, sg.r - sg.l, cap - out.value, capped);
        if (capped || !std::isfinite(v)) {
            out.capped = true;
            out.value = kInf;
            return out;
        }
        out.value += v;
        if (out.value > cap) {
            out.capped = true;
            return out;
        }
    }
    return out;
}

} // namespace detail

// psi-time elapsed while phi flows from p for phi-time s >= 0 (or backwards for dir < 0)
inline ClockResult clock_eval(const SingularSuspension &ss, const FiberPoint &p, double s, int dir = 1)
{
    if (s < 0) throw UsageError("clock needs s >= 0");
    ClockResult out;
    if (s == 0) return out;
    if (ss.regular()) {
        out.value = s;
        return out;
    }
    detail::ColumnWalker walk(ss, p, dir);
    double used = 0, acc = 0;
    while (used < s) {
        detail::Piece pc = walk.next();
        const double len = std::fabs(pc.h_to - pc.h_from);
        const double take = std::min(len, s - used);
        if (pc.hit) {
            const double dh = std::fabs(pc.hit_h - pc.h_from);
            if (dh < take || dh == 0.0 || (dh == take && profile_nonintegrable(ss.brake))) {
                out.status = ClockStatus::HitsSingularity;
                out.value = kInf;
                out.hit_time = used + dh;
                out.lower_bound = kInf;
                return out;
            }
        }
        const double stop_h = pc.h_from + dir * take;
        detail::ColumnProfile prof(ss, pc.at);
        auto pi = detail::integrate_piece(ss, prof, std::min(pc.h_from, stop_h), std::max(pc.h_from, stop_h), ss.quad.cap - acc);
        if (pi.capped) {
            out.status = ClockStatus::ExceedsCap;
            out.value = kInf;
            out.lower_bound = std::max(ss.quad.cap, acc + (std::isfinite(pi.value) ? pi.value : 0.0));
            return out;
        }
        acc += pi.value;
        used += take;
    }
    out.value = acc;
    return out;
}

inline double clock(const SingularSuspension &ss, const FiberPoint &p, double s) { return clock_eval(ss, p, s).value; }

struct PsiResult {
    FiberPoint point;
    bool trapped = false; // the trajectory reached (or sits on) a singular point
    double phi_time = 0;  // signed phi-time s* with clock(p, s*) = |t|
};

// psi_t(p) = phi_{s*}(p) with clock(p, s*) = t. Negative t walks the columns
// downwards with the same integrals.
inline PsiResult psi_flow_ex(const SingularSuspension &ss, double t, const FiberPoint &p)
{
    PsiResult out;
    out.point = p;
    if (t == 0) return out;
    if (ss.regular()) {
        out.point = suspension_flow(ss.torus, t, p);
        out.phi_time = t;
        return out;
    }
    const int dir = t > 0 ? 1 : -1;
    const double target = std::fabs(t);
    const double ttol = ss.quad.time_tol * std::max(1.0, target);
    detail::ColumnWalker walk(ss, p, dir);
    double acc = 0, used = 0;
    for (;;) {
        detail::Piece pc = walk.next();
        const double end_h = pc.hit ? pc.hit_h : pc.h_to;
        const double span = std::fabs(end_h - pc.h_from);
        if (pc.hit && span == 0.0) {
            // on S: frozen
            out.trapped = true;
            out.point = fiber_point(ss.torus.system, pc.at.p.base, pc.hit_h);
            out.phi_time = dir * used;
            return out;
        }
        detail::ColumnProfile prof(ss, pc.at);
        auto segs = prof.envelope(std::min(pc.h_from, end_h), std::max(pc.h_from, end_h));
        if (dir < 0) std::reverse(segs.begin(), segs.end());
        for (std::size_t si = 0; si < segs.size(); ++si) {
            // walk the segment in direction dir: reparametrize so width grows from the start
            detail::Segment sg = segs[si];
            const double w = sg.r - sg.l;
            const double start = dir > 0 ? sg.l : sg.r;
            detail::Segment g{0, w, sg.a + sg.b * start, dir * sg.b};
            const double rem = target - acc;
            const double ws = detail::segment_invert(ss, g, 0.0, rem, w, ttol);
            if (ws <= w) {
                out.point = fiber_point(ss.torus.system, pc.at.p.base, start + dir * ws);
                out.phi_time = dir * (used + std::fabs(start - pc.h_from) + ws);
                return out;
            }
            bool capped;
            const bool touches_hit = pc.hit && si + 1 == segs.size();
            const double v = touches_hit && profile_nonintegrable(ss.brake) ? kInf
                                                                            : detail::segment_integral(ss, g, 0.0, w, kInf, capped);
            acc += v;
        }
        if (pc.hit) {
            // reaches the singular point before time t and stays there
            out.trapped = true;
            out.point = fiber_point(ss.torus.system, pc.at.p.base, pc.hit_h);
            out.phi_time = dir * (used + span);
            return out;
        }
        used += span;
    }
}

inline FiberPoint psi_flow(const SingularSuspension &ss, double t, const FiberPoint &p) { return psi_flow_ex(ss, t, p).point; }

inline ClockResult gamma_eval(const SingularSuspension &ss, const BasePoint &x)
{
    return clock_eval(ss, FiberPoint{x, 0.0}, 1.0);
}

inline double gamma(const SingularSuspension &ss, const BasePoint &x) { return gamma_eval(ss, x).value; }

struct ASingSample {
    bool all_of_base = false;
    std::vector<BasePoint> points;
};

inline ASingSample a_sing_sample(const SingularSuspension &ss, int depth)
{
    if (depth < 0) throw UsageError("depth must be nonnegative");
    ASingSample out;
    if (ss.brake.kind == SingularKind::WholeFiber) {
        out.all_of_base = true;
        return out;
    }
    for (const auto &s : ss.singular)
        for (int n = -depth; n <= depth; ++n) {
            BasePoint b = iterate(ss.torus.system, s.p.base, n);
            bool dup = false;
            for (const auto &q : out.points)
                if (base_distance(ss.torus.system, q, b) == 0.0) {
                    dup = true;
                    break;
                }
            if (!dup) out.points.push_back(std::move(b));
        }
    return out;
}

// ---------------------------------------------------------------- measures

enum class MeasureKind { LebesgueOnBase, ErgodicAlongOrbit, UniformOnSubshift };

inline const char *measure_kind_name(MeasureKind k)
{
    switch (k) {
    case MeasureKind::LebesgueOnBase: return "LebesgueOnBase";
    case MeasureKind::ErgodicAlongOrbit: return "ErgodicAlongOrbit";
    case MeasureKind::UniformOnSubshift: return "UniformOnSubshift";
    }
    return "?";
}

struct MeasureSampler {
    MeasureKind kind = MeasureKind::LebesgueOnBase;
    std::uint64_t seed = 1;
    BasePoint orbit_start; // ErgodicAlongOrbit
    int burn_in = 100;
    std::shared_ptr<const Subshift> subshift; // UniformOnSubshift

    // i-th sample point; independent of how many samples are drawn
    BasePoint draw_one(const DiscreteSystem &sys, std::size_t i) const
    {
        switch (kind) {
        case MeasureKind::LebesgueOnBase: {
            Rng rng(derive_seed(seed, i));
            return sample_uniform(sys, rng);
        }
        case MeasureKind::ErgodicAlongOrbit:
            return iterate(sys, orbit_start, static_cast<std::int64_t>(burn_in) + static_cast<std::int64_t>(i));
        case MeasureKind::UniformOnSubshift: {
            if (!subshift) throw UsageError("UniformOnSubshift needs a subshift");
            if (sys.ncoords() != 0 || sys.nseqs() != 1)
                throw UsageError("UniformOnSubshift needs a one-sided symbolic base system");
            Rng rng(derive_seed(seed, i));
            BasePoint b;
            b.seq.push_back(subshift->point(static_cast<std::int64_t>(rng.below(subshift->period()))));
            return b;
        }
        }
        return {};
    }

    std::vector<BasePoint> draw(const DiscreteSystem &sys, std::size_t n) const
    {
        std::vector<BasePoint> out(n);
        if (kind == MeasureKind::ErgodicAlongOrbit) {
            BasePoint cur = iterate(sys, orbit_start, burn_in);
            for (std::size_t i = 0; i < n; ++i) {
                out[i] = cur;
                cur = iterate(sys, cur, 1);
            }
            return out;
        }
        for (std::size_t i = 0; i < n; ++i) out[i] = draw_one(sys, i);
        return out;
    }
};

// Uniform sample in the closed ball of radius 2^-m around c (Lebesgue / Bernoulli),
// with the ball's measure. Used for the tail refinement of E(gamma).
inline BasePoint sample_in_ball(const DiscreteSystem &sys, const BasePoint &c, int m, Rng &rng, double &measure)
{
    BasePoint p = sample_uniform(sys, rng);
    const double rho = std::ldexp(1.0, -m);
    measure = 1.0;
    for (std::size_t i = 0; i < p.x.size(); ++i) {
        p.x[i] = wrap01(c.x[i] + rng.uniform(-rho, rho));
        measure *= 2 * rho;
    }
    // symbols: agree with the centre on |i| < m (distance <= 2^-m)
    std::size_t so = 0;
    std::function<void(const DiscreteSystem &)> fix = [&](const DiscreteSystem &s) {
        if (s.kind == SystemKind::Product) {
            for (const auto &f : s.factors) fix(f);
            return;
        }
        if (s.nseqs() == 0) return;
        const int k = s.alphabet;
        auto d = std::make_shared<SymbolSeq::Data>(*p.seq[so].data());
        const auto per = static_cast<std::int64_t>(d->size());
        for (std::int64_t i = -(m - 1); i <= m - 1; ++i) {
            std::int64_t pos = (p.seq[so].phase() + i) % per;
            if (pos < 0) pos += per;
            (*d)[static_cast<std::size_t>(pos)] = c.seq[so].at(i);
        }
        p.seq[so] = SymbolSeq(std::move(d), p.seq[so].phase());
        measure *= std::pow(static_cast<double>(k), -(2.0 * m - 1));
        ++so;
    };
    fix(sys);
    return p;
}

struct ExpectedGamma {
    bool finite = true;
    double estimate = 0;  // Finite: mean; otherwise a lower bound
    double stderr_ = 0;
    std::size_t samples = 0;
    std::size_t divergent_samples = 0;
    std::vector<double> shell_contributions; // refinement diagnostic near pi(S)
    double shell_ratio = 0;                  // fitted contribution ratio per halving of the ball radius
    std::string reason;
};

inline ExpectedGamma expected_gamma(const SingularSuspension &ss, const MeasureSampler &mu, std::size_t n_samples,
                                    double cap = 1e6)
{
    if (n_samples < 100) throw UsageError("expected_gamma needs at least 100 samples");
    SingularSuspension local = ss;
    local.quad.cap = cap;
    const auto &sys = ss.torus.system;
    const auto pts = mu.draw(sys, n_samples);
    std::vector<double> g(n_samples);
    parallel_for(n_samples, [&](std::size_t i) { g[i] = gamma(local, pts[i]); });

    ExpectedGamma out;
    out.samples = n_samples;
    double sum = 0, sum2 = 0;
    std::size_t nf = 0;
    for (double v : g) {
        if (!std::isfinite(v)) {
            ++out.divergent_samples;
            continue;
        }
        sum += v;
        sum2 += v * v;
        ++nf;
    }
    const double mean = nf ? sum / static_cast<double>(nf) : 0;
    const double var = nf > 1 ? std::max(0.0, (sum2 - nf * mean * mean) / static_cast<double>(nf - 1)) : 0;
    out.estimate = mean;
    out.stderr_ = nf ? std::sqrt(var / static_cast<double>(nf)) : 0;
    if (out.divergent_samples > 0) {
        out.finite = false;
        out.estimate = sum / static_cast<double>(n_samples) + cap * static_cast<double>(out.divergent_samples) / n_samples;
        out.reason = std::to_string(out.divergent_samples) + " sampled fibers meet the singular set or exceed the cap";
        return out;
    }
    // tail refinement around pi(S): contributions of nested balls must decay
    if (mu.kind == MeasureKind::LebesgueOnBase && !ss.singular.empty()) {
        const int shells = 6, per_shell = 64;
        std::vector<BasePoint> centres;
        for (const auto &s : ss.singular) {
            bool dup = false;
            for (const auto &c : centres)
                if (base_distance(sys, c, s.p.base) == 0) dup = true;
            if (!dup) centres.push_back(s.p.base);
        }
        std::vector<double> contrib(shells, 0.0);
        // no cap here: clamping near pi(S) would hide the growth being measured
        SingularSuspension refine = local;
        refine.quad.cap = std::numeric_limits<double>::max();
        const int m0 = sys.symbolic() ? 2 : 3;
        std::vector<double> vals(static_cast<std::size_t>(shells * per_shell) * centres.size());
        std::vector<double> meas(vals.size());
        parallel_for(vals.size(), [&](std::size_t idx) {
            const std::size_t ci = idx / (shells * per_shell);
            const int j = static_cast<int>((idx / per_shell) % shells);
            Rng rng(derive_seed(mu.seed ^ 0x5bd1e995ULL, idx));
            double m = 0;
            BasePoint x = sample_in_ball(sys, centres[ci], m0 + j, rng, m);
            vals[idx] = gamma(refine, x);
            meas[idx] = m;
        });
        bool inf_seen = false;
        for (std::size_t idx = 0; idx < vals.size(); ++idx) {
            const int j = static_cast<int>((idx / per_shell) % shells);
            if (!std::isfinite(vals[idx])) inf_seen = true;
            else contrib[j] += meas[idx] * vals[idx] / per_shell;
        }
        out.shell_contributions = contrib;
        // fitted per-shell ratio of the contributions; single shells are too noisy
        double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
        for (int j = 0; j < shells; ++j) {
            if (!(contrib[j] > 0)) continue;
            const double y = std::log(contrib[j]);
            sx += j;
            sy += y;
            sxx += double(j) * j;
            sxy += j * y;
            cnt += 1;
        }
        const double den = cnt * sxx - sx * sx;
        const double ratio = cnt >= 3 && den > 0 ? std::exp((cnt * sxy - sx * sy) / den) : 0.0;
        out.shell_ratio = ratio;
        const bool non_decaying = ratio >= 0.9;
        if (inf_seen || non_decaying) {
            out.finite = false;
            out.reason = inf_seen ? "refined samples near the singular fibers meet the singular set"
                                  : "ball contributions near the singular fibers do not decay under refinement";
        }
    }
    return out;
}

// Monte-Carlo estimate of the integral of xi against the lifted measure,
// using dt = du / alpha along each vertical segment.
inline double lift_integral(const SingularSuspension &ss, const MeasureSampler &mu,
                            const std::function<double(const FiberPoint &)> &xi, std::size_t n_samples)
{
    const auto &sys = ss.torus.system;
    const auto pts = mu.draw(sys, n_samples);
    std::vector<double> num(n_samples), den(n_samples);
    parallel_for(n_samples, [&](std::size_t i) {
        const ClockResult g = gamma_eval(ss, pts[i]);
        if (g.status != ClockStatus::Finite) {
            den[i] = kInf;
            return;
        }
        den[i] = g.value;
        // inner integral split at singular heights
        LiftedPoint at = lift(ss.torus, FiberPoint{pts[i], 0.0});
        std::vector<double> cuts = {0.0};
        for (double b : ss.breakpoints)
            if (b > 0 && b < 1) cuts.push_back(b);
        cuts.push_back(1.0);
        double acc = 0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
            auto f = [&](double h) {
                at.p.h = h;
                const double a = alpha_eval(ss, at);
                return xi(at.p) / a;
            };
            auto none = [](double, double) { return 0.0; };
            auto r = adaptive_integrate(f, none, cuts[k], cuts[k + 1], 1e-9, 1e-12, kInf, ss.quad.max_intervals);
            acc += r.value;
        }
        num[i] = acc;
    });
    double sn = 0, sd = 0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        if (!std::isfinite(den[i]))
            throw DomainError("lifted measure undefined: E(gamma) diverges on this sample (a sampled fiber meets the singular set)");
        sn += num[i];
        sd += den[i];
    }
    return sn / sd;
}

} // namespace singsusp
