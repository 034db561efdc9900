#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "discrete_systems.hpp"

namespace singsusp {

// (x, s) with s in [0,1); (x,1) is stored as (f(x),0).
struct FiberPoint {
    BasePoint base;
    double h = 0.0;
};

struct MappingTorus {
    DiscreteSystem system;
};

inline FiberPoint fiber_point(const DiscreteSystem &s, BasePoint base, double h)
{
    const double k = std::floor(h);
    double r = h - k;
    std::int64_t n = static_cast<std::int64_t>(k);
    if (r >= 1.0) {
        r = 0.0;
        ++n;
    }
    if (n != 0) base = iterate(s, base, n);
    return FiberPoint{std::move(base), r};
}

inline FiberPoint suspension_flow(const MappingTorus &mt, double t, const FiberPoint &p)
{
    if (t == 0.0) return p;
    return fiber_point(mt.system, p.base, p.h + t);
}

inline const BasePoint &project(const FiberPoint &p) { return p.base; }

inline double height_distance(double a, double b)
{
    const double d = std::fabs(a - b);
    return std::min(d, 1.0 - d);
}

// A fiber point together with f of its base, so metric evaluations along
// precomputed trajectories do not re-apply f.
struct LiftedPoint {
    FiberPoint p;
    BasePoint fbase;
};

inline LiftedPoint lift(const MappingTorus &mt, const FiberPoint &p)
{
    return LiftedPoint{p, iterate(mt.system, p.base, 1)};
}

// Metric on the mapping torus: circular height distance plus the average over
// the level u in [0,1) of the base distance between the points where the two
// forward flow lines first cross the fiber at height u. On one fiber this is
// (1-s) d(x,y) + s d(fx,fy); it is continuous across (x,1) ~ (fx,0) and, being a
// sum of pseudometrics, satisfies the triangle inequality exactly.
inline double bar_metric(const MappingTorus &mt, const LiftedPoint &p, const LiftedPoint &q)
{
    const LiftedPoint *a = &p, *b = &q;
    if (a->p.h > b->p.h) std::swap(a, b);
    const double s = a->p.h, t = b->p.h;
    const auto &sys = mt.system;
    double delta = 0.0;
    if (s > 0) delta += s * base_distance(sys, a->fbase, b->fbase);
    if (t > s) delta += (t - s) * base_distance(sys, a->p.base, b->fbase);
    if (t < 1) delta += (1 - t) * base_distance(sys, a->p.base, b->p.base);
    return std::min(t - s, 1.0 - (t - s)) + delta;
}

inline double bar_metric(const MappingTorus &mt, const FiberPoint &p, const FiberPoint &q)
{
    return bar_metric(mt, lift(mt, p), lift(mt, q));
}

// Same-fiber expression d_u(x,y) = (1-u) d(x,y) + u d(fx,fy)
inline double fiber_distance(const MappingTorus &mt, const BasePoint &x, const BasePoint &y, double u)
{
    double d = 0;
    if (u < 1) d += (1 - u) * base_distance(mt.system, x, y);
    if (u > 0) d += u * base_distance(mt.system, iterate(mt.system, x, 1), iterate(mt.system, y, 1));
    return d;
}

// Upper bound on d̄(p, phi_t p) / |t|
inline double vertical_lipschitz(const MappingTorus &mt) { return 1.0 + diameter(mt.system); }

// Infimum over chains of vertical moves (cost |dh|) and same-fiber hops
// (cost d_u) with at most `hops` moves. Chain points are restricted to the
// columns f^k x, f^k y for |k| <= columns at heights {0, 1, s, t}; crossing
// (c,1) ~ (fc,0) is free.
inline double chain_metric(const MappingTorus &mt, const FiberPoint &p, const FiberPoint &q, int hops = 5, int columns = 2)
{
    const auto &sys = mt.system;
    const int per = 2 * columns + 1;
    std::vector<BasePoint> cols;
    cols.reserve(2 * per);
    for (const auto *pt : {&p, &q})
        for (int k = -columns; k <= columns; ++k) cols.push_back(iterate(sys, pt->base, k));
    std::vector<double> hs = {0.0, 1.0, p.h, q.h};
    std::sort(hs.begin(), hs.end());
    hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
    const int nc = static_cast<int>(cols.size()), nh = static_cast<int>(hs.size());
    auto hidx = [&](double v) { return static_cast<int>(std::lower_bound(hs.begin(), hs.end(), v) - hs.begin()); };
    const int top = nh - 1, bot = 0;

    std::vector<std::vector<double>> hop(nh, std::vector<double>(static_cast<std::size_t>(nc * nc), 0.0));
    std::vector<BasePoint> fcols;
    fcols.reserve(cols.size());
    for (const auto &c : cols) fcols.push_back(iterate(sys, c, 1));
    std::vector<double> d0(static_cast<std::size_t>(nc * nc)), d1(static_cast<std::size_t>(nc * nc));
    for (int i = 0; i < nc; ++i)
        for (int j = 0; j < nc; ++j) {
            d0[i * nc + j] = base_distance(sys, cols[i], cols[j]);
            d1[i * nc + j] = base_distance(sys, fcols[i], fcols[j]);
        }
    for (int h = 0; h < nh; ++h)
        for (int i = 0; i < nc * nc; ++i) hop[h][i] = (1 - hs[h]) * d0[i] + hs[h] * d1[i];

    const int nn = nc * nh;
    std::vector<double> dist(static_cast<std::size_t>(nn), kInf);
    auto id = [nh](int c, int h) { return c * nh + h; };
    auto close_identifications = [&](std::vector<double> &d) {
        for (int side = 0; side < 2; ++side)
            for (int pass = 0; pass < 2 * per; ++pass)
                for (int k = 0; k + 1 < per; ++k) {
                    const int c = side * per + k;
                    const double m = std::min(d[id(c, top)], d[id(c + 1, bot)]);
                    d[id(c, top)] = d[id(c + 1, bot)] = m;
                }
    };
    dist[id(columns, hidx(p.h))] = 0.0;
    close_identifications(dist);
    for (int r = 0; r < hops; ++r) {
        std::vector<double> nd = dist;
        for (int c = 0; c < nc; ++c)
            for (int h = 0; h < nh; ++h) {
                const double base = dist[id(c, h)];
                if (base == kInf) continue;
                for (int h2 = 0; h2 < nh; ++h2) {
                    const double v = base + std::fabs(hs[h] - hs[h2]);
                    if (v < nd[id(c, h2)]) nd[id(c, h2)] = v;
                }
                for (int c2 = 0; c2 < nc; ++c2) {
                    const double v = base + hop[h][c * nc + c2];
                    if (v < nd[id(c2, h)]) nd[id(c2, h)] = v;
                }
            }
        close_identifications(nd);
        dist.swap(nd);
    }
    return dist[id(per + columns, hidx(q.h))];
}

} // namespace singsusp
