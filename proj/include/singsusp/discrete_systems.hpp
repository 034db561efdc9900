#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "core.hpp"
#include "symbol_seq.hpp"
#include "symbolic.hpp"

namespace singsusp {

enum class SystemKind { CatMap, CircleRotation, FullShift, SkewTorus, Product, SubshiftSystem };

inline const char *kind_name(SystemKind k)
{
    switch (k) {
    case SystemKind::CatMap: return "CatMap";
    case SystemKind::CircleRotation: return "CircleRotation";
    case SystemKind::FullShift: return "FullShift";
    case SystemKind::SkewTorus: return "SkewTorus";
    case SystemKind::Product: return "Product";
    case SystemKind::SubshiftSystem: return "SubshiftSystem";
    }
    return "?";
}

// A point of M. Torus and circle coordinates live in x (normalized to [0,1)),
// shift coordinates in seq. Products concatenate their factors' slots.
struct BasePoint {
    std::vector<double> x;
    std::vector<SymbolSeq> seq;
};

struct DiscreteSystem {
    SystemKind kind = SystemKind::CatMap;
    double angle = 0.0;         // CircleRotation
    int alphabet = 2;           // FullShift
    std::vector<DiscreteSystem> factors; // Product
    std::shared_ptr<const Subshift> subshift; // SubshiftSystem

    std::size_t ncoords() const
    {
        switch (kind) {
        case SystemKind::CatMap:
        case SystemKind::SkewTorus: return 2;
        case SystemKind::CircleRotation: return 1;
        case SystemKind::Product: {
            std::size_t n = 0;
            for (const auto &f : factors) n += f.ncoords();
            return n;
        }
        default: return 0;
        }
    }
    std::size_t nseqs() const
    {
        switch (kind) {
        case SystemKind::FullShift:
        case SystemKind::SubshiftSystem: return 1;
        case SystemKind::Product: {
            std::size_t n = 0;
            for (const auto &f : factors) n += f.nseqs();
            return n;
        }
        default: return 0;
        }
    }
    bool symbolic() const { return ncoords() == 0; }
};

inline DiscreteSystem cat_map()
{
    DiscreteSystem s;
    s.kind = SystemKind::CatMap;
    return s;
}

inline DiscreteSystem circle_rotation(double angle)
{
    DiscreteSystem s;
    s.kind = SystemKind::CircleRotation;
    s.angle = angle;
    return s;
}

inline DiscreteSystem full_shift(int k = 2)
{
    if (k < 2 || k > 10) throw UsageError("full shift alphabet must be in [2,10]");
    DiscreteSystem s;
    s.kind = SystemKind::FullShift;
    s.alphabet = k;
    return s;
}

inline DiscreteSystem skew_torus()
{
    DiscreteSystem s;
    s.kind = SystemKind::SkewTorus;
    return s;
}

inline DiscreteSystem product(std::vector<DiscreteSystem> factors)
{
    if (factors.empty()) throw UsageError("product needs at least one factor");
    DiscreteSystem s;
    s.kind = SystemKind::Product;
    s.factors = std::move(factors);
    return s;
}

inline DiscreteSystem subshift_system(std::shared_ptr<const Subshift> sh)
{
    if (!sh || !sh->canonical) throw UsageError("subshift system needs a built subshift");
    DiscreteSystem s;
    s.kind = SystemKind::SubshiftSystem;
    s.subshift = std::move(sh);
    s.alphabet = s.subshift->alphabet;
    return s;
}

namespace detail {

inline void cat_power(double &x, double &y, std::int64_t n)
{
    for (; n > 0; --n) {
        const double nx = wrap01(2 * x + y), ny = wrap01(x + y);
        x = nx;
        y = ny;
    }
    for (; n < 0; ++n) {
        const double nx = wrap01(x - y), ny = wrap01(-x + 2 * y);
        x = nx;
        y = ny;
    }
}

inline void skew_power(double &x, double &y, std::int64_t n)
{
    // (x, y) -> (x + y, y); n-fold: (x + n y, y)
    const double ny = y;
    const double shift = wrap01(static_cast<double>(n % (1LL << 40)) * ny);
    x = wrap01(x + shift);
}

inline void iterate_into(const DiscreteSystem &s, BasePoint &p, std::size_t xo, std::size_t so, std::int64_t n)
{
    switch (s.kind) {
    case SystemKind::CatMap: cat_power(p.x[xo], p.x[xo + 1], n); break;
    case SystemKind::SkewTorus:
        if (std::llabs(n) <= 64) {
            for (std::int64_t i = 0; i < n; ++i) p.x[xo] = wrap01(p.x[xo] + p.x[xo + 1]);
            for (std::int64_t i = 0; i > n; --i) p.x[xo] = wrap01(p.x[xo] - p.x[xo + 1]);
        } else {
            skew_power(p.x[xo], p.x[xo + 1], n);
        }
        break;
    case SystemKind::CircleRotation:
        if (std::llabs(n) <= 64) {
            for (std::int64_t i = 0; i < n; ++i) p.x[xo] = wrap01(p.x[xo] + s.angle);
            for (std::int64_t i = 0; i > n; --i) p.x[xo] = wrap01(p.x[xo] - s.angle);
        } else {
            p.x[xo] = wrap01(p.x[xo] + wrap01(static_cast<double>(n) * s.angle));
        }
        break;
    case SystemKind::FullShift:
    case SystemKind::SubshiftSystem: p.seq[so] = p.seq[so].shifted(n); break;
    case SystemKind::Product:
        for (const auto &f : s.factors) {
            iterate_into(f, p, xo, so, n);
            xo += f.ncoords();
            so += f.nseqs();
        }
        break;
    }
}

inline double distance_at(const DiscreteSystem &s, const BasePoint &p, const BasePoint &q, std::size_t xo, std::size_t so)
{
    switch (s.kind) {
    case SystemKind::CatMap:
    case SystemKind::SkewTorus:
        return std::max(circle_dist(p.x[xo], q.x[xo]), circle_dist(p.x[xo + 1], q.x[xo + 1]));
    case SystemKind::CircleRotation: return circle_dist(p.x[xo], q.x[xo]);
    case SystemKind::FullShift:
    case SystemKind::SubshiftSystem: return shift_distance(p.seq[so], q.seq[so]);
    case SystemKind::Product: {
        double d = 0;
        for (const auto &f : s.factors) {
            d = std::max(d, distance_at(f, p, q, xo, so));
            xo += f.ncoords();
            so += f.nseqs();
        }
        return d;
    }
    }
    return 0;
}

inline void sample_into(const DiscreteSystem &s, BasePoint &p, std::size_t xo, std::size_t so, Rng &rng)
{
    switch (s.kind) {
    case SystemKind::CatMap:
    case SystemKind::SkewTorus:
        p.x[xo] = rng.uniform();
        p.x[xo + 1] = rng.uniform();
        break;
    case SystemKind::CircleRotation: p.x[xo] = rng.uniform(); break;
    case SystemKind::FullShift: {
        auto d = std::make_shared<SymbolSeq::Data>(1024);
        for (auto &c : *d) c = static_cast<std::uint8_t>(rng.below(static_cast<std::uint64_t>(s.alphabet)));
        p.seq[so] = SymbolSeq(std::move(d), 0);
        break;
    }
    case SystemKind::SubshiftSystem:
        p.seq[so] = s.subshift->point(static_cast<std::int64_t>(rng.below(s.subshift->period())));
        break;
    case SystemKind::Product:
        for (const auto &f : s.factors) {
            sample_into(f, p, xo, so, rng);
            xo += f.ncoords();
            so += f.nseqs();
        }
        break;
    }
}

} // namespace detail

inline void check_point(const DiscreteSystem &s, const BasePoint &p)
{
    if (p.x.size() != s.ncoords() || p.seq.size() != s.nseqs())
        throw UsageError(std::string("point does not match system kind ") + kind_name(s.kind));
    for (const auto &q : p.seq)
        if (!q.valid()) throw UsageError("uninitialized symbol sequence");
}

inline BasePoint iterate(const DiscreteSystem &s, const BasePoint &p, std::int64_t n)
{
    BasePoint q = p;
    if (n != 0) detail::iterate_into(s, q, 0, 0, n);
    return q;
}

inline BasePoint step(const DiscreteSystem &s, const BasePoint &p)
{
    check_point(s, p);
    return iterate(s, p, 1);
}

inline BasePoint step_inverse(const DiscreteSystem &s, const BasePoint &p)
{
    check_point(s, p);
    return iterate(s, p, -1);
}

inline std::vector<BasePoint> orbit_segment(const DiscreteSystem &s, const BasePoint &p, std::int64_t n_from, std::int64_t n_to)
{
    if (n_from > n_to) throw UsageError("orbit_segment needs n_from <= n_to");
    check_point(s, p);
    std::vector<BasePoint> out;
    out.reserve(static_cast<std::size_t>(n_to - n_from + 1));
    BasePoint cur = iterate(s, p, n_from);
    out.push_back(cur);
    for (std::int64_t n = n_from + 1; n <= n_to; ++n) {
        detail::iterate_into(s, cur, 0, 0, 1);
        out.push_back(cur);
    }
    return out;
}

inline double base_distance(const DiscreteSystem &s, const BasePoint &p, const BasePoint &q)
{
    return detail::distance_at(s, p, q, 0, 0);
}

inline double diameter(const DiscreteSystem &s)
{
    switch (s.kind) {
    case SystemKind::CatMap:
    case SystemKind::SkewTorus:
    case SystemKind::CircleRotation: return 0.5;
    case SystemKind::FullShift:
    case SystemKind::SubshiftSystem: return 1.0;
    case SystemKind::Product: {
        double d = 0;
        for (const auto &f : s.factors) d = std::max(d, diameter(f));
        return d;
    }
    }
    return 1.0;
}

// Lipschitz constant of f and of f^{-1} in the chosen metric
inline double lipschitz(const DiscreteSystem &s)
{
    switch (s.kind) {
    case SystemKind::CatMap: return 3.0;
    case SystemKind::SkewTorus: return 2.0;
    case SystemKind::CircleRotation: return 1.0;
    case SystemKind::FullShift:
    case SystemKind::SubshiftSystem: return 2.0;
    case SystemKind::Product: {
        double d = 0;
        for (const auto &f : s.factors) d = std::max(d, lipschitz(f));
        return d;
    }
    }
    return 1.0;
}

inline BasePoint sample_uniform(const DiscreteSystem &s, Rng &rng)
{
    BasePoint p;
    p.x.assign(s.ncoords(), 0.0);
    p.seq.assign(s.nseqs(), SymbolSeq());
    detail::sample_into(s, p, 0, 0, rng);
    return p;
}

inline BasePoint make_point(std::vector<double> x, std::vector<SymbolSeq> seq = {})
{
    BasePoint p;
    for (auto &v : x) v = wrap01(v);
    p.x = std::move(x);
    p.seq = std::move(seq);
    return p;
}

} // namespace singsusp
