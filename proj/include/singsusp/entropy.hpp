#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "core.hpp"
#include "discrete_systems.hpp"
#include "mapping_torus.hpp"
#include "singular_suspension.hpp"
#include "symbolic.hpp"

namespace singsusp {

struct EntropyCell {
    int n = 0;
    double eps = 0;
    std::size_t raw_count = 0; // greedy count of this cell alone
    std::size_t count = 0;     // monotone envelope over coarser cells
    bool saturated = false;
};

struct SlopeFit {
    double eps = 0;
    bool ok = false;
    double slope = 0, intercept = 0, stderr_ = 0;
    int n_from = 0, n_to = 0;
};

struct EntropyEstimate {
    std::vector<int> n_grid;
    std::vector<double> eps_grid;
    std::vector<EntropyCell> cells; // n-major: cells[i * eps_grid.size() + j]
    std::size_t sample_size = 0;
    bool exact = false; // counts are exact maximal separated cardinalities
    std::vector<SlopeFit> fits;
    double headline = 0;
    bool inconclusive = false;
    std::vector<std::string> diagnostics;

    const EntropyCell &cell(std::size_t i, std::size_t j) const { return cells[i * eps_grid.size() + j]; }
    EntropyCell &cell(std::size_t i, std::size_t j) { return cells[i * eps_grid.size() + j]; }
};

struct EntropyOptions {
    std::vector<int> n_grid;
    std::vector<double> eps_grid;
    std::size_t samples = 1u << 14;
    bool exhaustive = false;            // symbolic bases: all cylinders / all subshift phases
    double saturation_fraction = 0.10; // count >= fraction * samples is treated as saturated
    double linearity = 0.10;
    std::uint64_t seed = 1;
};

inline std::vector<int> default_n_grid(bool symbolic)
{
    std::vector<int> g;
    for (int n = 2; n <= (symbolic ? 14 : 10); ++n) g.push_back(n);
    return g;
}

inline std::vector<double> default_eps_grid()
{
    std::vector<double> g;
    for (int m = 2; m <= 6; ++m) g.push_back(std::ldexp(1.0, -m));
    return g;
}

namespace detail {

// Greedy separated count over precomputed trajectories. feat(i) gives up to 3
// features that are 1-Lipschitz for the metric at time 0 (circular when
// flagged), so kept points outside the neighbouring eps-cells are separated
// already at time 0 and need not be compared.
struct FeatureSpec {
    int dim = 0;
    std::array<bool, 3> circular{};
};

template <class Dist>
std::size_t greedy_count(std::size_t npts, int n, double eps, const Dist &dist, const FeatureSpec &fs,
                         const std::vector<std::array<double, 3>> &feat, const std::vector<std::size_t> &order,
                         std::size_t limit = SIZE_MAX)
{
    const int D = fs.dim;
    std::array<std::int64_t, 3> ncell{};
    for (int a = 0; a < D; ++a) ncell[a] = fs.circular[a] ? std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(1.0 / eps))) : 0;
    auto cell_of = [&](std::size_t i, int a) -> std::int64_t {
        const double v = feat[i][a];
        if (fs.circular[a]) return std::min<std::int64_t>(ncell[a] - 1, static_cast<std::int64_t>(std::floor(v * ncell[a])));
        return static_cast<std::int64_t>(std::floor(v / eps));
    };
    auto key = [](const std::array<std::int64_t, 3> &c) {
        std::uint64_t k = 0;
        for (int a = 0; a < 3; ++a) k = k * 0x100000001b3ULL + static_cast<std::uint64_t>(c[a] + (1LL << 40));
        return k;
    };
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> grid;
    std::vector<std::uint32_t> kept;
    auto separated = [&](std::size_t i, std::size_t k) {
        for (int j = 0; j <= n; ++j)
            if (dist(i, k, j) > eps) return true;
        return false;
    };
    std::vector<std::uint64_t> nb;
    for (std::size_t i : order) {
        if (i >= npts) continue;
        bool ok = true;
        if (D == 0) {
            for (auto k : kept)
                if (!separated(i, k)) {
                    ok = false;
                    break;
                }
        } else {
            std::array<std::int64_t, 3> c{};
            for (int a = 0; a < D; ++a) c[a] = cell_of(i, a);
            nb.clear();
            std::array<std::int64_t, 3> d{};
            const int reps = D == 1 ? 3 : D == 2 ? 9 : 27;
            for (int r = 0; r < reps; ++r) {
                int rr = r;
                for (int a = 0; a < 3; ++a) {
                    d[a] = a < D ? c[a] + (rr % 3) - 1 : 0;
                    if (a < D) rr /= 3;
                    if (a < D && fs.circular[a]) d[a] = ((d[a] % ncell[a]) + ncell[a]) % ncell[a];
                }
                nb.push_back(key(d));
            }
            std::sort(nb.begin(), nb.end());
            nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
            for (auto kk : nb) {
                auto it = grid.find(kk);
                if (it == grid.end()) continue;
                for (auto k : it->second)
                    if (!separated(i, k)) {
                        ok = false;
                        break;
                    }
                if (!ok) break;
            }
            if (ok) grid[key(c)].push_back(static_cast<std::uint32_t>(i));
        }
        if (ok) {
            kept.push_back(static_cast<std::uint32_t>(i));
            if (kept.size() >= limit) break;
        }
    }
    return kept.size();
}

// Separation index m: d > eps iff the first disagreement index is < m.
inline int shift_window_radius(double eps)
{
    if (eps >= 1.0) return 0;
    return static_cast<int>(std::ceil(-std::log2(eps) - 1e-12));
}

inline std::size_t distinct_windows(const std::vector<SymbolSeq> &pts, std::int64_t from, std::int64_t to, int alphabet)
{
    const std::int64_t W = to - from + 1;
    const int bits = bits_for(alphabet);
    if (W * bits <= 64) {
        std::vector<std::uint64_t> codes;
        codes.reserve(pts.size());
        for (const auto &s : pts) {
            std::uint64_t c = 0;
            for (std::int64_t i = from; i <= to; ++i) c = (c << bits) | s.at(i);
            codes.push_back(c);
        }
        std::sort(codes.begin(), codes.end());
        return static_cast<std::size_t>(std::unique(codes.begin(), codes.end()) - codes.begin());
    }
    std::vector<std::pair<std::uint64_t, std::uint64_t>> hs;
    hs.reserve(pts.size());
    for (const auto &s : pts) {
        std::uint64_t h1 = 1469598103934665603ULL, h2 = 0x9e3779b97f4a7c15ULL;
        for (std::int64_t i = from; i <= to; ++i) {
            h1 = (h1 ^ s.at(i)) * 1099511628211ULL;
            h2 = mix64(h2 + s.at(i) + 1);
        }
        hs.emplace_back(h1, h2);
    }
    std::sort(hs.begin(), hs.end());
    return static_cast<std::size_t>(std::unique(hs.begin(), hs.end()) - hs.begin());
}

inline void least_squares(const std::vector<double> &x, const std::vector<double> &y, std::size_t a, std::size_t b,
                          double &slope, double &icpt, double &se)
{
    const double m = static_cast<double>(b - a);
    double sx = 0, sy = 0;
    for (std::size_t i = a; i < b; ++i) {
        sx += x[i];
        sy += y[i];
    }
    const double mx = sx / m, my = sy / m;
    double sxx = 0, sxy = 0;
    for (std::size_t i = a; i < b; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    slope = sxx > 0 ? sxy / sxx : 0;
    icpt = my - slope * mx;
    double rss = 0;
    for (std::size_t i = a; i < b; ++i) {
        const double r = y[i] - (icpt + slope * x[i]);
        rss += r * r;
    }
    se = (m > 2 && sxx > 0) ? std::sqrt(rss / (m - 2) / sxx) : 0;
}

} // namespace detail

// Fit window: among windows of >= 3 consecutive unsaturated cells whose log
// counts stay within log(1 + linearity) of their least-squares line (counts
// within that fraction of the exponential fit), take the one reaching the
// largest n, extended as far back as possible.
inline SlopeFit fit_slope(const std::vector<int> &ns, const std::vector<double> &logc, const std::vector<bool> &sat,
                          double eps, double linearity = 0.10)
{
    SlopeFit best;
    best.eps = eps;
    const std::size_t N = ns.size();
    const double tol = std::log1p(linearity);
    std::vector<double> x(N);
    for (std::size_t i = 0; i < N; ++i) x[i] = ns[i];
    for (std::size_t b = N; b >= 3; --b) {
        if (sat[b - 1]) continue;
        for (std::size_t a = 0; a + 3 <= b; ++a) {
            bool clean = true;
            for (std::size_t i = a; i < b; ++i)
                if (sat[i]) clean = false;
            if (!clean) continue;
            double sl, c, se;
            detail::least_squares(x, logc, a, b, sl, c, se);
            bool lin = true;
            for (std::size_t i = a; i < b; ++i)
                if (std::fabs(logc[i] - (c + sl * x[i])) > tol + 1e-12) lin = false;
            if (!lin) continue;
            best.ok = true;
            best.slope = sl;
            best.intercept = c;
            best.stderr_ = se;
            best.n_from = ns[a];
            best.n_to = ns[b - 1];
            return best;
        }
    }
    return best;
}

inline std::size_t saturation_limit(std::size_t samples, double fraction)
{
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(samples))));
}

namespace detail {

// Greedy cells, eps columns in parallel and n ascending within a column. Once a
// column saturates, larger n inherit the saturated lower bound.
template <class Count>
void greedy_cells(EntropyEstimate &est, std::size_t limit, const Count &count)
{
    const std::size_t NI = est.n_grid.size(), NJ = est.eps_grid.size();
    parallel_for(NJ, [&](std::size_t j) {
        bool sat = false;
        for (std::size_t i = 0; i < NI; ++i) {
            auto &cl = est.cell(i, j);
            cl.raw_count = sat ? limit : count(cl.n, cl.eps, limit);
            if (cl.raw_count >= limit) sat = true;
        }
    });
}

} // namespace detail

inline void finish_estimate(EntropyEstimate &est, double saturation_fraction, double linearity)
{
    const std::size_t NI = est.n_grid.size(), NJ = est.eps_grid.size();
    // monotone envelope: an (n', eps')-separated set with n' <= n and eps' >= eps
    // is also (n, eps)-separated
    for (std::size_t i = 0; i < NI; ++i)
        for (std::size_t j = 0; j < NJ; ++j) {
            std::size_t c = 0;
            for (std::size_t i2 = 0; i2 < NI; ++i2)
                for (std::size_t j2 = 0; j2 < NJ; ++j2)
                    if (est.n_grid[i2] <= est.n_grid[i] && est.eps_grid[j2] >= est.eps_grid[j])
                        c = std::max(c, est.cell(i2, j2).raw_count);
            auto &cl = est.cell(i, j);
            cl.count = c;
            cl.saturated = !est.exact && c >= saturation_limit(est.sample_size, saturation_fraction);
        }
    est.fits.clear();
    bool any = false, all_sat = true;
    est.headline = 0;
    for (std::size_t j = 0; j < NJ; ++j) {
        std::vector<double> logc(NI);
        std::vector<bool> sat(NI);
        for (std::size_t i = 0; i < NI; ++i) {
            logc[i] = std::log(static_cast<double>(std::max<std::size_t>(1, est.cell(i, j).count)));
            sat[i] = est.cell(i, j).saturated;
            if (!sat[i]) all_sat = false;
        }
        SlopeFit f = fit_slope(est.n_grid, logc, sat, est.eps_grid[j], linearity);
        if (f.ok) {
            est.headline = any ? std::max(est.headline, f.slope) : f.slope;
            any = true;
        }
        est.fits.push_back(f);
    }
    est.headline = std::max(0.0, est.headline);
    est.inconclusive = all_sat || !any;
    if (all_sat) est.diagnostics.push_back("all cells saturated");
    else if (!any) est.diagnostics.push_back("no epsilon admits a linear window of three unsaturated cells");
}

// Maximal (under greedy insertion in the given order) (n,eps)-separated subset.
template <class P, class Iterate, class Metric>
std::size_t separated_count(const std::vector<P> &points, const Iterate &iterate, const Metric &metric, int n, double eps)
{
    if (points.empty()) throw UsageError("separated_count needs points");
    if (n < 0) throw UsageError("n must be nonnegative");
    std::vector<std::vector<P>> traj(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        traj[i].reserve(static_cast<std::size_t>(n) + 1);
        traj[i].push_back(points[i]);
        for (int j = 1; j <= n; ++j) traj[i].push_back(iterate(traj[i].back()));
    }
    std::vector<std::size_t> order(points.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::array<double, 3>> feat;
    return detail::greedy_count(points.size(), n, eps, [&](std::size_t a, std::size_t b, int j) { return metric(traj[a][j], traj[b][j]); },
                                detail::FeatureSpec{}, feat, order);
}

namespace detail {

inline void check_grids(const EntropyOptions &o)
{
    if (o.n_grid.empty() || o.eps_grid.empty()) throw UsageError("entropy grids must be nonempty");
    for (int n : o.n_grid)
        if (n < 0) throw UsageError("n grid entries must be nonnegative");
    for (double e : o.eps_grid)
        if (!(e > 0)) throw UsageError("eps grid entries must be positive");
    if (!std::is_sorted(o.n_grid.begin(), o.n_grid.end())) throw UsageError("n grid must be increasing");
}

inline std::vector<std::size_t> identity_order(std::size_t n)
{
    std::vector<std::size_t> o(n);
    for (std::size_t i = 0; i < n; ++i) o[i] = i;
    return o;
}

} // namespace detail

inline EntropyEstimate entropy_estimate_map(const DiscreteSystem &sys, const MeasureSampler &mu, EntropyOptions opt)
{
    if (opt.n_grid.empty()) opt.n_grid = default_n_grid(sys.symbolic());
    if (opt.eps_grid.empty()) opt.eps_grid = default_eps_grid();
    detail::check_grids(opt);
    EntropyEstimate est;
    est.n_grid = opt.n_grid;
    est.eps_grid = opt.eps_grid;
    const std::size_t NI = opt.n_grid.size(), NJ = opt.eps_grid.size();
    est.cells.resize(NI * NJ);
    for (std::size_t i = 0; i < NI; ++i)
        for (std::size_t j = 0; j < NJ; ++j) {
            est.cell(i, j).n = opt.n_grid[i];
            est.cell(i, j).eps = opt.eps_grid[j];
        }
    const bool one_shift = sys.ncoords() == 0 && sys.nseqs() == 1 && sys.kind != SystemKind::Product;

    if (one_shift && opt.exhaustive) {
        // every cylinder over the separation window is its own class
        est.exact = true;
        const auto *sh = sys.kind == SystemKind::SubshiftSystem ? sys.subshift.get()
                                                                : (mu.kind == MeasureKind::UniformOnSubshift ? mu.subshift.get() : nullptr);
        est.sample_size = sh ? sh->period() : 0;
        parallel_for(NI * NJ, [&](std::size_t c) {
            auto &cl = est.cells[c];
            const int m = detail::shift_window_radius(cl.eps);
            const std::int64_t W = m == 0 ? 0 : cl.n + 2 * m - 1;
            if (W == 0) {
                cl.raw_count = 1;
                return;
            }
            if (sh) {
                cl.raw_count = word_count(*sh, static_cast<std::size_t>(W));
            } else {
                const double v = std::pow(static_cast<double>(sys.alphabet), static_cast<double>(W));
                cl.raw_count = v > 1e18 ? static_cast<std::size_t>(1e18) : static_cast<std::size_t>(std::llround(v));
            }
        });
        finish_estimate(est, opt.saturation_fraction, opt.linearity);
        return est;
    }

    const auto pts = mu.draw(sys, opt.samples);
    est.sample_size = pts.size();
    if (one_shift) {
        std::vector<SymbolSeq> seqs;
        seqs.reserve(pts.size());
        for (const auto &p : pts) seqs.push_back(p.seq[0]);
        parallel_for(NI * NJ, [&](std::size_t c) {
            auto &cl = est.cells[c];
            const int m = detail::shift_window_radius(cl.eps);
            cl.raw_count = m == 0 ? 1 : detail::distinct_windows(seqs, -(m - 1), cl.n + m - 1, sys.alphabet);
        });
        finish_estimate(est, opt.saturation_fraction, opt.linearity);
        return est;
    }

    const int nmax = opt.n_grid.back();
    std::vector<std::vector<BasePoint>> traj(pts.size());
    parallel_for(pts.size(), [&](std::size_t i) { traj[i] = orbit_segment(sys, pts[i], 0, nmax); });
    detail::FeatureSpec fs;
    std::vector<std::array<double, 3>> feat(pts.size());
    if (sys.ncoords() >= 1 && sys.ncoords() <= 3 && sys.nseqs() == 0) {
        // torus and circle coordinates are 1-Lipschitz for the max metric
        fs.dim = static_cast<int>(sys.ncoords());
        for (int a = 0; a < fs.dim; ++a) fs.circular[a] = true;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (int a = 0; a < fs.dim; ++a) feat[i][a] = pts[i].x[a];
    }
    const auto order = detail::identity_order(pts.size());
    detail::greedy_cells(est, saturation_limit(pts.size(), opt.saturation_fraction), [&](int n, double eps, std::size_t limit) {
        return detail::greedy_count(
            pts.size(), n, eps, [&](std::size_t a, std::size_t b, int j) { return base_distance(sys, traj[a][j], traj[b][j]); }, fs,
            feat, order, limit);
    });
    finish_estimate(est, opt.saturation_fraction, opt.linearity);
    return est;
}

// psi_1 trajectory; trapped points stay put. Returns false on numerical failure.
inline bool psi_trajectory(const SingularSuspension &ss, const FiberPoint &p, int n, std::vector<LiftedPoint> &out, std::string &err)
{
    out.clear();
    out.reserve(static_cast<std::size_t>(n) + 1);
    FiberPoint cur = p;
    out.push_back(lift(ss.torus, cur));
    try {
        for (int j = 1; j <= n; ++j) {
            cur = psi_flow(ss, 1.0, cur);
            out.push_back(lift(ss.torus, cur));
        }
    } catch (const NumericalError &e) {
        err = e.what();
        return false;
    }
    return true;
}

inline EntropyEstimate entropy_estimate_flow(const SingularSuspension &ss, const MeasureSampler &mu, EntropyOptions opt)
{
    const auto &sys = ss.torus.system;
    if (opt.n_grid.empty()) {
        for (int n = 2; n <= 8; ++n) opt.n_grid.push_back(n);
    }
    if (opt.eps_grid.empty()) opt.eps_grid = default_eps_grid();
    detail::check_grids(opt);
    EntropyEstimate est;
    est.n_grid = opt.n_grid;
    est.eps_grid = opt.eps_grid;
    const std::size_t NI = opt.n_grid.size(), NJ = opt.eps_grid.size();
    est.cells.resize(NI * NJ);
    for (std::size_t i = 0; i < NI; ++i)
        for (std::size_t j = 0; j < NJ; ++j) {
            est.cell(i, j).n = opt.n_grid[i];
            est.cell(i, j).eps = opt.eps_grid[j];
        }
    const int nmax = opt.n_grid.back();
    const auto base = mu.draw(sys, opt.samples);
    std::vector<std::vector<LiftedPoint>> traj(base.size());
    std::vector<std::string> errs(base.size());
    std::vector<char> good(base.size(), 0);
    parallel_for(base.size(), [&](std::size_t i) {
        Rng rng(derive_seed(opt.seed ^ 0x68656967ULL, i));
        FiberPoint p = fiber_point(sys, base[i], rng.uniform());
        good[i] = psi_trajectory(ss, p, nmax, traj[i], errs[i]) ? 1 : 0;
    });
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < base.size(); ++i) {
        if (good[i]) keep.push_back(i);
        else if (est.diagnostics.size() < 8) est.diagnostics.push_back("sample " + std::to_string(i) + ": " + errs[i]);
    }
    if (keep.size() < base.size())
        est.diagnostics.push_back(std::to_string(base.size() - keep.size()) + " samples dropped after quadrature failures");
    std::vector<std::vector<LiftedPoint>> tr;
    tr.reserve(keep.size());
    for (auto i : keep) tr.push_back(std::move(traj[i]));
    est.sample_size = tr.size();
    if (tr.empty()) {
        est.inconclusive = true;
        est.diagnostics.push_back("no usable trajectories");
        return est;
    }

    // features: circular height (d̄ dominates it) and distances to two pivots
    const MappingTorus &mt = ss.torus;
    detail::FeatureSpec fs;
    fs.dim = 3;
    fs.circular = {true, false, false};
    const LiftedPoint &pv1 = tr[0][0], &pv2 = tr[tr.size() / 2][0];
    std::vector<std::array<double, 3>> feat(tr.size());
    for (std::size_t i = 0; i < tr.size(); ++i)
        feat[i] = {tr[i][0].p.h, bar_metric(mt, tr[i][0], pv1), bar_metric(mt, tr[i][0], pv2)};
    const auto order = detail::identity_order(tr.size());
    detail::greedy_cells(est, saturation_limit(tr.size(), opt.saturation_fraction), [&](int n, double eps, std::size_t limit) {
        return detail::greedy_count(
            tr.size(), n, eps, [&](std::size_t a, std::size_t b, int j) { return bar_metric(mt, tr[a][j], tr[b][j]); }, fs, feat,
            order, limit);
    });
    finish_estimate(est, opt.saturation_fraction, opt.linearity);
    return est;
}

// slope of log count over the last three n values, per eps
inline std::vector<double> tail_slopes(const EntropyEstimate &est, int last = 3)
{
    std::vector<double> out;
    const std::size_t NI = est.n_grid.size();
    if (NI < static_cast<std::size_t>(last)) return out;
    std::vector<double> x(NI), y(NI);
    for (std::size_t j = 0; j < est.eps_grid.size(); ++j) {
        for (std::size_t i = 0; i < NI; ++i) {
            x[i] = est.n_grid[i];
            y[i] = std::log(static_cast<double>(std::max<std::size_t>(1, est.cell(i, j).count)));
        }
        double s, c, se;
        detail::least_squares(x, y, NI - static_cast<std::size_t>(last), NI, s, c, se);
        out.push_back(s);
    }
    return out;
}

} // namespace singsusp
