#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "singsusp/entropy.hpp"

using namespace singsusp;

namespace {

// every binary word of length L, as a periodic sequence with that period
std::vector<BasePoint> all_words(int L)
{
    std::vector<BasePoint> out;
    for (int w = 0; w < (1 << L); ++w) {
        std::string s;
        for (int i = 0; i < L; ++i) s.push_back(static_cast<char>('0' + ((w >> i) & 1)));
        out.push_back(make_point({}, {SymbolSeq::from_string(s)}));
    }
    return out;
}

void expect_monotone(const EntropyEstimate &e)
{
    for (std::size_t i = 0; i < e.n_grid.size(); ++i)
        for (std::size_t j = 0; j < e.eps_grid.size(); ++j) {
            // eps grids are listed coarse to fine
            if (j + 1 < e.eps_grid.size() && e.eps_grid[j] > e.eps_grid[j + 1]) {
                EXPECT_LE(e.cell(i, j).count, e.cell(i, j + 1).count);
            }
            if (i + 1 < e.n_grid.size()) {
                EXPECT_LE(e.cell(i, j).count, e.cell(i + 1, j).count);
            }
        }
    EXPECT_GE(e.headline, 0.0);
}

EntropyOptions opts(std::vector<int> n, std::vector<double> eps, std::size_t samples, bool exhaustive = false)
{
    EntropyOptions o;
    o.n_grid = std::move(n);
    o.eps_grid = std::move(eps);
    o.samples = samples;
    o.exhaustive = exhaustive;
    return o;
}

} // namespace

TEST(SeparatedCount, ShiftWordsOracle)
{
    const auto s = full_shift(2);
    auto it = [&](const BasePoint &p) { return step(s, p); };
    auto d = [&](const BasePoint &a, const BasePoint &b) { return base_distance(s, a, b); };
    for (int n = 0; n <= 6; ++n) {
        // brute force: distinct length-(n+1) words among the inputs
        auto pts = all_words(n + 1);
        std::set<std::string> words;
        for (const auto &p : pts) words.insert(p.seq[0].window(0, n));
        EXPECT_EQ(separated_count(pts, it, d, n, 0.5), words.size());
        EXPECT_EQ(words.size(), std::size_t(1) << (n + 1));
    }
}

TEST(SeparatedCount, RotationTimeAddsNothing)
{
    const auto s = circle_rotation(0.3819660112501051);
    Rng rng(4);
    std::vector<BasePoint> pts;
    for (int i = 0; i < 500; ++i) pts.push_back(sample_uniform(s, rng));
    auto it = [&](const BasePoint &p) { return step(s, p); };
    auto d = [&](const BasePoint &a, const BasePoint &b) { return base_distance(s, a, b); };
    const auto c0 = separated_count(pts, it, d, 0, 0.05);
    for (int n : {1, 5, 20}) EXPECT_EQ(separated_count(pts, it, d, n, 0.05), c0);
}

TEST(SeparatedCount, SinglePointAndErrors)
{
    const auto s = cat_map();
    auto it = [&](const BasePoint &p) { return step(s, p); };
    auto d = [&](const BasePoint &a, const BasePoint &b) { return base_distance(s, a, b); };
    std::vector<BasePoint> one = {make_point({0.2, 0.3})};
    EXPECT_EQ(separated_count(one, it, d, 5, 0.01), 1u);
    EXPECT_THROW(separated_count(std::vector<BasePoint>{}, it, d, 1, 0.1), UsageError);
}

TEST(SeparatedCount, ResultIsSeparatedAndMaximal)
{
    // brute-force check of the greedy output on a small cloud
    const auto s = cat_map();
    Rng rng(6);
    std::vector<BasePoint> pts;
    for (int i = 0; i < 300; ++i) pts.push_back(sample_uniform(s, rng));
    const int n = 3;
    const double eps = 0.1;
    auto sep = [&](const BasePoint &a, const BasePoint &b) {
        BasePoint x = a, y = b;
        for (int j = 0; j <= n; ++j) {
            if (base_distance(s, x, y) > eps) return true;
            x = step(s, x);
            y = step(s, y);
        }
        return false;
    };
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        bool ok = true;
        for (auto k : kept) ok = ok && sep(pts[i], pts[k]);
        if (ok) kept.push_back(i);
    }
    auto it = [&](const BasePoint &p) { return step(s, p); };
    auto d = [&](const BasePoint &a, const BasePoint &b) { return base_distance(s, a, b); };
    EXPECT_EQ(separated_count(pts, it, d, n, eps), kept.size());
}

TEST(SeparatedCount, OrderChangesCountByAtMostFactorTwo)
{
    const auto s = cat_map();
    Rng rng(8);
    std::vector<BasePoint> pts;
    for (int i = 0; i < 3000; ++i) pts.push_back(sample_uniform(s, rng));
    auto it = [&](const BasePoint &p) { return step(s, p); };
    auto d = [&](const BasePoint &a, const BasePoint &b) { return base_distance(s, a, b); };
    std::vector<std::size_t> counts;
    for (int r = 0; r < 5; ++r) {
        rng.shuffle(pts);
        counts.push_back(separated_count(pts, it, d, 4, 0.125));
    }
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(static_cast<double>(*hi) / static_cast<double>(*lo), 2.0);
}

TEST(EntropyMap, FullShiftExhaustive)
{
    MeasureSampler mu;
    std::vector<int> ns;
    for (int n = 1; n <= 14; ++n) ns.push_back(n);
    auto e = entropy_estimate_map(full_shift(2), mu, opts(ns, {0.5, 0.25}, 1u << 20, true));
    EXPECT_TRUE(e.exact);
    for (std::size_t i = 0; i < e.n_grid.size(); ++i) EXPECT_EQ(e.cell(i, 0).raw_count, std::size_t(1) << (e.n_grid[i] + 1));
    EXPECT_NEAR(e.headline, std::log(2.0), 0.05 * std::log(2.0));
    expect_monotone(e);
}

TEST(EntropyMap, FullShiftSampledAndThreeSymbols)
{
    MeasureSampler mu;
    mu.seed = 9;
    auto e = entropy_estimate_map(full_shift(2), mu, opts({1, 2, 3, 4, 5, 6, 7, 8}, {0.5}, 1u << 14));
    EXPECT_NEAR(e.headline, std::log(2.0), 0.05 * std::log(2.0));
    auto e3 = entropy_estimate_map(full_shift(3), mu, opts({1, 2, 3, 4, 5, 6}, {0.5}, 1u << 14));
    EXPECT_NEAR(e3.headline, std::log(3.0), 0.05 * std::log(3.0));
    expect_monotone(e);
}

TEST(EntropyMap, RotationIsZero)
{
    MeasureSampler mu;
    auto e = entropy_estimate_map(circle_rotation(0.3819660112501051), mu, opts({2, 4, 6, 8, 10}, {0.25, 0.125, 0.0625}, 4096));
    EXPECT_LE(e.headline, 0.02);
    EXPECT_FALSE(e.inconclusive);
    expect_monotone(e);
}

TEST(EntropyMap, CatMap)
{
    MeasureSampler mu;
    mu.seed = 21;
    auto e = entropy_estimate_map(cat_map(), mu, opts({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, default_eps_grid(), 1u << 14));
    const double oracle = std::log((3 + std::sqrt(5.0)) / 2);
    EXPECT_NEAR(e.headline, oracle, 0.10 * oracle);
    expect_monotone(e);
}

TEST(EntropyMap, ProductAddsEntropies)
{
    MeasureSampler mu;
    mu.seed = 5;
    const auto o = opts({1, 2, 3, 4, 5, 6}, {0.5}, 1u << 14);
    auto a = entropy_estimate_map(full_shift(2), mu, o);
    auto b = entropy_estimate_map(full_shift(3), mu, o);
    auto ab = entropy_estimate_map(product({full_shift(2), full_shift(3)}), mu, o);
    EXPECT_NEAR(ab.headline, a.headline + b.headline, 0.15 * (a.headline + b.headline));
    expect_monotone(ab);
}

TEST(EntropyMap, SaturatedIsInconclusive)
{
    MeasureSampler mu;
    auto e = entropy_estimate_map(cat_map(), mu, opts({6, 7, 8}, {0.01}, 64));
    EXPECT_TRUE(e.inconclusive);
    EXPECT_FALSE(e.diagnostics.empty());
    EXPECT_THROW(entropy_estimate_map(cat_map(), mu, opts({3, 2}, {0.1}, 64)), UsageError);
    EXPECT_THROW(entropy_estimate_map(cat_map(), mu, opts({2}, {0.0}, 64)), UsageError);
}

TEST(EntropyMap, DeterministicForSeed)
{
    MeasureSampler mu;
    mu.seed = 99;
    const auto o = opts({1, 2, 3, 4}, {0.25, 0.125}, 2048);
    auto a = entropy_estimate_map(cat_map(), mu, o);
    set_workers(1);
    auto b = entropy_estimate_map(cat_map(), mu, o);
    set_workers(0);
    ASSERT_EQ(a.cells.size(), b.cells.size());
    for (std::size_t c = 0; c < a.cells.size(); ++c) EXPECT_EQ(a.cells[c].count, b.cells[c].count);
    EXPECT_EQ(a.headline, b.headline);
}

TEST(Fit, LinearDataRecoversSlope)
{
    std::vector<int> ns = {1, 2, 3, 4, 5, 6};
    std::vector<double> y;
    for (int n : ns) y.push_back(0.7 * n + 0.3);
    std::vector<bool> sat(ns.size(), false);
    auto f = fit_slope(ns, y, sat, 0.25);
    ASSERT_TRUE(f.ok);
    EXPECT_NEAR(f.slope, 0.7, 1e-12);
    sat[4] = sat[5] = true;
    f = fit_slope(ns, y, sat, 0.25);
    EXPECT_TRUE(f.ok);
    EXPECT_LE(f.n_to, 4);
}

TEST(EntropyFlow, RegularSuspensionOfShift)
{
    auto ss = make_singular_suspension(MappingTorus{full_shift(2)}, no_brake());
    MeasureSampler mu;
    mu.seed = 3;
    auto o = opts({1, 2, 3, 4, 5, 6}, {0.5, 0.35, 0.25}, 8192);
    auto f = entropy_estimate_flow(ss, mu, o);
    EXPECT_NEAR(f.headline, std::log(2.0), 0.10 * std::log(2.0));
    expect_monotone(f);
}

TEST(EntropyFlow, FiberKill)
{
    auto ss = make_singular_suspension(MappingTorus{full_shift(2)}, fiber_brake(0.5, ProfileKind::Power, 1));
    MeasureSampler mu;
    mu.seed = 4;
    std::vector<int> ns;
    for (int n = 1; n <= 12; ++n) ns.push_back(n);
    auto f = entropy_estimate_flow(ss, mu, opts(ns, {0.5, 0.35, 0.25}, 4096));
    EXPECT_LE(f.headline, 0.05);
    for (double t : tail_slopes(f)) EXPECT_LE(t, 0.05);
    expect_monotone(f);
}

TEST(EntropyFlow, RegularSuspensionOfRotation)
{
    auto ss = make_singular_suspension(MappingTorus{circle_rotation(0.3819660112501051)}, no_brake());
    MeasureSampler mu;
    auto f = entropy_estimate_flow(ss, mu, opts({4, 8, 12, 16, 20, 24}, {0.5, 0.35, 0.25}, 4096));
    EXPECT_LE(f.headline, 0.02);
    expect_monotone(f);
}
