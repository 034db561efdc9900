#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "singsusp/expansiveness.hpp"

using namespace singsusp;

namespace {

// all monotone paths by recursion, bottleneck = max cost on the path
double brute_bottleneck(const std::vector<std::vector<double>> &c, int max_step)
{
    const int R = static_cast<int>(c.size()), C = static_cast<int>(c[0].size());
    std::function<double(int, int)> go = [&](int i, int j) -> double {
        if (i == R - 1 && j == C - 1) return c[i][j];
        double best = kInf;
        for (int a = 1; a <= max_step && i + a < R; ++a)
            for (int b = 1; b <= max_step && j + b < C; ++b) best = std::min(best, go(i + a, j + b));
        return std::max(c[i][j], best);
    };
    return go(0, 0);
}

SingularSuspension regular(const DiscreteSystem &s) { return make_singular_suspension(MappingTorus{s}, no_brake()); }

} // namespace

TEST(Bottleneck, MatchesBruteForce)
{
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
        const int R = 2 + static_cast<int>(rng.below(5)), C = 2 + static_cast<int>(rng.below(5));
        std::vector<std::vector<double>> c(R, std::vector<double>(C));
        for (auto &row : c)
            for (auto &v : row) v = rng.uniform();
        for (int m = 1; m <= 3; ++m) {
            auto r = bottleneck_path(c, m);
            const double b = brute_bottleneck(c, m);
            EXPECT_EQ(r.value, b);
            if (std::isfinite(b)) {
                // the returned path is admissible and realizes the value
                ASSERT_FALSE(r.path.empty());
                EXPECT_EQ(r.path.front(), std::make_pair(0, 0));
                EXPECT_EQ(r.path.back(), std::make_pair(R - 1, C - 1));
                double mx = 0;
                for (std::size_t k = 0; k < r.path.size(); ++k) {
                    mx = std::max(mx, c[r.path[k].first][r.path[k].second]);
                    if (k == 0) continue;
                    const int a = r.path[k].first - r.path[k - 1].first, bb = r.path[k].second - r.path[k - 1].second;
                    EXPECT_TRUE(a >= 1 && a <= m && bb >= 1 && bb <= m);
                }
                EXPECT_EQ(mx, r.value);
            } else {
                EXPECT_TRUE(r.path.empty());
            }
        }
    }
}

TEST(Bottleneck, ExampleSixBySix)
{
    // cheap diagonal, expensive elsewhere
    std::vector<std::vector<double>> c(6, std::vector<double>(6, 1.0));
    for (int i = 0; i < 6; ++i) c[i][i] = 0.1 * i;
    EXPECT_DOUBLE_EQ(bottleneck_path(c, 1).value, 0.5);
    c[3][3] = 2.0;
    EXPECT_DOUBLE_EQ(bottleneck_path(c, 1).value, 2.0);
    EXPECT_DOUBLE_EQ(bottleneck_path(c, 2).value, 0.5);
}

TEST(Tracking, SelfIsZeroAndSymmetric)
{
    const auto s = cat_map();
    auto ss = regular(s);
    Rng rng(3);
    ReparamGrid g{4.0, 0.1, 3};
    for (int i = 0; i < 5; ++i) {
        FiberPoint p{sample_uniform(s, rng), rng.uniform()};
        EXPECT_EQ(reparam_tracking_distance(ss, p, p, g).distance, 0.0);
        FiberPoint q{sample_uniform(s, rng), rng.uniform()};
        EXPECT_NEAR(reparam_tracking_distance(ss, p, q, g).distance, reparam_tracking_distance(ss, q, p, g).distance, 1e-9);
    }
}

TEST(Tracking, TimeShiftedOrbitIsClose)
{
    for (const auto &s : {cat_map(), full_shift(2), circle_rotation(0.3)}) {
        auto ss = regular(s);
        Rng rng(5);
        ReparamGrid g{4.0, 0.1, 3};
        for (double eps : {0.01, 0.03}) {
            FiberPoint p{sample_uniform(s, rng), rng.uniform()};
            auto q = psi_flow(ss, eps, p);
            EXPECT_LE(reparam_tracking_distance(ss, p, q, g).distance, eps * (1 + lipschitz(s)) + 1e-9);
        }
    }
}

TEST(Tracking, RefinementWithinSamplingModulus)
{
    const auto s = cat_map();
    auto ss = regular(s);
    Rng rng(7);
    for (int i = 0; i < 6; ++i) {
        FiberPoint p{sample_uniform(s, rng), 0.0};
        auto y = p.base;
        y.x[0] = wrap01(y.x[0] + 0.002);
        FiberPoint q{y, 0.0};
        const double coarse = reparam_tracking_distance(ss, p, q, ReparamGrid{3.0, 0.1, 3}).distance;
        const double fine = reparam_tracking_distance(ss, p, q, ReparamGrid{3.0, 0.05, 3}).distance;
        // a finer lattice can only lose by the modulus of one coarse step
        EXPECT_LE(fine, coarse + 0.1 * (1 + lipschitz(s)) + 1e-12);
    }
}

TEST(Tracking, GridValidation)
{
    auto ss = regular(cat_map());
    FiberPoint p{make_point({0.1, 0.2}), 0.0};
    EXPECT_THROW(reparam_tracking_distance(ss, p, p, ReparamGrid{0.0, 0.1, 2}), UsageError);
    EXPECT_THROW(reparam_tracking_distance(ss, p, p, ReparamGrid{1.0, 0.1, 0}), UsageError);
    EXPECT_THROW(reparam_tracking_distance(ss, p, p, ReparamGrid{1000.0, 0.01, 2}), UsageError);
}

TEST(FlowFalsifier, RotationHasReplayableCounterexample)
{
    auto ss = regular(circle_rotation(0.3819660112501051));
    PairSampler ps;
    ps.kind = PairKind::Nearby;
    ps.radius = 0.002;
    ps.fixed_offset = true;
    auto r = flow_expansiveness_falsifier(ss, 0.05, 0.01, ps, 4, ReparamGrid{3.0, 0.1, 3});
    ASSERT_TRUE(r.counterexample);
    ASSERT_TRUE(r.witness);
    std::string why;
    EXPECT_TRUE(replay_flow_witness(ss, *r.witness, &why)) << why;
    EXPECT_LE(r.witness->tracking, 0.01);
    EXPECT_GT(r.witness->min_arc_distance, 1e-6);

    auto bad = *r.witness;
    bad.delta = r.witness->tracking / 4;
    EXPECT_FALSE(replay_flow_witness(ss, bad, &why));
    bad = *r.witness;
    bad.q = bad.p;
    EXPECT_FALSE(replay_flow_witness(ss, bad, &why));
}

TEST(FlowFalsifier, CatMapNearbyPairsSeparate)
{
    auto ss = regular(cat_map());
    PairSampler ps;
    ps.kind = PairKind::Nearby;
    ps.radius = 0.01;
    auto r = flow_expansiveness_falsifier(ss, 0.05, 0.02, ps, 8, ReparamGrid{6.0, 0.1, 3});
    EXPECT_FALSE(r.counterexample);
    EXPECT_EQ(r.tested, 8u);
    EXPECT_GT(r.min_tracking, 0.02);
    EXPECT_THROW(flow_expansiveness_falsifier(ss, 0.0, 0.02, ps, 1), UsageError);
}

TEST(MapFalsifier, ShiftIsExpansive)
{
    PairSampler ps;
    ps.kind = PairKind::SymbolWindow;
    ps.window = 10;
    auto r = map_expansiveness_falsifier(full_shift(2), 0.5, ps, 500, 30);
    EXPECT_FALSE(r.counterexample);
    EXPECT_EQ(r.tested, 500u);
    EXPECT_EQ(r.min_max_distance, 1.0);
}

TEST(MapFalsifier, CatMapIsExpansive)
{
    PairSampler ps;
    ps.kind = PairKind::Nearby;
    ps.radius = 0.01;
    auto r = map_expansiveness_falsifier(cat_map(), 0.1, ps, 500, 30);
    EXPECT_FALSE(r.counterexample);
    EXPECT_GT(r.min_max_distance, 0.1);
}

TEST(MapFalsifier, IdentityAndRotationAreNot)
{
    PairSampler ps;
    ps.kind = PairKind::Nearby;
    ps.radius = 0.01;
    for (double a : {0.0, 0.3}) {
        auto s = circle_rotation(a);
        auto r = map_expansiveness_falsifier(s, 0.05, ps, 10, 50);
        ASSERT_TRUE(r.counterexample);
        EXPECT_TRUE(replay_map_witness(s, *r.witness));
        auto w = *r.witness;
        w.e = w.max_distance / 2;
        EXPECT_FALSE(replay_map_witness(s, w));
    }
    EXPECT_THROW(map_expansiveness_falsifier(cat_map(), 0.1, ps, 1, 0), UsageError);
}

TEST(PairSamplerTest, Deterministic)
{
    PairSampler ps;
    ps.kind = PairKind::Nearby;
    ps.seed = 44;
    const auto s = cat_map();
    auto [a, b] = ps.draw(s, 3);
    auto [c, d] = ps.draw(s, 3);
    EXPECT_EQ(a.x, c.x);
    EXPECT_EQ(b.x, d.x);
    EXPECT_GT(base_distance(s, a, b), 0.0);
    EXPECT_LE(base_distance(s, a, b), ps.radius);
    ps.kind = PairKind::SymbolWindow;
    EXPECT_THROW(ps.draw(s, 0), UsageError);
}

TEST(SingularityCount, Statuses)
{
    MappingTorus mt{cat_map()};
    std::vector<FiberPoint> three = {{make_point({0.1, 0.2}), 0.3}, {make_point({0.5, 0.5}), 0.5}, {make_point({0.7, 0.1}), 0.8}};
    auto ok = singularity_count_check(make_singular_suspension(mt, point_brake(three, ProfileKind::Power, 2)));
    EXPECT_EQ(ok.status, SingCheckStatus::FiniteOK);
    EXPECT_EQ(ok.count, 3u);
    EXPECT_GT(ok.min_distance, 0.0);

    auto dup = three;
    dup.push_back(three[1]);
    auto v = singularity_count_check(make_singular_suspension(mt, point_brake(dup, ProfileKind::Power, 2)));
    EXPECT_EQ(v.status, SingCheckStatus::Violation);
    EXPECT_EQ(v.pair, std::make_pair(std::size_t(1), std::size_t(3)));

    auto w = singularity_count_check(make_singular_suspension(mt, fiber_brake(0.5, ProfileKind::Power, 1)));
    EXPECT_EQ(w.status, SingCheckStatus::Incompatible);
    EXPECT_FALSE(w.message.empty());
}
