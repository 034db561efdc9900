#include <gtest/gtest.h>

#include <cmath>

#include "singsusp/singular_suspension.hpp"
#include "singsusp/symbolic.hpp"

using namespace singsusp;

namespace {

SingularSuspension cat_point(double x, double y, double h, ProfileKind prof, double k)
{
    MappingTorus mt{cat_map()};
    return make_singular_suspension(mt, point_brake({FiberPoint{make_point({x, y}), h}}, prof, k));
}

SingularSuspension fiber_ss(const DiscreteSystem &s, double s0, double k)
{
    return make_singular_suspension(MappingTorus{s}, fiber_brake(s0, ProfileKind::Power, k));
}

// composite Simpson on [0,s] of 1/alpha along the phi-orbit, alpha rebuilt from d̄ by hand
double simpson_clock(const SingularSuspension &ss, const FiberPoint &p, double s, int n)
{
    const auto &sig = ss.brake.points[0];
    auto inv_alpha = [&](double u) {
        const double r = bar_metric(ss.torus, suspension_flow(ss.torus, u, p), sig);
        return 1.0 / std::pow(r, ss.brake.param);
    };
    const double h = s / n;
    double acc = inv_alpha(0) + inv_alpha(s);
    for (int i = 1; i < n; ++i) acc += (i % 2 ? 4 : 2) * inv_alpha(i * h);
    return acc * h / 3;
}

} // namespace

TEST(Alpha, Examples)
{
    auto ss = cat_point(0, 0, 0.25, ProfileKind::Power, 1);
    EXPECT_EQ(alpha_eval(ss, FiberPoint{make_point({0, 0}), 0.25}), 0.0);
    // the origin is fixed, so d̄ along its column is the circular height gap
    EXPECT_DOUBLE_EQ(alpha_eval(ss, FiberPoint{make_point({0, 0}), 0.75}), 0.5);
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    EXPECT_EQ(alpha_eval(reg, FiberPoint{make_point({0.3, 0.1}), 0.4}), 1.0);
}

TEST(Alpha, ZeroExactlyOnSingularSetAndBounded)
{
    MappingTorus mt{cat_map()};
    Rng rng(5);
    std::vector<FiberPoint> pts;
    for (int i = 0; i < 4; ++i) pts.push_back(FiberPoint{sample_uniform(mt.system, rng), rng.uniform()});
    for (auto prof : {ProfileKind::Power, ProfileKind::Exponential}) {
        auto ss = make_singular_suspension(mt, point_brake(pts, prof, prof == ProfileKind::Power ? 2.0 : 0.05));
        for (const auto &p : pts) EXPECT_EQ(alpha_eval(ss, p), 0.0);
        for (int i = 0; i < 2000; ++i) {
            FiberPoint q{sample_uniform(mt.system, rng), rng.uniform()};
            const double a = alpha_eval(ss, q);
            EXPECT_GT(a, 0.0);
            const double diam = 0.5 + diameter(mt.system);
            EXPECT_LE(a, prof == ProfileKind::Power ? diam * diam : 1.0);
        }
    }
}

TEST(Alpha, WholeFiberUsesHeightGap)
{
    auto ss = fiber_ss(full_shift(2), 0.5, 1);
    Rng rng(1);
    auto x = sample_uniform(ss.torus.system, rng);
    EXPECT_EQ(alpha_eval(ss, FiberPoint{x, 0.5}), 0.0);
    EXPECT_DOUBLE_EQ(alpha_eval(ss, FiberPoint{x, 0.2}), 0.3);
    EXPECT_DOUBLE_EQ(alpha_eval(ss, FiberPoint{x, 0.9}), 0.4);
}

TEST(Clock, RegularIsIdentity)
{
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    FiberPoint p{make_point({0.3, 0.2}), 0.7};
    for (double s : {0.0, 0.5, 3.25}) EXPECT_DOUBLE_EQ(clock(reg, p, s), s);
}

TEST(Clock, MatchesSimpsonOracle)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    Rng rng(8);
    for (int i = 0; i < 5; ++i) {
        FiberPoint p{sample_uniform(ss.torus.system, rng), rng.uniform()};
        const double s = 1.7;
        const double c = clock(ss, p, s);
        const double o = simpson_clock(ss, p, s, 200000);
        EXPECT_NEAR(c, o, 1e-6 * o);
    }
}

TEST(Clock, ClosedFormOnSingularFiber)
{
    // alpha = |h - 1/2|^k along every column
    auto half = fiber_ss(full_shift(2), 0.5, 0.5);
    Rng rng(2);
    auto x = sample_uniform(half.torus.system, rng);
    EXPECT_NEAR(clock(half, FiberPoint{x, 0.0}, 0.4), 2 * (std::sqrt(0.5) - std::sqrt(0.1)), 1e-9);
    EXPECT_NEAR(clock(half, FiberPoint{x, 0.0}, 0.5), 2 * std::sqrt(0.5), 1e-9);
    // the flow stops on S, so passing it takes infinite time even for integrable profiles
    EXPECT_EQ(clock(half, FiberPoint{x, 0.0}, 1.0), kInf);
    auto one = fiber_ss(full_shift(2), 0.5, 1);
    EXPECT_NEAR(clock(one, FiberPoint{x, 0.1}, 0.3), std::log(0.4 / 0.1), 1e-9);
    auto r = clock_eval(one, FiberPoint{x, 0.1}, 0.6);
    EXPECT_EQ(r.value, kInf);
    EXPECT_NE(r.status, ClockStatus::Finite);
}

TEST(Clock, DivergesThroughPowerSingularity)
{
    for (double k : {1.0, 2.0, 4.0}) {
        auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, k);
        auto r = clock_eval(ss, FiberPoint{make_point({0.3, 0.7}), 0.1}, 0.8);
        EXPECT_EQ(r.value, kInf);
        EXPECT_NEAR(r.hit_time, 0.4, 1e-12);
    }
    // integrable profile: the point is reached in finite time but never passed.
    // Along the column d̄ = (1/2 - u)(1 + d(x, fx)) and d(x, fx) = 0.3 here.
    auto soft = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 0.5);
    EXPECT_NEAR(clock(soft, FiberPoint{make_point({0.3, 0.7}), 0.1}, 0.4), 2 * std::sqrt(0.4 / 1.3), 1e-9);
    EXPECT_EQ(clock(soft, FiberPoint{make_point({0.3, 0.7}), 0.1}, 0.8), kInf);
}

TEST(Clock, DivergenceLowerBoundsGrowUnderRefinement)
{
    // oracle: clock over [0, 0.4 - 2^-m] is finite and unbounded in m
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 1);
    FiberPoint p{make_point({0.3, 0.7}), 0.1};
    double prev = 0;
    for (int m = 2; m <= 30; m += 4) {
        const double v = clock(ss, p, 0.4 - std::ldexp(1.0, -m));
        ASSERT_TRUE(std::isfinite(v));
        EXPECT_GT(v, prev);
        prev = v;
    }
    EXPECT_GT(prev, 15.0);
}

TEST(Clock, Additivity)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    Rng rng(9);
    for (int i = 0; i < 50; ++i) {
        FiberPoint p{sample_uniform(ss.torus.system, rng), rng.uniform()};
        const double a = rng.uniform(0, 2), b = rng.uniform(0, 2);
        const double whole = clock(ss, p, a + b);
        const double split = clock(ss, p, a) + clock(ss, suspension_flow(ss.torus, a, p), b);
        if (std::isfinite(whole)) EXPECT_NEAR(whole, split, 1e-8 * std::max(1.0, whole));
        else EXPECT_FALSE(std::isfinite(split));
    }
}

TEST(Clock, MonotoneAndInvertible)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Exponential, 0.05);
    Rng rng(10);
    FiberPoint p{sample_uniform(ss.torus.system, rng), 0.0};
    double prev = -1;
    for (int i = 0; i <= 40; ++i) {
        const double c = clock(ss, p, 0.1 * i);
        EXPECT_GT(c, prev);
        prev = c;
    }
    for (double t : {0.3, 1.0, 4.0, 25.0}) {
        auto r = psi_flow_ex(ss, t, p);
        ASSERT_FALSE(r.trapped);
        EXPECT_NEAR(clock(ss, p, r.phi_time), t, 1e-8 * std::max(1.0, t));
    }
}

TEST(Psi, RegularEqualsPhi)
{
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    Rng rng(12);
    for (int i = 0; i < 100; ++i) {
        FiberPoint p{sample_uniform(reg.torus.system, rng), rng.uniform()};
        const double t = rng.uniform(-5, 5);
        EXPECT_LE(bar_metric(reg.torus, psi_flow(reg, t, p), suspension_flow(reg.torus, t, p)), 1e-9);
    }
    FiberPoint p{make_point({0.1, 0.2}), 0.3};
    auto same = psi_flow(reg, 0.0, p);
    EXPECT_EQ(same.h, p.h);
}

TEST(Psi, ZeroTimeIsIdentity)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    FiberPoint p{make_point({0.1, 0.2}), 0.3};
    auto q = psi_flow(ss, 0.0, p);
    EXPECT_EQ(q.h, p.h);
    EXPECT_EQ(q.base.x, p.base.x);
}

TEST(Psi, SemigroupAndOrbitEquivalence)
{
    for (auto prof : {ProfileKind::Power, ProfileKind::Exponential}) {
        auto ss = cat_point(0.3, 0.7, 0.5, prof, prof == ProfileKind::Power ? 2.0 : 0.05);
        Rng rng(13);
        for (int i = 0; i < 60; ++i) {
            FiberPoint p{sample_uniform(ss.torus.system, rng), rng.uniform()};
            const double t = rng.uniform(-3, 3), s = rng.uniform(-3, 3);
            auto r = psi_flow_ex(ss, t + s, p);
            if (r.trapped) continue;
            auto two = psi_flow(ss, t, psi_flow(ss, s, p));
            EXPECT_LE(bar_metric(ss.torus, r.point, two), 1e-7);
            // the psi point is the phi point at the reported phi-time
            EXPECT_LE(bar_metric(ss.torus, r.point, suspension_flow(ss.torus, r.phi_time, p)), 1e-7);
            EXPECT_EQ(r.phi_time > 0, t + s > 0);
        }
    }
}

TEST(Psi, NegativeTimeInverts)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    Rng rng(14);
    for (int i = 0; i < 30; ++i) {
        FiberPoint p{sample_uniform(ss.torus.system, rng), rng.uniform()};
        const double t = rng.uniform(0.1, 3);
        auto fwd = psi_flow_ex(ss, t, p);
        if (fwd.trapped) continue;
        EXPECT_LE(bar_metric(ss.torus, psi_flow(ss, -t, fwd.point), p), 1e-7);
    }
}

TEST(Psi, TrappedBelowSingularFiber)
{
    // Power(1) on the fiber h = 1/2: clock from 0.4 to h is log(0.1 / (0.5 - h))
    auto ss = fiber_ss(cat_map(), 0.5, 1);
    FiberPoint p{make_point({0.2, 0.6}), 0.4};
    double prev = 0.4;
    for (double t : {1.0, 5.0, 10.0, 18.0}) {
        auto q = psi_flow(ss, t, p);
        EXPECT_NEAR(q.h, 0.5 - 0.1 * std::exp(-t), 1e-9);
        EXPECT_LT(q.h, 0.5);
        EXPECT_GT(q.h, prev);
        EXPECT_EQ(q.base.x, p.base.x);
        prev = q.h;
    }
    auto far = psi_flow_ex(ss, 1e6, p);
    EXPECT_NEAR(far.point.h, 0.5, 1e-6);
    EXPECT_LE(far.point.h, 0.5);
}

TEST(Psi, TrappingAtPointSingularity)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    FiberPoint p{make_point({0.3, 0.7}), 0.2};
    const auto &sig = ss.brake.points[0];
    double prev = kInf;
    for (double t : {0.5, 2.0, 10.0, 100.0, 1e4}) {
        const double d = bar_metric(ss.torus, psi_flow(ss, t, p), sig);
        EXPECT_LT(d, prev);
        prev = d;
    }
    EXPECT_LT(prev, 1e-3);
    EXPECT_FALSE(psi_flow_ex(ss, 1e30, p).trapped);
    // with an integrable profile the point is reached at psi-time 2 sqrt(0.3 / 1.3) and held
    auto soft = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 0.5);
    auto r = psi_flow_ex(soft, 2.0, p);
    EXPECT_TRUE(r.trapped);
    EXPECT_LE(bar_metric(soft.torus, r.point, sig), 1e-10);
    EXPECT_FALSE(psi_flow_ex(soft, 2 * std::sqrt(0.3 / 1.3) - 1e-6, p).trapped);
    EXPECT_TRUE(psi_flow_ex(soft, 2 * std::sqrt(0.3 / 1.3) + 1e-6, p).trapped);
}

TEST(Gamma, RegularIsOne)
{
    auto reg = make_singular_suspension(MappingTorus{full_shift(2)}, no_brake());
    Rng rng(15);
    for (int i = 0; i < 20; ++i) EXPECT_EQ(gamma(reg, sample_uniform(reg.torus.system, rng)), 1.0);
}

TEST(Gamma, InfiniteOverSingularSet)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 1);
    EXPECT_EQ(gamma(ss, make_point({0.3, 0.7})), kInf);
    auto fib = fiber_ss(cat_map(), 0.5, 1);
    Rng rng(16);
    for (int i = 0; i < 20; ++i) {
        auto r = gamma_eval(fib, sample_uniform(fib.torus.system, rng));
        EXPECT_EQ(r.value, kInf);
        EXPECT_NE(r.status, ClockStatus::Finite);
    }
}

TEST(Gamma, DivergesAlongApproachRay)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 2);
    ss.quad.cap = 1e12;
    double prev = 0;
    for (int n = 1; n <= 30; ++n) {
        const double g = gamma(ss, make_point({0.3 + std::ldexp(1.0, -n), 0.7}));
        ASSERT_TRUE(std::isfinite(g)) << n;
        EXPECT_GT(g, prev) << n;
        prev = g;
    }
    EXPECT_GT(prev, 1e4);
}

TEST(Gamma, DivergenceCertificateAboveCap)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 4);
    ss.quad.cap = 1e6;
    auto r = gamma_eval(ss, make_point({0.3 + 1e-4, 0.7}));
    EXPECT_EQ(r.value, kInf);
    EXPECT_EQ(r.status, ClockStatus::ExceedsCap);
    EXPECT_GT(r.lower_bound, 1e6);
    EXPECT_TRUE(std::isfinite(r.lower_bound));
}

TEST(ASing, Examples)
{
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    EXPECT_TRUE(a_sing_sample(reg, 3).points.empty());
    EXPECT_FALSE(a_sing_sample(reg, 3).all_of_base);

    auto ss = cat_point(0.1, 0.25, 0.5, ProfileKind::Power, 1);
    auto a = a_sing_sample(ss, 2);
    ASSERT_EQ(a.points.size(), 5u);
    auto orbit = orbit_segment(ss.torus.system, make_point({0.1, 0.25}), -2, 2);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_LT(base_distance(ss.torus.system, a.points[i], orbit[i]), 1e-12);

    EXPECT_TRUE(a_sing_sample(fiber_ss(cat_map(), 0.5, 1), 4).all_of_base);
    EXPECT_THROW(a_sing_sample(ss, -1), UsageError);
}

TEST(ASing, OrbitClosureDepth)
{
    MappingTorus mt{full_shift(2)};
    auto seed = FiberPoint{make_point({}, {SymbolSeq::from_string("0010111")}), 0.5};
    auto ss = make_singular_suspension(mt, orbit_brake(seed, 3, ProfileKind::Power, 1));
    EXPECT_EQ(ss.singular.size(), 7u);
    // period 7: depth 3 on a 7-orbit already covers every point once
    EXPECT_EQ(a_sing_sample(ss, 3).points.size(), 7u);
}

TEST(Measure, Samplers)
{
    const auto sys = cat_map();
    MeasureSampler leb;
    leb.seed = 3;
    auto a = leb.draw(sys, 10), b = leb.draw(sys, 10);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(a[i].x, b[i].x);
    EXPECT_EQ(leb.draw_one(sys, 7).x, a[7].x);

    MeasureSampler erg;
    erg.kind = MeasureKind::ErgodicAlongOrbit;
    erg.orbit_start = make_point({0.1234, 0.5678});
    erg.burn_in = 5;
    auto o = erg.draw(sys, 4);
    for (int i = 0; i < 4; ++i) EXPECT_LT(base_distance(sys, o[i], iterate(sys, erg.orbit_start, 5 + i)), 1e-12);
}

TEST(ExpectedGamma, RegularIsOne)
{
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    auto e = expected_gamma(reg, MeasureSampler{}, 200);
    EXPECT_TRUE(e.finite);
    EXPECT_DOUBLE_EQ(e.estimate, 1.0);
    EXPECT_EQ(e.stderr_, 0.0);
    EXPECT_THROW(expected_gamma(reg, MeasureSampler{}, 99), UsageError);
}

TEST(ExpectedGamma, StabilizesForSoftAndDivergesForSteepProfile)
{
    auto soft = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 0.5);
    auto steep = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 4);
    MeasureSampler mu;
    mu.seed = 77;
    auto a = expected_gamma(soft, mu, 1000);
    auto b = expected_gamma(steep, mu, 1000);
    EXPECT_TRUE(a.finite) << a.reason;
    EXPECT_FALSE(b.finite);
    EXPECT_LT(a.shell_ratio, b.shell_ratio);
    // refinement oracle: shell contributions decay for k = 1/2
    ASSERT_EQ(a.shell_contributions.size(), 6u);
    EXPECT_LT(a.shell_contributions.back(), a.shell_contributions.front());
}

TEST(ExpectedGamma, FiniteOnSubshiftAvoidingSingularOrbit)
{
    // singular point on the all-zero sequence; the support subshift must not contain a long zero run
    auto sh = std::make_shared<Subshift>(minimal_subshift_with_entropy(0.3, 3, 0.02));
    LanguageIndex idx(*sh, 21);
    ASSERT_FALSE(idx.contains(Word(21, 0)));
    MappingTorus mt{full_shift(2)};
    auto ss = make_singular_suspension(mt, point_brake({FiberPoint{make_point({}, {SymbolSeq::from_string("0")}), 0.5}},
                                                       ProfileKind::Power, 2));
    MeasureSampler mu;
    mu.kind = MeasureKind::UniformOnSubshift;
    mu.subshift = sh;
    auto e = expected_gamma(ss, mu, 500);
    EXPECT_TRUE(e.finite);
    EXPECT_EQ(e.divergent_samples, 0u);
    EXPECT_GT(e.estimate, 1.0);
}

TEST(Lift, RegularExamples)
{
    auto reg = make_singular_suspension(MappingTorus{cat_map()}, no_brake());
    MeasureSampler mu;
    EXPECT_NEAR(lift_integral(reg, mu, [](const FiberPoint &) { return 1.0; }, 200), 1.0, 1e-12);
    EXPECT_NEAR(lift_integral(reg, mu, [](const FiberPoint &p) { return p.h < 0.5 ? 1.0 : 0.0; }, 200), 0.5, 1e-9);
}

TEST(Lift, DivergentExpectationIsDomainError)
{
    auto fib = fiber_ss(cat_map(), 0.5, 1);
    EXPECT_THROW(lift_integral(fib, MeasureSampler{}, [](const FiberPoint &) { return 1.0; }, 100), DomainError);
}

TEST(Lift, InvariantUnderPsi)
{
    auto ss = cat_point(0.3, 0.7, 0.5, ProfileKind::Power, 0.5);
    // continuous on the mapping torus: interpolates g(x) and g(fx) along the fiber
    auto xi = [&](const FiberPoint &p) {
        const auto fx = step(ss.torus.system, p.base);
        return (1 - p.h) * std::cos(2 * M_PI * p.base.x[0]) + p.h * std::cos(2 * M_PI * fx.x[0]);
    };
    auto moved = [&](const FiberPoint &p) { return xi(psi_flow(ss, 0.3, p)); };
    std::vector<double> plain, shifted;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        MeasureSampler mu;
        mu.seed = seed;
        plain.push_back(lift_integral(ss, mu, xi, 300));
        shifted.push_back(lift_integral(ss, mu, moved, 300));
    }
    auto mean = [](const std::vector<double> &v) {
        double s = 0;
        for (double x : v) s += x;
        return s / v.size();
    };
    const double m = mean(plain);
    double var = 0;
    for (double x : plain) var += (x - m) * (x - m);
    const double se = std::sqrt(var / (plain.size() - 1));
    EXPECT_LE(std::fabs(mean(shifted) - m), 3 * se + 1e-9);
}
