#include "jumpctl/grid.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

using namespace jumpctl;
using jumpctl::testing::Gen;

TEST(TimeGrid, NodesAndEndpoint) {
    const TimeGrid g(0.0, 1.0, 0.3);
    EXPECT_EQ(g.nodes(), 4u);  // round(3.33) + 1
    EXPECT_DOUBLE_EQ(g.dt(), 1.0 / 3.0);
    EXPECT_EQ(g.time(3), 1.0);
    const TimeGrid h(0.0, 4.0, 0.05);
    EXPECT_EQ(h.nodes(), 81u);
    EXPECT_EQ(h.time(80), 4.0);
}

TEST(StateGrid, Validation) {
    EXPECT_THROW(StateGrid::line(1.0, 1.0, 9), DomainError);
    EXPECT_THROW(StateGrid::line(-1.0, 1.0, 4), DomainError);
    // 0 is inside [-1, 2] but not a node of the 8-node grid.
    EXPECT_THROW(StateGrid::line(-1.0, 2.0, 8), DomainError);
    EXPECT_NO_THROW(StateGrid::line(-2.0, 2.0, 257));
    EXPECT_NO_THROW(StateGrid::line(0.5, 2.0, 9));
}

TEST(StateGrid, NearestPrefersLowerNodeOnTies) {
    const auto g = StateGrid::line(-2.0, 2.0, 9);  // h = 0.5
    EXPECT_EQ(g.nearest(vec({0.25})), 4u);
    EXPECT_EQ(g.nearest(vec({-0.25})), 3u);
    EXPECT_EQ(g.nearest(vec({0.26})), 5u);
    EXPECT_EQ(g.nearest(vec({-9.0})), 0u);
    EXPECT_EQ(g.nearest(vec({9.0})), 8u);
}

TEST(StateGridProperty, InterpolationReproducesAffineFunctions) {
    Gen gen(5);
    for (int trial = 0; trial < 200; ++trial) {
        // The origin must be a node: build each axis from whole cells either side of 0.
        auto axis = [&] {
            const double h = gen.uniform(0.05, 0.5);
            const std::size_t below = 1 + gen.index(20), above = 7 + gen.index(20);
            return Axis{-h * static_cast<double>(below), h * static_cast<double>(above), below + above + 1};
        };
        const bool two = gen.coin();
        const Axis ax = axis();
        const StateGrid g = two ? StateGrid({ax, axis()}) : StateGrid({ax});
        const double lo = ax.lo, hi = ax.hi;
        const double a = gen.uniform(-3, 3), b = gen.uniform(-3, 3), c = gen.uniform(-3, 3);
        std::vector<double> v(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const Vec x = g.point(i);
            v[i] = a + b * x(0) + (two ? c * x(1) : 0.0);
        }
        for (int k = 0; k < 10; ++k) {
            // Includes points up to half a width outside the box.
            const double w = hi - lo;
            const Axis a1 = two ? g.axis(1) : ax;
            const double w1 = a1.hi - a1.lo;
            Vec x = two ? vec({gen.uniform(lo - w / 2, hi + w / 2), gen.uniform(a1.lo - w1 / 2, a1.hi + w1 / 2)})
                        : vec({gen.uniform(lo - w / 2, hi + w / 2)});
            const double expect = a + b * x(0) + (two ? c * x(1) : 0.0);
            EXPECT_NEAR(g.interpolate(v, x), expect, 1e-9 * (1 + std::abs(expect)));
            const Vec grad = g.interpolated_gradient(v, x);
            EXPECT_NEAR(grad(0), b, 1e-8);
            if (two) {
                EXPECT_NEAR(grad(1), c, 1e-8);
            }
            EXPECT_TRUE(g.in_extended_domain(x));
        }
    }
}

TEST(StateGrid, ExtendedDomainIsOneWidth) {
    const auto g = StateGrid::line(-1.0, 1.0, 9);
    EXPECT_TRUE(g.in_extended_domain(vec({2.9})));
    EXPECT_FALSE(g.in_extended_domain(vec({3.1})));
    EXPECT_TRUE(g.contains(vec({1.0})));
    EXPECT_FALSE(g.contains(vec({1.01})));
}
