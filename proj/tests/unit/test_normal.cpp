#include <gtest/gtest.h>

#include <cmath>

#include "cshift/error.hpp"
#include "cshift/normal.hpp"

namespace {

// Reference values computed with mpmath at 50 digits.
struct QuantileCase {
    double q;
    double expected;
};

constexpr QuantileCase kQuantiles[] = {
    {0.95, 1.64485362695147228},
    {0.975, 1.95996398454005386},
    {0.999, 3.09023230616781328},
    {1e-10, -6.36134090240405620},
    {0.02425, -1.97296105131188484},
    {1.0 - 1e-12, 7.03448691004783521},
};

}  // namespace

TEST(NormalQuantile, MatchesHighPrecisionReference) {
    for (const auto& c : kQuantiles) {
        EXPECT_NEAR(cshift::normal_quantile(c.q), c.expected, 1e-9) << "q=" << c.q;
    }
}

TEST(NormalQuantile, HalfIsExactlyZero) { EXPECT_EQ(cshift::normal_quantile(0.5), 0.0); }

TEST(NormalQuantile, IsAntisymmetric) {
    for (double q = 0.001; q < 0.5; q += 0.0137) {
        EXPECT_NEAR(cshift::normal_quantile(q), -cshift::normal_quantile(1.0 - q), 1e-9);
    }
}

TEST(NormalQuantile, InvertsTheCdf) {
    for (double q = 1e-6; q < 1.0; q += 0.0173) {
        EXPECT_NEAR(cshift::normal_cdf(cshift::normal_quantile(q)), q, 1e-12 + 1e-9 * q);
    }
}

TEST(NormalQuantile, RejectsProbabilitiesOutsideTheOpenInterval) {
    EXPECT_THROW(cshift::normal_quantile(0.0), cshift::ConfigError);
    EXPECT_THROW(cshift::normal_quantile(1.0), cshift::ConfigError);
    EXPECT_THROW(cshift::normal_quantile(-0.1), cshift::ConfigError);
    EXPECT_THROW(cshift::normal_quantile(std::nan("")), cshift::ConfigError);
}

TEST(NormalTail, UpperTailAtThree) { EXPECT_NEAR(cshift::normal_sf(3.0), 0.00134989803163009, 1e-15); }
