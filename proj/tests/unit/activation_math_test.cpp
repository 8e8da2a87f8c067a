#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include <boost/multiprecision/cpp_bin_float.hpp>

#include "gluscope/activation_math.hpp"
#include "gluscope/errors.hpp"

namespace gluscope {
namespace {

using big = boost::multiprecision::cpp_bin_float_50;

// Reference values evaluated at 40 significant digits.
struct Ref {
    double x;
    double y;
};

constexpr Ref kSwishRefs[] = {
    {1.0, 0.7310585786300048792511592},    {-1.0, -0.2689414213699951207488408},
    {2.0, 1.761594155955764888119458},     {5.0, 4.96653574537857572220319},
    {-5.0, -0.0334642546214242777968099},  {10.0, 9.999546021312975656054952},
    {-20.0, -4.122307236380407162861724e-8},
};

constexpr Ref kGeluRefs[] = {
    {1.0, 0.8413447460685429485852325},
    {-2.0, -0.04550026389635841440056527},
    {3.0, 2.995950305905109716420045},
    {-0.5, -0.1542687693629934481811477},
};

big swish_oracle(double x) {
    big bx = x;
    return bx / (1 + exp(-bx));
}

big gelu_oracle(double x) {
    big bx = x;
    return bx * erfc(-bx / sqrt(big(2))) / 2;
}

TEST(Swish, ZeroIsExactlyZero) { EXPECT_EQ(swish(0.0), 0.0); }

TEST(Swish, MatchesReferenceValues) {
    for (const auto& r : kSwishRefs) EXPECT_NEAR(swish(r.x), r.y, 1e-15 * std::max(1.0, std::abs(r.y))) << r.x;
}

TEST(Swish, TailsApproachIdentityAndZero) {
    EXPECT_DOUBLE_EQ(swish(50.0), 50.0);
    EXPECT_GT(swish(-50.0), -1e-19);
    EXPECT_LE(swish(-50.0), 0.0);
    EXPECT_EQ(swish(-800.0), -0.0);
}

TEST(Swish, SignMatchesInput) {
    for (double x = -30.0; x <= 30.0; x += 0.37) {
        EXPECT_EQ(std::signbit(swish(x)), std::signbit(x)) << x;
    }
}

TEST(Gelu, ZeroIsExactlyZero) { EXPECT_EQ(gelu(0.0), 0.0); }

TEST(Gelu, MatchesReferenceValues) {
    for (const auto& r : kGeluRefs) EXPECT_NEAR(gelu(r.x), r.y, 1e-15 * std::max(1.0, std::abs(r.y))) << r.x;
}

TEST(ActivationFunctions, MatchHighPrecisionOracleOnGrid) {
    for (int i = -400; i <= 400; ++i) {
        const double x = i * 0.05;
        EXPECT_NEAR(swish(x), static_cast<double>(swish_oracle(x)), 1e-12) << x;
        EXPECT_NEAR(gelu(x), static_cast<double>(gelu_oracle(x)), 1e-12) << x;
    }
}

TEST(ActivationFunctions, RejectNonFinite) {
    const double bad[] = {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity(),
                          -std::numeric_limits<double>::infinity()};
    for (double x : bad) {
        EXPECT_THROW(swish(x), DomainError);
        EXPECT_THROW(gelu(x), DomainError);
        EXPECT_THROW(glu_activation(ActivationKind::SwiGLU, 1.0, x), DomainError);
        EXPECT_THROW(glu_activation(ActivationKind::GeGLU, x, 1.0), DomainError);
    }
}

TEST(GluActivation, ZeroGateAnnihilates) {
    const auto a = glu_activation(ActivationKind::SwiGLU, 0.0, 7.5);
    EXPECT_EQ(a.post, 0.0);
    EXPECT_EQ(a.gated, 0.0);
}

TEST(GluActivation, PositiveGateLargeNegativeInput) {
    const auto a = glu_activation(ActivationKind::SwiGLU, 5.0, -10.0);
    EXPECT_NEAR(a.post, -49.66535745378575722, 1e-12);
}

TEST(GluActivation, SwiGluOfTwoAndThree) {
    const auto a = glu_activation(ActivationKind::SwiGLU, 2.0, 3.0);
    EXPECT_NEAR(a.post, 5.284782467867294664358375, 1e-14);
    EXPECT_EQ(a.x_gate, 2.0);
    EXPECT_EQ(a.x_in, 3.0);
    EXPECT_EQ(a.get(IntermediateKind::HookPre), 2.0);
    EXPECT_EQ(a.get(IntermediateKind::HookPreLinear), 3.0);
    EXPECT_EQ(a.get(IntermediateKind::Swish), swish(2.0));
    EXPECT_EQ(a.get(IntermediateKind::HookPost), a.post);
}

TEST(GluActivation, GeGluUsesGelu) {
    const auto a = glu_activation(ActivationKind::GeGLU, -2.0, 4.0);
    EXPECT_EQ(a.gated, gelu(-2.0));
    EXPECT_EQ(a.post, gelu(-2.0) * 4.0);
}

TEST(ClassifySigns, Quadrants) {
    EXPECT_EQ(classify_signs(1.0, 2.0), SignCombo::PP);
    EXPECT_EQ(classify_signs(0.5, -3.0), SignCombo::PN);
    EXPECT_EQ(classify_signs(-0.5, 3.0), SignCombo::NP);
    EXPECT_EQ(classify_signs(-0.5, -3.0), SignCombo::NN);
}

TEST(ClassifySigns, ZeroCountsAsPositive) {
    EXPECT_EQ(classify_signs(0.0, -1.0), SignCombo::PN);
    EXPECT_EQ(classify_signs(-1.0, 0.0), SignCombo::NP);
    EXPECT_EQ(classify_signs(0.0, 0.0), SignCombo::PP);
    EXPECT_EQ(classify_signs(-0.0, -0.0), SignCombo::PP);
}

TEST(ClassifySigns, RejectsNaN) {
    EXPECT_THROW(classify_signs(std::nan(""), 1.0), DomainError);
}

TEST(SignProduct, PostSignFollowsCombo) {
    for (auto kind : {ActivationKind::SwiGLU, ActivationKind::GeGLU}) {
        for (double g = -6.0; g <= 6.0; g += 0.25) {
            for (double in = -3.0; in <= 3.0; in += 0.5) {
                const auto a = glu_activation(kind, g, in);
                const auto c = classify_signs(g, in);
                if (c == SignCombo::PP || c == SignCombo::NN) {
                    EXPECT_GE(a.post, 0.0) << g << " " << in;
                } else {
                    EXPECT_LE(a.post, 0.0) << g << " " << in;
                }
            }
        }
    }
}

TEST(ExtremeDirection, MatchesIntermediateSigns) {
    for (auto c : kAllCombos) {
        const double g = gate_positive(c) ? 1.5 : -1.5;
        const double in = in_positive(c) ? 2.0 : -2.0;
        const auto a = glu_activation(ActivationKind::SwiGLU, g, in);
        for (auto k : kAllIntermediates) EXPECT_EQ(extreme_is_max(c, k), a.get(k) >= 0.0);
    }
}

TEST(Names, RoundTrip) {
    for (auto c : kAllCombos) EXPECT_EQ(parse_sign_combo(to_string(c)), c);
    for (auto k : kAllIntermediates) EXPECT_EQ(parse_intermediate_kind(to_string(k)), k);
    for (auto a : {ActivationKind::SwiGLU, ActivationKind::GeGLU}) EXPECT_EQ(parse_activation_kind(to_string(a)), a);
    EXPECT_EQ(to_string(SignCombo::PN), "gate+_in-");
    EXPECT_EQ(to_string(IntermediateKind::HookPreLinear), "hook_pre_linear");
    EXPECT_FALSE(parse_sign_combo("gate+in-").has_value());
}

} // namespace
} // namespace gluscope
