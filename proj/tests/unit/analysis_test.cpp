#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <boost/math/special_functions/beta.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include "gluscope/aggregator.hpp"
#include "gluscope/analysis.hpp"
#include "gluscope/errors.hpp"
#include "gluscope/fixtures.hpp"

namespace gluscope {
namespace {

using big = boost::multiprecision::cpp_bin_float_50;

CorrelationResult pearson_oracle(const std::vector<double>& xs, const std::vector<double>& ys) {
    const std::size_t n = xs.size();
    big mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    big sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
        syy += (ys[i] - my) * (ys[i] - my);
    }
    const big r = sxy / sqrt(sxx * syy);
    const big df = n - 2;
    const big p = boost::math::ibeta(df / 2, big(0.5), 1 - r * r);
    return {static_cast<double>(r), static_cast<double>(p), n};
}

NeuronRecord record_with_counts(std::uint64_t pp, std::uint64_t pn, std::uint64_t np, std::uint64_t nn) {
    NeuronRecord r;
    r.at(SignCombo::PP).count = pp;
    r.at(SignCombo::PN).count = pn;
    r.at(SignCombo::NP).count = np;
    r.at(SignCombo::NN).count = nn;
    r.total_observations = pp + pn + np + nn;
    return r;
}

TEST(Cosine, ClosedForms) {
    const std::vector<double> u{0.3, -1.2, 4.0};
    const std::vector<double> neg{-0.3, 1.2, -4.0};
    EXPECT_NEAR(cosine(u, u), 1.0, 1e-15);
    EXPECT_NEAR(cosine(u, neg), -1.0, 1e-15);
    EXPECT_NEAR(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1}), std::numbers::sqrt2 / 2, 1e-15);
}

TEST(Cosine, Errors) {
    EXPECT_THROW(cosine(std::vector<double>{0, 0}, std::vector<double>{1, 1}), DomainError);
    EXPECT_THROW(cosine(std::vector<double>{1, 0}, std::vector<double>{1, 1, 1}), ContractError);
}

TEST(NeuronInOutCosines, TransposedOutIsOne) {
    ModelConfig c;
    c.d_model = 6;
    c.d_mlp = 5;
    auto ws = random_weights(c, 2);
    ws.layers[0].w_out = ws.layers[0].w_in.transposed();
    for (double v : neuron_in_out_cosines(ws, 0)) EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(NeuronInOutCosines, MatchesPerNeuronOracle) {
    ModelConfig c;
    c.n_layers = 2;
    c.d_model = 8;
    c.d_mlp = 12;
    const auto ws = random_weights(c, 17);
    for (std::size_t l = 0; l < 2; ++l) {
        const auto cos = neuron_in_out_cosines(ws, l);
        ASSERT_EQ(cos.size(), 12u);
        for (std::size_t n = 0; n < 12; ++n) {
            double d = 0, a = 0, b = 0;
            for (std::size_t j = 0; j < 8; ++j) {
                const double x = ws.layers[l].w_in(n, j), y = ws.layers[l].w_out(j, n);
                d += x * y;
                a += x * x;
                b += y * y;
            }
            EXPECT_NEAR(cos[n], d / std::sqrt(a * b), 1e-12);
        }
    }
    EXPECT_THROW(neuron_in_out_cosines(ws, 2), ContractError);
}

TEST(NeuronInOutCosines, AgainFixtureIsMinusOne) {
    const auto fx = make_again_fixture(3);
    EXPECT_NEAR(neuron_in_out_cosines(fx.weights, 0)[fx.neuron], -1.0, 1e-6);
}

TEST(NeuronInOutCosines, ZeroNeuronNamed) {
    ModelConfig c;
    c.d_model = 4;
    c.d_mlp = 3;
    auto ws = random_weights(c, 2);
    for (std::size_t j = 0; j < 4; ++j) ws.layers[0].w_in(1, j) = 0.0;
    try {
        neuron_in_out_cosines(ws, 0);
        FAIL() << "expected DomainError";
    } catch (const DomainError& e) {
        EXPECT_NE(std::string(e.what()).find("neuron 0.1"), std::string::npos) << e.what();
    }
}

TEST(GatePositiveFreq, Arithmetic) {
    EXPECT_EQ(gate_positive_freq(record_with_counts(5, 0, 0, 0)), 1.0);
    EXPECT_EQ(gate_positive_freq(record_with_counts(0, 0, 0, 5)), 0.0);
    EXPECT_EQ(gate_positive_freq(record_with_counts(2, 1, 0, 1)), 0.75);
    EXPECT_THROW(gate_positive_freq(record_with_counts(0, 0, 0, 0)), DomainError);
}

TEST(IncompleteBeta, AgainstBoost) {
    for (double a : {0.5, 1.0, 2.5, 24.0}) {
        for (double x : {0.0, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0}) {
            EXPECT_NEAR(regularized_incomplete_beta(a, 0.5, x), boost::math::ibeta(a, 0.5, x), 1e-13) << a << " " << x;
        }
    }
}

TEST(Pearson, ExactLinear) {
    const auto up = pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6});
    EXPECT_NEAR(up.r, 1.0, 1e-15);
    EXPECT_EQ(up.p, 0.0);
    EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}).r, -1.0, 1e-15);
}

TEST(Pearson, ScipyReferenceValues) {
    const auto a = pearson(std::vector<double>{1, 2, 3, 4, 5}, std::vector<double>{2, 1, 4, 3, 5});
    EXPECT_NEAR(a.r, 0.7999999999999999, 1e-14);
    EXPECT_NEAR(a.p, 0.10408803866182799, 1e-12);
    EXPECT_EQ(a.n, 5u);
    const auto b = pearson(std::vector<double>{0.1, 0.4, 0.35, 0.8, 0.9, 0.2, 0.55},
                           std::vector<double>{3.0, 2.1, 2.5, 0.9, 1.2, 2.8, 1.9});
    EXPECT_NEAR(b.r, -0.9730889324793763, 1e-14);
    EXPECT_NEAR(b.p, 0.00022490088631803583, 1e-15);
}

TEST(Pearson, MatchesHighPrecisionOracle) {
    SeededRng rng(50);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.below(60);
        const double slope = rng.uniform(-2.0, 2.0);
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = rng.uniform(-1.0, 1.0);
            ys[i] = slope * xs[i] + rng.uniform(-1.0, 1.0);
        }
        const auto got = pearson(xs, ys);
        const auto want = pearson_oracle(xs, ys);
        EXPECT_NEAR(got.r, want.r, 1e-10) << trial;
        EXPECT_NEAR(got.p, want.p, 1e-10) << trial;
    }
}

TEST(Pearson, Errors) {
    EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DomainError);
    EXPECT_THROW(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), ContractError);
    EXPECT_THROW(pearson(std::vector<double>{1, 2}, std::vector<double>{1, 2}), ContractError);
}

class CorrelateLayer : public ::testing::Test {
protected:
    // Records whose gate-positive frequency is freq(cos) for each neuron.
    template <typename F>
    std::vector<NeuronRecord> records_for(const WeightSet& ws, F freq) {
        const auto cos = neuron_in_out_cosines(ws, 0);
        std::vector<NeuronRecord> out;
        for (std::size_t n = 0; n < cos.size(); ++n) {
            const auto pos = static_cast<std::uint64_t>(std::llround(freq(n, cos[n]) * 100000));
            auto r = record_with_counts(pos, 0, 0, 100000 - pos);
            r.neuron = n;
            out.push_back(r);
        }
        return out;
    }
};

TEST_F(CorrelateLayer, AntiCorrelatedGenerator) {
    ModelConfig c;
    c.d_model = 16;
    c.d_mlp = 64;
    const auto ws = random_weights(c, 77);
    SeededRng noise(1);
    const auto recs = records_for(ws, [&](std::size_t, double cs) { return 0.5 - 0.4 * cs + noise.uniform(-0.01, 0.01); });
    const auto res = correlate_layer(recs, ws, 0);
    EXPECT_LT(res.r, -0.99);
    EXPECT_LT(res.p, 1e-6);
    EXPECT_EQ(res.n, 64u);
}

TEST_F(CorrelateLayer, IndependentGenerator) {
    ModelConfig c;
    c.d_model = 16;
    c.d_mlp = 64;
    const auto ws = random_weights(c, 78);
    SeededRng noise(2);
    const auto recs = records_for(ws, [&](std::size_t, double) { return noise.uniform(0.2, 0.8); });
    const auto res = correlate_layer(recs, ws, 0);
    EXPECT_LT(std::abs(res.r), 0.3);
    EXPECT_GT(res.p, 0.05);
}

TEST_F(CorrelateLayer, Errors) {
    ModelConfig c;
    c.d_model = 4;
    c.d_mlp = 2;
    const auto ws = random_weights(c, 1);
    auto recs = records_for(ws, [](std::size_t n, double) { return 0.3 + 0.1 * n; });
    EXPECT_THROW(correlate_layer(recs, ws, 0), ContractError);

    c.d_mlp = 5;
    const auto ws5 = random_weights(c, 1);
    auto recs5 = records_for(ws5, [](std::size_t n, double) { return 0.1 + 0.1 * n; });
    recs5.erase(recs5.begin() + 3);
    try {
        correlate_layer(recs5, ws5, 0);
        FAIL() << "expected ContractError";
    } catch (const ContractError& e) {
        EXPECT_NE(std::string(e.what()).find("0.3"), std::string::npos) << e.what();
    }
}

} // namespace
} // namespace gluscope
