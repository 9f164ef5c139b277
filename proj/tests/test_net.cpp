#include <gtest/gtest.h>

#include <random>

#include "flatnet/net.hpp"
#include "flatnet/net_io.hpp"
#include "oracles.hpp"

using namespace flatnet;

namespace {

std::vector<double> random_input(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> x(n);
    for (auto& v : x) v = d(rng);
    return x;
}

}  // namespace

TEST(Architecture, ParameterBookkeeping) {
    const Architecture a{3, {4, 5}, Activation::tanh};
    EXPECT_EQ(a.layer_count(), 3u);
    EXPECT_EQ(a.parameter_count(), 4u * 3 + 5 * 4 + 1 * 5);
    EXPECT_EQ(a.layer_offset(1), 12u);
    EXPECT_EQ(a.layer_of(11), 0u);
    EXPECT_EQ(a.layer_of(12), 1u);
    EXPECT_EQ(a.layer_of(36), 2u);
    EXPECT_THROW(a.layer_of(37), InvalidArgument);
    EXPECT_THROW((Architecture{0, {}, Activation::tanh}.validate()), InvalidArgument);
    EXPECT_THROW((Architecture{2, {3, 0}, Activation::tanh}.validate()), InvalidArgument);
}

TEST(Architecture, LayerViewsPartitionTheFlatVector) {
    const Architecture a{2, {3}, Activation::relu};
    std::vector<double> p(a.parameter_count());
    std::iota(p.begin(), p.end(), 0.0);
    const Network n(a, p);
    EXPECT_EQ(n.layer(0)(1, 0), 2.0);  // row-major
    EXPECT_EQ(n.layer(1)(0, 2), 8.0);
    std::vector<double> rebuilt;
    for (std::size_t l = 0; l < n.layer_count(); ++l)
        rebuilt.insert(rebuilt.end(), n.layer(l).data.begin(), n.layer(l).data.end());
    EXPECT_EQ(rebuilt, p);
}

TEST(Network, RejectsBadWeights) {
    const Architecture a{2, {2}, Activation::tanh};
    EXPECT_THROW(Network(a, std::vector<double>(5)), InvalidArgument);
    std::vector<double> p(6, 0.0);
    p[3] = NAN;
    EXPECT_THROW(Network(a, p), InvalidArgument);
}

TEST(Init, VarianceMatchesWidth) {
    const Architecture a{5, {100}, Activation::tanh};
    const auto n = init(a, 11);
    const auto w = n.layer(0).data;
    double ss = 0.0;
    for (double v : w) ss += v * v;
    const double var = ss / static_cast<double>(w.size());
    EXPECT_NEAR(var, 0.01, 0.002);
    EXPECT_DOUBLE_EQ(init_stddev(a, 1), 0.1);
}

TEST(Init, DeterministicPerSeed) {
    const Architecture a{3, {7, 4}, Activation::relu};
    EXPECT_EQ(init(a, 5), init(a, 5));
    EXPECT_NE(init(a, 5), init(a, 6));
}

TEST(Forward, ZeroWeightsGiveZero) {
    const auto n = Network::zeros({4, {6, 3}, Activation::tanh});
    EXPECT_EQ(n.forward(std::vector<double>{1, -2, 3, 4}), 0.0);
}

TEST(Forward, SingleLinearLayer) {
    const Network n({3, {}, Activation::linear}, {0.5, -1.0, 2.0});
    EXPECT_EQ(n.forward(std::vector<double>{2, 3, 0.25}), 0.5 * 2 - 3 + 0.5);
}

TEST(Forward, MatchesOracleAndIsNotLinear) {
    std::mt19937_64 rng(3);
    for (auto act : {Activation::tanh, Activation::relu, Activation::linear})
        for (std::uint64_t s = 0; s < 10; ++s) {
            const Architecture a{3, {4, 5}, act};
            const auto n = init(a, s);
            const auto x = random_input(3, rng);
            const std::vector<double> p(n.params().begin(), n.params().end());
            EXPECT_NEAR(n.forward(x), oracle::forward(a, p, x), 1e-14);
        }
    const Architecture a{3, {8}, Activation::tanh};
    const auto n = init(a, 1);
    const auto x = random_input(3, rng);
    auto x2 = x;
    for (auto& v : x2) v *= 2.0;
    EXPECT_GT(std::abs(n.forward(x2) - 2.0 * n.forward(x)), 1e-6);
    EXPECT_GT(std::abs(n.forward(x2) - n.forward(x)), 1e-6);
}

TEST(Forward, LengthMismatch) {
    const auto n = init({3, {2}, Activation::tanh}, 0);
    EXPECT_THROW(n.forward(std::vector<double>{1, 2}), InvalidArgument);
}

TEST(AlphaScale, IdentityAtOne) {
    const auto n = init({3, {5}, Activation::relu}, 2);
    EXPECT_EQ(alpha_scale(n, 1.0, 0), n);
}

TEST(AlphaScale, PreservesOutput) {
    std::mt19937_64 rng(8);
    for (double alpha : {0.5, 2.0, 7.3}) {
        const auto n = init({4, {6}, Activation::relu}, 21);
        const auto m = alpha_scale(n, alpha, 0);
        EXPECT_NE(m, n);
        for (int i = 0; i < 100; ++i) {
            const auto x = random_input(4, rng);
            EXPECT_NEAR(m.forward(x), n.forward(x), 1e-10);
        }
    }
}

TEST(AlphaScale, DeepPairAndErrors) {
    std::mt19937_64 rng(1);
    const auto n = init({3, {4, 4}, Activation::relu}, 4);
    const auto m = alpha_scale(n, 3.0, 1);
    const auto x = random_input(3, rng);
    EXPECT_NEAR(m.forward(x), n.forward(x), 1e-10);
    EXPECT_THROW(alpha_scale(init({3, {4}, Activation::tanh}, 0), 2.0, 0), ActivationError);
    EXPECT_THROW(alpha_scale(n, 0.0, 0), InvalidArgument);
    EXPECT_THROW(alpha_scale(n, -1.0, 0), InvalidArgument);
    EXPECT_THROW(alpha_scale(n, 2.0, 2), InvalidArgument);
}

TEST(NetworkJson, RoundTripIsBitExact) {
    const auto n = init({5, {7, 3}, Activation::tanh}, 99);
    const auto back = network_from_json(nlohmann::json::parse(network_to_json(n).dump()));
    EXPECT_EQ(back, n);
}

TEST(NetworkJson, RejectsMismatchedShapes) {
    auto j = network_to_json(init({2, {3}, Activation::relu}, 1));
    j["layers"][1]["weights"].push_back(1.0);
    EXPECT_THROW(network_from_json(j), InvalidArgument);
    j = network_to_json(init({2, {3}, Activation::relu}, 1));
    j["format"] = "other";
    EXPECT_THROW(network_from_json(j), InvalidArgument);
    EXPECT_THROW(network_from_json(nlohmann::json::object()), InvalidArgument);
}
