#include <gtest/gtest.h>

#include <random>

#include "flatnet/diff.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace flatnet;
using support::Pairs;
using support::to_vec;

namespace {

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Relative error of each coordinate against the larger of the two values
// and the largest oracle entry. Differences below `floor` are oracle roundoff.
void expect_close(const std::vector<double>& got, const std::vector<double>& want, double tol, double floor = 0.0) {
    ASSERT_EQ(got.size(), want.size());
    const double scale = max_abs(want);
    for (std::size_t i = 0; i < got.size(); ++i) {
        if (std::abs(got[i] - want[i]) <= floor) continue;
        EXPECT_LE(oracle::rel_err(got[i], want[i], scale), tol) << "coordinate " << i << ": " << got[i] << " vs " << want[i];
    }
}

oracle::Scalar weight_loss(const Architecture& a, const Pairs& p, bool mse) {
    const auto s = p.samples();
    return [a, s, mse](const oracle::LVec& w) { return oracle::mean_loss(a, w, s, mse); };
}

// Loss at one sample as a function of the input.
oracle::Scalar input_loss(const Architecture& a, const Network& net, double y, bool mse) {
    const auto w = oracle::widen(to_vec(net.params()));
    return [a, w, y, mse](const oracle::LVec& x) {
        return oracle::pointwise<long double>(mse, oracle::forward_t(a, w, x), y);
    };
}

// Fixture: random tiny net plus a batch, redrawn until it is kink-free.
struct Case {
    Network net;
    Pairs data;
};

Case make_case(const Architecture& arch, LossKind kind, std::uint64_t seed, std::size_t samples = 5) {
    std::mt19937_64 rng(seed);
    for (std::uint64_t k = 0;; ++k) {
        auto net = support::random_network(arch, seed * 1000 + k);
        auto data = support::random_pairs(arch.input_width, samples, rng);
        if (support::away_from_kinks(net, data, kind, 1e-2)) return {std::move(net), std::move(data)};
    }
}

}  // namespace

TEST(GradWeights, ZeroTanhNetOnlyHeadHasGradient) {
    std::mt19937_64 rng(1);
    const auto data = support::random_pairs(3, 4, rng);
    const auto net = Network::zeros({3, {4, 2}, Activation::tanh});
    const auto g = grad_weights(net, Batch(data.view()), LossKind::mse);
    // Activations are tanh(0) = 0, so even the head sees zero inputs; all zero.
    for (double v : g.values) EXPECT_EQ(v, 0.0);
}

TEST(GradWeights, MatchesCentralDifferences) {
    for (auto kind : {LossKind::mse, LossKind::mae})
        for (auto act : {Activation::tanh, Activation::relu, Activation::linear})
            for (std::uint64_t s = 0; s < 3; ++s) {
                const Architecture arch{3, {4}, act};
                const auto c = make_case(arch, kind, s);
                const auto g = grad_weights(c.net, Batch(c.data.view()), kind);
                const auto fd = oracle::central_gradient(weight_loss(arch, c.data, kind == LossKind::mse),
                                                         to_vec(c.net.params()), 1e-5);
                expect_close(g.values, fd, 1e-6);
            }
}

TEST(GradWeights, LinearModelClosedForm) {
    std::mt19937_64 rng(2);
    const auto data = support::random_pairs(4, 6, rng);
    const Network net({4, {}, Activation::linear}, {0.3, -0.2, 0.5, 1.1});
    const auto g = grad_weights(net, Batch(data.view()), LossKind::mse);
    std::vector<double> want(4, 0.0);
    const auto v = data.view();
    for (std::size_t i = 0; i < v.size(); ++i) {
        double r = -v.y(i);
        for (std::size_t j = 0; j < 4; ++j) r += net.params()[j] * v.x(i)[j];
        for (std::size_t j = 0; j < 4; ++j) want[j] += 2.0 * r * v.x(i)[j] / 6.0;
    }
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(g.values[j], want[j], 1e-14);
}

TEST(GradWeights, EmptyBatch) {
    const Pairs empty{{}, {}, 2};
    EXPECT_THROW(grad_weights(Network::zeros({2, {}, Activation::linear}), Batch(empty.view()), LossKind::mse),
                 InvalidArgument);
}

TEST(GradInput, ZeroNetAndLinearModel) {
    const std::vector<double> x{0.5, -1.0, 2.0};
    for (double v : grad_input(Network::zeros({3, {5}, Activation::tanh}), x, 1.5, LossKind::mse)) EXPECT_EQ(v, 0.0);
    const Network lin({3, {}, Activation::linear}, {1.0, 2.0, -0.5});
    const double r = 0.5 - 2.0 - 1.0 - 0.25;
    const auto g = grad_input(lin, x, 0.25, LossKind::mse);
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(g[j], 2.0 * r * lin.params()[j], 1e-14);
}

TEST(GradInput, MatchesCentralDifferences) {
    for (auto kind : {LossKind::mse, LossKind::mae})
        for (auto act : {Activation::tanh, Activation::relu}) {
            const Architecture arch{4, {5, 3}, act};
            const auto c = make_case(arch, kind, 7, 1);
            const auto s = c.data.samples()[0];
            const auto f = input_loss(arch, c.net, s.y, kind == LossKind::mse);
            expect_close(grad_input(c.net, s.x, s.y, kind), oracle::central_gradient(f, s.x, 1e-5), 1e-6);
        }
}

TEST(InputJacobian, Cases) {
    const std::vector<double> x{0.1, 0.2, 0.3};
    const Network lin({3, {}, Activation::linear}, {1.0, -2.0, 4.0});
    EXPECT_EQ(input_jacobian(lin, x), (std::vector<double>{1.0, -2.0, 4.0}));
    for (double v : input_jacobian(Network::zeros({3, {2}, Activation::relu}), x)) EXPECT_EQ(v, 0.0);

    const Architecture arch{3, {6}, Activation::tanh};
    const auto net = support::random_network(arch, 4);
    const auto w = oracle::widen(to_vec(net.params()));
    auto f = [&](const oracle::LVec& v) { return oracle::forward_t(arch, w, v); };
    expect_close(input_jacobian(net, x), oracle::central_gradient(f, x, 1e-5), 1e-6);
    EXPECT_THROW(input_jacobian(net, std::vector<double>{1.0}), InvalidArgument);
}

TEST(InputHessian, LinearModelIsTwoWWt) {
    const Network lin({3, {}, Activation::linear}, {1.0, -2.0, 0.5});
    const auto h = input_hessian(lin, std::vector<double>{0.3, 0.1, -0.7}, 2.0, LossKind::mse);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(h.matrix(i, j), 2.0 * lin.params()[i] * lin.params()[j], 1e-8);
    EXPECT_NEAR(h.trace(), 2.0 * (1.0 + 4.0 + 0.25), 1e-8);
}

TEST(InputHessian, ZeroTanhNetIsZero) {
    const auto net = Network::zeros({3, {4}, Activation::tanh});
    const std::vector<double> x{0.3, -0.4, 0.9};
    const auto h = input_hessian(net, x, 1.0, LossKind::mse);
    const auto brute = oracle::second_difference_hessian(input_loss(net.architecture(), net, 1.0, true), x, 1e-3);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            EXPECT_EQ(h.matrix(i, j), 0.0);
            EXPECT_NEAR(brute[i][j], 0.0, 1e-12);
        }
}

TEST(InputHessian, MatchesSecondDifferences) {
    for (auto kind : {LossKind::mse, LossKind::mae})
        for (auto act : {Activation::tanh, Activation::relu})
            for (std::uint64_t seed = 0; seed < 3; ++seed) {
                const Architecture arch{4, {5}, act};
                const auto c = make_case(arch, kind, 20 + seed, 1);
                const auto s = c.data.samples()[0];
                const auto f = input_loss(arch, c.net, s.y, kind == LossKind::mse);
                const auto brute = oracle::second_difference_hessian(f, s.x, 1e-4);
                const auto h = input_hessian(c.net, s.x, s.y, kind);
                for (std::size_t i = 0; i < 4; ++i)
                    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(h.matrix(i, j), brute[i][j], 1e-4);
                EXPECT_EQ(h.matrix.asymmetry(), 0.0);
                EXPECT_LT(h.asymmetry, 1e-6);
            }
}

TEST(InputHessian, Cap) {
    const auto net = Network::zeros({5, {2}, Activation::tanh});
    EXPECT_THROW(input_hessian(net, std::vector<double>(5, 0.0), 0.0, LossKind::mse, 4), CapacityError);
}

TEST(Hvp, RejectsZeroAndWrongLength) {
    std::mt19937_64 rng(1);
    const auto data = support::random_pairs(2, 3, rng);
    const auto net = support::random_network({2, {3}, Activation::tanh}, 1);
    EXPECT_THROW(hvp_weights(net, Batch(data.view()), LossKind::mse, std::vector<double>(9, 0.0)), InvalidArgument);
    EXPECT_THROW(hvp_weights(net, Batch(data.view()), LossKind::mse, std::vector<double>(8, 1.0)), InvalidArgument);
}

TEST(Hvp, MatchesFullSecondDifferenceHessian) {
    for (auto act : {Activation::tanh, Activation::relu}) {
        const Architecture arch{3, {4, 3}, act};  // d = 12 + 12 + 3 = 27
        const auto c = make_case(arch, LossKind::mse, 31);
        const auto H = oracle::second_difference_hessian(weight_loss(arch, c.data, true), to_vec(c.net.params()), 1e-4);
        const auto v = oracle::random_weights(arch.parameter_count(), 77, 1.0);
        std::vector<double> want(v.size(), 0.0);
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = 0; j < v.size(); ++j) want[i] += H[i][j] * v[j];
        expect_close(hvp_weights(c.net, Batch(c.data.view()), LossKind::mse, v), want, 1e-4);
    }
}

TEST(Hvp, LinearModelExact) {
    std::mt19937_64 rng(5);
    const auto data = support::random_pairs(3, 7, rng);
    const Network lin({3, {}, Activation::linear}, {0.2, 0.4, -0.3});
    const std::vector<double> v{1.0, -1.0, 0.5};
    const auto hv = hvp_weights(lin, Batch(data.view()), LossKind::mse, v);
    const auto view = data.view();
    for (std::size_t a = 0; a < 3; ++a) {
        double want = 0.0;
        for (std::size_t i = 0; i < view.size(); ++i)
            for (std::size_t b = 0; b < 3; ++b) want += 2.0 * view.x(i)[a] * view.x(i)[b] * v[b] / 7.0;
        EXPECT_NEAR(hv[a], want, 1e-8);
    }
}

TEST(FullWeightHessian, LinearModelAndSymmetry) {
    std::mt19937_64 rng(6);
    const auto data = support::random_pairs(3, 5, rng);
    const Network lin({3, {}, Activation::linear}, {0.2, 0.4, -0.3});
    const auto h = full_weight_hessian(lin, Batch(data.view()), LossKind::mse);
    const auto view = data.view();
    for (std::size_t a = 0; a < 3; ++a)
        for (std::size_t b = 0; b < 3; ++b) {
            double want = 0.0;
            for (std::size_t i = 0; i < view.size(); ++i) want += 2.0 * view.x(i)[a] * view.x(i)[b] / 5.0;
            EXPECT_NEAR(h.matrix(a, b), want, 1e-8);
        }

    const Architecture arch{3, {4}, Activation::tanh};
    const auto c = make_case(arch, LossKind::mse, 8);
    const auto t = full_weight_hessian(c.net, Batch(c.data.view()), LossKind::mse);
    EXPECT_LT(t.asymmetry / t.matrix.max_abs(), 1e-6);
    const auto brute = oracle::second_difference_hessian(weight_loss(arch, c.data, true), to_vec(c.net.params()), 1e-4);
    for (std::size_t i = 0; i < brute.size(); ++i)
        for (std::size_t j = 0; j < brute.size(); ++j)
            EXPECT_LE(std::abs(t.matrix(i, j) - brute[i][j]), 1e-3 * t.matrix.max_abs());
}

TEST(FullWeightHessian, Cap) {
    std::mt19937_64 rng(6);
    const auto data = support::random_pairs(3, 2, rng);
    const auto net = support::random_network({3, {4}, Activation::tanh}, 1);  // d = 16
    EXPECT_THROW(full_weight_hessian(net, Batch(data.view()), LossKind::mse, 15), CapacityError);
    EXPECT_NO_THROW(full_weight_hessian(net, Batch(data.view()), LossKind::mse, 16));
}

TEST(WeightHessianDiag, LinearSingleSample) {
    const Pairs one{{1.5, -2.0, 0.5}, {0.7}, 3};
    const Network lin({3, {}, Activation::linear}, {0.1, 0.2, 0.3});
    const auto d = weight_hessian_diag(lin, Batch(one.view()), LossKind::mse);
    EXPECT_NEAR(d.total_trace, 2.0 * (2.25 + 4.0 + 0.25), 1e-6);
}

TEST(WeightHessianDiag, MatchesOracleDiagonalPerLayer) {
    for (auto kind : {LossKind::mse, LossKind::mae})
        for (auto act : {Activation::tanh, Activation::relu, Activation::linear}) {
            const Architecture arch{3, {4, 3}, act};
            const auto c = make_case(arch, kind, 40);
            const auto want =
                oracle::second_difference_diagonal(weight_loss(arch, c.data, kind == LossKind::mse), to_vec(c.net.params()), 1e-4);
            const auto d = weight_hessian_diag(c.net, Batch(c.data.view()), kind);
            std::vector<double> got;
            double total = 0.0;
            for (std::size_t l = 0; l < arch.layer_count(); ++l) {
                got.insert(got.end(), d.layer_diagonals[l].begin(), d.layer_diagonals[l].end());
                double tr = 0.0;
                for (double v : d.layer_diagonals[l]) tr += v;
                EXPECT_NEAR(d.layer_traces[l], tr, 1e-12 * (1.0 + std::abs(tr)));
                total += d.layer_traces[l];
            }
            EXPECT_NEAR(d.total_trace, total, 1e-12 * (1.0 + std::abs(total)));
            // Extended-precision second differences at h = 1e-4 carry ~1e-11 roundoff;
            // mae through a linear net has an identically zero diagonal.
            expect_close(got, want, 1e-3, 1e-9);
        }
}

TEST(WeightHessianDiag, InactiveWeightHasZeroCurvature) {
    // Input coordinate 1 is zero in every sample, so column 1 of W^(1) never matters.
    std::mt19937_64 rng(9);
    auto data = support::random_pairs(3, 6, rng);
    for (std::size_t i = 0; i < 6; ++i) data.inputs[i * 3 + 1] = 0.0;
    const Architecture arch{3, {4}, Activation::tanh};
    const auto net = support::random_network(arch, 3);
    const auto d = weight_hessian_diag(net, Batch(data.view()), LossKind::mse);
    const auto want = oracle::second_difference_diagonal(weight_loss(arch, data, true), to_vec(net.params()), 1e-4);
    for (std::size_t r = 0; r < 4; ++r) {
        EXPECT_EQ(d.layer_diagonals[0][r * 3 + 1], 0.0);
        EXPECT_NEAR(want[r * 3 + 1], 0.0, 1e-8);
    }
}

TEST(WeightHessianDiag, LayerFilterAndHvpAgreement) {
    const Architecture arch{3, {4}, Activation::tanh};
    const auto c = make_case(arch, LossKind::mse, 50);
    const Batch b(c.data.view());
    const std::vector<std::size_t> only_head{1};
    const auto d = weight_hessian_diag(c.net, b, LossKind::mse, only_head);
    EXPECT_TRUE(d.layer_diagonals[0].empty());
    EXPECT_EQ(d.layer_traces[0], 0.0);
    EXPECT_EQ(d.total_trace, d.layer_traces[1]);
    const std::vector<std::size_t> bad{2};
    EXPECT_THROW(weight_hessian_diag(c.net, b, LossKind::mse, bad), InvalidArgument);

    const auto full = weight_hessian_diag(c.net, b, LossKind::mse);
    for (std::size_t i = 0; i < arch.parameter_count(); ++i) {
        std::vector<double> e(arch.parameter_count(), 0.0);
        e[i] = 1.0;
        const double hii = hvp_weights(c.net, b, LossKind::mse, e)[i];
        const std::size_t l = arch.layer_of(i);
        const double diag = full.layer_diagonals[l][i - arch.layer_offset(l)];
        EXPECT_LE(oracle::rel_err(hii, diag, 1e-3 * std::abs(full.total_trace)), 1e-3) << i;
    }
}
