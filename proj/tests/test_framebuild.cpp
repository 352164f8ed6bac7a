#include <doctest.h>

#include <Eigen/Dense>

#include "deepframe/conv.hpp"
#include "deepframe/frame.hpp"
#include "deepframe/gram.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace deepframe;
using support::fc;

namespace {

Eigen::VectorXd random_vector(Rng& rng, Index n) {
    Eigen::VectorXd v(n);
    for (Index i = 0; i < n; ++i) v[i] = rng.normal();
    return v;
}

}  // namespace

TEST_SUITE("framebuild") {

TEST_CASE("chain l=2 places -I below the first diagonal block") {
    const auto s = fc(2, {3, 4});
    const auto layout = make_layout(s);
    FrameParams params{Eigen::VectorXd::Zero(layout.param_count)};
    Eigen::MatrixXd b11(2, 3);
    b11 << 1, 0, 1, 0, 1, 1;
    Eigen::MatrixXd b22 = Eigen::MatrixXd::Constant(3, 4, 0.5);
    set_dense_block(layout.blocks[static_cast<std::size_t>(layout.find(0, 0))], params, b11);
    set_dense_block(layout.blocks[static_cast<std::size_t>(layout.find(1, 1))], params, b22);
    const auto m = build_global_frame(s, params).materialize();
    REQUIRE(m.rows() == 5);
    REQUIRE(m.cols() == 7);
    CHECK(m.block(0, 0, 2, 3) == b11);
    CHECK(m.block(2, 3, 3, 4) == b22);
    CHECK(m.block(2, 0, 3, 3) == -Eigen::MatrixXd::Identity(3, 3));
    CHECK(m.block(0, 3, 2, 4).isZero(0.0));
}

TEST_CASE("single layer frame is B_1 itself") {
    const auto s = fc(3, {5});
    const auto layout = make_layout(s);
    const auto params = random_params(layout, 11);
    const auto frame = build_global_frame(s, params);
    CHECK(frame.materialize() == Eigen::Map<const Eigen::MatrixXd>(params.values.data(), 3, 5));
}

TEST_CASE("off-diagonal dense blocks are stored transposed and negated") {
    const auto s = fc(2, {3, 3, 4}, Pattern::dense);
    const auto layout = make_layout(s);
    const auto params = random_params(layout, 5);
    const auto& b = layout.blocks[static_cast<std::size_t>(layout.find(2, 0))];
    const Eigen::Map<const Eigen::MatrixXd> stored(params.values.data() + b.param_offset, 3, 3);
    CHECK(block_matrix(b, params) == -stored.transpose());
}

TEST_CASE("frame dimensions: rows sum k_{j-1}, cols sum k_j") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        for (auto pattern : support::all_patterns()) {
            const auto s = support::random_spec(seed, pattern);
            const auto f = random_global_frame(s, seed);
            Index rows = s.input_dim, cols = 0;
            for (Index j = 0; j < s.depth(); ++j) {
                cols += s.layers[j].width;
                if (j + 1 < s.depth()) rows += s.layers[j].width;
            }
            CHECK(f.rows() == rows);
            CHECK(f.cols() == cols);
            const auto pat = f.pattern();
            const auto m = f.materialize();
            for (Index c = 0; c < m.cols(); ++c)
                for (Index r = 0; r < m.rows(); ++r)
                    if (m(r, c) != 0.0) CHECK(pat(r, c) == 1);
        }
    }
}

TEST_CASE("build errors") {
    const auto s = fc(2, {3});
    FrameParams wrong{Eigen::VectorXd::Zero(5)};
    CHECK_THROWS_AS(build_global_frame(s, wrong), SpecError);
    FrameParams zero_col{Eigen::VectorXd::Ones(6)};
    zero_col.values.segment(2, 2).setZero();  // column 1 of B_11
    try {
        build_global_frame(s, zero_col);
        FAIL("expected SpecError");
    } catch (const SpecError& e) {
        CHECK(std::string(e.what()).find("zero column 1") != std::string::npos);
    }
}

TEST_CASE("two-channel 1-D conv with 5 filters materializes to 16x40") {
    ConvGeometry g{2, 8, 3, 1, 1};
    Rng rng(1);
    const auto m = materialize_conv_operator(g, 5, random_vector(rng, 30));
    CHECK(m.rows() == 16);
    CHECK(m.cols() == 40);
    const auto s = support::conv1(2, 8, 3, 1, 5, 1);
    const auto f = random_global_frame(s, 2);
    CHECK(f.rows() == 16);
    CHECK(f.cols() == 40);
}

TEST_CASE("unit 1x1 filter gives the identity") {
    for (int dims : {1, 2}) {
        ConvGeometry g{1, 5, 1, 1, dims};
        const auto m = materialize_conv_operator(g, 1, Eigen::VectorXd::Ones(1));
        CHECK(m == Eigen::MatrixXd::Identity(m.rows(), m.cols()));
    }
}

TEST_CASE("filter larger than input is rejected") {
    ConvGeometry g{1, 3, 5, 1, 2};
    CHECK_THROWS_AS(materialize_conv_operator(g, 1, Eigen::VectorXd::Ones(25)), SpecError);
    ConvGeometry ok{1, 3, 3, 1, 2};
    CHECK_THROWS_AS(materialize_conv_operator(ok, 1, Eigen::VectorXd::Ones(4)), SpecError);
}

TEST_CASE("conv operator transpose matches the sliding-window oracle") {
    Rng rng(7);
    for (auto g : {ConvGeometry{2, 6, 3, 2, 2}, ConvGeometry{1, 6, 3, 1, 2}, ConvGeometry{3, 5, 2, 2, 2},
                   ConvGeometry{2, 8, 3, 1, 1}, ConvGeometry{2, 7, 3, 2, 1}}) {
        const Index filters = 3;
        const Eigen::VectorXd bank = random_vector(rng, filters * g.channels * g.taps());
        const auto m = materialize_conv_operator(g, filters, bank);
        for (int t = 0; t < 20; ++t) {
            const Eigen::VectorXd x = random_vector(rng, m.rows());
            const Eigen::VectorXd w = random_vector(rng, m.cols());
            const Eigen::VectorXd corr = oracle::sliding_window(g, filters, bank, x);
            CHECK((m.transpose() * x - corr).cwiseAbs().maxCoeff() < 1e-12);
            // adjoint identity <Conv w, x> = <w, Conv^T x>
            CHECK(std::abs((m * w).dot(x) - w.dot(corr)) < 1e-10);
        }
    }
}

TEST_CASE("normalization") {
    SUBCASE("unit columns give N = I") {
        const auto s = fc(3, {3});
        const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(3, 3);
        FrameParams p{Eigen::Map<const Eigen::VectorXd>(eye.data(), 9)};
        const auto n = normalize(build_global_frame(s, p));
        CHECK(n.state.global[0].isApprox(Eigen::VectorXd::Ones(3)));
        CHECK(n.frame.normalized());
    }
    SUBCASE("chain l=2: N_1^2 = C_1^2 + 1") {
        const auto f = random_global_frame(fc(3, {4, 5}), 9);
        const auto n = normalize(f);
        const Eigen::VectorXd c2 = f.block(0, 0).colwise().squaredNorm().transpose();
        CHECK((n.state.global[0].array().square() - (c2.array() + 1.0)).abs().maxCoeff() < 1e-12);
        CHECK((n.state.block_norms[0] - c2.cwiseSqrt()).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("random frames get unit columns") {
        for (std::uint64_t seed = 0; seed < 20; ++seed)
            for (auto pattern : support::all_patterns()) {
                const auto m = normalize(random_global_frame(support::random_spec(seed, pattern), seed)).frame.materialize();
                CHECK((m.colwise().norm().array() - 1.0).abs().maxCoeff() < 1e-12);
            }
    }
    SUBCASE("zero global column names layer and column") {
        const auto layout = std::make_shared<const FrameLayout>(make_layout(fc(2, {3})));
        Eigen::MatrixXd b = Eigen::MatrixXd::Ones(2, 3);
        b.col(2).setZero();
        const GlobalFrame f(layout, {b});
        try {
            normalize(f);
            FAIL("expected NumericalError");
        } catch (const NumericalError& e) {
            CHECK(std::string(e.what()) == "zero-norm column 2 in layer 0");
        }
    }
}

TEST_CASE("orthonormal single layer has identity Gram") {
    const auto s = fc(4, {4});
    Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(Eigen::MatrixXd::Random(4, 4)).householderQ();
    FrameParams p{Eigen::Map<const Eigen::VectorXd>(q.data(), 16)};
    const auto g = gram(normalize(build_global_frame(s, p)).frame);
    CHECK((g.materialize() - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(g.frobenius_sq - g.trace) < 1e-12);
    // structural count: a dense block lets every pair interact
    CHECK(g.offdiag_count == 12);
}

TEST_CASE("chain Gram blocks match the closed form") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto s = support::random_spec(seed, Pattern::chain);
        const auto raw = random_global_frame(s, seed);
        const auto g = gram(normalize(raw).frame);
        const auto closed = chain_gram(raw);
        for (Index j = 0; j < s.depth(); ++j) {
            CHECK((g.block(j, j) - closed.diagonal[j]).cwiseAbs().maxCoeff() < 1e-12);
            if (j + 1 < s.depth()) CHECK((g.block(j, j + 1) - closed.super[j]).cwiseAbs().maxCoeff() < 1e-12);
            for (Index k = j + 2; k < s.depth(); ++k) CHECK_FALSE(g.has_block(j, k));
        }
    }
}

TEST_CASE("dense l=3: every Gram block pair is structurally present") {
    const auto f = normalize(random_global_frame(fc(3, {4, 4, 4}, Pattern::dense), 1)).frame;
    const auto g = gram(f);
    for (Index j = 0; j < 3; ++j)
        for (Index k = 0; k < 3; ++k) CHECK(g.has_block(j, k));
}

TEST_CASE("block Gram equals the materialized Gram, PSD, trace = columns") {
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        for (auto pattern : support::all_patterns()) {
            const auto f = normalize(random_global_frame(support::random_spec(seed, pattern), seed)).frame;
            const auto m = f.materialize();
            const auto g = gram(f);
            const Eigen::MatrixXd dense = m.transpose() * m;
            const auto gm = g.materialize();
            CHECK((gm - dense).cwiseAbs().maxCoeff() < 1e-10);
            CHECK((gm - gm.transpose()).cwiseAbs().maxCoeff() == 0.0);
            CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(gm).eigenvalues().minCoeff() > -1e-10);
            CHECK(std::abs(g.trace - static_cast<double>(f.cols())) < 1e-10);
            CHECK(g.offdiag_count == oracle::pattern_offdiag_count(f.pattern()));
        }
    }
}

TEST_CASE("||G||_F = ||F||_F on chain frames") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const auto f = normalize(random_global_frame(support::random_spec(seed, Pattern::chain), seed)).frame;
        CHECK(std::abs(std::sqrt(gram(f).frobenius_sq) - std::sqrt(frame_operator_norm_sq(f))) < 1e-10);
    }
}

TEST_CASE("identity skips keep params but add Gram nonzeros") {
    for (std::vector<Index> w : {std::vector<Index>{5, 5, 3}, {4, 4, 4, 4, 4}, {2, 2, 7, 7, 3}}) {
        const auto chain = fc(4, w, Pattern::chain);
        const auto res = fc(4, w, Pattern::residual);
        CHECK(param_count(chain) == param_count(res));
        CHECK(structural_offdiag_count(make_layout(res)) > structural_offdiag_count(make_layout(chain)));
    }
}

TEST_CASE("conv_gram_nonzeros matches the materialized count") {
    SUBCASE("2-D (p=6, f=3, s=1, k=2, d=1)") {
        ConvGeometry g{1, 6, 3, 1, 2};
        const auto st = make_conv_stencil(g, 2);
        CHECK(conv_gram_nonzeros(g, 2) == oracle::pattern_offdiag_count(conv_pattern(st)));
    }
    SUBCASE("f = p, s = p reduces to k(k-1)") {
        for (Index k : {1, 2, 5}) {
            ConvGeometry g{2, 3, 3, 3, 2};
            CHECK(conv_gram_nonzeros(g, k) == k * (k - 1));
            CHECK(oracle::pattern_offdiag_count(conv_pattern(make_conv_stencil(g, k))) == k * (k - 1));
        }
    }
    SUBCASE("s = 1, f = 1") {
        for (Index k : {1, 3}) {
            ConvGeometry g{2, 4, 1, 1, 2};
            CHECK(conv_gram_nonzeros(g, k) == oracle::pattern_offdiag_count(conv_pattern(make_conv_stencil(g, k))));
        }
    }
    SUBCASE("1-D two-channel conv: structural count equals the materialized Gram") {
        const auto s = support::conv1(2, 8, 3, 1, 5, 1);
        const auto f = normalize(random_global_frame(s, 4)).frame;
        const auto m = f.materialize();
        const Eigen::MatrixXd g = m.transpose() * m;
        std::int64_t numeric = 0;
        for (Index c = 0; c < g.cols(); ++c)
            for (Index r = 0; r < g.rows(); ++r)
                if (r != c && g(r, c) != 0.0) ++numeric;
        CHECK(gram(f).offdiag_count == numeric);
    }
}

}  // TEST_SUITE
