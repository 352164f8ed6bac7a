#include "deepframe/conv.hpp"

#include <string>

namespace deepframe {

namespace {

void check_geometry(const ConvGeometry& g, Index filters) {
    if (g.channels <= 0 || g.spatial <= 0 || g.filter <= 0 || g.stride <= 0 || filters <= 0)
        throw SpecError("conv", "non-positive convolution geometry");
    if (g.dims != 1 && g.dims != 2) throw SpecError("conv", "dims must be 1 or 2");
    if (g.filter > g.spatial)
        throw SpecError("conv", "filter larger than padded input: filter " + std::to_string(g.filter) +
                                    " exceeds spatial size " + std::to_string(g.spatial));
}

}  // namespace

ConvStencil make_conv_stencil(const ConvGeometry& g, Index filters) {
    check_geometry(g, filters);
    ConvStencil st;
    st.geometry = g;
    st.filters = filters;
    const Index p = g.spatial;
    const Index q = g.out_size();
    const Index f = g.filter;
    const Index pad = g.pad_before();
    const Index taps_per_channel = g.taps();
    st.taps.assign(static_cast<std::size_t>(filters * g.channels * taps_per_channel), {});

    const Index oys = g.dims == 1 ? 1 : q;
    const Index fys = g.dims == 1 ? 1 : f;
    for (Index c = 0; c < filters; ++c) {
        for (Index oy = 0; oy < oys; ++oy) {
            for (Index ox = 0; ox < q; ++ox) {
                const Index col = c * g.positions_out() + oy * q + ox;
                for (Index ch = 0; ch < g.channels; ++ch) {
                    for (Index ty = 0; ty < fys; ++ty) {
                        const Index y = g.dims == 1 ? 0 : g.stride * oy - pad + ty;
                        if (y < 0 || y >= (g.dims == 1 ? 1 : p)) continue;
                        for (Index tx = 0; tx < f; ++tx) {
                            const Index x = g.stride * ox - pad + tx;
                            if (x < 0 || x >= p) continue;
                            const Index row = ch * g.positions_in() + y * p + x;
                            const Index param = ((c * g.channels + ch) * fys + ty) * f + tx;
                            st.taps[static_cast<std::size_t>(param)].push_back({row, col});
                        }
                    }
                }
            }
        }
    }
    return st;
}

Eigen::MatrixXd materialize_conv_operator(const ConvStencil& st, const Eigen::Ref<const Eigen::VectorXd>& bank) {
    if (bank.size() != st.param_count())
        throw SpecError("conv", "filter bank has " + std::to_string(bank.size()) + " values, expected " +
                                    std::to_string(st.param_count()));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(st.rows(), st.cols());
    for (std::size_t t = 0; t < st.taps.size(); ++t)
        for (const auto& e : st.taps[t]) m(e.row, e.col) += bank[static_cast<Index>(t)];
    return m;
}

Eigen::MatrixXd materialize_conv_operator(const ConvGeometry& geometry, Index filters,
                                          const Eigen::Ref<const Eigen::VectorXd>& bank) {
    return materialize_conv_operator(make_conv_stencil(geometry, filters), bank);
}

Eigen::VectorXd conv_bank_gradient(const ConvStencil& st, const Eigen::Ref<const Eigen::MatrixXd>& dframe) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(st.param_count());
    for (std::size_t t = 0; t < st.taps.size(); ++t) {
        double acc = 0.0;
        for (const auto& e : st.taps[t]) acc += dframe(e.row, e.col);
        g[static_cast<Index>(t)] = acc;
    }
    return g;
}

Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> conv_pattern(const ConvStencil& st) {
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pat =
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(st.rows(), st.cols());
    for (const auto& tap : st.taps)
        for (const auto& e : tap) pat(e.row, e.col) = 1;
    return pat;
}

std::int64_t conv_gram_nonzeros(const ConvGeometry& g, Index filters) {
    const std::int64_t o = g.overlap();
    const std::int64_t q = g.out_size();
    const std::int64_t k = filters;
    const std::int64_t pairs = o * (2 * q - o + 1) - q;
    return k * (k * pairs * pairs - q * q);
}

}  // namespace deepframe
