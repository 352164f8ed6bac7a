#include "deepframe/frame.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "deepframe/rng.hpp"

namespace deepframe {

Index FrameLayout::total_rows() const noexcept {
    Index n = 0;
    for (auto r : row_dims) n += r;
    return n;
}

Index FrameLayout::total_cols() const noexcept {
    Index n = 0;
    for (auto c : col_dims) n += c;
    return n;
}

Index FrameLayout::row_offset(Index i) const {
    Index off = 0;
    for (Index r = 0; r < i; ++r) off += row_dims.at(static_cast<std::size_t>(r));
    return off;
}

Index FrameLayout::col_offset(Index j) const {
    Index off = 0;
    for (Index c = 0; c < j; ++c) off += col_dims.at(static_cast<std::size_t>(c));
    return off;
}

Index FrameLayout::find(Index row, Index col) const noexcept {
    for (std::size_t b = 0; b < blocks.size(); ++b)
        if (blocks[b].row == row && blocks[b].col == col) return static_cast<Index>(b);
    return -1;
}

std::vector<Index> FrameLayout::column_blocks(Index j) const {
    std::vector<Index> out;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        if (blocks[b].col == j) out.push_back(static_cast<Index>(b));
    return out;
}

std::vector<Index> FrameLayout::row_blocks(Index i) const {
    std::vector<Index> out;
    for (std::size_t b = 0; b < blocks.size(); ++b)
        if (blocks[b].row == i) out.push_back(static_cast<Index>(b));
    return out;
}

FrameLayout make_layout(const ArchitectureSpec& spec) {
    if (auto diags = validate(spec); !diags.empty()) throw SpecError(std::move(diags));
    FrameLayout layout;
    layout.spec = spec;
    for (Index j = 0; j < spec.depth(); ++j) {
        layout.row_dims.push_back(spec.layer_input_dim(j));
        layout.col_dims.push_back(spec.layer_output_dim(j));
    }
    Index offset = 0;
    for (const auto& entry : connectivity_mask(spec).blocks) {
        BlockLayout b;
        b.row = entry.row;
        b.col = entry.col;
        b.rows = layout.row_dims[static_cast<std::size_t>(entry.row)];
        b.cols = layout.col_dims[static_cast<std::size_t>(entry.col)];
        if (entry.role == BlockRole::identity) {
            b.kind = BlockKind::identity;
        } else if (auto g = block_conv_geometry(spec, entry.row, entry.col)) {
            b.kind = BlockKind::conv;
            b.stencil = std::make_shared<const ConvStencil>(
                make_conv_stencil(*g, block_conv_filters(spec, entry.row, entry.col)));
            b.param_count = b.stencil->param_count();
        } else {
            b.kind = BlockKind::dense;
            b.param_count = b.rows * b.cols;
        }
        b.param_offset = offset;
        offset += b.param_count;
        layout.blocks.push_back(std::move(b));
    }
    layout.param_count = offset;
    return layout;
}

FrameParams random_params(const FrameLayout& layout, std::uint64_t seed) {
    FrameParams params;
    params.values.resize(layout.param_count);
    Rng rng(seed);
    for (const auto& b : layout.blocks) {
        if (b.kind == BlockKind::identity) continue;
        const double fan_in = b.kind == BlockKind::conv
                                  ? static_cast<double>(b.stencil->geometry.channels * b.stencil->geometry.taps())
                                  : static_cast<double>(b.rows);
        const double scale = 1.0 / std::sqrt(fan_in);
        for (Index n = 0; n < b.param_count; ++n) params.values[b.param_offset + n] = scale * rng.normal();
    }
    return params;
}

Eigen::MatrixXd block_matrix(const BlockLayout& b, const FrameParams& params) {
    switch (b.kind) {
        case BlockKind::identity: return b.sign() * Eigen::MatrixXd::Identity(b.rows, b.cols);
        case BlockKind::conv: return b.sign() * materialize_conv_operator(*b.stencil, params.block(b));
        case BlockKind::dense: break;
    }
    if (b.diagonal()) return Eigen::Map<const Eigen::MatrixXd>(params.values.data() + b.param_offset, b.rows, b.cols);
    return -Eigen::Map<const Eigen::MatrixXd>(params.values.data() + b.param_offset, b.cols, b.rows).transpose();
}

Eigen::VectorXd block_param_gradient(const BlockLayout& b, const Eigen::Ref<const Eigen::MatrixXd>& dblock) {
    switch (b.kind) {
        case BlockKind::identity: return Eigen::VectorXd();
        case BlockKind::conv: return b.sign() * conv_bank_gradient(*b.stencil, dblock);
        case BlockKind::dense: break;
    }
    Eigen::VectorXd g(b.param_count);
    if (b.diagonal()) {
        Eigen::Map<Eigen::MatrixXd>(g.data(), b.rows, b.cols) = dblock;
    } else {
        Eigen::Map<Eigen::MatrixXd>(g.data(), b.cols, b.rows) = -dblock.transpose();
    }
    return g;
}

void set_dense_block(const BlockLayout& b, FrameParams& params, const Eigen::Ref<const Eigen::MatrixXd>& frame_block) {
    if (b.kind != BlockKind::dense) throw SpecError("params", "only dense blocks can be set from a matrix");
    if (frame_block.rows() != b.rows || frame_block.cols() != b.cols)
        throw SpecError("params", "shape mismatch for block (" + std::to_string(b.row) + "," + std::to_string(b.col) + ")");
    if (b.diagonal()) {
        Eigen::Map<Eigen::MatrixXd>(params.values.data() + b.param_offset, b.rows, b.cols) = frame_block;
    } else {
        Eigen::Map<Eigen::MatrixXd>(params.values.data() + b.param_offset, b.cols, b.rows) = -frame_block.transpose();
    }
}

GlobalFrame::GlobalFrame(std::shared_ptr<const FrameLayout> layout, std::vector<Eigen::MatrixXd> blocks, bool normalized)
    : layout_(std::move(layout)), blocks_(std::move(blocks)), normalized_(normalized) {
    if (blocks_.size() != layout_->blocks.size()) throw SpecError("frame", "block count does not match layout");
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        const auto& b = layout_->blocks[n];
        if (blocks_[n].rows() != b.rows || blocks_[n].cols() != b.cols)
            throw SpecError("frame", "shape mismatch for block (" + std::to_string(b.row) + "," + std::to_string(b.col) +
                                         "): expected " + std::to_string(b.rows) + "x" + std::to_string(b.cols));
    }
}

const Eigen::MatrixXd& GlobalFrame::block(Index row, Index col) const {
    const Index idx = layout_->find(row, col);
    if (idx < 0)
        throw SpecError("frame", "no block (" + std::to_string(row) + "," + std::to_string(col) + ") in this frame");
    return blocks_[static_cast<std::size_t>(idx)];
}

Eigen::MatrixXd GlobalFrame::materialize(Index max_cols) const {
    if (cols() > max_cols)
        throw SpecError("frame", "frame has " + std::to_string(cols()) + " columns, above the materialization limit " +
                                     std::to_string(max_cols));
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows(), cols());
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        const auto& b = layout_->blocks[n];
        m.block(layout_->row_offset(b.row), layout_->col_offset(b.col), b.rows, b.cols) = blocks_[n];
    }
    return m;
}

Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> GlobalFrame::pattern(Index max_cols) const {
    if (cols() > max_cols)
        throw SpecError("frame", "frame has " + std::to_string(cols()) + " columns, above the materialization limit");
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pat =
        Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows(), cols());
    for (const auto& b : layout_->blocks) {
        auto view = pat.block(layout_->row_offset(b.row), layout_->col_offset(b.col), b.rows, b.cols);
        switch (b.kind) {
            case BlockKind::dense: view.setOnes(); break;
            case BlockKind::identity:
                for (Index n = 0; n < std::min(b.rows, b.cols); ++n) view(n, n) = 1;
                break;
            case BlockKind::conv: view = conv_pattern(*b.stencil); break;
        }
    }
    return pat;
}

Eigen::VectorXd GlobalFrame::apply(const Eigen::Ref<const Eigen::VectorXd>& w) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(rows());
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        const auto& b = layout_->blocks[n];
        out.segment(layout_->row_offset(b.row), b.rows).noalias() +=
            blocks_[n] * w.segment(layout_->col_offset(b.col), b.cols);
    }
    return out;
}

Eigen::VectorXd GlobalFrame::apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& r) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(cols());
    for (std::size_t n = 0; n < blocks_.size(); ++n) {
        const auto& b = layout_->blocks[n];
        out.segment(layout_->col_offset(b.col), b.cols).noalias() +=
            blocks_[n].transpose() * r.segment(layout_->row_offset(b.row), b.rows);
    }
    return out;
}

GlobalFrame build_global_frame(std::shared_ptr<const FrameLayout> layout, const FrameParams& params,
                               bool allow_zero_columns) {
    if (params.values.size() != layout->param_count)
        throw SpecError("params", "expected " + std::to_string(layout->param_count) + " parameters, got " +
                                      std::to_string(params.values.size()));
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(layout->blocks.size());
    for (const auto& b : layout->blocks) {
        blocks.push_back(block_matrix(b, params));
        if (b.diagonal() && !allow_zero_columns) {
            for (Index c = 0; c < b.cols; ++c)
                if (blocks.back().col(c).squaredNorm() == 0.0)
                    throw SpecError("params", "zero column " + std::to_string(c) + " in diagonal block of layer " +
                                                  std::to_string(b.row));
        }
    }
    return GlobalFrame(std::move(layout), std::move(blocks));
}

GlobalFrame build_global_frame(const ArchitectureSpec& spec, const FrameParams& params, bool allow_zero_columns) {
    return build_global_frame(std::make_shared<const FrameLayout>(make_layout(spec)), params, allow_zero_columns);
}

GlobalFrame random_global_frame(const ArchitectureSpec& spec, std::uint64_t seed) {
    auto layout = std::make_shared<const FrameLayout>(make_layout(spec));
    return build_global_frame(layout, random_params(*layout, seed));
}

NormalizedFrame normalize(const GlobalFrame& frame) {
    const auto& layout = frame.layout();
    NormalizationState state;
    state.global.assign(static_cast<std::size_t>(layout.depth()), {});
    for (Index j = 0; j < layout.depth(); ++j)
        state.global[static_cast<std::size_t>(j)] = Eigen::VectorXd::Zero(layout.col_dims[static_cast<std::size_t>(j)]);
    for (std::size_t n = 0; n < layout.blocks.size(); ++n) {
        Eigen::VectorXd sq = frame.block_at(static_cast<Index>(n)).colwise().squaredNorm().transpose();
        state.global[static_cast<std::size_t>(layout.blocks[n].col)] += sq;
        state.block_norms.push_back(sq.cwiseSqrt());
    }
    for (Index j = 0; j < layout.depth(); ++j) {
        auto& g = state.global[static_cast<std::size_t>(j)];
        for (Index c = 0; c < g.size(); ++c)
            if (!(g[c] > 0.0))
                throw NumericalError("zero-norm column " + std::to_string(c) + " in layer " + std::to_string(j));
        g = g.cwiseSqrt();
    }
    std::vector<Eigen::MatrixXd> blocks;
    for (std::size_t n = 0; n < layout.blocks.size(); ++n) {
        const auto& inv = state.global[static_cast<std::size_t>(layout.blocks[n].col)].cwiseInverse();
        blocks.push_back(frame.block_at(static_cast<Index>(n)) * inv.asDiagonal());
    }
    return {GlobalFrame(frame.layout_ptr(), std::move(blocks), true), std::move(state)};
}

}  // namespace deepframe
