#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "deepframe/archspec.hpp"
#include "deepframe/conv.hpp"

namespace deepframe {

// Frames with more columns than this are never materialized to one dense matrix.
inline constexpr Index kDefaultMaterializeLimit = 4096;

enum class BlockKind { dense, identity, conv };

// Placement and parametrization of one block of the induced global frame.
//
// Sign convention: diagonal blocks appear as +B_jj; off-diagonal blocks as
// -B_jk^T. Dense parameters are stored in the B orientation: a diagonal block
// as its (rows x cols) matrix, an off-diagonal block as the transposed
// (cols x rows) matrix B_jk. Both column-major inside the flat parameter vector.
struct BlockLayout {
    Index row = 0;  // block row (layer receiving the connection)
    Index col = 0;  // block column (layer providing the code)
    BlockKind kind = BlockKind::dense;
    Index rows = 0;
    Index cols = 0;
    Index param_offset = 0;
    Index param_count = 0;
    std::shared_ptr<const ConvStencil> stencil;  // kind == conv

    bool diagonal() const noexcept { return row == col; }
    double sign() const noexcept { return diagonal() ? 1.0 : -1.0; }
};

struct FrameLayout {
    ArchitectureSpec spec;
    std::vector<Index> row_dims;  // [k_0 .. k_{l-1}] (input dim of each layer)
    std::vector<Index> col_dims;  // [k_1 .. k_l]
    std::vector<BlockLayout> blocks;  // sorted by (row, col)
    Index param_count = 0;

    Index depth() const noexcept { return static_cast<Index>(col_dims.size()); }
    Index total_rows() const noexcept;
    Index total_cols() const noexcept;
    Index row_offset(Index i) const;
    Index col_offset(Index j) const;
    // Index into `blocks`, or -1.
    Index find(Index row, Index col) const noexcept;
    // Block indices touching column block j / row block i.
    std::vector<Index> column_blocks(Index j) const;
    std::vector<Index> row_blocks(Index i) const;
};

FrameLayout make_layout(const ArchitectureSpec& spec);

// Flat vector of every learned scalar, laid out by FrameLayout::blocks.
struct FrameParams {
    Eigen::VectorXd values;

    Eigen::Ref<Eigen::VectorXd> block(const BlockLayout& b) { return values.segment(b.param_offset, b.param_count); }
    Eigen::Ref<const Eigen::VectorXd> block(const BlockLayout& b) const {
        return values.segment(b.param_offset, b.param_count);
    }
};

// i.i.d. N(0, 1/fan_in) entries, fan_in = block rows (dense) or channels * taps (conv).
// Deterministic in `seed`.
FrameParams random_params(const FrameLayout& layout, std::uint64_t seed);

// The signed frame-space matrix of one block (rows x cols).
Eigen::MatrixXd block_matrix(const BlockLayout& b, const FrameParams& params);
// Gradient with respect to a block's parameters given d(objective)/d(frame block).
Eigen::VectorXd block_param_gradient(const BlockLayout& b, const Eigen::Ref<const Eigen::MatrixXd>& dblock);
// Writes block parameters so that block_matrix(b, params) == frame_block (dense blocks only).
void set_dense_block(const BlockLayout& b, FrameParams& params, const Eigen::Ref<const Eigen::MatrixXd>& frame_block);

// Per-layer column magnitudes. column_norms[b] holds the norms of the columns of
// block b (C_ij); global[j] the norms of the columns of column block j (N_j).
struct NormalizationState {
    std::vector<Eigen::VectorXd> block_norms;
    std::vector<Eigen::VectorXd> global;
};

// The induced block-structured frame. Only the blocks of the connectivity mask
// are stored; everything else is structurally zero.
class GlobalFrame {
public:
    GlobalFrame(std::shared_ptr<const FrameLayout> layout, std::vector<Eigen::MatrixXd> blocks, bool normalized = false);

    const FrameLayout& layout() const noexcept { return *layout_; }
    std::shared_ptr<const FrameLayout> layout_ptr() const noexcept { return layout_; }
    const ArchitectureSpec& spec() const noexcept { return layout_->spec; }
    bool normalized() const noexcept { return normalized_; }

    Index depth() const noexcept { return layout_->depth(); }
    Index rows() const noexcept { return layout_->total_rows(); }
    Index cols() const noexcept { return layout_->total_cols(); }

    bool has_block(Index row, Index col) const noexcept { return layout_->find(row, col) >= 0; }
    const Eigen::MatrixXd& block(Index row, Index col) const;
    const Eigen::MatrixXd& block_at(Index index) const { return blocks_.at(static_cast<std::size_t>(index)); }

    // Dense matrix; throws SpecError above `max_cols` columns.
    Eigen::MatrixXd materialize(Index max_cols = kDefaultMaterializeLimit) const;
    // Structural 0/1 pattern of the materialized frame.
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> pattern(Index max_cols = kDefaultMaterializeLimit) const;

    // B w for stacked codes, and B^T r for a stacked row-space vector.
    Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& w) const;
    Eigen::VectorXd apply_transpose(const Eigen::Ref<const Eigen::VectorXd>& r) const;

private:
    std::shared_ptr<const FrameLayout> layout_;
    std::vector<Eigen::MatrixXd> blocks_;
    bool normalized_ = false;
};

// Builds the signed block structure. Throws SpecError on a parameter size
// mismatch or, unless `allow_zero_columns`, a zero column in any diagonal block.
// Minimizers may legitimately drive a diagonal column to zero when skip blocks
// keep the global column alive.
GlobalFrame build_global_frame(const ArchitectureSpec& spec, const FrameParams& params, bool allow_zero_columns = false);
GlobalFrame build_global_frame(std::shared_ptr<const FrameLayout> layout, const FrameParams& params,
                               bool allow_zero_columns = false);
GlobalFrame random_global_frame(const ArchitectureSpec& spec, std::uint64_t seed);

struct NormalizedFrame {
    GlobalFrame frame;
    NormalizationState state;
};

// Divides every global column by its norm. Throws NumericalError naming the
// layer and column when a column has zero norm.
NormalizedFrame normalize(const GlobalFrame& frame);

}  // namespace deepframe
