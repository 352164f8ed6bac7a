#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <Eigen/Core>

#include "deepframe/frame.hpp"

namespace deepframe {

// Block Gram matrix G = B^T B of a global frame, kept block-sparse.
// Only blocks (j, j') with j <= j' that share at least one row block are stored;
// the lower half follows by symmetry.
struct GramStructure {
    struct Block {
        Index row = 0;  // column block j of the frame
        Index col = 0;  // column block j' >= j
        Eigen::MatrixXd value;
    };

    std::shared_ptr<const FrameLayout> layout;
    std::vector<Block> blocks;
    std::int64_t offdiag_count = 0;  // N(G): structurally nonzero off-diagonal entries
    double trace = 0.0;
    double frobenius_sq = 0.0;  // ||G||_F^2

    bool has_block(Index j, Index jp) const noexcept;
    // G_jj' for any pair; zero when structurally absent.
    Eigen::MatrixXd block(Index j, Index jp) const;
    Eigen::MatrixXd materialize(Index max_cols = kDefaultMaterializeLimit) const;
};

GramStructure gram(const GlobalFrame& frame);

// Structural count of off-diagonal Gram nonzeros implied by the layout alone:
// two columns interact iff their supports share a row.
std::int64_t structural_offdiag_count(const FrameLayout& layout);

// Closed-form blocks for a chain frame, computed from the raw (unnormalized)
// blocks B_j:
//   G_jj     = N_j^-1 (B_j^T B_j + I) N_j^-1   (no +I on the last layer)
//   G_j,j+1  = -N_j^-1 B_j+1 N_j+1^-1
// with N_j^2 = diag(B_j^T B_j) + I (last layer: diag(B_l^T B_l)).
struct ChainGram {
    std::vector<Eigen::MatrixXd> diagonal;
    std::vector<Eigen::MatrixXd> super;  // super[j] = G_{j,j+1}
};

ChainGram chain_gram(const GlobalFrame& raw);

// ||B B^T||_F^2 computed from the blocks of F = B B^T.
double frame_operator_norm_sq(const GlobalFrame& frame);

}  // namespace deepframe
