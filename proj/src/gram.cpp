#include "deepframe/gram.hpp"

#include <algorithm>
#include <map>
#include <string>
#include <utility>

namespace deepframe {

namespace {

using Support = Eigen::MatrixXd;

Support block_pattern(const BlockLayout& b) {
    switch (b.kind) {
        case BlockKind::dense: return Support::Ones(b.rows, b.cols);
        case BlockKind::identity: return Support::Identity(b.rows, b.cols);
        case BlockKind::conv: return conv_pattern(*b.stencil).cast<double>();
    }
    return {};
}

// Pairs (a, b) of frame blocks sharing a row block, grouped by column-block pair j <= j'.
std::map<std::pair<Index, Index>, std::vector<std::pair<Index, Index>>> gram_terms(const FrameLayout& layout) {
    std::map<std::pair<Index, Index>, std::vector<std::pair<Index, Index>>> terms;
    for (Index i = 0; i < layout.depth(); ++i) {
        const auto row = layout.row_blocks(i);
        for (Index a : row) {
            for (Index b : row) {
                const Index j = layout.blocks[static_cast<std::size_t>(a)].col;
                const Index jp = layout.blocks[static_cast<std::size_t>(b)].col;
                if (j <= jp) terms[{j, jp}].emplace_back(a, b);
            }
        }
    }
    return terms;
}

}  // namespace

bool GramStructure::has_block(Index j, Index jp) const noexcept {
    if (j > jp) std::swap(j, jp);
    return std::any_of(blocks.begin(), blocks.end(), [&](const Block& b) { return b.row == j && b.col == jp; });
}

Eigen::MatrixXd GramStructure::block(Index j, Index jp) const {
    const bool flip = j > jp;
    const Index lo = flip ? jp : j;
    const Index hi = flip ? j : jp;
    for (const auto& b : blocks)
        if (b.row == lo && b.col == hi) return flip ? Eigen::MatrixXd(b.value.transpose()) : b.value;
    return Eigen::MatrixXd::Zero(layout->col_dims.at(static_cast<std::size_t>(j)),
                                 layout->col_dims.at(static_cast<std::size_t>(jp)));
}

Eigen::MatrixXd GramStructure::materialize(Index max_cols) const {
    const Index k = layout->total_cols();
    if (k > max_cols) throw SpecError("gram", "Gram has " + std::to_string(k) + " columns, above the materialization limit");
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(k, k);
    for (const auto& b : blocks) {
        const Index r = layout->col_offset(b.row);
        const Index c = layout->col_offset(b.col);
        g.block(r, c, b.value.rows(), b.value.cols()) = b.value;
        if (b.row != b.col) g.block(c, r, b.value.cols(), b.value.rows()) = b.value.transpose();
    }
    return g;
}

GramStructure gram(const GlobalFrame& frame) {
    GramStructure out;
    out.layout = frame.layout_ptr();
    const auto& layout = frame.layout();
    for (const auto& [key, pairs] : gram_terms(layout)) {
        GramStructure::Block blk{key.first, key.second,
                                 Eigen::MatrixXd::Zero(layout.col_dims[static_cast<std::size_t>(key.first)],
                                                       layout.col_dims[static_cast<std::size_t>(key.second)])};
        for (const auto& [a, b] : pairs) blk.value.noalias() += frame.block_at(a).transpose() * frame.block_at(b);
        // exact symmetry; the product above can differ in the last bit across the diagonal
        if (key.first == key.second) blk.value = (0.5 * (blk.value + blk.value.transpose())).eval();
        const double sq = blk.value.squaredNorm();
        if (key.first == key.second) {
            out.trace += blk.value.trace();
            out.frobenius_sq += sq;
        } else {
            out.frobenius_sq += 2.0 * sq;
        }
        out.blocks.push_back(std::move(blk));
    }
    out.offdiag_count = structural_offdiag_count(layout);
    return out;
}

std::int64_t structural_offdiag_count(const FrameLayout& layout) {
    std::vector<Support> patterns;
    patterns.reserve(layout.blocks.size());
    for (const auto& b : layout.blocks) patterns.push_back(block_pattern(b));
    std::int64_t count = 0;
    for (const auto& [key, pairs] : gram_terms(layout)) {
        Support overlap = Support::Zero(layout.col_dims[static_cast<std::size_t>(key.first)],
                                        layout.col_dims[static_cast<std::size_t>(key.second)]);
        for (const auto& [a, b] : pairs)
            overlap.noalias() += patterns[static_cast<std::size_t>(a)].transpose() * patterns[static_cast<std::size_t>(b)];
        std::int64_t nz = 0;
        for (Index c = 0; c < overlap.cols(); ++c)
            for (Index r = 0; r < overlap.rows(); ++r)
                if (overlap(r, c) > 0.5 && !(key.first == key.second && r == c)) ++nz;
        count += key.first == key.second ? nz : 2 * nz;
    }
    return count;
}

ChainGram chain_gram(const GlobalFrame& raw) {
    if (raw.spec().connectivity.pattern != Pattern::chain && raw.depth() > 1)
        throw SpecError("connectivity", "chain closed form requires chain connectivity");
    const Index l = raw.depth();
    std::vector<Eigen::VectorXd> inv_norm;
    for (Index j = 0; j < l; ++j) {
        const auto& b = raw.block(j, j);
        Eigen::VectorXd n2 = b.colwise().squaredNorm().transpose();
        if (j + 1 < l) n2.array() += 1.0;
        inv_norm.push_back(n2.cwiseSqrt().cwiseInverse());
    }
    ChainGram out;
    for (Index j = 0; j < l; ++j) {
        const auto& b = raw.block(j, j);
        Eigen::MatrixXd inner = b.transpose() * b;
        if (j + 1 < l) inner.diagonal().array() += 1.0;
        const auto& n = inv_norm[static_cast<std::size_t>(j)];
        out.diagonal.push_back(n.asDiagonal() * inner * n.asDiagonal());
        if (j + 1 < l) {
            const auto& next = inv_norm[static_cast<std::size_t>(j + 1)];
            out.super.push_back(-(n.asDiagonal() * raw.block(j + 1, j + 1) * next.asDiagonal()));
        }
    }
    return out;
}

double frame_operator_norm_sq(const GlobalFrame& frame) {
    const auto& layout = frame.layout();
    double total = 0.0;
    for (Index i = 0; i < layout.depth(); ++i) {
        for (Index ip = i; ip < layout.depth(); ++ip) {
            Eigen::MatrixXd f = Eigen::MatrixXd::Zero(layout.row_dims[static_cast<std::size_t>(i)],
                                                      layout.row_dims[static_cast<std::size_t>(ip)]);
            bool any = false;
            for (Index a : layout.row_blocks(i)) {
                const Index b = layout.find(ip, layout.blocks[static_cast<std::size_t>(a)].col);
                if (b < 0) continue;
                f.noalias() += frame.block_at(a) * frame.block_at(b).transpose();
                any = true;
            }
            if (any) total += (i == ip ? 1.0 : 2.0) * f.squaredNorm();
        }
    }
    return total;
}

}  // namespace deepframe
