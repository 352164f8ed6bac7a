#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "deepframe/archspec.hpp"

namespace deepframe {

// Where each filter tap lands in the materialized convolutional frame.
//
// The frame has channels * positions_in rows ordered (channel, y, x) and
// filters * positions_out columns ordered (filter, oy, ox). Column (c, oy, ox)
// holds filter c placed at input offset (s*oy - pad, s*ox - pad); taps that
// fall into the zero padding are dropped. The frame maps codes to signals
// (transposed convolution); its transpose is the strided correlation that
// a convolutional layer computes.
//
// Filter bank layout is (filter, channel, ty, tx), flattened row-major.
struct ConvStencil {
    struct Entry {
        Index row;
        Index col;
    };

    ConvGeometry geometry;
    Index filters = 0;
    std::vector<std::vector<Entry>> taps;  // one list per filter-bank parameter

    Index rows() const noexcept { return geometry.channels * geometry.positions_in(); }
    Index cols() const noexcept { return filters * geometry.positions_out(); }
    Index param_count() const noexcept { return static_cast<Index>(taps.size()); }
};

ConvStencil make_conv_stencil(const ConvGeometry& geometry, Index filters);

// Dense matrix whose application equals the convolution. Throws SpecError when
// the filter is larger than the input or the bank has the wrong size.
Eigen::MatrixXd materialize_conv_operator(const ConvGeometry& geometry, Index filters,
                                          const Eigen::Ref<const Eigen::VectorXd>& bank);
Eigen::MatrixXd materialize_conv_operator(const ConvStencil& stencil, const Eigen::Ref<const Eigen::VectorXd>& bank);

// d/d(bank) of <dframe, Conv(bank)>: sums the frame gradient over each tap's entries.
Eigen::VectorXd conv_bank_gradient(const ConvStencil& stencil, const Eigen::Ref<const Eigen::MatrixXd>& dframe);

// Structural 0/1 pattern of the operator.
Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic> conv_pattern(const ConvStencil& stencil);

// Closed-form count of structurally nonzero off-diagonal Gram entries for a
// single 2-D convolutional frame with `filters` filters:
//   k (k (o (2q - o + 1) - q)^2 - q^2),  o = ceil(f/s), q = ceil(p/s).
std::int64_t conv_gram_nonzeros(const ConvGeometry& geometry, Index filters);

}  // namespace deepframe
