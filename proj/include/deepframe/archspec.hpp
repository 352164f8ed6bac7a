#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "deepframe/error.hpp"

namespace deepframe {

using Index = std::ptrdiff_t;

enum class LayerKind { fully_connected, convolutional };

// Geometry of a convolutional frame: `channels` input channels of a square
// (or, for dims == 1, linear) signal of side `spatial`, filters of side `filter`,
// stride `stride`, zero "same" padding.
struct ConvGeometry {
    Index channels = 1;
    Index spatial = 1;
    Index filter = 1;
    Index stride = 1;
    int dims = 2;

    // q = ceil(p / s)
    Index out_size() const noexcept { return (spatial + stride - 1) / stride; }
    // o = ceil(f / s)
    Index overlap() const noexcept { return (filter + stride - 1) / stride; }
    Index positions_in() const noexcept { return dims == 1 ? spatial : spatial * spatial; }
    Index positions_out() const noexcept {
        const Index q = out_size();
        return dims == 1 ? q : q * q;
    }
    Index taps() const noexcept { return dims == 1 ? filter : filter * filter; }
    // Left/top zero padding; total padding is max((q-1)s + f - p, 0).
    Index pad_before() const noexcept;

    bool operator==(const ConvGeometry&) const = default;
};

struct LayerSpec {
    LayerKind kind = LayerKind::fully_connected;
    Index width = 0;                    // units, or filters for convolutional layers
    std::optional<ConvGeometry> conv;   // present iff kind == convolutional

    Index input_dim() const noexcept;   // only meaningful for convolutional layers
    Index output_dim() const noexcept;

    bool operator==(const LayerSpec&) const = default;
};

enum class Pattern { chain, residual, dense, custom };

// Off-diagonal block (to, from), to > from, in zero-based layer indices.
struct Connection {
    Index to = 0;
    Index from = 0;
    bool identity = false;

    bool operator==(const Connection&) const = default;
};

struct ConnectivitySpec {
    Pattern pattern = Pattern::chain;
    std::vector<Connection> custom;  // only used for Pattern::custom

    bool operator==(const ConnectivitySpec&) const = default;
};

struct ArchitectureSpec {
    std::string name;
    Index input_dim = 0;
    std::vector<LayerSpec> layers;
    ConnectivitySpec connectivity;

    Index depth() const noexcept { return static_cast<Index>(layers.size()); }
    // Row dimension of block row j: the input dimension seen by layer j.
    Index layer_input_dim(Index j) const;
    Index layer_output_dim(Index j) const { return layers.at(static_cast<std::size_t>(j)).output_dim(); }

    bool operator==(const ArchitectureSpec&) const = default;
};

enum class BlockRole { learned, identity };

// One block of the induced frame. Diagonal blocks (row == col) carry the layer
// transform; off-diagonal blocks (row > col) are the connections feeding layer
// `row` from layer `col`.
struct BlockEntry {
    Index row = 0;
    Index col = 0;
    BlockRole role = BlockRole::learned;

    bool operator==(const BlockEntry&) const = default;
};

struct BlockMask {
    std::vector<BlockEntry> blocks;  // sorted by (row, col)

    bool contains(Index row, Index col) const noexcept;
    std::optional<BlockRole> role(Index row, Index col) const noexcept;
    std::vector<BlockEntry> learned() const;
    std::vector<BlockEntry> identities() const;
};

std::string_view to_string(Pattern pattern) noexcept;
std::string_view to_string(LayerKind kind) noexcept;

// Checks every invariant and returns all violations (empty when valid).
std::vector<Diagnostic> validate(const ArchitectureSpec& spec);

// Parses and validates a JSON spec document; throws SpecError listing every violation.
ArchitectureSpec parse_spec(std::string_view text);
ArchitectureSpec load_spec(const std::string& path);
// Canonical JSON text; parse_spec(serialize_spec(s)) == s for valid specs.
std::string serialize_spec(const ArchitectureSpec& spec);

BlockMask connectivity_mask(const ArchitectureSpec& spec);
std::int64_t param_count(const ArchitectureSpec& spec);

// Parameters held by one learned block of the mask.
std::int64_t block_param_count(const ArchitectureSpec& spec, const BlockEntry& block);

// Geometry of the convolutional operator used for block (row, col), if convolutional.
std::optional<ConvGeometry> block_conv_geometry(const ArchitectureSpec& spec, Index row, Index col);
// Number of filters (frame column groups) of a convolutional block.
Index block_conv_filters(const ArchitectureSpec& spec, Index row, Index col);

// FNV-1a 64 over the canonical serialization, hex encoded.
std::string spec_hash(const ArchitectureSpec& spec);

}  // namespace deepframe
