#include "deepframe/archspec.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace deepframe {

using nlohmann::json;

SpecError::SpecError(std::vector<Diagnostic> diagnostics)
    : std::runtime_error(format_diagnostics(diagnostics)), diagnostics_(std::move(diagnostics)) {}

SpecError::SpecError(std::string location, std::string message)
    : SpecError(std::vector<Diagnostic>{{std::move(location), std::move(message)}}) {}

std::string format_diagnostics(const std::vector<Diagnostic>& diagnostics) {
    std::string out;
    for (const auto& d : diagnostics) {
        if (!out.empty()) out += "\n";
        out += (d.location.empty() ? std::string("/") : d.location) + ": " + d.message;
    }
    return out;
}

Index ConvGeometry::pad_before() const noexcept {
    const Index total = std::max<Index>((out_size() - 1) * stride + filter - spatial, 0);
    return total / 2;
}

Index LayerSpec::input_dim() const noexcept { return conv ? conv->channels * conv->positions_in() : 0; }

Index LayerSpec::output_dim() const noexcept { return conv ? width * conv->positions_out() : width; }

Index ArchitectureSpec::layer_input_dim(Index j) const {
    if (j == 0) return input_dim;
    return layers.at(static_cast<std::size_t>(j - 1)).output_dim();
}

std::string_view to_string(Pattern pattern) noexcept {
    switch (pattern) {
        case Pattern::chain: return "chain";
        case Pattern::residual: return "residual";
        case Pattern::dense: return "dense";
        case Pattern::custom: return "custom";
    }
    return "unknown";
}

std::string_view to_string(LayerKind kind) noexcept {
    return kind == LayerKind::fully_connected ? "fully_connected" : "convolutional";
}

bool BlockMask::contains(Index row, Index col) const noexcept { return role(row, col).has_value(); }

std::optional<BlockRole> BlockMask::role(Index row, Index col) const noexcept {
    for (const auto& b : blocks)
        if (b.row == row && b.col == col) return b.role;
    return std::nullopt;
}

std::vector<BlockEntry> BlockMask::learned() const {
    std::vector<BlockEntry> out;
    std::copy_if(blocks.begin(), blocks.end(), std::back_inserter(out),
                 [](const BlockEntry& b) { return b.role == BlockRole::learned; });
    return out;
}

std::vector<BlockEntry> BlockMask::identities() const {
    std::vector<BlockEntry> out;
    std::copy_if(blocks.begin(), blocks.end(), std::back_inserter(out),
                 [](const BlockEntry& b) { return b.role == BlockRole::identity; });
    return out;
}

namespace {

std::string layer_loc(Index j) { return "/layers/" + std::to_string(j); }

void validate_connectivity(const ArchitectureSpec& spec, std::vector<Diagnostic>& out) {
    const Index depth = spec.depth();
    const auto& conn = spec.connectivity;
    if (conn.pattern == Pattern::residual) {
        if (depth % 2 == 0) {
            out.push_back({"/connectivity",
                           "residual connectivity pairs the layers after the stem layer (1 stem + 2 per block); "
                           "expected an odd layer count, got " + std::to_string(depth)});
            return;
        }
        for (Index to = 2; to < depth; to += 2) {
            const Index from = to - 2;
            if (spec.layer_input_dim(to) != spec.layer_output_dim(from))
                out.push_back({"/connectivity",
                               "residual skip (" + std::to_string(to) + "," + std::to_string(from) +
                                   ") is an identity and needs the output of layer " + std::to_string(to - 1) +
                                   " (dim " + std::to_string(spec.layer_input_dim(to)) +
                                   ") to match the output of layer " + std::to_string(from) + " (dim " +
                                   std::to_string(spec.layer_output_dim(from)) + ")"});
        }
    }
    if (conn.pattern == Pattern::custom) {
        for (std::size_t n = 0; n < conn.custom.size(); ++n) {
            const auto& c = conn.custom[n];
            const std::string loc = "/connectivity/custom/" + std::to_string(n);
            if (c.to <= c.from) {
                out.push_back({loc, "mask not strictly lower-triangular: block (" + std::to_string(c.to) + "," +
                                        std::to_string(c.from) + ") needs to > from"});
                continue;
            }
            if (c.from < 0 || c.to >= depth) {
                out.push_back({loc, "block (" + std::to_string(c.to) + "," + std::to_string(c.from) +
                                        ") refers to a layer outside [0, " + std::to_string(depth) + ")"});
                continue;
            }
            for (std::size_t m = 0; m < n; ++m)
                if (conn.custom[m].to == c.to && conn.custom[m].from == c.from)
                    out.push_back({loc, "duplicate block (" + std::to_string(c.to) + "," + std::to_string(c.from) + ")"});
            if (c.identity && c.to > c.from + 1 && spec.layer_input_dim(c.to) != spec.layer_output_dim(c.from))
                out.push_back({loc, "identity block (" + std::to_string(c.to) + "," + std::to_string(c.from) +
                                        ") needs matching dims, got " + std::to_string(spec.layer_input_dim(c.to)) +
                                        " rows and " + std::to_string(spec.layer_output_dim(c.from)) + " columns"});
        }
    }
}

}  // namespace

std::vector<Diagnostic> validate(const ArchitectureSpec& spec) {
    std::vector<Diagnostic> out;
    if (spec.input_dim <= 0)
        out.push_back({"/input_dim", "non-positive size: input_dim must be positive, got " + std::to_string(spec.input_dim)});
    if (spec.layers.empty()) {
        out.push_back({"/layers", "at least one layer is required"});
        return out;
    }
    std::optional<Index> shared_spatial;
    for (Index j = 0; j < spec.depth(); ++j) {
        const auto& layer = spec.layers[static_cast<std::size_t>(j)];
        const std::string loc = layer_loc(j);
        if (layer.width <= 0)
            out.push_back({loc + "/width", "non-positive size: width must be positive, got " + std::to_string(layer.width)});
        if (layer.kind == LayerKind::fully_connected) {
            if (layer.conv) out.push_back({loc, "fully_connected layer must not carry convolution geometry"});
            continue;
        }
        if (!layer.conv) {
            out.push_back({loc, "convolutional layer is missing its geometry"});
            continue;
        }
        const auto& g = *layer.conv;
        bool sizes_ok = true;
        for (auto [name, value] : {std::pair{"channels", g.channels}, std::pair{"spatial", g.spatial},
                                   std::pair{"filter", g.filter}, std::pair{"stride", g.stride}}) {
            if (value <= 0) {
                out.push_back({loc + "/" + name, std::string("non-positive size: ") + name + " must be positive, got " +
                                                     std::to_string(value)});
                sizes_ok = false;
            }
        }
        if (g.dims != 1 && g.dims != 2) {
            out.push_back({loc + "/dims", "dims must be 1 or 2, got " + std::to_string(g.dims)});
            sizes_ok = false;
        }
        if (!sizes_ok) continue;
        if (g.filter > g.spatial)
            out.push_back({loc + "/filter", "filter larger than input: filter " + std::to_string(g.filter) +
                                                " exceeds spatial size " + std::to_string(g.spatial)});
        if (g.stride > g.filter)
            out.push_back({loc + "/stride", "stride " + std::to_string(g.stride) + " exceeds filter size " +
                                                std::to_string(g.filter)});
        if (shared_spatial && *shared_spatial != g.spatial)
            out.push_back({loc + "/spatial", "all convolutional layers share one spatial size (" +
                                                 std::to_string(*shared_spatial) + "), got " + std::to_string(g.spatial)});
        shared_spatial = shared_spatial.value_or(g.spatial);
        if (j + 1 < spec.depth() && g.stride != 1)
            out.push_back({loc + "/stride", "downsampling between layers is not supported; only the last layer may use stride > 1"});
    }
    if (!out.empty()) return out;

    for (Index j = 0; j < spec.depth(); ++j) {
        const auto& layer = spec.layers[static_cast<std::size_t>(j)];
        if (!layer.conv) continue;
        const Index expected = spec.layer_input_dim(j);
        if (layer.input_dim() != expected) {
            out.push_back({layer_loc(j), "dimension mismatch: convolution input is " + std::to_string(layer.conv->channels) +
                                             " channels x " + std::to_string(layer.conv->positions_in()) +
                                             " positions = " + std::to_string(layer.input_dim()) + ", but " +
                                             (j == 0 ? std::string("input_dim is ")
                                                     : "layer " + std::to_string(j - 1) + " outputs ") +
                                             std::to_string(expected)});
        } else if (j > 0 && spec.layers[static_cast<std::size_t>(j - 1)].conv) {
            const auto& prev = spec.layers[static_cast<std::size_t>(j - 1)];
            if (prev.conv->dims != layer.conv->dims || prev.width != layer.conv->channels)
                out.push_back({layer_loc(j), "dimension mismatch: channels " + std::to_string(layer.conv->channels) +
                                                 " do not match " + std::to_string(prev.width) +
                                                 " filters of layer " + std::to_string(j - 1)});
        }
    }
    if (!out.empty()) return out;
    validate_connectivity(spec, out);
    return out;
}

namespace {

std::optional<Index> read_count(const json& obj, const char* key, const std::string& loc, bool required,
                                std::vector<Diagnostic>& diags) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
        if (required) diags.push_back({loc + "/" + key, std::string("missing required field '") + key + "'"});
        return std::nullopt;
    }
    if (!it->is_number_integer()) {
        diags.push_back({loc + "/" + key, std::string("'") + key + "' must be an integer"});
        return std::nullopt;
    }
    const auto v = it->get<std::int64_t>();
    if (v <= 0) {
        diags.push_back({loc + "/" + key,
                         std::string("non-positive size: '") + key + "' must be positive, got " + std::to_string(v)});
        return std::nullopt;
    }
    return static_cast<Index>(v);
}

std::optional<LayerSpec> read_layer(const json& obj, const std::string& loc, std::vector<Diagnostic>& diags) {
    if (!obj.is_object()) {
        diags.push_back({loc, "layer must be an object"});
        return std::nullopt;
    }
    LayerSpec layer;
    const auto kind = obj.find("kind");
    if (kind == obj.end() || !kind->is_string()) {
        diags.push_back({loc + "/kind", "missing or non-string 'kind' (fully_connected | convolutional)"});
        return std::nullopt;
    }
    const auto k = kind->get<std::string>();
    if (k == "fully_connected") {
        layer.kind = LayerKind::fully_connected;
    } else if (k == "convolutional") {
        layer.kind = LayerKind::convolutional;
    } else {
        diags.push_back({loc + "/kind", "unknown layer kind '" + k + "'"});
        return std::nullopt;
    }
    const auto width = read_count(obj, "width", loc, true, diags);
    bool ok = width.has_value();
    layer.width = width.value_or(0);
    if (layer.kind == LayerKind::convolutional) {
        ConvGeometry g;
        const auto channels = read_count(obj, "channels", loc, true, diags);
        const auto spatial = read_count(obj, "spatial", loc, true, diags);
        const auto filter = read_count(obj, "filter", loc, true, diags);
        const auto stride = read_count(obj, "stride", loc, false, diags);
        const auto dims = read_count(obj, "dims", loc, false, diags);
        ok = ok && channels && spatial && filter && (stride || !obj.contains("stride")) && (dims || !obj.contains("dims"));
        g.channels = channels.value_or(0);
        g.spatial = spatial.value_or(0);
        g.filter = filter.value_or(0);
        g.stride = stride.value_or(1);
        g.dims = static_cast<int>(dims.value_or(2));
        layer.conv = g;
    } else {
        for (const char* key : {"channels", "spatial", "filter", "stride", "dims"})
            if (obj.contains(key))
                diags.push_back({loc + "/" + key, std::string("'") + key + "' only applies to convolutional layers"});
    }
    if (!ok) return std::nullopt;
    return layer;
}

std::optional<ConnectivitySpec> read_connectivity(const json& value, std::vector<Diagnostic>& diags) {
    ConnectivitySpec conn;
    if (value.is_string()) {
        const auto s = value.get<std::string>();
        if (s == "chain") conn.pattern = Pattern::chain;
        else if (s == "residual") conn.pattern = Pattern::residual;
        else if (s == "dense") conn.pattern = Pattern::dense;
        else {
            diags.push_back({"/connectivity", "unknown connectivity '" + s + "' (chain | residual | dense | {\"custom\": [...]})"});
            return std::nullopt;
        }
        return conn;
    }
    if (!value.is_object() || !value.contains("custom") || !value["custom"].is_array()) {
        diags.push_back({"/connectivity", "connectivity must be a pattern name or {\"custom\": [[to, from], ...]}"});
        return std::nullopt;
    }
    conn.pattern = Pattern::custom;
    bool ok = true;
    const auto& arr = value["custom"];
    for (std::size_t n = 0; n < arr.size(); ++n) {
        const auto& e = arr[n];
        const std::string loc = "/connectivity/custom/" + std::to_string(n);
        const bool shape_ok = e.is_array() && (e.size() == 2 || e.size() == 3) && e[0].is_number_integer() &&
                              e[1].is_number_integer() &&
                              (e.size() == 2 || (e[2].is_string() && (e[2] == "identity" || e[2] == "learned")));
        if (!shape_ok) {
            diags.push_back({loc, "entry must be [to, from] or [to, from, \"identity\" | \"learned\"]"});
            ok = false;
            continue;
        }
        Connection c;
        c.to = e[0].get<Index>();
        c.from = e[1].get<Index>();
        c.identity = e.size() == 3 && e[2] == "identity";
        conn.custom.push_back(c);
    }
    if (!ok) return std::nullopt;
    return conn;
}

}  // namespace

ArchitectureSpec parse_spec(std::string_view text) {
    json doc;
    try {
        doc = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw SpecError("/", std::string("malformed document: ") + e.what());
    }
    if (!doc.is_object()) throw SpecError("/", "malformed document: top level must be an object");

    std::vector<Diagnostic> diags;
    ArchitectureSpec spec;
    if (auto it = doc.find("name"); it != doc.end()) {
        if (it->is_string()) spec.name = it->get<std::string>();
        else diags.push_back({"/name", "'name' must be a string"});
    }
    spec.input_dim = read_count(doc, "input_dim", "", true, diags).value_or(0);

    bool layers_ok = true;
    if (auto it = doc.find("layers"); it == doc.end() || !it->is_array()) {
        diags.push_back({"/layers", "missing or non-array 'layers'"});
        layers_ok = false;
    } else {
        for (std::size_t j = 0; j < it->size(); ++j) {
            auto layer = read_layer((*it)[j], layer_loc(static_cast<Index>(j)), diags);
            if (layer) spec.layers.push_back(*layer);
            else layers_ok = false;
        }
    }
    bool conn_ok = true;
    if (auto it = doc.find("connectivity"); it == doc.end()) {
        diags.push_back({"/connectivity", "missing required field 'connectivity'"});
        conn_ok = false;
    } else if (auto conn = read_connectivity(*it, diags)) {
        spec.connectivity = *conn;
    } else {
        conn_ok = false;
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "name" && key != "input_dim" && key != "layers" && key != "connectivity")
            diags.push_back({"/" + key, "unknown field '" + key + "'"});
    }

    if (layers_ok && conn_ok && spec.input_dim > 0) {
        auto semantic = validate(spec);
        diags.insert(diags.end(), semantic.begin(), semantic.end());
    }
    if (!diags.empty()) throw SpecError(std::move(diags));
    return spec;
}

ArchitectureSpec load_spec(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SpecError(path, "cannot open spec file");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        auto spec = parse_spec(buf.str());
        return spec;
    } catch (const SpecError& e) {
        auto diags = e.diagnostics();
        for (auto& d : diags) d.location = path + ":" + d.location;
        throw SpecError(std::move(diags));
    }
}

std::string serialize_spec(const ArchitectureSpec& spec) {
    json doc = json::object();
    doc["name"] = spec.name;
    doc["input_dim"] = spec.input_dim;
    json layers = json::array();
    for (const auto& layer : spec.layers) {
        json l = json::object();
        l["kind"] = std::string(to_string(layer.kind));
        l["width"] = layer.width;
        if (layer.conv) {
            l["channels"] = layer.conv->channels;
            l["spatial"] = layer.conv->spatial;
            l["filter"] = layer.conv->filter;
            l["stride"] = layer.conv->stride;
            l["dims"] = layer.conv->dims;
        }
        layers.push_back(l);
    }
    doc["layers"] = layers;
    if (spec.connectivity.pattern == Pattern::custom) {
        json entries = json::array();
        for (const auto& c : spec.connectivity.custom) {
            json e = json::array({c.to, c.from});
            if (c.identity) e.push_back("identity");
            entries.push_back(e);
        }
        doc["connectivity"] = json{{"custom", entries}};
    } else {
        doc["connectivity"] = std::string(to_string(spec.connectivity.pattern));
    }
    return doc.dump(2);
}

BlockMask connectivity_mask(const ArchitectureSpec& spec) {
    const Index depth = spec.depth();
    BlockMask mask;
    auto add = [&](Index row, Index col, BlockRole role) {
        if (!mask.contains(row, col)) mask.blocks.push_back({row, col, role});
    };
    for (Index j = 0; j < depth; ++j) {
        add(j, j, BlockRole::learned);
        if (j > 0) add(j, j - 1, BlockRole::identity);
    }
    switch (spec.connectivity.pattern) {
        case Pattern::chain: break;
        case Pattern::residual:
            for (Index to = 2; to < depth; to += 2) add(to, to - 2, BlockRole::identity);
            break;
        case Pattern::dense:
            // layer weights sit on the diagonal, so the adjacent block stays -I
            for (Index to = 2; to < depth; ++to)
                for (Index from = 0; from + 1 < to; ++from) add(to, from, BlockRole::learned);
            break;
        case Pattern::custom:
            for (const auto& c : spec.connectivity.custom)
                if (c.to > c.from + 1) add(c.to, c.from, c.identity ? BlockRole::identity : BlockRole::learned);
            break;
    }
    std::sort(mask.blocks.begin(), mask.blocks.end(), [](const BlockEntry& a, const BlockEntry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    return mask;
}

std::optional<ConvGeometry> block_conv_geometry(const ArchitectureSpec& spec, Index row, Index col) {
    const auto& target = spec.layers.at(static_cast<std::size_t>(row));
    const auto& source = spec.layers.at(static_cast<std::size_t>(col));
    if (!target.conv || !source.conv) return std::nullopt;
    if (row == col) return target.conv;
    // Skip blocks between convolutional layers are convolutions at stride 1 with the
    // consuming layer's filter size.
    ConvGeometry g = *target.conv;
    g.stride = 1;
    return g;
}

Index block_conv_filters(const ArchitectureSpec& spec, Index /*row*/, Index col) {
    return spec.layers.at(static_cast<std::size_t>(col)).width;
}

std::int64_t block_param_count(const ArchitectureSpec& spec, const BlockEntry& block) {
    if (block.role == BlockRole::identity) return 0;
    if (auto g = block_conv_geometry(spec, block.row, block.col))
        return static_cast<std::int64_t>(g->channels) * g->taps() * block_conv_filters(spec, block.row, block.col);
    return static_cast<std::int64_t>(spec.layer_input_dim(block.row)) * spec.layer_output_dim(block.col);
}

std::int64_t param_count(const ArchitectureSpec& spec) {
    std::int64_t total = 0;
    for (const auto& b : connectivity_mask(spec).blocks) total += block_param_count(spec, b);
    return total;
}

std::string spec_hash(const ArchitectureSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : serialize_spec(spec)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace deepframe
