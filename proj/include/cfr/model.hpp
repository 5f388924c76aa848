#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cfr/errors.hpp"
#include "cfr/rng.hpp"
#include "cfr/tensor.hpp"

namespace cfr {

struct ConvBlockSpec {
    int out_channels = 0;
    int kernel = 3;
    int stride = 1;
    bool pool = false;  // 2x2 max pool after the activation
};

// Architecture description. Conv blocks use same-padding ((kernel-1)/2);
// every block ends in ReLU; the head is a chain of linear layers with ReLU
// between them, the last one sized class_count.
struct ModelSpec {
    std::string name;
    std::array<int, 3> input_shape = {3, 16, 16};  // [C,H,W]
    std::vector<ConvBlockSpec> conv_blocks;
    std::vector<int> fc_sizes;
    int class_count = 0;

    void validate() const {
        if (conv_blocks.empty()) throw config_error("model spec '" + name + "' has no conv blocks");
        if (class_count < 2) throw config_error("model spec '" + name + "' needs class_count >= 2");
        if (fc_sizes.empty() || fc_sizes.back() != class_count)
            throw config_error("model spec '" + name + "': final fc size must equal class_count");
        for (int d : input_shape)
            if (d <= 0) throw config_error("model spec '" + name + "': bad input shape");
        for (const auto& b : conv_blocks)
            if (b.out_channels <= 0 || b.kernel <= 0 || b.stride <= 0)
                throw config_error("model spec '" + name + "': bad conv block");
    }

    nlohmann::json to_json() const {
        nlohmann::json blocks = nlohmann::json::array();
        for (const auto& b : conv_blocks)
            blocks.push_back({{"out_channels", b.out_channels},
                              {"kernel", b.kernel},
                              {"stride", b.stride},
                              {"pool", b.pool}});
        return {{"name", name},
                {"input_shape", input_shape},
                {"conv_blocks", blocks},
                {"fc_sizes", fc_sizes},
                {"class_count", class_count}};
    }

    static ModelSpec from_json(const nlohmann::json& j) {
        ModelSpec s;
        s.name = j.at("name").get<std::string>();
        auto shp = j.at("input_shape").get<std::vector<int>>();
        if (shp.size() != 3) throw format_error("model spec: input_shape must have 3 entries");
        std::copy(shp.begin(), shp.end(), s.input_shape.begin());
        for (const auto& b : j.at("conv_blocks")) {
            ConvBlockSpec cb;
            cb.out_channels = b.at("out_channels").get<int>();
            cb.kernel = b.at("kernel").get<int>();
            cb.stride = b.at("stride").get<int>();
            cb.pool = b.at("pool").get<bool>();
            s.conv_blocks.push_back(cb);
        }
        s.fc_sizes = j.at("fc_sizes").get<std::vector<int>>();
        s.class_count = j.at("class_count").get<int>();
        s.validate();
        return s;
    }
};

// The two reference desk-scale architectures. "cnn-s" is the default
// substitute/fixture model; "cnn-m" is the deeper VGG-flavored target used
// for transfer experiments.
inline ModelSpec spec_preset(const std::string& name, std::array<int, 3> input_shape, int classes) {
    ModelSpec s;
    s.name = name;
    s.input_shape = input_shape;
    s.class_count = classes;
    if (name == "cnn-s") {
        s.conv_blocks = {{8, 3, 1, true}, {16, 3, 1, true}};
        s.fc_sizes = {32, classes};
    } else if (name == "cnn-m") {
        s.conv_blocks = {{16, 3, 1, true}, {32, 3, 1, true}, {32, 3, 1, false}};
        s.fc_sizes = {64, classes};
    } else {
        throw config_error("unknown model preset '" + name + "' (expected cnn-s or cnn-m)");
    }
    s.validate();
    return s;
}

namespace detail {

struct LayerShapes {
    std::vector<std::array<int, 3>> conv_out;  // [C,H,W] after each block's conv (pre-pool)
    int flat_size = 0;
};

inline LayerShapes trace_shapes(const ModelSpec& spec) {
    LayerShapes ls;
    int c = spec.input_shape[0], h = spec.input_shape[1], w = spec.input_shape[2];
    for (const auto& b : spec.conv_blocks) {
        const int pad = (b.kernel - 1) / 2;
        h = (h + 2 * pad - b.kernel) / b.stride + 1;
        w = (w + 2 * pad - b.kernel) / b.stride + 1;
        c = b.out_channels;
        ls.conv_out.push_back({c, h, w});
        if (b.pool) {
            if (h < 2 || w < 2) throw config_error("model spec '" + spec.name + "': pool on <2px map");
            h /= 2;
            w /= 2;
        }
    }
    ls.flat_size = c * h * w;
    return ls;
}

}  // namespace detail

struct Model {
    ModelSpec spec;
    std::vector<std::string> param_names;
    std::vector<Tensor> params;  // leaves, requires_grad = true

    const Tensor& param(const std::string& name) const {
        for (std::size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == name) return params[i];
        throw contract_error("model has no parameter '" + name + "'");
    }
};

// One inference record: the last-conv activations (post-ReLU, before that
// block's pooling), logits, softmax, and argmax. Keeps its tensor handles so
// the tape stays alive and gradients w.r.t. the activations or the input
// remain computable.
struct ForwardTrace {
    Tensor input;
    Tensor activations;  // A, [K,u,v]
    Tensor logits;       // Z, [C]
    Tensor probs;        // S, [C]
    int predicted = -1;
};

inline Model build(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    detail::trace_shapes(spec);  // validates pooling feasibility
    Model m;
    m.spec = spec;
    Rng rng(seed);
    // Scaled uniform fan-in init: U(-a, a), a = sqrt(1/fan_in).
    auto init = [&rng](std::vector<int> shape, int fan_in) {
        const double a = std::sqrt(1.0 / static_cast<double>(fan_in));
        std::size_t n = detail::shape_numel(shape);
        std::vector<double> d(n);
        for (double& v : d) v = rng.uniform(-a, a);
        return Tensor(std::move(shape), std::move(d), true);
    };

    int in_c = spec.input_shape[0];
    for (std::size_t i = 0; i < spec.conv_blocks.size(); ++i) {
        const auto& b = spec.conv_blocks[i];
        const int fan_in = in_c * b.kernel * b.kernel;
        m.param_names.push_back("conv" + std::to_string(i) + ".w");
        m.params.push_back(init({b.out_channels, in_c, b.kernel, b.kernel}, fan_in));
        m.param_names.push_back("conv" + std::to_string(i) + ".b");
        m.params.push_back(init({b.out_channels}, fan_in));
        in_c = b.out_channels;
    }
    int in_f = detail::trace_shapes(spec).flat_size;
    for (std::size_t i = 0; i < spec.fc_sizes.size(); ++i) {
        const int out_f = spec.fc_sizes[i];
        m.param_names.push_back("fc" + std::to_string(i) + ".w");
        m.params.push_back(init({out_f, in_f}, in_f));
        m.param_names.push_back("fc" + std::to_string(i) + ".b");
        m.params.push_back(init({out_f}, in_f));
        in_f = out_f;
    }
    return m;
}

inline int argmax(const std::vector<double>& v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

// Forward pass keeping the tape. `image` may be a leaf or any tape node
// (e.g. X + delta during an attack).
inline ForwardTrace forward_trace(const Model& m, const Tensor& image) {
    const auto& spec = m.spec;
    if (image.shape().size() != 3 || image.shape()[0] != spec.input_shape[0] ||
        image.shape()[1] != spec.input_shape[1] || image.shape()[2] != spec.input_shape[2])
        throw dimension_error("forward_trace: image shape does not match model input");

    ForwardTrace tr;
    tr.input = image;
    Tensor x = image;
    std::size_t pi = 0;
    for (std::size_t i = 0; i < spec.conv_blocks.size(); ++i) {
        const auto& b = spec.conv_blocks[i];
        const Tensor& w = m.params[pi++];
        const Tensor& bias = m.params[pi++];
        x = relu(conv2d(x, w, bias, b.stride, (b.kernel - 1) / 2));
        if (i + 1 == spec.conv_blocks.size()) tr.activations = x;
        if (b.pool) x = maxpool2d(x, 2, 2);
    }
    x = flatten(x);
    for (std::size_t i = 0; i < spec.fc_sizes.size(); ++i) {
        const Tensor& w = m.params[pi++];
        const Tensor& bias = m.params[pi++];
        x = linear(x, w, bias);
        if (i + 1 < spec.fc_sizes.size()) x = relu(x);
    }
    tr.logits = x;
    tr.probs = softmax(x);
    tr.predicted = argmax(tr.logits.data());
    return tr;
}

inline int predict(const Model& m, const Tensor& image) { return forward_trace(m, image).predicted; }

// ---------------------------------------------------------------------------
// Checkpoint format: magic "CFRM", u32 LE version, u32 LE header length,
// UTF-8 JSON header {spec, manifest:[{name, shape, offset}]}, then raw
// little-endian f64 parameter data in manifest order. Offsets count doubles
// from the start of the float section.
// ---------------------------------------------------------------------------

constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_u32_le(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32_le(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

inline std::vector<std::uint8_t> save(const Model& m) {
    nlohmann::json manifest = nlohmann::json::array();
    std::size_t offset = 0;
    for (std::size_t i = 0; i < m.params.size(); ++i) {
        manifest.push_back(
            {{"name", m.param_names[i]}, {"shape", m.params[i].shape()}, {"offset", offset}});
        offset += m.params[i].size();
    }
    nlohmann::json header = {{"spec", m.spec.to_json()}, {"manifest", manifest}};
    const std::string htext = header.dump();

    std::vector<std::uint8_t> out;
    out.insert(out.end(), {'C', 'F', 'R', 'M'});
    detail::put_u32_le(out, kCheckpointVersion);
    detail::put_u32_le(out, static_cast<std::uint32_t>(htext.size()));
    out.insert(out.end(), htext.begin(), htext.end());
    for (const Tensor& p : m.params) {
        for (double v : p.data()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
        }
    }
    return out;
}

inline Model load(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "CFRM", 4) != 0)
        throw format_error("checkpoint: bad magic");
    const std::uint32_t version = detail::get_u32_le(bytes.data() + 4);
    if (version != kCheckpointVersion)
        throw format_error("checkpoint: unsupported version " + std::to_string(version));
    const std::uint32_t hlen = detail::get_u32_le(bytes.data() + 8);
    if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw format_error("checkpoint: truncated header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 12, bytes.begin() + 12 + hlen);
    } catch (const nlohmann::json::exception& e) {
        throw format_error(std::string("checkpoint: bad header json: ") + e.what());
    }

    Model m;
    m.spec = ModelSpec::from_json(header.at("spec"));

    // The manifest must agree with the shapes the spec implies; a checkpoint
    // whose floats were produced for a different spec is rejected outright.
    Model reference = build(m.spec, 0);
    const auto& manifest = header.at("manifest");
    if (manifest.size() != reference.params.size())
        throw format_error("checkpoint: manifest/spec mismatch (parameter count)");

    const std::size_t float_base = 12 + hlen;
    std::size_t expected_offset = 0;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const auto& entry = manifest[i];
        const auto name = entry.at("name").get<std::string>();
        const auto shape = entry.at("shape").get<std::vector<int>>();
        const auto offset = entry.at("offset").get<std::size_t>();
        if (name != reference.param_names[i] || shape != reference.params[i].shape() ||
            offset != expected_offset)
            throw format_error("checkpoint: manifest/spec mismatch at parameter '" + name + "'");
        expected_offset += reference.params[i].size();
    }
    if (bytes.size() != float_base + expected_offset * 8)
        throw format_error("checkpoint: truncated or oversized parameter data");

    m.param_names = reference.param_names;
    for (std::size_t i = 0; i < manifest.size(); ++i) {
        const std::size_t offset = manifest[i].at("offset").get<std::size_t>();
        std::vector<double> d(reference.params[i].size());
        for (std::size_t k = 0; k < d.size(); ++k) {
            std::uint64_t bits = 0;
            const std::uint8_t* p = bytes.data() + float_base + (offset + k) * 8;
            for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
            std::memcpy(&d[k], &bits, 8);
        }
        m.params.push_back(Tensor(reference.params[i].shape(), std::move(d), true));
    }
    return m;
}

inline void save_checkpoint(const Model& m, const std::filesystem::path& path) {
    auto bytes = save(m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write on checkpoint " + path.string());
}

inline Model load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return load(bytes);
}

}  // namespace cfr
