#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string_view>

#include "json.hpp"

#include "dscnn/ops.hpp"
#include "dscnn/spp.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

enum class LayerKind { conv, maxpool, relu, spp, fc, softmax };

inline std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::maxpool: return "maxpool";
        case LayerKind::relu: return "relu";
        case LayerKind::spp: return "spp";
        case LayerKind::fc: return "fc";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

inline LayerKind layer_kind_from_name(const std::string& s) {
    if (s == "conv") return LayerKind::conv;
    if (s == "maxpool") return LayerKind::maxpool;
    if (s == "relu") return LayerKind::relu;
    if (s == "spp") return LayerKind::spp;
    if (s == "fc") return LayerKind::fc;
    if (s == "softmax") return LayerKind::softmax;
    throw std::invalid_argument("unknown layer kind '" + s + "'");
}

/// One layer of a feed-forward model. Geometry fields are meaningful only
/// for the matching kind; `trainable` applies to conv/fc layers.
struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::relu;
    int out_channels = 0;  // conv
    int kernel = 0;        // conv
    int stride = 1;        // conv, maxpool
    int pad = 0;           // conv
    int window = 0;        // maxpool
    std::vector<int> bins; // spp
    int width = 0;         // fc
    bool trainable = true;

    static LayerSpec conv(std::string name, int out_channels, int kernel, int stride, int pad) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::conv;
        l.out_channels = out_channels;
        l.kernel = kernel;
        l.stride = stride;
        l.pad = pad;
        return l;
    }
    static LayerSpec maxpool(std::string name, int window, int stride) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::maxpool;
        l.window = window;
        l.stride = stride;
        return l;
    }
    static LayerSpec relu(std::string name) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::relu;
        return l;
    }
    static LayerSpec spp(std::string name, std::vector<int> bins) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::spp;
        l.bins = std::move(bins);
        return l;
    }
    static LayerSpec fc(std::string name, int width) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::fc;
        l.width = width;
        return l;
    }
    static LayerSpec softmax(std::string name) {
        LayerSpec l;
        l.name = std::move(name);
        l.kind = LayerKind::softmax;
        return l;
    }
};

/// A complete feed-forward architecture: ordered layers plus the input
/// shape they are validated against.
struct ModelSpec {
    std::vector<LayerSpec> layers;
    std::vector<int> input_shape;  // C x H x W
    int num_classes = 0;

    /// Shape after every layer; result[0] is the input shape. Throws if any
    /// layer cannot consume its input.
    std::vector<std::vector<int>> propagate() const { return propagate_from(input_shape); }

    std::vector<std::vector<int>> propagate_from(const std::vector<int>& in_shape) const {
        std::vector<std::vector<int>> shapes;
        shapes.push_back(in_shape);
        std::map<std::string, int> seen;
        for (const LayerSpec& l : layers) {
            if (seen.count(l.name))
                throw std::invalid_argument("model: duplicate layer name '" + l.name + "'");
            seen[l.name] = 1;
            const std::vector<int>& s = shapes.back();
            switch (l.kind) {
                case LayerKind::conv: {
                    if (s.size() != 3)
                        throw std::invalid_argument("layer '" + l.name + "': conv needs CxHxW input, got " +
                                                    Tensor::shape_str(s));
                    const int oh = conv_out_extent(s[1], l.kernel, l.stride, l.pad);
                    const int ow = conv_out_extent(s[2], l.kernel, l.stride, l.pad);
                    if (l.kernel > s[1] + 2 * l.pad || l.kernel > s[2] + 2 * l.pad || oh < 1 || ow < 1)
                        throw std::invalid_argument("layer '" + l.name + "': input " + Tensor::shape_str(s) +
                                                    " too small for kernel " + std::to_string(l.kernel));
                    shapes.push_back({l.out_channels, oh, ow});
                    break;
                }
                case LayerKind::maxpool: {
                    if (s.size() != 3)
                        throw std::invalid_argument("layer '" + l.name + "': maxpool needs CxHxW input");
                    if (l.window > s[1] || l.window > s[2])
                        throw std::invalid_argument("layer '" + l.name + "': input " + Tensor::shape_str(s) +
                                                    " too small for window " + std::to_string(l.window));
                    shapes.push_back({s[0], (s[1] - l.window) / l.stride + 1, (s[2] - l.window) / l.stride + 1});
                    break;
                }
                case LayerKind::relu:
                case LayerKind::softmax:
                    shapes.push_back(s);
                    break;
                case LayerKind::spp: {
                    if (s.size() != 3)
                        throw std::invalid_argument("layer '" + l.name + "': spp needs CxHxW input");
                    SppSpec sp{l.bins};
                    for (int b : sp.levels)
                        if (b < 1 || b > s[1] || b > s[2])
                            throw std::invalid_argument("layer '" + l.name + "': input " +
                                                        Tensor::shape_str(s) + " too small for " +
                                                        std::to_string(b) + " bins");
                    shapes.push_back({static_cast<int>(spp_output_size(sp, s[0]))});
                    break;
                }
                case LayerKind::fc: {
                    std::size_t flat = 1;
                    for (int d : s) flat *= static_cast<std::size_t>(d);
                    if (flat == 0) throw std::invalid_argument("layer '" + l.name + "': empty input");
                    shapes.push_back({l.width});
                    break;
                }
            }
        }
        return shapes;
    }

    void validate() const {
        if (input_shape.size() != 3 && input_shape.size() != 1)
            throw std::invalid_argument("model: input shape must be CxHxW or a flat width");
        if (layers.empty()) throw std::invalid_argument("model: no layers");
        const auto shapes = propagate();
        const std::vector<int>& out = shapes.back();
        if (out.size() != 1 || out[0] != num_classes)
            throw std::invalid_argument("model: final width " + Tensor::shape_str(out) +
                                        " does not equal num_classes " + std::to_string(num_classes));
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["input_shape"] = input_shape;
        j["num_classes"] = num_classes;
        j["layers"] = nlohmann::json::array();
        for (const LayerSpec& l : layers) {
            nlohmann::json lj;
            lj["name"] = l.name;
            lj["kind"] = layer_kind_name(l.kind);
            lj["trainable"] = l.trainable;
            switch (l.kind) {
                case LayerKind::conv:
                    lj["out_channels"] = l.out_channels;
                    lj["kernel"] = l.kernel;
                    lj["stride"] = l.stride;
                    lj["pad"] = l.pad;
                    break;
                case LayerKind::maxpool:
                    lj["window"] = l.window;
                    lj["stride"] = l.stride;
                    break;
                case LayerKind::spp:
                    lj["bins"] = l.bins;
                    break;
                case LayerKind::fc:
                    lj["width"] = l.width;
                    break;
                default:
                    break;
            }
            j["layers"].push_back(lj);
        }
        return j;
    }

    static ModelSpec from_json(const nlohmann::json& j) {
        ModelSpec spec;
        spec.input_shape = j.at("input_shape").get<std::vector<int>>();
        spec.num_classes = j.at("num_classes").get<int>();
        for (const nlohmann::json& lj : j.at("layers")) {
            LayerSpec l;
            l.name = lj.at("name").get<std::string>();
            l.kind = layer_kind_from_name(lj.at("kind").get<std::string>());
            l.trainable = lj.value("trainable", true);
            l.out_channels = lj.value("out_channels", 0);
            l.kernel = lj.value("kernel", 0);
            l.stride = lj.value("stride", 1);
            l.pad = lj.value("pad", 0);
            l.window = lj.value("window", 0);
            l.width = lj.value("width", 0);
            if (lj.contains("bins")) l.bins = lj.at("bins").get<std::vector<int>>();
            spec.layers.push_back(std::move(l));
        }
        return spec;
    }
};

/// Ordered collection of named tensors; the single container used for
/// parameters, gradients and optimizer state.
class ParamStore {
  public:
    void add(const std::string& name, Tensor t) {
        if (index_.count(name)) throw std::invalid_argument("param '" + name + "' already exists");
        index_[name] = names_.size();
        names_.push_back(name);
        values_.push_back(std::move(t));
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("unknown param '" + name + "'");
        return values_[it->second];
    }
    const Tensor& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::invalid_argument("unknown param '" + name + "'");
        return values_[it->second];
    }

    /// Lookup that creates a zero tensor of the given shape on first use —
    /// the gradient-accumulation entry point.
    Tensor& accum(const std::string& name, const std::vector<int>& shape) {
        auto it = index_.find(name);
        if (it != index_.end()) return values_[it->second];
        add(name, Tensor(shape));
        return values_.back();
    }

    std::size_t count() const { return names_.size(); }
    const std::string& name(std::size_t i) const { return names_[i]; }
    Tensor& value(std::size_t i) { return values_[i]; }
    const Tensor& value(std::size_t i) const { return values_[i]; }

    void zero_all() {
        for (Tensor& t : values_) std::fill(t.data(), t.data() + t.size(), 0.0f);
    }

    void scale_all(float s) {
        for (Tensor& t : values_)
            for (std::size_t i = 0; i < t.size(); ++i) t[i] *= s;
    }

  private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
    std::map<std::string, std::size_t> index_;
};

/// Named reference into some model's parameter storage; optimizers and
/// checkpoint writers operate on flat lists of these.
struct ParamRef {
    std::string name;
    Tensor* value = nullptr;
};

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

/// Uniform draw in [0,1) with 24-bit resolution from a fully specified
/// generator, so initialization is identical across platforms.
inline float unit_uniform(std::mt19937_64& gen) {
    return static_cast<float>((gen() >> 40) * (1.0 / 16777216.0));
}

/// Fills a tensor uniformly in +-sqrt(6/(fan_in+fan_out)). The generator is
/// seeded from (seed, parameter name), so a parameter's initial value
/// depends only on its name — models sharing layer names start from
/// bitwise-identical weights for the same seed.
inline void init_uniform_fan(Tensor& t, const std::string& name, std::uint64_t seed, int fan_in,
                             int fan_out) {
    std::mt19937_64 gen(seed ^ fnv1a64(name));
    const float limit = std::sqrt(6.0f / static_cast<float>(fan_in + fan_out));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (2.0f * unit_uniform(gen) - 1.0f) * limit;
}

/// A ModelSpec instantiated with parameters; owns forward/backward.
class Model {
  public:
    /// Activation trace: acts[0] is the input, acts[i+1] the output of
    /// layer i. A trace may cover only a prefix of the model.
    struct Trace {
        std::vector<Tensor> acts;
    };

    Model() = default;

    Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
        spec_.validate();
        shapes_ = spec_.propagate();
        for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
            const LayerSpec& l = spec_.layers[i];
            const std::vector<int>& in = shapes_[i];
            if (l.kind == LayerKind::conv) {
                Tensor w({l.out_channels, in[0], l.kernel, l.kernel});
                const int fan_in = in[0] * l.kernel * l.kernel;
                const int fan_out = l.out_channels * l.kernel * l.kernel;
                init_uniform_fan(w, l.name + ".weight", seed, fan_in, fan_out);
                params_.add(l.name + ".weight", std::move(w));
                params_.add(l.name + ".bias", Tensor({l.out_channels}));
            } else if (l.kind == LayerKind::fc) {
                std::size_t flat = 1;
                for (int d : in) flat *= static_cast<std::size_t>(d);
                Tensor w({l.width, static_cast<int>(flat)});
                init_uniform_fan(w, l.name + ".weight", seed, static_cast<int>(flat), l.width);
                params_.add(l.name + ".weight", std::move(w));
                params_.add(l.name + ".bias", Tensor({l.width}));
            }
        }
    }

    const ModelSpec& spec() const { return spec_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }
    const std::vector<std::vector<int>>& shapes() const { return shapes_; }

    int layer_index(const std::string& name) const {
        for (std::size_t i = 0; i < spec_.layers.size(); ++i)
            if (spec_.layers[i].name == name) return static_cast<int>(i);
        return -1;
    }

    std::vector<std::string> layer_names() const {
        std::vector<std::string> out;
        for (const LayerSpec& l : spec_.layers) out.push_back(l.name);
        return out;
    }

    /// Runs layers [0, upto]; upto = -1 means the whole model.
    Tensor forward_to(const Tensor& input, int upto, Trace* trace = nullptr) const {
        const int last = upto < 0 ? static_cast<int>(spec_.layers.size()) - 1 : upto;
        detail::require(last >= 0 && last < static_cast<int>(spec_.layers.size()),
                        "forward_to: layer index out of range");
        Tensor x = input;
        if (trace) {
            trace->acts.clear();
            trace->acts.push_back(x);
        }
        for (int i = 0; i <= last; ++i) {
            x = apply_layer(spec_.layers[i], x);
            if (trace) trace->acts.push_back(x);
        }
        return x;
    }

    Tensor forward(const Tensor& input, Trace* trace = nullptr) const { return forward_to(input, -1, trace); }

    /// Output of the named layer on the given input.
    Tensor feature(const Tensor& input, const std::string& layer) const {
        const int idx = layer_index(layer);
        detail::require(idx >= 0, "unknown layer '" + layer + "'");
        return forward_to(input, idx);
    }

    /// Backpropagates `grad_out` (gradient w.r.t. the last traced
    /// activation) through every traced layer, accumulating parameter
    /// gradients into `grads`; returns the gradient w.r.t. the input.
    Tensor backward(const Trace& trace, Tensor grad_out, ParamStore& grads) const {
        detail::require(trace.acts.size() >= 2, "backward: trace is empty");
        const int nlayers = static_cast<int>(trace.acts.size()) - 1;
        Tensor g = std::move(grad_out);
        for (int i = nlayers - 1; i >= 0; --i) {
            const LayerSpec& l = spec_.layers[static_cast<std::size_t>(i)];
            const Tensor& in = trace.acts[static_cast<std::size_t>(i)];
            const Tensor& out = trace.acts[static_cast<std::size_t>(i) + 1];
            switch (l.kind) {
                case LayerKind::conv: {
                    const Tensor& w = params_.at(l.name + ".weight");
                    if (g.rank() == 1) g = g.reshaped(out.shape());
                    Tensor gin, gw, gb;
                    conv2d_backward(in, w, l.stride, l.pad, g, gin, gw, gb);
                    add_into(grads.accum(l.name + ".weight", w.shape()), gw);
                    add_into(grads.accum(l.name + ".bias", {w.dim(0)}), gb);
                    g = std::move(gin);
                    break;
                }
                case LayerKind::maxpool:
                    if (g.rank() == 1) g = g.reshaped(out.shape());
                    g = maxpool_backward(in, l.window, l.stride, g);
                    break;
                case LayerKind::relu:
                    if (!g.same_shape(in)) g = g.reshaped(in.shape());
                    g = relu_backward(in, g);
                    break;
                case LayerKind::spp:
                    g = spp_backward(in, SppSpec{l.bins}, g);
                    break;
                case LayerKind::fc: {
                    const Tensor& w = params_.at(l.name + ".weight");
                    Tensor gin, gw, gb;
                    Tensor flat_in = in.rank() == 1 ? in : in.reshaped({static_cast<int>(in.size())});
                    fc_backward(flat_in, w, g, gin, gw, gb);
                    add_into(grads.accum(l.name + ".weight", w.shape()), gw);
                    add_into(grads.accum(l.name + ".bias", {w.dim(0)}), gb);
                    g = in.rank() == 1 ? std::move(gin) : gin.reshaped(in.shape());
                    break;
                }
                case LayerKind::softmax:
                    g = softmax_backward(out, g);
                    break;
            }
        }
        return g;
    }

    std::vector<ParamRef> param_refs(const std::string& prefix = "") {
        std::vector<ParamRef> refs;
        for (std::size_t i = 0; i < params_.count(); ++i)
            refs.push_back({prefix + params_.name(i), &params_.value(i)});
        return refs;
    }

  private:
    static void add_into(Tensor& dst, const Tensor& src) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    }

    Tensor apply_layer(const LayerSpec& l, const Tensor& x) const {
        switch (l.kind) {
            case LayerKind::conv:
                return conv2d_forward(x, params_.at(l.name + ".weight"), params_.at(l.name + ".bias"),
                                      l.stride, l.pad);
            case LayerKind::maxpool:
                return maxpool_forward(x, l.window, l.stride);
            case LayerKind::relu:
                return relu_forward(x);
            case LayerKind::spp:
                return spp_forward(x, SppSpec{l.bins});
            case LayerKind::fc: {
                const Tensor flat = x.rank() == 1 ? x : x.reshaped({static_cast<int>(x.size())});
                return fc_forward(flat, params_.at(l.name + ".weight"), params_.at(l.name + ".bias"));
            }
            case LayerKind::softmax:
                return softmax(x);
        }
        throw std::logic_error("unreachable layer kind");
    }

    ModelSpec spec_;
    ParamStore params_;
    std::vector<std::vector<int>> shapes_;
};

inline int scaled_channels(int base, double scale) {
    return std::max(1, static_cast<int>(std::lround(base * scale)));
}

/// The depth CNN: a stride-2 5x5 stem, 2x2 max pool, three padded 3x3
/// convolutions (relu after every conv), a {1,2,3} spatial pyramid, and a
/// two-layer fully connected head. Channel widths scale as
/// round(scale * (96, 256, 384, 512)); fc_width 0 picks round(1024*scale).
inline ModelSpec build_dcnn(const std::vector<int>& input_shape, int num_classes, double scale,
                            int fc_width = 0) {
    if (scale <= 0.0 || scale > 1.0) throw std::invalid_argument("build_dcnn: scale must be in (0,1]");
    if (num_classes < 2) throw std::invalid_argument("build_dcnn: need at least 2 classes");
    const int c1 = scaled_channels(96, scale);
    const int c2 = scaled_channels(256, scale);
    const int c3 = scaled_channels(384, scale);
    const int c4 = scaled_channels(512, scale);
    const int fcw = fc_width > 0 ? fc_width : std::max(16, scaled_channels(1024, scale));
    ModelSpec spec;
    spec.input_shape = input_shape;
    spec.num_classes = num_classes;
    spec.layers = {
        LayerSpec::conv("conv1", c1, 5, 2, 0), LayerSpec::relu("relu1"),
        LayerSpec::maxpool("pool1", 2, 2),     LayerSpec::conv("conv2", c2, 3, 1, 1),
        LayerSpec::relu("relu2"),              LayerSpec::conv("conv3", c3, 3, 1, 1),
        LayerSpec::relu("relu3"),              LayerSpec::conv("conv4", c4, 3, 1, 1),
        LayerSpec::relu("relu4"),              LayerSpec::spp("spp", {1, 2, 3}),
        LayerSpec::fc("fc5", fcw),             LayerSpec::fc("fc6", num_classes),
    };
    spec.validate();
    return spec;
}

/// The weakly supervised patch CNN: geometry-identical convolutional stem
/// (same layer names, so conv weights transfer to the full network by
/// name) with the same pyramid-plus-head structure over patch input.
inline ModelSpec build_wsp_cnn(const std::vector<int>& patch_shape, int num_classes, double scale,
                               int fc_width = 0) {
    return build_dcnn(patch_shape, num_classes, scale, fc_width);
}

/// Copies conv-layer weights and biases for every conv layer name the two
/// models share, bitwise; all other destination parameters are untouched.
inline void transfer_conv_weights(const Model& src, Model& dst) {
    std::vector<std::string> mismatched;
    std::vector<std::pair<std::string, std::string>> to_copy;
    for (const LayerSpec& l : dst.spec().layers) {
        if (l.kind != LayerKind::conv) continue;
        bool in_src = false;
        for (const LayerSpec& sl : src.spec().layers)
            if (sl.kind == LayerKind::conv && sl.name == l.name) in_src = true;
        if (!in_src) continue;
        for (const char* suffix : {".weight", ".bias"}) {
            const std::string pname = l.name + suffix;
            if (!src.params().has(pname)) continue;
            if (!src.params().at(pname).same_shape(dst.params().at(pname)))
                mismatched.push_back(l.name + " (" + shape_str(src.params().at(pname)) + " vs " +
                                     shape_str(dst.params().at(pname)) + ")");
            else
                to_copy.emplace_back(pname, pname);
        }
    }
    if (!mismatched.empty()) {
        std::string msg = "transfer_conv_weights: shape mismatch in layers:";
        for (const std::string& m : mismatched) msg += " " + m;
        throw std::invalid_argument(msg);
    }
    for (const auto& [sname, dname] : to_copy) {
        const Tensor& s = src.params().at(sname);
        Tensor& d = dst.params().at(dname);
        std::copy(s.data(), s.data() + s.size(), d.data());
    }
}

}  // namespace dscnn
