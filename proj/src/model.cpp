#include "aesth/model.hpp"

#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

namespace aesth {

namespace {

Tensor add(const Tensor& a, const Tensor& b) {
    if (!a.same_dims(b)) {
        throw ShapeError("residual add dims mismatch: " + a.dims_string() + " vs " + b.dims_string());
    }
    Tensor out(a.dims());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

int mid_channels_for(int channels, int ratio) {
    int mid = channels / ratio;
    return mid > 0 ? mid : 1;
}

std::string fmt_float(float v) {
    char buf[48];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

}  // namespace

TapNetConfig TapNetConfig::desk() {
    TapNetConfig c;
    c.input_size = 64;
    c.blocks = {{8, 1}, {16, 2}, {32, 2}};
    c.tap_size = 8;
    c.bottleneck_ratio = 2;
    return c;
}

TapNetConfig TapNetConfig::paper() {
    TapNetConfig c;
    c.input_size = 320;
    c.blocks.clear();
    auto stage = [&c](int channels, int count, int first_stride) {
        for (int i = 0; i < count; ++i) c.blocks.push_back({channels, i == 0 ? first_stride : 1});
    };
    stage(256, 3, 1);
    stage(512, 4, 2);
    stage(1024, 6, 2);
    stage(2048, 3, 2);
    c.tap_size = 10;
    c.bottleneck_ratio = 4;
    return c;
}

int TapNetConfig::feature_dim() const {
    int d = 0;
    for (const auto& b : blocks) d += b.channels;
    return d;
}

std::vector<int> TapNetConfig::tap_extents() const {
    std::vector<int> extents;
    int e = input_size;  // stem is stride 1, size preserving
    for (const auto& b : blocks) {
        if (b.stride > 1) e = (e - 1) / b.stride + 1;
        extents.push_back(e);
    }
    return extents;
}

void TapNetConfig::validate() const {
    if (input_size < 1) throw ConfigError("input_size must be positive");
    if (blocks.empty()) throw ConfigError("at least one residual block required");
    if (tap_size < 1) throw ConfigError("tap_size must be positive");
    if (bottleneck_ratio < 1) throw ConfigError("bottleneck_ratio must be positive");
    if (num_outputs < 1) throw ConfigError("num_outputs must be positive");
    if (static_cast<int>(attribute_names.size()) != num_outputs) {
        throw ConfigError("attribute_names length " + std::to_string(attribute_names.size()) +
                          " does not match num_outputs " + std::to_string(num_outputs));
    }
    for (const auto& b : blocks) {
        if (b.channels < 1) throw ConfigError("block channels must be positive");
        if (b.stride < 1) throw ConfigError("block stride must be positive");
    }
    const auto extents = tap_extents();
    for (std::size_t i = 0; i < extents.size(); ++i) {
        if (extents[i] < tap_size || extents[i] % tap_size != 0) {
            throw ConfigError("tap_size " + std::to_string(tap_size) +
                              " does not divide block " + std::to_string(i) +
                              " extent " + std::to_string(extents[i]));
        }
    }
}

std::string TapNetConfig::to_text() const {
    std::ostringstream os;
    os << "input_size=" << input_size << "\n";
    os << "tap_size=" << tap_size << "\n";
    os << "num_outputs=" << num_outputs << "\n";
    os << "bottleneck_ratio=" << bottleneck_ratio << "\n";
    os << "head_bias=" << (head_bias ? 1 : 0) << "\n";
    os << "bn_eps=" << fmt_float(bn_eps) << "\n";
    os << "bn_momentum=" << fmt_float(bn_momentum) << "\n";
    os << "blocks=";
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (i) os << ',';
        os << blocks[i].channels << ':' << blocks[i].stride;
    }
    os << "\n";
    os << "attributes=";
    for (std::size_t i = 0; i < attribute_names.size(); ++i) {
        if (i) os << ',';
        os << attribute_names[i];
    }
    os << "\n";
    return os.str();
}

TapNetConfig TapNetConfig::from_text(const std::string& text) {
    TapNetConfig c;
    c.blocks.clear();
    c.attribute_names.clear();
    std::istringstream is(text);
    std::string line;
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> parts;
        std::string cur;
        for (char ch : s) {
            if (ch == sep) {
                parts.push_back(cur);
                cur.clear();
            } else {
                cur += ch;
            }
        }
        parts.push_back(cur);
        return parts;
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("bad config line: " + line);
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        if (key == "input_size") c.input_size = std::stoi(value);
        else if (key == "tap_size") c.tap_size = std::stoi(value);
        else if (key == "num_outputs") c.num_outputs = std::stoi(value);
        else if (key == "bottleneck_ratio") c.bottleneck_ratio = std::stoi(value);
        else if (key == "head_bias") c.head_bias = std::stoi(value) != 0;
        else if (key == "bn_eps") c.bn_eps = std::stof(value);
        else if (key == "bn_momentum") c.bn_momentum = std::stof(value);
        else if (key == "blocks") {
            for (const auto& part : split(value, ',')) {
                auto colon = part.find(':');
                if (colon == std::string::npos) throw ParseError("bad block spec: " + part);
                c.blocks.push_back({std::stoi(part.substr(0, colon)), std::stoi(part.substr(colon + 1))});
            }
        } else if (key == "attributes") {
            c.attribute_names = split(value, ',');
        } else {
            throw ParseError("unknown config key: " + key);
        }
    }
    c.validate();
    return c;
}

namespace {

ConvLayer make_conv(int c_in, int c_out, int k, int stride, int pad) {
    ConvLayer conv;
    conv.weight = Tensor({c_out, c_in, k, k});
    conv.bias = Tensor({c_out});
    conv.stride = stride;
    conv.pad = pad;
    return conv;
}

void he_fill(Tensor& w, int fan_in, SeededRng& rng) {
    Tensor t = Tensor::he_normal(w.dims(), fan_in, rng);
    w = std::move(t);
}

BatchNormLayer make_bn(int channels) {
    BatchNormLayer bn;
    bn.gamma = Tensor::full({channels}, 1.0f);
    bn.beta = Tensor({channels});
    bn.running = BatchNormStats::identity(channels);
    return bn;
}

TapNet::TrainContext::BlockTrace* trace_or_null(std::vector<TapNet::TrainContext::BlockTrace>* v,
                                                std::size_t i) {
    return v ? &(*v)[i] : nullptr;
}

}  // namespace

struct TapNetIo {
    static TapNet make_uninitialized(const TapNetConfig& config) {
        config.validate();
        TapNet net;
        net.config_ = config;
        const int stem_out = config.blocks.front().channels;
        net.stem_conv_ = make_conv(3, stem_out, 3, 1, 1);
        net.stem_bn_ = make_bn(stem_out);
        int c_in = stem_out;
        for (const auto& spec : config.blocks) {
            ResidualBlock blk;
            blk.in_channels = c_in;
            blk.out_channels = spec.channels;
            blk.mid_channels = mid_channels_for(spec.channels, config.bottleneck_ratio);
            blk.stride = spec.stride;
            blk.conv1 = make_conv(c_in, blk.mid_channels, 1, 1, 0);
            blk.bn1 = make_bn(blk.mid_channels);
            blk.conv2 = make_conv(blk.mid_channels, blk.mid_channels, 3, spec.stride, 1);
            blk.bn2 = make_bn(blk.mid_channels);
            blk.conv3 = make_conv(blk.mid_channels, spec.channels, 1, 1, 0);
            blk.bn3 = make_bn(spec.channels);
            blk.has_projection = (c_in != spec.channels || spec.stride != 1);
            if (blk.has_projection) {
                blk.proj_conv = make_conv(c_in, spec.channels, 1, spec.stride, 0);
                blk.proj_bn = make_bn(spec.channels);
            }
            net.blocks_.push_back(std::move(blk));
            c_in = spec.channels;
        }
        const int d = config.feature_dim();
        net.head_weight_ = Tensor({config.num_outputs, d});
        net.head_bias_ = Tensor({config.num_outputs});
        return net;
    }
};

TapNet TapNet::build(const TapNetConfig& config, SeededRng& rng) {
    TapNet net = TapNetIo::make_uninitialized(config);
    he_fill(net.stem_conv_.weight, 3 * 3 * 3, rng);
    for (auto& blk : net.blocks_) {
        he_fill(blk.conv1.weight, blk.in_channels, rng);
        he_fill(blk.conv2.weight, blk.mid_channels * 3 * 3, rng);
        he_fill(blk.conv3.weight, blk.mid_channels, rng);
        if (blk.has_projection) he_fill(blk.proj_conv.weight, blk.in_channels, rng);
    }
    he_fill(net.head_weight_, config.feature_dim(), rng);
    return net;
}

namespace {

// Shared forward walk. In train mode `trace` must be non-null and running
// stats are updated through the non-const layer pointers.
struct ForwardDriver {
    BnMode mode;
    float eps;
    float momentum;

    Tensor bn_step(const BatchNormLayer& layer, BatchNormLayer* mut, const Tensor& x,
                   BatchNormCache* cache) const {
        BatchNormResult res = batchnorm_forward(x, layer.gamma, layer.beta, layer.running,
                                                mode, eps, momentum);
        if (mode == BnMode::kTrain && mut) mut->running = std::move(res.stats);
        if (cache) *cache = std::move(res.cache);
        return std::move(res.output);
    }

    Tensor block_step(const ResidualBlock& blk, ResidualBlock* mut, const Tensor& x,
                      TapNet::TrainContext::BlockTrace* t) const {
        Tensor z1 = conv2d_forward(x, blk.conv1.weight, blk.conv1.bias, blk.conv1.stride, blk.conv1.pad);
        Tensor r1 = relu(bn_step(blk.bn1, mut ? &mut->bn1 : nullptr, z1, t ? &t->bn1 : nullptr));
        Tensor z2 = conv2d_forward(r1, blk.conv2.weight, blk.conv2.bias, blk.conv2.stride, blk.conv2.pad);
        Tensor r2 = relu(bn_step(blk.bn2, mut ? &mut->bn2 : nullptr, z2, t ? &t->bn2 : nullptr));
        Tensor z3 = conv2d_forward(r2, blk.conv3.weight, blk.conv3.bias, blk.conv3.stride, blk.conv3.pad);
        Tensor main = bn_step(blk.bn3, mut ? &mut->bn3 : nullptr, z3, t ? &t->bn3 : nullptr);
        Tensor shortcut;
        if (blk.has_projection) {
            Tensor pz = conv2d_forward(x, blk.proj_conv.weight, blk.proj_conv.bias,
                                       blk.proj_conv.stride, blk.proj_conv.pad);
            shortcut = bn_step(blk.proj_bn, mut ? &mut->proj_bn : nullptr, pz,
                               t ? &t->proj_bn : nullptr);
            if (t) t->proj_out = std::move(pz);
        } else {
            shortcut = x;
        }
        Tensor sum = add(main, shortcut);
        Tensor out = relu(sum);
        if (t) {
            t->input = x;
            t->z1 = std::move(z1);
            t->r1 = std::move(r1);
            t->z2 = std::move(z2);
            t->r2 = std::move(r2);
            t->z3 = std::move(z3);
            t->bn3_out = std::move(main);
            t->sum = std::move(sum);
        }
        return out;
    }
};

}  // namespace

template <typename Net, typename Fn>
void TapNet::visit_impl(Net& net, const Fn& fn) {
    fn("stem.conv.weight", net.stem_conv_.weight, true);
    fn("stem.conv.bias", net.stem_conv_.bias, true);
    fn("stem.bn.gamma", net.stem_bn_.gamma, true);
    fn("stem.bn.beta", net.stem_bn_.beta, true);
    fn("stem.bn.running_mean", net.stem_bn_.running.mean, false);
    fn("stem.bn.running_var", net.stem_bn_.running.var, false);
    for (std::size_t i = 0; i < net.blocks_.size(); ++i) {
        auto& blk = net.blocks_[i];
        const std::string p = "block" + std::to_string(i) + ".";
        auto conv = [&](const std::string& name, auto& layer) {
            fn(p + name + ".weight", layer.weight, true);
            fn(p + name + ".bias", layer.bias, true);
        };
        auto bn = [&](const std::string& name, auto& layer) {
            fn(p + name + ".gamma", layer.gamma, true);
            fn(p + name + ".beta", layer.beta, true);
            fn(p + name + ".running_mean", layer.running.mean, false);
            fn(p + name + ".running_var", layer.running.var, false);
        };
        conv("conv1", blk.conv1);
        bn("bn1", blk.bn1);
        conv("conv2", blk.conv2);
        bn("bn2", blk.bn2);
        conv("conv3", blk.conv3);
        bn("bn3", blk.bn3);
        if (blk.has_projection) {
            conv("proj.conv", blk.proj_conv);
            bn("proj.bn", blk.proj_bn);
        }
    }
    fn("head.weight", net.head_weight_, true);
    fn("head.bias", net.head_bias_, net.config_.head_bias);
}

void TapNet::visit_params(const std::function<void(const std::string&, Tensor&, bool)>& fn) {
    visit_impl(*this, fn);
}

void TapNet::visit_params(const std::function<void(const std::string&, const Tensor&, bool)>& fn) const {
    visit_impl(*this, fn);
}

std::vector<std::string> TapNet::trainable_param_names() const {
    std::vector<std::string> names;
    visit_params([&](const std::string& name, const Tensor&, bool trainable) {
        if (trainable) names.push_back(name);
    });
    return names;
}

std::size_t TapNet::parameter_count() const {
    std::size_t count = 0;
    visit_params([&](const std::string&, const Tensor& t, bool trainable) {
        if (trainable) count += t.size();
    });
    return count;
}

namespace {

void check_images(const TapNetConfig& config, const Tensor& images) {
    if (images.ndim() != 4 || images.dim(1) != 3 ||
        images.dim(2) != config.input_size || images.dim(3) != config.input_size) {
        throw ShapeError("expected images N x 3 x " + std::to_string(config.input_size) + " x " +
                         std::to_string(config.input_size) + ", got " + images.dims_string());
    }
}

}  // namespace

ForwardCache TapNet::forward_infer(const Tensor& images) const {
    check_images(config_, images);
    ForwardDriver driver{BnMode::kInfer, config_.bn_eps, config_.bn_momentum};
    Tensor x = relu(driver.bn_step(stem_bn_, nullptr,
                                   conv2d_forward(images, stem_conv_.weight, stem_conv_.bias,
                                                  stem_conv_.stride, stem_conv_.pad),
                                   nullptr));
    ForwardCache cache;
    const auto extents = config_.tap_extents();
    const int n = images.dim(0);
    const int d = config_.feature_dim();
    cache.features = Tensor({n, d});
    int col = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        x = driver.block_step(blocks_[b], nullptr, x, nullptr);
        const int window = extents[b] / config_.tap_size;
        Tensor pooled = window == 1 ? x : avgpool2d(x, window, window);
        Tensor gap = global_avg_pool(pooled);
        for (int row = 0; row < n; ++row) {
            for (int c = 0; c < blocks_[b].out_channels; ++c) {
                cache.features.at(row, col + c) = gap.at(row, c);
            }
        }
        col += blocks_[b].out_channels;
        cache.tap_maps.push_back(std::move(pooled));
    }
    cache.predictions = fully_connected(cache.features, head_weight_, head_bias_);
    return cache;
}

ForwardCache TapNet::forward_train(const Tensor& images, TrainContext& ctx) {
    check_images(config_, images);
    ForwardDriver driver{BnMode::kTrain, config_.bn_eps, config_.bn_momentum};
    ctx = TrainContext{};
    ctx.input = images;
    ctx.blocks.resize(blocks_.size());
    ctx.stem_z = conv2d_forward(images, stem_conv_.weight, stem_conv_.bias,
                                stem_conv_.stride, stem_conv_.pad);
    ctx.stem_out = relu(driver.bn_step(stem_bn_, &stem_bn_, ctx.stem_z, &ctx.stem_bn));

    const auto extents = config_.tap_extents();
    const int n = images.dim(0);
    ctx.features = Tensor({n, config_.feature_dim()});
    Tensor x = ctx.stem_out;
    int col = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        x = driver.block_step(blocks_[b], &blocks_[b], x, trace_or_null(&ctx.blocks, b));
        const int window = extents[b] / config_.tap_size;
        Tensor pooled = window == 1 ? x : avgpool2d(x, window, window);
        Tensor gap = global_avg_pool(pooled);
        for (int row = 0; row < n; ++row) {
            for (int c = 0; c < blocks_[b].out_channels; ++c) {
                ctx.features.at(row, col + c) = gap.at(row, c);
            }
        }
        col += blocks_[b].out_channels;
        ctx.taps.push_back(x);
        ctx.pooled.push_back(std::move(pooled));
        ctx.pool_windows.push_back(window);
    }
    ctx.predictions = fully_connected(ctx.features, head_weight_, head_bias_);

    ForwardCache cache;
    cache.tap_maps = ctx.pooled;
    cache.features = ctx.features;
    cache.predictions = ctx.predictions;
    return cache;
}

std::vector<NamedTensor> TapNet::backward(const TrainContext& ctx, const Tensor& grad_predictions) {
    if (!grad_predictions.same_dims(ctx.predictions)) {
        throw ShapeError("grad_predictions dims " + grad_predictions.dims_string() +
                         " do not match predictions " + ctx.predictions.dims_string());
    }
    std::map<std::string, Tensor> grads;

    LayerGrads head = fully_connected_backward(ctx.features, head_weight_, grad_predictions);
    grads["head.weight"] = std::move(head.grad_params["weight"]);
    if (config_.head_bias) grads["head.bias"] = std::move(head.grad_params["bias"]);

    // Per-block gradient arriving at the tap from the pooled-GAP head path.
    const int n = ctx.features.dim(0);
    std::vector<Tensor> tap_grads(blocks_.size());
    int col = 0;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const int c_b = blocks_[b].out_channels;
        Tensor slice({n, c_b});
        for (int row = 0; row < n; ++row) {
            for (int c = 0; c < c_b; ++c) slice.at(row, c) = head.grad_input.at(row, col + c);
        }
        col += c_b;
        Tensor d_pooled = global_avg_pool_backward(ctx.pooled[b], slice);
        const int window = ctx.pool_windows[b];
        tap_grads[b] = window == 1 ? std::move(d_pooled)
                                   : avgpool2d_backward(ctx.taps[b], window, window, d_pooled);
    }

    auto conv_grads = [&](const std::string& prefix, const ConvLayer& layer, const Tensor& input,
                          const Tensor& grad_out) {
        LayerGrads g = conv2d_backward(input, layer.weight, grad_out, layer.stride, layer.pad);
        grads[prefix + ".weight"] = std::move(g.grad_params["weight"]);
        grads[prefix + ".bias"] = std::move(g.grad_params["bias"]);
        return std::move(g.grad_input);
    };
    auto bn_grads = [&](const std::string& prefix, const BatchNormLayer& layer,
                        const BatchNormCache& cache, const Tensor& grad_out) {
        LayerGrads g = batchnorm_backward(cache, layer.gamma, grad_out);
        grads[prefix + ".gamma"] = std::move(g.grad_params["gamma"]);
        grads[prefix + ".beta"] = std::move(g.grad_params["beta"]);
        return std::move(g.grad_input);
    };

    Tensor carried;  // gradient flowing into the block below
    for (std::size_t bi = blocks_.size(); bi-- > 0;) {
        const auto& blk = blocks_[bi];
        const auto& t = ctx.blocks[bi];
        const std::string p = "block" + std::to_string(bi) + ".";

        Tensor g_tap = std::move(tap_grads[bi]);
        if (!carried.empty()) add_into(g_tap, carried);

        Tensor d_sum = relu_backward(t.sum, g_tap);
        Tensor d_z3 = bn_grads(p + "bn3", blk.bn3, t.bn3, d_sum);
        Tensor d_r2 = conv_grads(p + "conv3", blk.conv3, t.r2, d_z3);
        Tensor d_z2 = bn_grads(p + "bn2", blk.bn2, t.bn2, relu_backward(t.r2, d_r2));
        Tensor d_r1 = conv_grads(p + "conv2", blk.conv2, t.r1, d_z2);
        Tensor d_z1 = bn_grads(p + "bn1", blk.bn1, t.bn1, relu_backward(t.r1, d_r1));
        Tensor d_input = conv_grads(p + "conv1", blk.conv1, t.input, d_z1);

        if (blk.has_projection) {
            Tensor d_pz = bn_grads(p + "proj.bn", blk.proj_bn, t.proj_bn, d_sum);
            Tensor d_in_proj = conv_grads(p + "proj.conv", blk.proj_conv, t.input, d_pz);
            add_into(d_input, d_in_proj);
        } else {
            add_into(d_input, d_sum);
        }
        carried = std::move(d_input);
    }

    Tensor d_stem_bn = relu_backward(ctx.stem_out, carried);
    Tensor d_stem_z = bn_grads("stem.bn", stem_bn_, ctx.stem_bn, d_stem_bn);
    conv_grads("stem.conv", stem_conv_, ctx.input, d_stem_z);

    std::vector<NamedTensor> ordered;
    for (const auto& name : trainable_param_names()) {
        auto it = grads.find(name);
        if (it == grads.end()) throw Error("missing gradient for parameter " + name);
        ordered.push_back({name, std::move(it->second)});
    }
    return ordered;
}

// --- checkpoint io ---

namespace {

void write_u16(std::ostream& out, std::uint16_t v) {
    if constexpr (std::endian::native == std::endian::big) v = std::byteswap(v);
    out.write(reinterpret_cast<const char*>(&v), 2);
}

std::uint16_t read_u16(std::istream& in) {
    std::uint16_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 2);
    if (!in) throw FormatError("truncated checkpoint while reading record name length");
    if constexpr (std::endian::native == std::endian::big) v = std::byteswap(v);
    return v;
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) v = std::byteswap(v);
    out.write(reinterpret_cast<const char*>(&v), 4);
}

std::uint32_t read_u32_le(std::istream& in, const char* what) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError(std::string("truncated checkpoint while reading ") + what);
    if constexpr (std::endian::native == std::endian::big) v = std::byteswap(v);
    return v;
}

}  // namespace

void write_tapn(std::ostream& out, const std::vector<NamedTensor>& records) {
    out.write("TAPN", 4);
    write_u32_le(out, 1);
    write_u32_le(out, static_cast<std::uint32_t>(records.size()));
    for (const auto& rec : records) {
        if (rec.name.size() > 0xffff) throw FormatError("record name too long: " + rec.name);
        write_u16(out, static_cast<std::uint16_t>(rec.name.size()));
        out.write(rec.name.data(), static_cast<std::streamsize>(rec.name.size()));
        save_tensor(out, rec.value);
    }
    if (!out) throw FormatError("failed writing checkpoint");
}

std::vector<NamedTensor> read_tapn(std::istream& in) {
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "TAPN", 4) != 0) throw FormatError("bad checkpoint magic");
    const std::uint32_t version = read_u32_le(in, "version");
    if (version != 1) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t count = read_u32_le(in, "record count");
    std::vector<NamedTensor> records;
    records.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint16_t len = read_u16(in);
        std::string name(len, '\0');
        in.read(name.data(), len);
        if (!in) throw FormatError("truncated checkpoint while reading record name");
        records.push_back({std::move(name), load_tensor(in)});
    }
    return records;
}

void write_tapn(const std::string& path, const std::vector<NamedTensor>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    write_tapn(out, records);
}

std::vector<NamedTensor> read_tapn(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return read_tapn(in);
}

Tensor text_to_tensor(const std::string& text) {
    if (text.empty()) throw FormatError("cannot encode empty text record");
    Tensor t({static_cast<int>(text.size())});
    for (std::size_t i = 0; i < text.size(); ++i) {
        t[i] = static_cast<float>(static_cast<unsigned char>(text[i]));
    }
    return t;
}

std::string tensor_to_text(const Tensor& t) {
    std::string s;
    s.reserve(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const float v = t[i];
        if (v < 0.0f || v > 255.0f || v != static_cast<float>(static_cast<unsigned char>(v))) {
            throw FormatError("record is not a text payload");
        }
        s += static_cast<char>(static_cast<unsigned char>(v));
    }
    return s;
}

void TapNet::save(std::ostream& out) const {
    std::vector<NamedTensor> records;
    records.push_back({"config", text_to_tensor(config_.to_text())});
    visit_params([&](const std::string& name, const Tensor& t, bool) {
        records.push_back({"net/" + name, t});
    });
    write_tapn(out, records);
}

void TapNet::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open " + path + " for writing");
    save(out);
}

TapNet TapNet::load(std::istream& in) {
    std::vector<NamedTensor> records = read_tapn(in);
    std::map<std::string, Tensor> by_name;
    for (auto& rec : records) by_name[rec.name] = std::move(rec.value);

    auto cfg_it = by_name.find("config");
    if (cfg_it == by_name.end()) throw FormatError("checkpoint has no config record");
    TapNetConfig config = TapNetConfig::from_text(tensor_to_text(cfg_it->second));

    TapNet net = TapNetIo::make_uninitialized(config);
    net.visit_params([&](const std::string& name, Tensor& t, bool) {
        auto it = by_name.find("net/" + name);
        if (it == by_name.end()) throw FormatError("checkpoint missing parameter " + name);
        if (it->second.dims() != t.dims()) {
            throw FormatError("checkpoint parameter " + name + " has dims " +
                              it->second.dims_string() + ", expected " + t.dims_string());
        }
        t = std::move(it->second);
    });
    return net;
}

TapNet TapNet::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path);
    return load(in);
}

}  // namespace aesth
