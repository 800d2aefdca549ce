#ifndef AESTH_MODEL_HPP_
#define AESTH_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "aesth/attributes.hpp"
#include "aesth/layers.hpp"
#include "aesth/tensor.hpp"

namespace aesth {

struct TapNetConfig {
    struct BlockSpec {
        int channels;
        int stride;
    };

    int input_size = 299;
    std::vector<BlockSpec> blocks;
    int tap_size = 10;
    int num_outputs = kNumOutputs;
    std::vector<std::string> attribute_names = attribute_name_list();
    /// Middle conv width divisor: mid = max(1, channels / bottleneck_ratio).
    int bottleneck_ratio = 4;
    /// The regression head carries a bias by default; zero and frozen when off.
    bool head_bias = true;
    float bn_eps = 1e-5f;
    float bn_momentum = 0.1f;

    /// Laptop-scale preset: 64 px input, 3 blocks (8, 16, 32), taps pooled to 8x8.
    static TapNetConfig desk();
    /// Full-scale preset: 16 blocks with the ResNet50 channel plan, taps pooled
    /// to 10x10. Input is 320 px so every tap extent is a multiple of 10.
    static TapNetConfig paper();

    /// Concatenated GAP feature length D = sum of block channels.
    int feature_dim() const;
    /// Spatial extent of each block's output, in order.
    std::vector<int> tap_extents() const;
    /// Throws ConfigError if tap_size does not divide every tap extent, the
    /// attribute list does not match num_outputs, or a field is out of range.
    void validate() const;

    std::string to_text() const;
    static TapNetConfig from_text(const std::string& text);
};

struct ConvLayer {
    Tensor weight;  // C_out x C_in x kh x kw
    Tensor bias;    // C_out
    int stride = 1;
    int pad = 0;
};

struct BatchNormLayer {
    Tensor gamma;
    Tensor beta;
    BatchNormStats running;
};

/// Three conv+bn stages (1x1, 3x3 strided, 1x1) plus an optional projection
/// shortcut. Output = relu(main_path + shortcut).
struct ResidualBlock {
    ConvLayer conv1, conv2, conv3;
    BatchNormLayer bn1, bn2, bn3;
    bool has_projection = false;
    ConvLayer proj_conv;
    BatchNormLayer proj_bn;
    int in_channels = 0, mid_channels = 0, out_channels = 0, stride = 1;
};

/// Outputs of one forward pass that the activation-map module consumes:
/// per-block rectified tap maps pooled to S x S, the concatenated GAP feature
/// vector, and the head predictions.
struct ForwardCache {
    std::vector<Tensor> tap_maps;  // per block: N x C_b x S x S
    Tensor features;               // N x D
    Tensor predictions;            // N x num_outputs
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Multi-tap residual network: stem conv -> residual blocks -> per-block
/// average pooling to S x S -> GAP -> concat -> linear head.
class TapNet {
public:
    /// Deterministic He-initialized network for the config. Conv and head
    /// weights are fan-in scaled normal; batch norm starts at identity.
    static TapNet build(const TapNetConfig& config, SeededRng& rng);

    const TapNetConfig& config() const { return config_; }

    /// Inference forward: uses running batch-norm stats, touches no state.
    ForwardCache forward_infer(const Tensor& images) const;

    /// Training forward: normalizes by batch statistics and updates the
    /// running stats in place. Keeps every intermediate needed by backward().
    struct TrainContext;
    ForwardCache forward_train(const Tensor& images, TrainContext& ctx);

    /// Gradients of a scalar loss with respect to every trainable parameter,
    /// given d loss / d predictions. Order matches trainable_param_names().
    std::vector<NamedTensor> backward(const TrainContext& ctx, const Tensor& grad_predictions);

    /// Visits every parameter tensor in a fixed order. Running batch-norm
    /// stats are visited with trainable=false.
    void visit_params(const std::function<void(const std::string&, Tensor&, bool)>& fn);
    void visit_params(const std::function<void(const std::string&, const Tensor&, bool)>& fn) const;
    std::vector<std::string> trainable_param_names() const;
    std::size_t parameter_count() const;  // trainable only

    /// Head access for the activation-map module.
    const Tensor& head_weight() const { return head_weight_; }
    const Tensor& head_bias() const { return head_bias_; }

    void save(std::ostream& out) const;
    void save(const std::string& path) const;
    static TapNet load(std::istream& in);
    static TapNet load(const std::string& path);

private:
    friend struct TapNetIo;

    TapNetConfig config_;
    ConvLayer stem_conv_;
    BatchNormLayer stem_bn_;
    std::vector<ResidualBlock> blocks_;
    Tensor head_weight_;  // A x D
    Tensor head_bias_;    // A

    template <typename Net, typename Fn>
    static void visit_impl(Net& net, const Fn& fn);
};

/// Everything backward() needs from a training forward pass.
struct TapNet::TrainContext {
    struct BlockTrace {
        Tensor input;
        Tensor z1, r1, z2, r2, z3;       // conv outputs and rectified bn outputs
        BatchNormCache bn1, bn2, bn3;
        Tensor bn3_out;
        Tensor proj_out;                  // conv output on the projection path
        BatchNormCache proj_bn;
        Tensor sum;                       // main + shortcut, before the final relu
    };
    Tensor input;
    Tensor stem_z;
    BatchNormCache stem_bn;
    Tensor stem_out;                      // rectified stem output
    std::vector<BlockTrace> blocks;
    std::vector<Tensor> taps;             // block outputs at native resolution
    std::vector<Tensor> pooled;           // taps pooled to S x S
    std::vector<int> pool_windows;
    Tensor features;
    Tensor predictions;
};

/// Checkpoint container: magic "TAPN", u32 version=1, u32 record count, then
/// records of (u16 name length, name bytes, TNSR snapshot). Text payloads
/// (the embedded config) are stored as 1-d tensors of byte values.
void write_tapn(std::ostream& out, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> read_tapn(std::istream& in);
void write_tapn(const std::string& path, const std::vector<NamedTensor>& records);
std::vector<NamedTensor> read_tapn(const std::string& path);

Tensor text_to_tensor(const std::string& text);
std::string tensor_to_text(const Tensor& t);

}  // namespace aesth

#endif  // AESTH_MODEL_HPP_
