#ifndef AESTH_LAYERS_HPP_
#define AESTH_LAYERS_HPP_

#include <map>
#include <span>
#include <string>

#include "aesth/tensor.hpp"

namespace aesth {

/// Gradients produced by a layer backward pass: gradient with respect to the
/// layer input plus one tensor per parameter, keyed by parameter name. Every
/// gradient has the dims of the forward-pass tensor it corresponds to.
struct LayerGrads {
    Tensor grad_input;
    std::map<std::string, Tensor> grad_params;
};

/// 2-D cross-correlation (no kernel flip).
/// input N x C_in x H x W, weight C_out x C_in x kh x kw, bias C_out.
/// Output spatial size: floor((H + 2*pad - kh) / stride) + 1, same for W.
Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int stride, int pad);

/// Analytic gradients of conv2d_forward. grad_output must have the forward
/// output dims. Param keys: "weight", "bias".
LayerGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                           const Tensor& grad_output, int stride, int pad);

enum class BnMode { kTrain, kInfer };

/// Per-channel running statistics carried across batches.
struct BatchNormStats {
    Tensor mean;  // C
    Tensor var;   // C

    static BatchNormStats identity(int channels);
};

/// Saved by a train-mode forward pass; consumed by batchnorm_backward.
struct BatchNormCache {
    Tensor normalized;  // x_hat, input dims
    Tensor inv_std;     // C, 1/sqrt(batch_var + eps)
};

struct BatchNormResult {
    Tensor output;
    BatchNormStats stats;   // updated running stats (train) or pass-through (infer)
    BatchNormCache cache;   // filled in train mode only
};

/// Batch normalization over N, H, W per channel.
/// Train mode normalizes by batch statistics (population variance) and updates
/// running stats by EMA: r' = (1 - momentum) * r + momentum * batch.
/// Infer mode normalizes by the running stats. Output = gamma * x_hat + beta.
/// Train mode requires N*H*W >= 2 per channel.
BatchNormResult batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                  const BatchNormStats& running, BnMode mode,
                                  float eps = 1e-5f, float momentum = 0.1f);

/// Gradients of train-mode batchnorm_forward. Param keys: "gamma", "beta".
LayerGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                              const Tensor& grad_output);

/// max(0, x) elementwise.
Tensor relu(const Tensor& input);

/// Masks grad_output where input <= 0 (subgradient 0 at exactly 0).
Tensor relu_backward(const Tensor& input, const Tensor& grad_output);

/// Mean pooling with square window. Output cell = arithmetic mean of its window.
Tensor avgpool2d(const Tensor& input, int window, int stride);

/// Spreads grad_output back over the pooled windows (divided by window area).
Tensor avgpool2d_backward(const Tensor& input, int window, int stride,
                          const Tensor& grad_output);

/// Spatial mean per channel: N x C x H x W -> N x C.
Tensor global_avg_pool(const Tensor& input);

/// Spreads grad_output / (H*W) over the spatial extent of input.
Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_output);

/// output[n,a] = sum_k weight[a,k] * input[n,k] + bias[a].
/// input N x D, weight A x D, bias A.
Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias);

/// Param keys: "weight", "bias".
LayerGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                    const Tensor& grad_output);

struct MseResult {
    float loss;
    Tensor grad;  // d loss / d pred
};

/// loss = (1/(N*A)) * sum (pred - target)^2 ; grad = 2*(pred - target)/(N*A).
MseResult mse_loss(const Tensor& pred, const Tensor& target);

/// Per-output weighted variant over N x A tensors:
/// loss = (1/(N*A)) * sum_n sum_a w[a]*(pred-target)^2. All-ones weights
/// reduce to mse_loss exactly.
MseResult weighted_mse_loss(const Tensor& pred, const Tensor& target,
                            std::span<const float> weights);

}  // namespace aesth

#endif  // AESTH_LAYERS_HPP_
