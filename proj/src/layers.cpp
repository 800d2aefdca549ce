#include "aesth/layers.hpp"

#include <cmath>
#include <cstddef>

namespace aesth {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

void require_4d(const Tensor& t, const char* name) {
    if (t.ndim() != 4) {
        throw ShapeError(std::string(name) + " must be 4-d (N x C x H x W), got " + t.dims_string());
    }
}

// Valid output range [lo, hi) so that lo*stride + offset >= 0 and
// (hi-1)*stride + offset < extent.
void valid_range(int offset, int stride, int extent, int out_extent, int* lo, int* hi) {
    *lo = offset >= 0 ? 0 : (-offset + stride - 1) / stride;
    int last = extent - 1 - offset;
    *hi = last < 0 ? 0 : last / stride + 1;
    if (*hi > out_extent) *hi = out_extent;
    if (*lo > *hi) *lo = *hi;
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weight, const Tensor& bias,
                      int stride, int pad) {
    require_4d(input, "conv input");
    require_4d(weight, "conv weight");
    require(bias.ndim() == 1, "conv bias must be 1-d");
    require(stride >= 1, "conv stride must be >= 1");
    require(pad >= 0, "conv pad must be >= 0");
    const int n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    require(weight.dim(1) == c_in, "conv weight expects " + std::to_string(weight.dim(1)) +
                                       " input channels, input has " + std::to_string(c_in));
    require(bias.dim(0) == c_out, "conv bias length must equal output channels");
    require(kh <= h + 2 * pad && kw <= w + 2 * pad, "conv kernel larger than padded input");

    const int h_out = (h + 2 * pad - kh) / stride + 1;
    const int w_out = (w + 2 * pad - kw) / stride + 1;
    Tensor out({n_batch, c_out, h_out, w_out});

    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(h_out) * w_out;
    for (int n = 0; n < n_batch; ++n) {
        const float* in_n = input.data() + static_cast<std::size_t>(n) * c_in * in_plane;
        float* out_n = out.data() + static_cast<std::size_t>(n) * c_out * out_plane;
        for (int co = 0; co < c_out; ++co) {
            float* dst = out_n + static_cast<std::size_t>(co) * out_plane;
            const float b = bias[static_cast<std::size_t>(co)];
            for (std::size_t i = 0; i < out_plane; ++i) dst[i] = b;
            const float* w_co = weight.data() + static_cast<std::size_t>(co) * c_in * kh * kw;
            for (int ci = 0; ci < c_in; ++ci) {
                const float* src = in_n + static_cast<std::size_t>(ci) * in_plane;
                const float* w_ci = w_co + static_cast<std::size_t>(ci) * kh * kw;
                for (int fy = 0; fy < kh; ++fy) {
                    const int dy = fy - pad;
                    int oh_lo, oh_hi;
                    valid_range(dy, stride, h, h_out, &oh_lo, &oh_hi);
                    for (int fx = 0; fx < kw; ++fx) {
                        const float wv = w_ci[fy * kw + fx];
                        const int dx = fx - pad;
                        int ow_lo, ow_hi;
                        valid_range(dx, stride, w, w_out, &ow_lo, &ow_hi);
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const float* row = src + static_cast<std::size_t>(oh * stride + dy) * w + dx;
                            float* orow = dst + static_cast<std::size_t>(oh) * w_out;
                            if (stride == 1) {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * row[ow];
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * row[ow * stride];
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

LayerGrads conv2d_backward(const Tensor& input, const Tensor& weight,
                           const Tensor& grad_output, int stride, int pad) {
    require_4d(input, "conv input");
    require_4d(weight, "conv weight");
    require_4d(grad_output, "conv grad_output");
    const int n_batch = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int c_out = weight.dim(0), kh = weight.dim(2), kw = weight.dim(3);
    require(weight.dim(1) == c_in, "conv weight/input channel mismatch");
    const int h_out = (h + 2 * pad - kh) / stride + 1;
    const int w_out = (w + 2 * pad - kw) / stride + 1;
    require(grad_output.dim(0) == n_batch && grad_output.dim(1) == c_out &&
                grad_output.dim(2) == h_out && grad_output.dim(3) == w_out,
            "conv grad_output dims " + grad_output.dims_string() + " do not match forward output");

    Tensor grad_input(input.dims());
    Tensor grad_weight(weight.dims());
    Tensor grad_bias({c_out});

    const std::size_t in_plane = static_cast<std::size_t>(h) * w;
    const std::size_t out_plane = static_cast<std::size_t>(h_out) * w_out;

    for (int co = 0; co < c_out; ++co) {
        double bias_acc = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const float* g = grad_output.data() +
                             (static_cast<std::size_t>(n) * c_out + co) * out_plane;
            float part = 0.0f;
            for (std::size_t i = 0; i < out_plane; ++i) part += g[i];
            bias_acc += part;
        }
        grad_bias[static_cast<std::size_t>(co)] = static_cast<float>(bias_acc);
    }

    for (int n = 0; n < n_batch; ++n) {
        const float* in_n = input.data() + static_cast<std::size_t>(n) * c_in * in_plane;
        float* gin_n = grad_input.data() + static_cast<std::size_t>(n) * c_in * in_plane;
        for (int co = 0; co < c_out; ++co) {
            const float* g = grad_output.data() +
                             (static_cast<std::size_t>(n) * c_out + co) * out_plane;
            const float* w_co = weight.data() + static_cast<std::size_t>(co) * c_in * kh * kw;
            float* gw_co = grad_weight.data() + static_cast<std::size_t>(co) * c_in * kh * kw;
            for (int ci = 0; ci < c_in; ++ci) {
                const float* src = in_n + static_cast<std::size_t>(ci) * in_plane;
                float* gin = gin_n + static_cast<std::size_t>(ci) * in_plane;
                const float* w_ci = w_co + static_cast<std::size_t>(ci) * kh * kw;
                float* gw_ci = gw_co + static_cast<std::size_t>(ci) * kh * kw;
                for (int fy = 0; fy < kh; ++fy) {
                    const int dy = fy - pad;
                    int oh_lo, oh_hi;
                    valid_range(dy, stride, h, h_out, &oh_lo, &oh_hi);
                    for (int fx = 0; fx < kw; ++fx) {
                        const int dx = fx - pad;
                        int ow_lo, ow_hi;
                        valid_range(dx, stride, w, w_out, &ow_lo, &ow_hi);
                        const float wv = w_ci[fy * kw + fx];
                        float wacc = 0.0f;
                        for (int oh = oh_lo; oh < oh_hi; ++oh) {
                            const float* grow = g + static_cast<std::size_t>(oh) * w_out;
                            const float* irow = src + static_cast<std::size_t>(oh * stride + dy) * w + dx;
                            float* girow = gin + static_cast<std::size_t>(oh * stride + dy) * w + dx;
                            if (stride == 1) {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                    girow[ow] += wv * grow[ow];
                                    wacc += grow[ow] * irow[ow];
                                }
                            } else {
                                for (int ow = ow_lo; ow < ow_hi; ++ow) {
                                    girow[ow * stride] += wv * grow[ow];
                                    wacc += grow[ow] * irow[ow * stride];
                                }
                            }
                        }
                        gw_ci[fy * kw + fx] += wacc;
                    }
                }
            }
        }
    }

    LayerGrads grads;
    grads.grad_input = std::move(grad_input);
    grads.grad_params["weight"] = std::move(grad_weight);
    grads.grad_params["bias"] = std::move(grad_bias);
    return grads;
}

BatchNormStats BatchNormStats::identity(int channels) {
    BatchNormStats s;
    s.mean = Tensor({channels});
    s.var = Tensor::full({channels}, 1.0f);
    return s;
}

BatchNormResult batchnorm_forward(const Tensor& input, const Tensor& gamma, const Tensor& beta,
                                  const BatchNormStats& running, BnMode mode,
                                  float eps, float momentum) {
    require_4d(input, "batchnorm input");
    const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    require(gamma.ndim() == 1 && gamma.dim(0) == c, "batchnorm gamma must have C elements");
    require(beta.ndim() == 1 && beta.dim(0) == c, "batchnorm beta must have C elements");
    require(running.mean.ndim() == 1 && running.mean.dim(0) == c &&
                running.var.ndim() == 1 && running.var.dim(0) == c,
            "batchnorm running stats must have C elements");

    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const std::size_t m = static_cast<std::size_t>(n_batch) * plane;

    BatchNormResult res;
    res.output = Tensor(input.dims());

    if (mode == BnMode::kTrain) {
        if (m < 2) {
            throw DegenerateBatchError("train-mode batch norm needs N*H*W >= 2, got " +
                                       std::to_string(m));
        }
        res.stats.mean = Tensor({c});
        res.stats.var = Tensor({c});
        res.cache.normalized = Tensor(input.dims());
        res.cache.inv_std = Tensor({c});
        for (int ci = 0; ci < c; ++ci) {
            double sum = 0.0, sq = 0.0;
            for (int n = 0; n < n_batch; ++n) {
                const float* src = input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    sum += src[i];
                    sq += static_cast<double>(src[i]) * src[i];
                }
            }
            const double mean = sum / static_cast<double>(m);
            const double var = sq / static_cast<double>(m) - mean * mean;
            const double var_c = var > 0.0 ? var : 0.0;
            const double inv_std = 1.0 / std::sqrt(var_c + static_cast<double>(eps));
            const float mean_f = static_cast<float>(mean);
            const float inv_f = static_cast<float>(inv_std);
            const float g = gamma[static_cast<std::size_t>(ci)];
            const float b = beta[static_cast<std::size_t>(ci)];
            for (int n = 0; n < n_batch; ++n) {
                const float* src = input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                float* xh = res.cache.normalized.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                float* dst = res.output.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                for (std::size_t i = 0; i < plane; ++i) {
                    const float v = (src[i] - mean_f) * inv_f;
                    xh[i] = v;
                    dst[i] = g * v + b;
                }
            }
            res.stats.mean[static_cast<std::size_t>(ci)] =
                (1.0f - momentum) * running.mean[static_cast<std::size_t>(ci)] +
                momentum * mean_f;
            res.stats.var[static_cast<std::size_t>(ci)] =
                (1.0f - momentum) * running.var[static_cast<std::size_t>(ci)] +
                momentum * static_cast<float>(var_c);
            res.cache.inv_std[static_cast<std::size_t>(ci)] = inv_f;
        }
    } else {
        res.stats = running;
        for (int ci = 0; ci < c; ++ci) {
            const float mean_f = running.mean[static_cast<std::size_t>(ci)];
            const float inv_f =
                 static_cast<float>(1.0 / std::sqrt(static_cast<double>(running.var[static_cast<std::size_t>(ci)]) +
                                                    static_cast<double>(eps)));
            const float g = gamma[static_cast<std::size_t>(ci)];
            const float b = beta[static_cast<std::size_t>(ci)];
            for (int n = 0; n < n_batch; ++n) {
                const float* src = input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                float* dst = res.output.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
                for (std::size_t i = 0; i < plane; ++i) dst[i] = g * (src[i] - mean_f) * inv_f + b;
            }
        }
    }
    return res;
}

LayerGrads batchnorm_backward(const BatchNormCache& cache, const Tensor& gamma,
                              const Tensor& grad_output) {
    require_4d(cache.normalized, "batchnorm cache");
    require(cache.normalized.same_dims(grad_output),
            "batchnorm grad_output dims do not match cached forward dims");
    const int n_batch = grad_output.dim(0), c = grad_output.dim(1);
    const int h = grad_output.dim(2), w = grad_output.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(n_batch) * static_cast<double>(plane);

    LayerGrads grads;
    grads.grad_input = Tensor(grad_output.dims());
    Tensor grad_gamma({c});
    Tensor grad_beta({c});

    for (int ci = 0; ci < c; ++ci) {
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int n = 0; n < n_batch; ++n) {
            const float* dy = grad_output.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            const float* xh = cache.normalized.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dy[i];
                sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
            }
        }
        grad_beta[static_cast<std::size_t>(ci)] = static_cast<float>(sum_dy);
        grad_gamma[static_cast<std::size_t>(ci)] = static_cast<float>(sum_dy_xhat);

        const double g = gamma[static_cast<std::size_t>(ci)];
        const double inv_std = cache.inv_std[static_cast<std::size_t>(ci)];
        const double k = g * inv_std / m;
        for (int n = 0; n < n_batch; ++n) {
            const float* dy = grad_output.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            const float* xh = cache.normalized.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            float* dx = grads.grad_input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                dx[i] = static_cast<float>(k * (m * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
            }
        }
    }
    grads.grad_params["gamma"] = std::move(grad_gamma);
    grads.grad_params["beta"] = std::move(grad_beta);
    return grads;
}

Tensor relu(const Tensor& input) {
    Tensor out(input.dims());
    const float* src = input.data();
    float* dst = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_output) {
    require(input.same_dims(grad_output), "relu grad_output dims must match input dims");
    Tensor out(input.dims());
    const float* src = input.data();
    const float* g = grad_output.data();
    float* dst = out.data();
    for (std::size_t i = 0; i < input.size(); ++i) dst[i] = src[i] > 0.0f ? g[i] : 0.0f;
    return out;
}

Tensor avgpool2d(const Tensor& input, int window, int stride) {
    require_4d(input, "avgpool input");
    require(window >= 1 && stride >= 1, "avgpool window and stride must be >= 1");
    const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    require(window <= h && window <= w,
            "avgpool window " + std::to_string(window) + " larger than input " + input.dims_string());
    const int h_out = (h - window) / stride + 1;
    const int w_out = (w - window) / stride + 1;
    Tensor out({n_batch, c, h_out, w_out});
    const double inv_area = 1.0 / (static_cast<double>(window) * window);
    for (int n = 0; n < n_batch; ++n) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = input.data() +
                               (static_cast<std::size_t>(n) * c + ci) * static_cast<std::size_t>(h) * w;
            float* dst = out.data() +
                         (static_cast<std::size_t>(n) * c + ci) * static_cast<std::size_t>(h_out) * w_out;
            for (int oh = 0; oh < h_out; ++oh) {
                for (int ow = 0; ow < w_out; ++ow) {
                    double acc = 0.0;
                    for (int fy = 0; fy < window; ++fy) {
                        const float* row = src + static_cast<std::size_t>(oh * stride + fy) * w + ow * stride;
                        for (int fx = 0; fx < window; ++fx) acc += row[fx];
                    }
                    dst[static_cast<std::size_t>(oh) * w_out + ow] = static_cast<float>(acc * inv_area);
                }
            }
        }
    }
    return out;
}

Tensor avgpool2d_backward(const Tensor& input, int window, int stride,
                          const Tensor& grad_output) {
    require_4d(input, "avgpool input");
    require_4d(grad_output, "avgpool grad_output");
    const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const int h_out = (h - window) / stride + 1;
    const int w_out = (w - window) / stride + 1;
    require(grad_output.dim(0) == n_batch && grad_output.dim(1) == c &&
                grad_output.dim(2) == h_out && grad_output.dim(3) == w_out,
            "avgpool grad_output dims do not match forward output");
    Tensor grad_input(input.dims());
    const float inv_area = 1.0f / (static_cast<float>(window) * window);
    for (int n = 0; n < n_batch; ++n) {
        for (int ci = 0; ci < c; ++ci) {
            float* gin = grad_input.data() +
                         (static_cast<std::size_t>(n) * c + ci) * static_cast<std::size_t>(h) * w;
            const float* g = grad_output.data() +
                             (static_cast<std::size_t>(n) * c + ci) * static_cast<std::size_t>(h_out) * w_out;
            for (int oh = 0; oh < h_out; ++oh) {
                for (int ow = 0; ow < w_out; ++ow) {
                    const float v = g[static_cast<std::size_t>(oh) * w_out + ow] * inv_area;
                    for (int fy = 0; fy < window; ++fy) {
                        float* row = gin + static_cast<std::size_t>(oh * stride + fy) * w + ow * stride;
                        for (int fx = 0; fx < window; ++fx) row[fx] += v;
                    }
                }
            }
        }
    }
    return grad_input;
}

Tensor global_avg_pool(const Tensor& input) {
    require_4d(input, "global_avg_pool input");
    const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Tensor out({n_batch, c});
    for (int n = 0; n < n_batch; ++n) {
        for (int ci = 0; ci < c; ++ci) {
            const float* src = input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            double acc = 0.0;
            for (std::size_t i = 0; i < plane; ++i) acc += src[i];
            out.at(n, ci) = static_cast<float>(acc / static_cast<double>(plane));
        }
    }
    return out;
}

Tensor global_avg_pool_backward(const Tensor& input, const Tensor& grad_output) {
    require_4d(input, "global_avg_pool input");
    const int n_batch = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    require(grad_output.ndim() == 2 && grad_output.dim(0) == n_batch && grad_output.dim(1) == c,
            "global_avg_pool grad_output must be N x C");
    Tensor grad_input(input.dims());
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const float inv = 1.0f / static_cast<float>(plane);
    for (int n = 0; n < n_batch; ++n) {
        for (int ci = 0; ci < c; ++ci) {
            const float v = grad_output.at(n, ci) * inv;
            float* dst = grad_input.data() + (static_cast<std::size_t>(n) * c + ci) * plane;
            for (std::size_t i = 0; i < plane; ++i) dst[i] = v;
        }
    }
    return grad_input;
}

Tensor fully_connected(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require(input.ndim() == 2, "fully_connected input must be N x D");
    require(weight.ndim() == 2, "fully_connected weight must be A x D");
    require(bias.ndim() == 1, "fully_connected bias must be 1-d");
    const int n_batch = input.dim(0), d = input.dim(1);
    const int a_out = weight.dim(0);
    require(weight.dim(1) == d, "fully_connected weight expects " + std::to_string(weight.dim(1)) +
                                    " features, input has " + std::to_string(d));
    require(bias.dim(0) == a_out, "fully_connected bias length must equal output count");
    Tensor out({n_batch, a_out});
    for (int n = 0; n < n_batch; ++n) {
        const float* in_row = input.data() + static_cast<std::size_t>(n) * d;
        for (int a = 0; a < a_out; ++a) {
            const float* w_row = weight.data() + static_cast<std::size_t>(a) * d;
            double acc = bias[static_cast<std::size_t>(a)];
            for (int k = 0; k < d; ++k) acc += static_cast<double>(in_row[k]) * w_row[k];
            out.at(n, a) = static_cast<float>(acc);
        }
    }
    return out;
}

LayerGrads fully_connected_backward(const Tensor& input, const Tensor& weight,
                                    const Tensor& grad_output) {
    require(input.ndim() == 2 && weight.ndim() == 2 && grad_output.ndim() == 2,
            "fully_connected backward expects 2-d tensors");
    const int n_batch = input.dim(0), d = input.dim(1);
    const int a_out = weight.dim(0);
    require(weight.dim(1) == d, "fully_connected weight/input mismatch");
    require(grad_output.dim(0) == n_batch && grad_output.dim(1) == a_out,
            "fully_connected grad_output dims do not match forward output");

    LayerGrads grads;
    grads.grad_input = Tensor({n_batch, d});
    Tensor grad_weight({a_out, d});
    Tensor grad_bias({a_out});

    for (int n = 0; n < n_batch; ++n) {
        const float* g_row = grad_output.data() + static_cast<std::size_t>(n) * a_out;
        const float* in_row = input.data() + static_cast<std::size_t>(n) * d;
        float* gin_row = grads.grad_input.data() + static_cast<std::size_t>(n) * d;
        for (int a = 0; a < a_out; ++a) {
            const float g = g_row[a];
            const float* w_row = weight.data() + static_cast<std::size_t>(a) * d;
            float* gw_row = grad_weight.data() + static_cast<std::size_t>(a) * d;
            for (int k = 0; k < d; ++k) {
                gin_row[k] += g * w_row[k];
                gw_row[k] += g * in_row[k];
            }
            grad_bias[static_cast<std::size_t>(a)] += g;
        }
    }
    grads.grad_params["weight"] = std::move(grad_weight);
    grads.grad_params["bias"] = std::move(grad_bias);
    return grads;
}

MseResult weighted_mse_loss(const Tensor& pred, const Tensor& target,
                            std::span<const float> weights) {
    require(pred.ndim() == 2, "mse pred must be N x A");
    require(pred.same_dims(target), "mse pred dims " + pred.dims_string() +
                                        " do not match target dims " + target.dims_string());
    const int n_batch = pred.dim(0), a_out = pred.dim(1);
    const bool weighted = !weights.empty();
    if (weighted && static_cast<int>(weights.size()) != a_out) {
        throw ShapeError("mse weights length must equal output count");
    }
    MseResult res;
    res.grad = Tensor(pred.dims());
    const float scale = 2.0f / static_cast<float>(static_cast<std::size_t>(n_batch) * a_out);
    double acc = 0.0;
    for (int n = 0; n < n_batch; ++n) {
        for (int a = 0; a < a_out; ++a) {
            const float d = pred.at(n, a) - target.at(n, a);
            const float w = weighted ? weights[static_cast<std::size_t>(a)] : 1.0f;
            acc += static_cast<double>(w) * static_cast<double>(d) * d;
            res.grad.at(n, a) = scale * w * d;
        }
    }
    res.loss = static_cast<float>(acc / static_cast<double>(static_cast<std::size_t>(n_batch) * a_out));
    return res;
}

MseResult mse_loss(const Tensor& pred, const Tensor& target) {
    return weighted_mse_loss(pred, target, {});
}

}  // namespace aesth
