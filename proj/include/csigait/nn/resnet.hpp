#pragma once

// ResNet-18 built from the kernels in ops.hpp. Layers own their parameters and
// cache what their backward pass needs from the latest forward pass.

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "csigait/nn/ops.hpp"
#include "csigait/nn/tensor.hpp"

namespace csigait::nn {

enum class DecayMode { learning_rate, weight };

struct ModelConfig {
  std::size_t in_channels = 1;
  std::size_t in_h = 270;
  std::size_t in_w = 500;
  std::size_t classes = 30;
  std::array<std::size_t, 4> widths{64, 128, 256, 512};
  std::array<std::size_t, 4> blocks{2, 2, 2, 2};
  double learning_rate = 1e-3;
  double decay = 1e-2;
  DecayMode decay_mode = DecayMode::learning_rate;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double test_fraction = 0.15;
  std::uint64_t seed = 0;

  static ModelConfig full() { return {}; }
  static ModelConfig desk() {
    ModelConfig c;
    c.in_h = 64;
    c.in_w = 125;
    c.widths = {8, 16, 32, 64};
    return c;
  }

  void validate() const {
    if (in_channels == 0 || in_h == 0 || in_w == 0) throw ConfigError("model input dims must be positive");
    if (classes < 2) throw ConfigError("model needs at least two classes");
    for (auto w : widths)
      if (w == 0) throw ConfigError("stage widths must be positive");
    for (auto b : blocks)
      if (b == 0) throw ConfigError("blocks per stage must be positive");
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (!(decay >= 0)) throw ConfigError("decay must be >= 0");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("test fraction must be in (0, 1)");
  }
};

class Conv2d {
public:
  Conv2d() = default;
  Conv2d(const std::string& name, std::size_t in, std::size_t out, std::size_t k, ConvGeometry g)
      : weight(name + ".weight", Tensor4(out, in, k, k)), geom(g) {}

  Tensor4 forward(const Tensor4& x) {
    x_ = x;
    return conv2d_forward(x, weight.value, geom);
  }
  Tensor4 backward(const Tensor4& grad_out) {
    auto g = conv2d_backward(x_, weight.value, grad_out, geom);
    for (std::size_t i = 0; i < g.grad_k.size(); ++i) weight.grad.data[i] += g.grad_k.data[i];
    return std::move(g.grad_x);
  }

  Param weight;
  ConvGeometry geom;

private:
  Tensor4 x_;
};

class BatchNorm2d {
public:
  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, std::size_t ch)
      : gamma(name + ".gamma", Tensor4(ch, 1, 1, 1, 1.0)),
        beta(name + ".beta", Tensor4(ch, 1, 1, 1, 0.0)),
        running_mean(ch, 1, 1, 1, 0.0),
        running_var(ch, 1, 1, 1, 1.0),
        name_(name) {}

  Tensor4 forward(const Tensor4& x, Mode mode) {
    return batchnorm_forward(x, gamma.value.data, beta.value.data, running_mean.data, running_var.data, mode,
                             &cache_);
  }
  Tensor4 backward(const Tensor4& grad_out) {
    auto g = batchnorm_backward(cache_, gamma.value.data, grad_out);
    for (std::size_t c = 0; c < g.grad_gamma.size(); ++c) {
      gamma.grad.data[c] += g.grad_gamma[c];
      beta.grad.data[c] += g.grad_beta[c];
    }
    return std::move(g.grad_x);
  }
  const std::string& name() const { return name_; }

  Param gamma, beta;
  Tensor4 running_mean, running_var;

private:
  BatchNormCache cache_;
  std::string name_;
};

enum class BlockKind { identity, convolutional };

// FNV-style fold of the sign bits of t into h.
inline std::uint64_t sign_pattern(const Tensor4& t, std::uint64_t h) {
  for (double v : t.data) h = (h ^ static_cast<std::uint64_t>(v > 0)) * 0x100000001b3ULL;
  return h;
}

// Main path conv3x3(stride) -> BN -> ReLU -> conv3x3 -> BN; skip path is the
// input itself (identity) or conv1x1(stride) -> BN (convolutional);
// output = ReLU(main + skip).
class ResidualBlock {
public:
  ResidualBlock() = default;
  ResidualBlock(const std::string& name, BlockKind kind, std::size_t in, std::size_t out, std::size_t stride)
      : kind_(kind),
        conv1(name + ".conv1", in, out, 3, {stride, 1}),
        bn1(name + ".bn1", out),
        conv2(name + ".conv2", out, out, 3, {1, 1}),
        bn2(name + ".bn2", out) {
    if (kind == BlockKind::identity && (in != out || stride != 1))
      throw ConfigError("identity block " + name + " needs equal channels and stride 1 (got " +
                        std::to_string(in) + "->" + std::to_string(out) + ", stride " + std::to_string(stride) + ")");
    if (kind == BlockKind::convolutional) {
      proj = Conv2d(name + ".proj", in, out, 1, {stride, 0});
      proj_bn = BatchNorm2d(name + ".proj_bn", out);
    }
  }

  Tensor4 forward(const Tensor4& x, Mode mode) {
    Tensor4 h = bn1.forward(conv1.forward(x), mode);
    pre_relu1_ = h;
    h = bn2.forward(conv2.forward(relu(h)), mode);
    if (kind_ == BlockKind::convolutional) {
      const Tensor4 s = proj_bn.forward(proj.forward(x), mode);
      require_same_shape(h, s, "residual block");
      for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += s.data[i];
    } else {
      require_same_shape(h, x, "residual block");
      for (std::size_t i = 0; i < h.size(); ++i) h.data[i] += x.data[i];
    }
    pre_relu_out_ = h;
    return relu(h);
  }

  Tensor4 backward(const Tensor4& grad_out) {
    const Tensor4 g = relu_backward(pre_relu_out_, grad_out);
    Tensor4 gm = bn2.backward(g);
    gm = conv2.backward(gm);
    gm = relu_backward(pre_relu1_, gm);
    gm = bn1.backward(gm);
    Tensor4 gx = conv1.backward(gm);
    if (kind_ == BlockKind::convolutional) {
      const Tensor4 gs = proj.backward(proj_bn.backward(g));
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += gs.data[i];
    } else {
      for (std::size_t i = 0; i < gx.size(); ++i) gx.data[i] += g.data[i];
    }
    return gx;
  }

  BlockKind kind() const { return kind_; }

  // Folds the ReLU on/off pattern of the latest forward pass into h.
  std::uint64_t activation_signature(std::uint64_t h) const {
    h = sign_pattern(pre_relu1_, h);
    return sign_pattern(pre_relu_out_, h);
  }

  template <typename F>
  void for_each_param(F&& f) {
    f(conv1.weight);
    f(bn1.gamma);
    f(bn1.beta);
    f(conv2.weight);
    f(bn2.gamma);
    f(bn2.beta);
    if (kind_ == BlockKind::convolutional) {
      f(proj.weight);
      f(proj_bn.gamma);
      f(proj_bn.beta);
    }
  }

  template <typename F>
  void for_each_batchnorm(F&& f) {
    f(bn1);
    f(bn2);
    if (kind_ == BlockKind::convolutional) f(proj_bn);
  }

  std::vector<Conv2d*> convs() {
    std::vector<Conv2d*> v{&conv1, &conv2};
    if (kind_ == BlockKind::convolutional) v.push_back(&proj);
    return v;
  }

private:
  BlockKind kind_ = BlockKind::identity;

public:
  Conv2d conv1;
  BatchNorm2d bn1;
  Conv2d conv2;
  BatchNorm2d bn2;
  Conv2d proj;
  BatchNorm2d proj_bn;

private:
  Tensor4 pre_relu1_, pre_relu_out_;
};

// Stem conv7x7/2 -> BN -> ReLU -> maxpool3x3/2, four stages of residual
// blocks, global average pool, dense head producing class logits.
class ResNet {
public:
  ResNet() = default;
  explicit ResNet(const ModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    stem_ = Conv2d("stem.conv", cfg.in_channels, cfg.widths[0], 7, {2, 3});
    stem_bn_ = BatchNorm2d("stem.bn", cfg.widths[0]);
    std::size_t in = cfg.widths[0];
    for (std::size_t s = 0; s < 4; ++s)
      for (std::size_t b = 0; b < cfg.blocks[s]; ++b) {
        const std::size_t out = cfg.widths[s];
        const std::size_t stride = (s > 0 && b == 0) ? 2 : 1;
        const BlockKind kind = (in == out && stride == 1) ? BlockKind::identity : BlockKind::convolutional;
        blocks_.emplace_back("stage" + std::to_string(s + 1) + ".block" + std::to_string(b + 1), kind, in, out,
                             stride);
        in = out;
      }
    fc_w_ = Param("fc.weight", Tensor4(cfg.classes, in, 1, 1));
    fc_b_ = Param("fc.bias", Tensor4(cfg.classes, 1, 1, 1));
  }

  const ModelConfig& config() const { return cfg_; }

  // x is (N, in_channels, in_h, in_w); returns logits (N, classes, 1, 1).
  Tensor4 forward(const Tensor4& x, Mode mode) {
    if (x.c != cfg_.in_channels || x.h != cfg_.in_h || x.w != cfg_.in_w)
      throw ShapeError("model expects input (N," + std::to_string(cfg_.in_channels) + "," + std::to_string(cfg_.in_h) +
                       "," + std::to_string(cfg_.in_w) + "), got " + x.shape_str());
    Tensor4 h = stem_bn_.forward(stem_.forward(x), mode);
    stem_pre_ = h;
    pool_in_ = relu(h);
    h = maxpool_forward(pool_in_, 3, 2, 1, &pool_argmax_);
    for (auto& b : blocks_) h = b.forward(h, mode);
    gap_in_ = h;
    feat_ = global_avgpool_forward(h);
    return dense_forward(feat_, fc_w_.value, fc_b_.value);
  }

  // Accumulates parameter gradients; returns the gradient w.r.t. the input.
  Tensor4 backward(const Tensor4& grad_logits) {
    auto d = dense_backward(feat_, fc_w_.value, grad_logits);
    for (std::size_t i = 0; i < d.grad_w.size(); ++i) fc_w_.grad.data[i] += d.grad_w.data[i];
    for (std::size_t i = 0; i < d.grad_b.size(); ++i) fc_b_.grad.data[i] += d.grad_b.data[i];
    Tensor4 g = global_avgpool_backward(gap_in_, d.grad_x);
    for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = it->backward(g);
    g = maxpool_backward(pool_in_, pool_argmax_, g);
    g = relu_backward(stem_pre_, g);
    g = stem_bn_.backward(g);
    return stem_.backward(g);
  }

  // Learnable parameters in graph order.
  std::vector<Param*> params() {
    std::vector<Param*> v{&stem_.weight, &stem_bn_.gamma, &stem_bn_.beta};
    for (auto& b : blocks_) b.for_each_param([&](Param& p) { v.push_back(&p); });
    v.push_back(&fc_w_);
    v.push_back(&fc_b_);
    return v;
  }

  std::vector<BatchNorm2d*> batchnorms() {
    std::vector<BatchNorm2d*> v{&stem_bn_};
    for (auto& b : blocks_) b.for_each_batchnorm([&](BatchNorm2d& bn) { v.push_back(&bn); });
    return v;
  }

  // Every persisted tensor in graph order: each layer's parameters, with
  // batch-norm running mean and variance following that layer's beta.
  std::vector<std::pair<std::string, Tensor4*>> state_tensors() {
    std::vector<std::pair<std::string, Tensor4*>> v;
    auto add_bn = [&](BatchNorm2d& bn) {
      v.emplace_back(bn.gamma.name, &bn.gamma.value);
      v.emplace_back(bn.beta.name, &bn.beta.value);
      v.emplace_back(bn.name() + ".running_mean", &bn.running_mean);
      v.emplace_back(bn.name() + ".running_var", &bn.running_var);
    };
    v.emplace_back(stem_.weight.name, &stem_.weight.value);
    add_bn(stem_bn_);
    for (auto& b : blocks_) {
      v.emplace_back(b.conv1.weight.name, &b.conv1.weight.value);
      add_bn(b.bn1);
      v.emplace_back(b.conv2.weight.name, &b.conv2.weight.value);
      add_bn(b.bn2);
      if (b.kind() == BlockKind::convolutional) {
        v.emplace_back(b.proj.weight.name, &b.proj.weight.value);
        add_bn(b.proj_bn);
      }
    }
    v.emplace_back(fc_w_.name, &fc_w_.value);
    v.emplace_back(fc_b_.name, &fc_b_.value);
    return v;
  }

  void zero_grad() {
    for (auto* p : params()) p->grad.zero();
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  // Convolutions (stem + main paths) plus the dense head; projections are not
  // counted, matching the usual ResNet depth convention.
  std::size_t weighted_layer_count() const {
    return 1 + 2 * blocks_.size() + 1;
  }

  std::vector<ResidualBlock>& blocks() { return blocks_; }

  // Identifies the piecewise-linear region of the latest forward pass: ReLU
  // signs and max-pool winners. Equal signatures mean no kink was crossed.
  std::uint64_t activation_signature() const {
    std::uint64_t h = sign_pattern(stem_pre_, 0xcbf29ce484222325ULL);
    for (auto a : pool_argmax_) h = (h ^ a) * 0x100000001b3ULL;
    for (const auto& b : blocks_) h = b.activation_signature(h);
    return h;
  }

private:
  ModelConfig cfg_;
  Conv2d stem_;
  BatchNorm2d stem_bn_;
  std::vector<ResidualBlock> blocks_;
  Param fc_w_, fc_b_;
  Tensor4 stem_pre_, pool_in_, gap_in_, feat_;
  std::vector<std::size_t> pool_argmax_;
};

// He initialization, N(0, 2 / fan_in), for convolutions and the dense head;
// biases and batch-norm shifts at 0, scales at 1.
inline ResNet build_resnet18(const ModelConfig& cfg, std::uint64_t seed) {
  ResNet net(cfg);
  std::mt19937_64 rng(seed);
  for (auto* p : net.params()) {
    const auto& name = p->name;
    const bool is_weight = name.ends_with(".weight");
    if (!is_weight) continue;
    const std::size_t fan_in = p->value.c * p->value.h * p->value.w;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
    for (auto& v : p->value.data) v = dist(rng);
  }
  return net;
}

}  // namespace csigait::nn
