#pragma once

// Adam optimizer, stratified splitting, the training loop and inference.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "csigait/error.hpp"
#include "csigait/nn/resnet.hpp"
#include "csigait/seed.hpp"

namespace csigait::nn {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

struct AdamState {
  std::vector<std::vector<double>> m, v;
  std::size_t t = 0;  // completed steps
};

// lr / (1 + decay * t) in learning-rate mode, lr otherwise.
inline double effective_learning_rate(double base_lr, double decay, DecayMode mode, std::size_t t) {
  return mode == DecayMode::learning_rate ? base_lr / (1.0 + decay * static_cast<double>(t)) : base_lr;
}

// One bias-corrected Adam update of a flat parameter block. `step` is the
// 1-based index of this update.
inline void adam_update(std::span<double> w, std::span<const double> g, std::span<double> m, std::span<double> v,
                        double lr, std::size_t step, double weight_decay = 0.0) {
  if (g.size() != w.size() || m.size() != w.size() || v.size() != w.size())
    throw ShapeError("adam: parameter, gradient and moment sizes differ");
  const double c1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(step));
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double gi = g[i] + weight_decay * w[i];
    m[i] = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * gi;
    v[i] = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * gi * gi;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    w[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEpsilon);
  }
}

inline void adam_step(std::span<Param* const> params, AdamState& state, double base_lr, double decay,
                      DecayMode mode = DecayMode::learning_rate) {
  if (state.m.empty()) {
    for (auto* p : params) {
      state.m.emplace_back(p->value.size(), 0.0);
      state.v.emplace_back(p->value.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam: state does not match parameter list");
  const double lr = effective_learning_rate(base_lr, decay, mode, state.t);
  const double wd = mode == DecayMode::weight ? decay : 0.0;
  for (std::size_t i = 0; i < params.size(); ++i)
    adam_update(params[i]->value.data, params[i]->grad.data, state.m[i], state.v[i], lr, state.t + 1, wd);
  ++state.t;
}

// One input for the network: flattened (C, H, W) features and a class label.
struct Example {
  std::vector<double> x;
  int label = 0;
};

struct Split {
  std::vector<std::size_t> train, test;
  std::vector<std::size_t> test_per_class;
};

// Per-class test counts by largest remainder so the total is
// round(test_fraction * N); every class keeps at least one sample on each side.
inline std::vector<std::size_t> stratified_test_counts(std::span<const std::size_t> class_sizes, double test_fraction) {
  const std::size_t total = std::accumulate(class_sizes.begin(), class_sizes.end(), std::size_t{0});
  const auto target = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(total)));
  std::vector<std::size_t> counts(class_sizes.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    const double exact = test_fraction * static_cast<double>(class_sizes[c]);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    rem.emplace_back(exact - std::floor(exact), c);
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < rem.size(); ++i) {
    ++counts[rem[i].second];
    ++assigned;
  }
  for (std::size_t c = 0; c < class_sizes.size(); ++c) {
    if (class_sizes[c] == 0) continue;
    counts[c] = std::clamp<std::size_t>(counts[c], 1, class_sizes[c] - 1);
  }
  return counts;
}

// Within each class, samples are ordered by FNV-1a(key) mixed with the seed; the first
// ones go to the test side. Keys are stable identifiers such as file paths.
inline Split stratified_split(std::span<const int> labels, std::span<const std::string> keys, std::uint64_t seed,
                              double test_fraction = 0.15) {
  if (keys.size() != labels.size()) throw ParameterError("split: one key per label required");
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw ParameterError("split: negative label");
    max_label = std::max(max_label, l);
  }
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(max_label + 1));
  for (std::size_t i = 0; i < labels.size(); ++i) members[static_cast<std::size_t>(labels[i])].push_back(i);
  std::vector<std::size_t> sizes;
  for (std::size_t c = 0; c < members.size(); ++c) {
    if (members[c].empty()) continue;
    if (members[c].size() < 2)
      throw DataError("split: class " + std::to_string(c) + " has fewer than two samples");
  }
  std::size_t present = 0;
  for (auto& m : members) {
    sizes.push_back(m.size());
    present += !m.empty();
  }
  if (present < 2) throw DataError("split: need at least two classes");

  const auto counts = stratified_test_counts(sizes, test_fraction);
  Split s;
  s.test_per_class = counts;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto& m = members[c];
    std::vector<std::pair<std::uint64_t, std::size_t>> order;
    for (auto i : m) order.emplace_back(derive_seed(seed, fnv1a(keys[i])), i);
    std::sort(order.begin(), order.end());
    for (std::size_t j = 0; j < order.size(); ++j) (j < counts[c] ? s.test : s.train).push_back(order[j].second);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline Split stratified_split(std::span<const int> labels, std::uint64_t seed, double test_fraction = 0.15) {
  std::vector<std::string> keys(labels.size());
  for (std::size_t i = 0; i < keys.size(); ++i) keys[i] = std::to_string(i);
  return stratified_split(labels, keys, seed, test_fraction);
}

inline Tensor4 make_batch(std::span<const Example> data, std::span<const std::size_t> idx, const ModelConfig& cfg,
                          std::vector<int>* labels = nullptr) {
  const std::size_t per = cfg.in_channels * cfg.in_h * cfg.in_w;
  Tensor4 x(idx.size(), cfg.in_channels, cfg.in_h, cfg.in_w);
  if (labels) labels->clear();
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const auto& e = data[idx[b]];
    if (e.x.size() != per)
      throw ShapeError("example has " + std::to_string(e.x.size()) + " features, model expects " + std::to_string(per));
    std::copy(e.x.begin(), e.x.end(), x.sample(b));
    if (labels) labels->push_back(e.label);
  }
  return x;
}

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
};

struct Evaluation {
  std::vector<int> predicted;
  std::vector<int> truth;
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax with ties to the lowest index.
inline int argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

// Inference-mode pass over a set of examples in fixed-size chunks.
inline Evaluation evaluate(ResNet& model, std::span<const Example> data, std::size_t chunk = 32) {
  Evaluation ev;
  const auto& cfg = model.config();
  if (data.empty()) return ev;
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::size_t hits = 0;
  std::vector<int> labels;
  for (std::size_t start = 0; start < data.size(); start += chunk) {
    const std::size_t end = std::min(data.size(), start + chunk);
    const std::span<const std::size_t> part(idx.data() + start, end - start);
    const Tensor4 logits = model.forward(make_batch(data, part, cfg, &labels), Mode::infer);
    const auto loss = softmax_cross_entropy(logits, labels);
    ev.loss += loss.loss * static_cast<double>(part.size());
    for (std::size_t b = 0; b < part.size(); ++b) {
      const int p = argmax({loss.probs.data() + b * cfg.classes, cfg.classes});
      ev.predicted.push_back(p);
      ev.truth.push_back(labels[b]);
      hits += p == labels[b];
    }
  }
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  ev.loss /= static_cast<double>(data.size());
  return ev;
}

struct Prediction {
  int label = 0;
  std::vector<double> probs;
};

inline Prediction predict(ResNet& model, const Example& e) {
  const std::size_t idx = 0;
  const Tensor4 logits = model.forward(make_batch({&e, 1}, {&idx, 1}, model.config()), Mode::infer);
  Prediction p;
  p.probs = softmax_rows(logits.data, model.config().classes);
  p.label = argmax(p.probs);
  return p;
}

// Trains on `train` with per-epoch shuffles from cfg.seed, reporting running
// train loss/accuracy (train-mode batch norm) and inference-mode test accuracy.
inline std::vector<EpochStats> fit(ResNet& model, std::span<const Example> train, std::span<const Example> test,
                                   const ModelConfig& cfg) {
  if (train.empty()) throw DataError("training set is empty");
  auto params = model.params();
  AdamState adam;
  std::vector<EpochStats> history;
  std::vector<std::size_t> order(train.size());
  std::vector<int> labels;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(cfg.seed, 0xE90C, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    std::size_t hits = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      // A trailing single-sample batch joins the previous one.
      if (order.size() - end == 1) end = order.size();
      const std::span<const std::size_t> part(order.data() + start, end - start);
      const Tensor4 x = make_batch(train, part, cfg, &labels);
      model.zero_grad();
      const Tensor4 logits = model.forward(x, Mode::train);
      const auto loss = softmax_cross_entropy(logits, labels);
      model.backward(loss.grad_logits);
      adam_step(params, adam, cfg.learning_rate, cfg.decay, cfg.decay_mode);
      loss_sum += loss.loss * static_cast<double>(part.size());
      for (std::size_t b = 0; b < part.size(); ++b)
        hits += argmax({loss.probs.data() + b * cfg.classes, cfg.classes}) == labels[b];
      start = end;
    }
    EpochStats st;
    st.epoch = epoch + 1;
    st.train_loss = loss_sum / static_cast<double>(train.size());
    st.train_acc = static_cast<double>(hits) / static_cast<double>(train.size());
    st.test_acc = test.empty() ? 0.0 : evaluate(model, test).accuracy;
    history.push_back(st);
  }
  return history;
}

struct TrainResult {
  std::vector<EpochStats> history;
  Split split;
};

// Stratified split of `dataset` followed by fit().
inline TrainResult train(ResNet& model, std::span<const Example> dataset, const ModelConfig& cfg) {
  std::vector<int> labels;
  for (const auto& e : dataset) labels.push_back(e.label);
  TrainResult r;
  r.split = stratified_split(labels, cfg.seed, cfg.test_fraction);
  std::vector<Example> tr, te;
  for (auto i : r.split.train) tr.push_back(dataset[i]);
  for (auto i : r.split.test) te.push_back(dataset[i]);
  r.history = fit(model, tr, te, cfg);
  return r;
}

}  // namespace csigait::nn
