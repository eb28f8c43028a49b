#pragma once

// Accuracy, confusion matrix and per-class classification report.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "csigait/error.hpp"

namespace csigait {

inline double accuracy(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size())
    throw ParameterError("accuracy: label vectors differ in length");
  if (y_true.empty()) throw ParameterError("accuracy: no samples");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) hits += y_true[i] == y_pred[i];
  return static_cast<double>(hits) / static_cast<double>(y_true.size());
}

struct ClassCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

// Rows are true classes, columns predicted classes.
struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<std::size_t> counts;
  std::vector<std::string> class_names;

  std::size_t operator()(std::size_t t, std::size_t p) const { return counts[t * classes + p]; }

  std::size_t total() const {
    std::size_t n = 0;
    for (auto c : counts) n += c;
    return n;
  }
  std::size_t trace() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < classes; ++i) n += (*this)(i, i);
    return n;
  }
  std::size_t row_sum(std::size_t i) const {
    std::size_t n = 0;
    for (std::size_t j = 0; j < classes; ++j) n += (*this)(i, j);
    return n;
  }
  std::size_t col_sum(std::size_t j) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < classes; ++i) n += (*this)(i, j);
    return n;
  }

  ClassCounts class_counts(std::size_t i) const {
    ClassCounts c;
    c.tp = (*this)(i, i);
    c.fp = col_sum(i) - c.tp;
    c.fn = row_sum(i) - c.tp;
    c.tn = total() - c.tp - c.fp - c.fn;
    return c;
  }

  std::string name(std::size_t i) const {
    return i < class_names.size() ? class_names[i] : std::to_string(i);
  }
};

inline ConfusionMatrix confusion(std::span<const int> y_true, std::span<const int> y_pred, std::size_t k) {
  if (y_true.size() != y_pred.size())
    throw ParameterError("confusion: label vectors differ in length");
  ConfusionMatrix cm;
  cm.classes = k;
  cm.counts.assign(k * k, 0);
  for (std::size_t n = 0; n < y_true.size(); ++n) {
    const int t = y_true[n], p = y_pred[n];
    if (t < 0 || static_cast<std::size_t>(t) >= k || p < 0 || static_cast<std::size_t>(p) >= k)
      throw ParameterError("confusion: label out of range at sample " + std::to_string(n));
    ++cm.counts[static_cast<std::size_t>(t) * k + static_cast<std::size_t>(p)];
  }
  return cm;
}

struct ClassScore {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
  // Set when a zero denominator forced a score to 0.
  bool undefined = false;
};

struct ClassReport {
  std::vector<ClassScore> classes;
  double macro_precision = 0, macro_recall = 0, macro_f1 = 0;
  std::size_t total_support = 0;
};

// precision = TP/(TP+FP), recall = TP/(TP+FN), F1 = 2 R P / (R + P); zero
// denominators score 0. Macro averages are unweighted over all classes.
inline ClassReport classification_report(const ConfusionMatrix& cm) {
  ClassReport r;
  r.classes.resize(cm.classes);
  for (std::size_t i = 0; i < cm.classes; ++i) {
    const auto c = cm.class_counts(i);
    auto& s = r.classes[i];
    s.support = c.tp + c.fn;
    const auto tp = static_cast<double>(c.tp);
    if (c.tp + c.fp > 0) s.precision = tp / static_cast<double>(c.tp + c.fp);
    else s.undefined = true;
    if (c.tp + c.fn > 0) s.recall = tp / static_cast<double>(c.tp + c.fn);
    else s.undefined = true;
    if (s.precision + s.recall > 0) s.f1 = 2.0 * (s.recall * s.precision) / (s.recall + s.precision);
    else s.undefined = true;
    r.macro_precision += s.precision;
    r.macro_recall += s.recall;
    r.macro_f1 += s.f1;
    r.total_support += s.support;
  }
  if (cm.classes > 0) {
    const auto k = static_cast<double>(cm.classes);
    r.macro_precision /= k;
    r.macro_recall /= k;
    r.macro_f1 /= k;
  }
  return r;
}

}  // namespace csigait
