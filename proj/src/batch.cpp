#include "kac/batch.hpp"

#include <algorithm>
#include <cmath>

#include "kac/error.hpp"

namespace kac {
namespace {

std::size_t argmax_lowest(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

struct SampleWork {
  std::vector<double> f;
  std::vector<double> logits;
  std::vector<double> d_f;
};

// Shared forward + CE backward for one sample; returns its loss term.
double ce_sample(const Head& head, const Backbone& backbone, std::span<const double> x, int y_row,
                 std::size_t mask_lo, std::size_t mask_hi, double inv_batch, HeadGrads& sink,
                 Matrix* backbone_grad, SampleWork& w) {
  const std::size_t classes = head.num_classes();
  if (static_cast<std::size_t>(y_row) < mask_lo || static_cast<std::size_t>(y_row) >= mask_hi)
    throw ProtocolError("accumulate_ce_grads: label row " + std::to_string(y_row) +
                        " outside the loss mask");
  w.f.resize(head.feature_dim());
  w.logits.resize(classes);
  backbone.apply(x, w.f);
  head.forward(w.f, w.logits);
  std::span<double> probs(w.logits);
  softmax_range(probs, mask_lo, mask_hi);
  const double p_label = probs[static_cast<std::size_t>(y_row)];
  const double loss = -std::log(p_label) * inv_batch;
  // upstream = (softmax - onehot) / batch
  for (std::size_t c = mask_lo; c < mask_hi; ++c) probs[c] *= inv_batch;
  probs[static_cast<std::size_t>(y_row)] -= inv_batch;
  const bool need_df = backbone_grad != nullptr;
  if (need_df) {
    w.d_f.assign(head.feature_dim(), 0.0);
    head.backward(w.f, w.logits, sink, w.d_f);
    backbone.accumulate_grad(x, w.d_f, *backbone_grad);
  } else {
    head.backward(w.f, w.logits, sink, {});
  }
  return loss;
}

void check_batch_args(const Head& head, const Matrix& x, std::span<const int> y_rows) {
  if (!y_rows.empty() && y_rows.size() != x.rows())
    throw DimensionError("batch: label count does not match sample count");
  for (int y : y_rows)
    if (y < 0 || static_cast<std::size_t>(y) >= head.num_classes())
      throw ProtocolError("batch: label row " + std::to_string(y) +
                          " outside expanded class range of " +
                          std::to_string(head.num_classes()));
}

}  // namespace

Matrix batch_logits(const Head& head, const Backbone& backbone, const Matrix& x) {
  Matrix out(x.rows(), head.num_classes());
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(x.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t s = 0; s < m; ++s) {
    const auto si = static_cast<std::size_t>(s);
    std::vector<double> f(head.feature_dim());
    backbone.apply(x.row(si), f);
    head.forward(f, out.row(si));
  }
  return out;
}

std::size_t count_correct(const Head& head, const Backbone& backbone, const Matrix& x,
                          std::span<const int> y_rows) {
  check_batch_args(head, x, y_rows);
  const std::ptrdiff_t m = static_cast<std::ptrdiff_t>(x.rows());
  std::size_t correct = 0;
#pragma omp parallel for schedule(static) reduction(+ : correct)
  for (std::ptrdiff_t s = 0; s < m; ++s) {
    const auto si = static_cast<std::size_t>(s);
    std::vector<double> f(head.feature_dim());
    std::vector<double> logits(head.num_classes());
    backbone.apply(x.row(si), f);
    head.forward(f, logits);
    if (argmax_lowest(logits) == static_cast<std::size_t>(y_rows[si])) ++correct;
  }
  return correct;
}

double accumulate_ce_grads(const Head& head, const Backbone& backbone, const Matrix& x,
                           std::span<const std::size_t> sample_idx, std::span<const int> y_rows,
                           std::size_t mask_lo, std::size_t mask_hi, HeadGrads& head_sink,
                           Matrix* backbone_grad) {
  const std::size_t m = sample_idx.size();
  if (m == 0) throw ParameterError("accumulate_ce_grads: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(m);
  const std::size_t nchunks = (m + kGradChunk - 1) / kGradChunk;

  std::vector<HeadGrads> chunk_sink(nchunks);
  std::vector<Matrix> chunk_bb(nchunks);
  std::vector<double> chunk_loss(nchunks, 0.0);
  for (auto& s : chunk_sink) s.slots = head_sink.slots;  // shapes only
  for (auto& s : chunk_sink) s.zero();
  if (backbone_grad)
    for (auto& b : chunk_bb) b = Matrix(backbone_grad->rows(), backbone_grad->cols());

  const std::ptrdiff_t nc = static_cast<std::ptrdiff_t>(nchunks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < nc; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    SampleWork w;
    const std::size_t begin = c * kGradChunk;
    const std::size_t end = std::min(m, begin + kGradChunk);
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t row = sample_idx[s];
      chunk_loss[c] +=
          ce_sample(head, backbone, x.row(row), y_rows[row], mask_lo, mask_hi, inv_batch,
                    chunk_sink[c], backbone_grad ? &chunk_bb[c] : nullptr, w);
    }
  }

  // Merge in chunk order: the summation tree is fixed by kGradChunk, not by
  // the thread count.
  double loss = 0.0;
  for (std::size_t c = 0; c < nchunks; ++c) {
    loss += chunk_loss[c];
    head_sink.add(chunk_sink[c]);
    if (backbone_grad)
      for (std::size_t j = 0; j < backbone_grad->size(); ++j)
        backbone_grad->data()[j] += chunk_bb[c].data()[j];
  }
  if (!std::isfinite(loss)) throw NumericError("accumulate_ce_grads: non-finite loss");
  return loss;
}

namespace reference {

Matrix batch_logits(const Head& head, const Backbone& backbone, const Matrix& x) {
  Matrix out(x.rows(), head.num_classes());
  std::vector<double> f(head.feature_dim());
  for (std::size_t s = 0; s < x.rows(); ++s) {
    backbone.apply(x.row(s), f);
    head.forward(f, out.row(s));
  }
  return out;
}

std::size_t count_correct(const Head& head, const Backbone& backbone, const Matrix& x,
                          std::span<const int> y_rows) {
  check_batch_args(head, x, y_rows);
  std::size_t correct = 0;
  std::vector<double> f(head.feature_dim());
  std::vector<double> logits(head.num_classes());
  for (std::size_t s = 0; s < x.rows(); ++s) {
    backbone.apply(x.row(s), f);
    head.forward(f, logits);
    if (argmax_lowest(logits) == static_cast<std::size_t>(y_rows[s])) ++correct;
  }
  return correct;
}

double accumulate_ce_grads(const Head& head, const Backbone& backbone, const Matrix& x,
                           std::span<const std::size_t> sample_idx, std::span<const int> y_rows,
                           std::size_t mask_lo, std::size_t mask_hi, HeadGrads& head_sink,
                           Matrix* backbone_grad) {
  const std::size_t m = sample_idx.size();
  if (m == 0) throw ParameterError("accumulate_ce_grads: empty batch");
  const double inv_batch = 1.0 / static_cast<double>(m);
  SampleWork w;
  double loss = 0.0;
  for (std::size_t s = 0; s < m; ++s) {
    const std::size_t row = sample_idx[s];
    loss += ce_sample(head, backbone, x.row(row), y_rows[row], mask_lo, mask_hi, inv_batch,
                      head_sink, backbone_grad, w);
  }
  if (!std::isfinite(loss)) throw NumericError("accumulate_ce_grads: non-finite loss");
  return loss;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw DimensionError("reference::matmul: inner dimensions disagree, " + a.shape_str() +
                         " vs " + b.shape_str());
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

}  // namespace reference

}  // namespace kac
