#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kac/backbone.hpp"
#include "kac/heads.hpp"
#include "kac/matrix.hpp"

namespace kac {

/// Batch kernels over independent samples. These are the OpenMP-parallel
/// production paths; kac::reference holds the plain serial counterparts
/// used by the tests and the benchmark.
///
/// Determinism: logits/accuracy kernels write disjoint outputs per sample,
/// and gradient accumulation uses fixed-size sample chunks merged in chunk
/// order, so every result is bit-identical for any thread count.

/// Sample chunk width for deterministic gradient accumulation.
inline constexpr std::size_t kGradChunk = 16;

/// Row s holds head.forward(backbone(x[idx[s]])).
Matrix batch_logits(const Head& head, const Backbone& backbone, const Matrix& x);

/// Number of samples whose argmax logit (lowest index wins ties) equals
/// y_rows[s].
std::size_t count_correct(const Head& head, const Backbone& backbone, const Matrix& x,
                          std::span<const int> y_rows);

/// Softmax cross-entropy over logit rows [mask_lo, mask_hi), averaged over
/// the batch; accumulates parameter gradients into head_slots (parallel to
/// head params) and, when backbone_grad is nonnull, the backbone weight
/// gradient. Returns the mean loss.
double accumulate_ce_grads(const Head& head, const Backbone& backbone, const Matrix& x,
                           std::span<const std::size_t> sample_idx, std::span<const int> y_rows,
                           std::size_t mask_lo, std::size_t mask_hi, HeadGrads& head_sink,
                           Matrix* backbone_grad);

namespace reference {

Matrix batch_logits(const Head& head, const Backbone& backbone, const Matrix& x);
std::size_t count_correct(const Head& head, const Backbone& backbone, const Matrix& x,
                          std::span<const int> y_rows);
double accumulate_ce_grads(const Head& head, const Backbone& backbone, const Matrix& x,
                           std::span<const std::size_t> sample_idx, std::span<const int> y_rows,
                           std::size_t mask_lo, std::size_t mask_hi, HeadGrads& head_sink,
                           Matrix* backbone_grad);
Matrix matmul(const Matrix& a, const Matrix& b);

}  // namespace reference

}  // namespace kac
