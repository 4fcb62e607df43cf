#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kac/basis.hpp"
#include "kac/layer_norm.hpp"
#include "kac/matrix.hpp"
#include "kac/rng.hpp"

namespace kac {

/// Named view over one parameter tensor of a head. Pointers stay valid
/// until the next expansion.
struct ParamRef {
  std::string name;
  double* data = nullptr;
  std::size_t size = 0;
  bool trainable = true;
  double lr_scale = 1.0;
};

/// Gradient buffers parallel to a head's params() list.
struct HeadGrads {
  std::vector<std::vector<double>> slots;

  void match(std::span<const ParamRef> params);
  void zero();
  void add(const HeadGrads& other);
  std::span<double> slot(std::size_t i) { return slots[i]; }
};

/// Classification head over a fixed feature embedding of dimension n.
/// Classes arrive in blocks; expand() appends rows for a new block and
/// leaves every previously created parameter bit-identical.
class Head {
 public:
  virtual ~Head() = default;

  virtual std::string kind() const = 0;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual const std::vector<std::size_t>& task_blocks() const = 0;

  virtual void forward(std::span<const double> f, std::span<double> logits) const = 0;

  /// Accumulates gradients of sum(upstream . logits) with respect to every
  /// parameter (into `sink`, parallel to params()) and, when `d_f` is
  /// nonempty, the input feature.
  virtual void backward(std::span<const double> f, std::span<const double> upstream,
                        HeadGrads& sink, std::span<double> d_f) const = 0;

  virtual void expand(std::size_t new_classes, Rng& rng) = 0;
  virtual std::vector<ParamRef> params() = 0;

  std::vector<double> forward(std::span<const double> f) const;

 protected:
  void check_feature(std::span<const double> f) const;
  void check_logits(std::span<const double> l) const;
};

/// Gaussian-bump head: layer norm, per-channel RBF expansion, one
/// consolidated weight row per class.
///
///   logits = W . flatten(Phi(LN(f))),  W in R^{C x (N*n)}
///
/// where Phi is the n x N matrix of bump values and flatten is row-major
/// (channel-major: flat index p*N + i). No bias, no linear shortcut.
class KacHead final : public Head {
 public:
  KacHead(std::size_t n, RbfGrid grid, double ln_eps = 1e-5);

  std::string kind() const override { return "kac"; }
  std::size_t feature_dim() const override { return n_; }
  std::size_t num_classes() const override { return weights.rows(); }
  const std::vector<std::size_t>& task_blocks() const override { return blocks; }
  void forward(std::span<const double> f, std::span<double> logits) const override;
  void backward(std::span<const double> f, std::span<const double> upstream, HeadGrads& sink,
                std::span<double> d_f) const override;
  void expand(std::size_t new_classes, Rng& rng) override;
  std::vector<ParamRef> params() override;

  /// flatten(Phi(LN(f))) of length N*n; exposed for tests and diagnostics.
  void feature_map(std::span<const double> f, std::span<double> phi_flat) const;

  /// Per-class, per-channel interest scores: sum of |W| over each channel's
  /// bump block, each row scaled by its max (all-zero rows stay zero).
  Matrix activation_map() const;

  using Head::forward;

  RbfGrid grid;
  LayerNorm ln;
  Matrix weights;  // C x (N*n)
  std::vector<std::size_t> blocks;

 private:
  std::size_t n_;
};

/// Rank-factored form of the bump head, kept solely as an algebraic
/// cross-check against the consolidated weights; it is never trained.
struct FactoredKacWeights {
  Matrix w_c;  // C x n
  Matrix w_q;  // N x C
};

/// diag(W_C . Phi(LN(f)) . W_q), evaluated by direct contraction.
std::vector<double> forward_factored(const FactoredKacWeights& fw, const RbfGrid& grid,
                                     const LayerNorm& ln, std::span<const double> f);

/// Consolidated matrix with W[c, p*N + i] = W_C[c,p] * W_q[i,c].
Matrix consolidate(const FactoredKacWeights& fw);

/// B-spline variant used by the ablations: spline weights over the
/// per-channel basis values, plus an optional silu residual path.
///
///   logits = spline_W . flatten(B(LN(f))) [+ residual_W . silu(LN(f))]
class BsplineHead final : public Head {
 public:
  BsplineHead(std::size_t n, BsplineBasis basis, bool residual, double ln_eps = 1e-5);

  std::string kind() const override { return residual_enabled ? "bspline_residual" : "bspline"; }
  std::size_t feature_dim() const override { return n_; }
  std::size_t num_classes() const override { return spline_weights.rows(); }
  const std::vector<std::size_t>& task_blocks() const override { return blocks; }
  void forward(std::span<const double> f, std::span<double> logits) const override;
  void backward(std::span<const double> f, std::span<const double> upstream, HeadGrads& sink,
                std::span<double> d_f) const override;
  void expand(std::size_t new_classes, Rng& rng) override;
  std::vector<ParamRef> params() override;

  using Head::forward;

  BsplineBasis basis;
  LayerNorm ln;
  Matrix spline_weights;    // C x (G*n), flat index p*G + g
  Matrix residual_weights;  // C x n when residual_enabled
  bool residual_enabled = false;
  std::vector<std::size_t> blocks;

 private:
  std::size_t n_;
};

/// Width-matched two-layer baseline: logits = W2 . silu(W1 f + b1) + b2
/// with hidden dimension N*n. frozen_first_layer reproduces the
/// fixed-random-projection ablation.
class MlpHead final : public Head {
 public:
  MlpHead(std::size_t n, std::size_t hidden, bool frozen_first_layer, Rng& rng);

  std::string kind() const override { return frozen_first ? "mlp_fixed" : "mlp"; }
  std::size_t feature_dim() const override { return n_; }
  std::size_t num_classes() const override { return w2.rows(); }
  const std::vector<std::size_t>& task_blocks() const override { return blocks; }
  void forward(std::span<const double> f, std::span<double> logits) const override;
  void backward(std::span<const double> f, std::span<const double> upstream, HeadGrads& sink,
                std::span<double> d_f) const override;
  void expand(std::size_t new_classes, Rng& rng) override;
  std::vector<ParamRef> params() override;

  using Head::forward;

  Matrix w1;  // hidden x n
  std::vector<double> b1;
  Matrix w2;  // C x hidden
  std::vector<double> b2;
  bool frozen_first = false;
  std::vector<std::size_t> blocks;

 private:
  std::size_t n_;
  std::size_t hidden_;
};

/// Plain affine classifier: logits = W f + b.
class LinearHead final : public Head {
 public:
  explicit LinearHead(std::size_t n);

  std::string kind() const override { return "linear"; }
  std::size_t feature_dim() const override { return n_; }
  std::size_t num_classes() const override { return weights.rows(); }
  const std::vector<std::size_t>& task_blocks() const override { return blocks; }
  void forward(std::span<const double> f, std::span<double> logits) const override;
  void backward(std::span<const double> f, std::span<const double> upstream, HeadGrads& sink,
                std::span<double> d_f) const override;
  void expand(std::size_t new_classes, Rng& rng) override;
  std::vector<ParamRef> params() override;

  using Head::forward;

  Matrix weights;  // C x n
  std::vector<double> bias;
  std::vector<std::size_t> blocks;

 private:
  std::size_t n_;
};

/// Construction-time description of a head; used by the experiment config.
struct HeadConfig {
  std::string kind = "kac";  // kac | linear | bspline | mlp
  std::string label;         // defaults to a derived name

  // shared bump/spline interval
  double lo = -2.0;
  double hi = 2.0;

  // kac
  std::size_t rbf_count = 4;
  double sigma = 1.0;

  // bspline
  std::size_t spline_basis_count = 4;
  std::size_t degree = 3;
  bool residual = false;

  // mlp
  std::size_t hidden = 0;  // 0 -> rbf_count * n
  bool frozen_first_layer = false;

  double ln_epsilon = 1e-5;

  std::string resolved_label() const;
};

std::unique_ptr<Head> make_head(const HeadConfig& cfg, std::size_t n, Rng& rng);

/// Weight-count summary for the bump head at a given size, with the
/// comparison against a plain linear head spelled out.
struct ParamCountReport {
  std::size_t n = 0;
  std::size_t rbf_count = 0;
  std::size_t classes = 0;
  std::size_t weight_matrix = 0;    // C * N * n
  std::size_t layer_norm = 0;       // 2n
  std::size_t linear_weights = 0;   // C * n
  std::size_t extra_over_linear = 0;
  std::string note;
};

ParamCountReport kac_param_count(std::size_t n, std::size_t rbf_count, std::size_t classes);

}  // namespace kac
