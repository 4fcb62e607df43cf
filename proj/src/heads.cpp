#include "kac/heads.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kac/error.hpp"

namespace kac {

void HeadGrads::match(std::span<const ParamRef> params) {
  slots.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    slots[i].assign(params[i].size, 0.0);
  }
}

void HeadGrads::zero() {
  for (auto& s : slots) std::fill(s.begin(), s.end(), 0.0);
}

void HeadGrads::add(const HeadGrads& other) {
  for (std::size_t i = 0; i < slots.size(); ++i)
    for (std::size_t j = 0; j < slots[i].size(); ++j) slots[i][j] += other.slots[i][j];
}

std::vector<double> Head::forward(std::span<const double> f) const {
  std::vector<double> logits(num_classes());
  forward(f, logits);
  return logits;
}

void Head::check_feature(std::span<const double> f) const {
  if (f.size() != feature_dim()) {
    std::ostringstream os;
    os << kind() << ": feature length " << f.size() << " does not match embedding dim "
       << feature_dim();
    throw DimensionError(os.str());
  }
}

void Head::check_logits(std::span<const double> l) const {
  if (l.size() != num_classes()) {
    std::ostringstream os;
    os << kind() << ": logit length " << l.size() << " does not match class count "
       << num_classes();
    throw DimensionError(os.str());
  }
}

namespace {

// New classifier rows draw uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
// row by row, column by column.
void fill_new_rows(Matrix& w, std::size_t first_row, Rng& rng) {
  const double a = 1.0 / std::sqrt(static_cast<double>(w.cols()));
  for (std::size_t r = first_row; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-a, a);
}

void require_new_classes(std::size_t new_classes) {
  if (new_classes == 0) throw ParameterError("expand: new_classes must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// KacHead

KacHead::KacHead(std::size_t n, RbfGrid grid_, double ln_eps)
    : grid(std::move(grid_)), ln(n, ln_eps), weights(0, grid.count() * n), n_(n) {
  if (n == 0) throw ParameterError("KacHead: embedding dim must be >= 1");
  grid.validate();
}

void KacHead::feature_map(std::span<const double> f, std::span<double> phi_flat) const {
  check_feature(f);
  const std::size_t nb = grid.count();
  std::vector<double> xprime(n_);
  ln.forward(f, xprime);
  for (std::size_t p = 0; p < n_; ++p) rbf_eval(grid, xprime[p], phi_flat.subspan(p * nb, nb));
}

void KacHead::forward(std::span<const double> f, std::span<double> logits) const {
  check_logits(logits);
  std::vector<double> phi(weights.cols());
  feature_map(f, phi);
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    double acc = 0.0;
    const double* row = weights.data() + c * weights.cols();
    for (std::size_t j = 0; j < weights.cols(); ++j) acc += row[j] * phi[j];
    logits[c] = acc;
  }
}

void KacHead::backward(std::span<const double> f, std::span<const double> upstream,
                       HeadGrads& sink, std::span<double> d_f) const {
  check_feature(f);
  check_logits(upstream);
  const std::size_t nb = grid.count();
  LayerNorm::Cache cache;
  std::vector<double> xprime(n_);
  ln.forward(f, xprime, &cache);
  std::vector<double> phi(nb), dphi(nb);

  auto& d_w = sink.slots[0];
  auto& d_gain = sink.slots[1];
  auto& d_bias = sink.slots[2];
  std::vector<double> d_xprime(n_, 0.0);

  for (std::size_t p = 0; p < n_; ++p) {
    rbf_eval(grid, xprime[p], phi);
    rbf_grad(grid, xprime[p], dphi);
    double acc = 0.0;
    for (std::size_t c = 0; c < weights.rows(); ++c) {
      const double up = upstream[c];
      if (up == 0.0) continue;
      const double* row = weights.data() + c * weights.cols() + p * nb;
      double* gw = d_w.data() + c * weights.cols() + p * nb;
      for (std::size_t i = 0; i < nb; ++i) {
        gw[i] += up * phi[i];
        acc += up * row[i] * dphi[i];
      }
    }
    d_xprime[p] = acc;
  }
  ln.backward(cache, d_xprime, d_gain, d_bias, d_f);
}

void KacHead::expand(std::size_t new_classes, Rng& rng) {
  require_new_classes(new_classes);
  const std::size_t first = weights.rows();
  weights.append_rows(new_classes);
  fill_new_rows(weights, first, rng);
  blocks.push_back(new_classes);
}

std::vector<ParamRef> KacHead::params() {
  return {
      {"W", weights.data(), weights.size(), true, 1.0},
      {"ln.gain", ln.gain.data(), ln.gain.size(), true, 1.0},
      {"ln.bias", ln.bias.data(), ln.bias.size(), true, 1.0},
  };
}

Matrix KacHead::activation_map() const {
  const std::size_t nb = grid.count();
  Matrix score(weights.rows(), n_);
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    double row_max = 0.0;
    for (std::size_t p = 0; p < n_; ++p) {
      double s = 0.0;
      for (std::size_t i = 0; i < nb; ++i) s += std::abs(weights(c, p * nb + i));
      score(c, p) = s;
      row_max = std::max(row_max, s);
    }
    if (row_max > 0.0)
      for (std::size_t p = 0; p < n_; ++p) score(c, p) /= row_max;
  }
  return score;
}

std::vector<double> forward_factored(const FactoredKacWeights& fw, const RbfGrid& grid,
                                     const LayerNorm& ln, std::span<const double> f) {
  const std::size_t classes = fw.w_c.rows();
  const std::size_t n = fw.w_c.cols();
  const std::size_t nb = fw.w_q.rows();
  if (fw.w_q.cols() != classes)
    throw DimensionError("forward_factored: W_C " + fw.w_c.shape_str() + " vs W_q " +
                         fw.w_q.shape_str());
  if (f.size() != n || ln.dim() != n || grid.count() != nb)
    throw DimensionError("forward_factored: inconsistent feature/grid shapes");
  std::vector<double> xprime(n);
  ln.forward(f, xprime);
  const Matrix phi = rbf_eval_matrix(grid, xprime);
  std::vector<double> logits(classes, 0.0);
  for (std::size_t c = 0; c < classes; ++c) {
    double acc = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      double inner = 0.0;
      for (std::size_t i = 0; i < nb; ++i) inner += phi(p, i) * fw.w_q(i, c);
      acc += fw.w_c(c, p) * inner;
    }
    logits[c] = acc;
  }
  return logits;
}

Matrix consolidate(const FactoredKacWeights& fw) {
  const std::size_t classes = fw.w_c.rows();
  const std::size_t n = fw.w_c.cols();
  const std::size_t nb = fw.w_q.rows();
  Matrix w(classes, nb * n);
  for (std::size_t c = 0; c < classes; ++c)
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t i = 0; i < nb; ++i) w(c, p * nb + i) = fw.w_c(c, p) * fw.w_q(i, c);
  return w;
}

// ---------------------------------------------------------------------------
// BsplineHead

BsplineHead::BsplineHead(std::size_t n, BsplineBasis basis_, bool residual, double ln_eps)
    : basis(std::move(basis_)),
      ln(n, ln_eps),
      spline_weights(0, basis.count() * n),
      residual_weights(0, residual ? n : 0),
      residual_enabled(residual),
      n_(n) {
  if (n == 0) throw ParameterError("BsplineHead: embedding dim must be >= 1");
  basis.validate();
}

void BsplineHead::forward(std::span<const double> f, std::span<double> logits) const {
  check_feature(f);
  check_logits(logits);
  const std::size_t g = basis.count();
  std::vector<double> xprime(n_);
  ln.forward(f, xprime);
  std::vector<double> bflat(g * n_);
  for (std::size_t p = 0; p < n_; ++p)
    bspline_eval(basis, xprime[p], std::span<double>(bflat).subspan(p * g, g));
  for (std::size_t c = 0; c < spline_weights.rows(); ++c) {
    double acc = 0.0;
    const double* row = spline_weights.data() + c * spline_weights.cols();
    for (std::size_t j = 0; j < spline_weights.cols(); ++j) acc += row[j] * bflat[j];
    logits[c] = acc;
  }
  if (residual_enabled) {
    for (std::size_t c = 0; c < residual_weights.rows(); ++c) {
      double acc = 0.0;
      for (std::size_t p = 0; p < n_; ++p) acc += residual_weights(c, p) * silu(xprime[p]);
      logits[c] += acc;
    }
  }
}

void BsplineHead::backward(std::span<const double> f, std::span<const double> upstream,
                           HeadGrads& sink, std::span<double> d_f) const {
  check_feature(f);
  check_logits(upstream);
  const std::size_t g = basis.count();
  LayerNorm::Cache cache;
  std::vector<double> xprime(n_);
  ln.forward(f, xprime, &cache);

  auto& d_spline = sink.slots[0];
  auto& d_gain = sink.slots[1];
  auto& d_bias = sink.slots[2];
  std::vector<double> d_xprime(n_, 0.0);
  std::vector<double> bval(g), bgrad(g);

  for (std::size_t p = 0; p < n_; ++p) {
    bspline_eval(basis, xprime[p], bval);
    bspline_grad(basis, xprime[p], bgrad);
    const double sl = residual_enabled ? silu(xprime[p]) : 0.0;
    const double slg = residual_enabled ? silu_grad(xprime[p]) : 0.0;
    double acc = 0.0;
    for (std::size_t c = 0; c < spline_weights.rows(); ++c) {
      const double up = upstream[c];
      if (up == 0.0) continue;
      const double* row = spline_weights.data() + c * spline_weights.cols() + p * g;
      double* gw = d_spline.data() + c * spline_weights.cols() + p * g;
      for (std::size_t i = 0; i < g; ++i) {
        gw[i] += up * bval[i];
        acc += up * row[i] * bgrad[i];
      }
      if (residual_enabled) {
        sink.slots[3][c * n_ + p] += up * sl;
        acc += up * residual_weights(c, p) * slg;
      }
    }
    d_xprime[p] = acc;
  }
  ln.backward(cache, d_xprime, d_gain, d_bias, d_f);
}

void BsplineHead::expand(std::size_t new_classes, Rng& rng) {
  require_new_classes(new_classes);
  const std::size_t first = spline_weights.rows();
  spline_weights.append_rows(new_classes);
  fill_new_rows(spline_weights, first, rng);
  if (residual_enabled) {
    residual_weights.append_rows(new_classes);
    fill_new_rows(residual_weights, first, rng);
  }
  blocks.push_back(new_classes);
}

std::vector<ParamRef> BsplineHead::params() {
  std::vector<ParamRef> p{
      {"spline_W", spline_weights.data(), spline_weights.size(), true, 1.0},
      {"ln.gain", ln.gain.data(), ln.gain.size(), true, 1.0},
      {"ln.bias", ln.bias.data(), ln.bias.size(), true, 1.0},
  };
  if (residual_enabled)
    p.push_back({"residual_W", residual_weights.data(), residual_weights.size(), true, 1.0});
  return p;
}

// ---------------------------------------------------------------------------
// MlpHead

MlpHead::MlpHead(std::size_t n, std::size_t hidden, bool frozen_first_layer, Rng& rng)
    : w1(hidden, n),
      b1(hidden, 0.0),
      w2(0, hidden),
      b2(),
      frozen_first(frozen_first_layer),
      n_(n),
      hidden_(hidden) {
  if (n == 0 || hidden == 0) throw ParameterError("MlpHead: dims must be >= 1");
  fill_new_rows(w1, 0, rng);
}

void MlpHead::forward(std::span<const double> f, std::span<double> logits) const {
  check_feature(f);
  check_logits(logits);
  std::vector<double> act(hidden_);
  for (std::size_t k = 0; k < hidden_; ++k) {
    double acc = b1[k];
    const double* row = w1.data() + k * n_;
    for (std::size_t p = 0; p < n_; ++p) acc += row[p] * f[p];
    act[k] = silu(acc);
  }
  for (std::size_t c = 0; c < w2.rows(); ++c) {
    double acc = b2[c];
    const double* row = w2.data() + c * hidden_;
    for (std::size_t k = 0; k < hidden_; ++k) acc += row[k] * act[k];
    logits[c] = acc;
  }
}

void MlpHead::backward(std::span<const double> f, std::span<const double> upstream,
                       HeadGrads& sink, std::span<double> d_f) const {
  check_feature(f);
  check_logits(upstream);
  std::vector<double> pre(hidden_), act(hidden_);
  for (std::size_t k = 0; k < hidden_; ++k) {
    double acc = b1[k];
    const double* row = w1.data() + k * n_;
    for (std::size_t p = 0; p < n_; ++p) acc += row[p] * f[p];
    pre[k] = acc;
    act[k] = silu(acc);
  }
  auto& d_w1 = sink.slots[0];
  auto& d_b1 = sink.slots[1];
  auto& d_w2 = sink.slots[2];
  auto& d_b2 = sink.slots[3];
  std::vector<double> d_act(hidden_, 0.0);
  for (std::size_t c = 0; c < w2.rows(); ++c) {
    const double up = upstream[c];
    if (up == 0.0) continue;
    d_b2[c] += up;
    const double* row = w2.data() + c * hidden_;
    double* gw = d_w2.data() + c * hidden_;
    for (std::size_t k = 0; k < hidden_; ++k) {
      gw[k] += up * act[k];
      d_act[k] += up * row[k];
    }
  }
  for (std::size_t k = 0; k < hidden_; ++k) {
    const double dh = d_act[k] * silu_grad(pre[k]);
    d_b1[k] += dh;
    double* gw = d_w1.data() + k * n_;
    for (std::size_t p = 0; p < n_; ++p) gw[p] += dh * f[p];
    if (!d_f.empty()) {
      const double* row = w1.data() + k * n_;
      for (std::size_t p = 0; p < n_; ++p) d_f[p] += dh * row[p];
    }
  }
}

void MlpHead::expand(std::size_t new_classes, Rng& rng) {
  require_new_classes(new_classes);
  const std::size_t first = w2.rows();
  w2.append_rows(new_classes);
  fill_new_rows(w2, first, rng);
  b2.resize(b2.size() + new_classes, 0.0);
  blocks.push_back(new_classes);
}

std::vector<ParamRef> MlpHead::params() {
  return {
      {"W1", w1.data(), w1.size(), !frozen_first, 1.0},
      {"b1", b1.data(), b1.size(), !frozen_first, 1.0},
      {"W2", w2.data(), w2.size(), true, 1.0},
      {"b2", b2.data(), b2.size(), true, 1.0},
  };
}

// ---------------------------------------------------------------------------
// LinearHead

LinearHead::LinearHead(std::size_t n) : weights(0, n), n_(n) {
  if (n == 0) throw ParameterError("LinearHead: embedding dim must be >= 1");
}

void LinearHead::forward(std::span<const double> f, std::span<double> logits) const {
  check_feature(f);
  check_logits(logits);
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    double acc = bias[c];
    const double* row = weights.data() + c * n_;
    for (std::size_t p = 0; p < n_; ++p) acc += row[p] * f[p];
    logits[c] = acc;
  }
}

void LinearHead::backward(std::span<const double> f, std::span<const double> upstream,
                          HeadGrads& sink, std::span<double> d_f) const {
  check_feature(f);
  check_logits(upstream);
  auto& d_w = sink.slots[0];
  auto& d_b = sink.slots[1];
  for (std::size_t c = 0; c < weights.rows(); ++c) {
    const double up = upstream[c];
    if (up == 0.0) continue;
    d_b[c] += up;
    double* gw = d_w.data() + c * n_;
    const double* row = weights.data() + c * n_;
    for (std::size_t p = 0; p < n_; ++p) {
      gw[p] += up * f[p];
      if (!d_f.empty()) d_f[p] += up * row[p];
    }
  }
}

void LinearHead::expand(std::size_t new_classes, Rng& rng) {
  require_new_classes(new_classes);
  const std::size_t first = weights.rows();
  weights.append_rows(new_classes);
  fill_new_rows(weights, first, rng);
  bias.resize(bias.size() + new_classes, 0.0);
  blocks.push_back(new_classes);
}

std::vector<ParamRef> LinearHead::params() {
  return {
      {"W", weights.data(), weights.size(), true, 1.0},
      {"b", bias.data(), bias.size(), true, 1.0},
  };
}

// ---------------------------------------------------------------------------

std::string HeadConfig::resolved_label() const {
  if (!label.empty()) return label;
  std::ostringstream os;
  if (kind == "kac") {
    os << "kac_n" << rbf_count;
  } else if (kind == "bspline") {
    os << "bspline_g" << spline_basis_count << "_d" << degree << (residual ? "_res" : "");
  } else if (kind == "mlp") {
    os << (frozen_first_layer ? "mlp_fixed" : "mlp");
  } else {
    os << kind;
  }
  return os.str();
}

std::unique_ptr<Head> make_head(const HeadConfig& cfg, std::size_t n, Rng& rng) {
  if (cfg.kind == "kac") {
    return std::make_unique<KacHead>(n, RbfGrid(cfg.rbf_count, cfg.lo, cfg.hi, cfg.sigma),
                                     cfg.ln_epsilon);
  }
  if (cfg.kind == "linear") {
    return std::make_unique<LinearHead>(n);
  }
  if (cfg.kind == "bspline") {
    return std::make_unique<BsplineHead>(
        n, BsplineBasis::uniform(cfg.spline_basis_count, cfg.degree, cfg.lo, cfg.hi), cfg.residual,
        cfg.ln_epsilon);
  }
  if (cfg.kind == "mlp") {
    const std::size_t hidden = cfg.hidden > 0 ? cfg.hidden : cfg.rbf_count * n;
    return std::make_unique<MlpHead>(n, hidden, cfg.frozen_first_layer, rng);
  }
  throw ConfigError("make_head: unknown head kind '" + cfg.kind + "'");
}

ParamCountReport kac_param_count(std::size_t n, std::size_t rbf_count, std::size_t classes) {
  ParamCountReport r;
  r.n = n;
  r.rbf_count = rbf_count;
  r.classes = classes;
  r.weight_matrix = classes * rbf_count * n;
  r.layer_norm = 2 * n;
  r.linear_weights = classes * n;
  r.extra_over_linear = r.weight_matrix - r.linear_weights;
  std::ostringstream os;
  os << "consolidated weight matrix: " << classes << " x (" << rbf_count << "*" << n
     << ") = " << r.weight_matrix << " weights. "
     << "Note: commonly quoted figures of ~0.23M additional parameters for the "
     << "n=768, N=4, C=100 configuration do not match this raw weight count; they "
     << "do match the increase over the " << r.linear_weights
     << "-weight linear classifier it replaces (" << r.extra_over_linear
     << " extra weights), so the quoted number most likely counts only the "
     << "difference. The counting basis behind the quoted figure is unstated.";
  r.note = os.str();
  return r;
}

}  // namespace kac
