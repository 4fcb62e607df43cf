#include "kac/optim.hpp"

#include <cmath>

#include "kac/error.hpp"

namespace kac {

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw ParameterError("OptimConfig: learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw ParameterError("OptimConfig: momentum in [0,1)");
  if (beta1 <= 0.0 || beta1 >= 1.0 || beta2 <= 0.0 || beta2 >= 1.0)
    throw ParameterError("OptimConfig: adam betas in (0,1)");
}

std::string OptimConfig::kind_name() const {
  return kind == Kind::SgdMomentum ? "sgd" : "adam";
}

OptimConfig::Kind optim_kind_from_name(const std::string& name) {
  if (name == "sgd") return OptimConfig::Kind::SgdMomentum;
  if (name == "adam") return OptimConfig::Kind::Adam;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

namespace {

class SgdMomentum final : public Optimizer {
 public:
  explicit SgdMomentum(const OptimConfig& cfg) : cfg_(cfg) {}

  void step(std::span<const ParamRef> params, const HeadGrads& grads) override {
    velocity_.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamRef& p = params[i];
      if (!p.trainable) continue;
      auto& v = velocity_[i];
      v.resize(p.size, 0.0);
      const auto& g = grads.slots[i];
      const double lr = cfg_.lr * p.lr_scale;
      for (std::size_t j = 0; j < p.size; ++j) {
        v[j] = cfg_.momentum * v[j] + g[j];
        p.data[j] -= lr * v[j];
      }
    }
  }

  void reset() override { velocity_.clear(); }

 private:
  OptimConfig cfg_;
  std::vector<std::vector<double>> velocity_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(const OptimConfig& cfg) : cfg_(cfg) {}

  void step(std::span<const ParamRef> params, const HeadGrads& grads) override {
    m_.resize(params.size());
    v_.resize(params.size());
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const ParamRef& p = params[i];
      if (!p.trainable) continue;
      auto& m = m_[i];
      auto& v = v_[i];
      m.resize(p.size, 0.0);
      v.resize(p.size, 0.0);
      const auto& g = grads.slots[i];
      const double lr = cfg_.lr * p.lr_scale;
      for (std::size_t j = 0; j < p.size; ++j) {
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g[j];
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        p.data[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  void reset() override {
    m_.clear();
    v_.clear();
    t_ = 0;
  }

 private:
  OptimConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace

std::unique_ptr<Optimizer> make_optimizer(const OptimConfig& cfg) {
  cfg.validate();
  if (cfg.kind == OptimConfig::Kind::SgdMomentum) return std::make_unique<SgdMomentum>(cfg);
  return std::make_unique<Adam>(cfg);
}

}  // namespace kac
