#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kac/heads.hpp"

namespace kac {

struct OptimConfig {
  enum class Kind { SgdMomentum, Adam };
  Kind kind = Kind::SgdMomentum;
  double lr = 0.01;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
  std::string kind_name() const;
};

OptimConfig::Kind optim_kind_from_name(const std::string& name);

/// First-order optimizer over a fixed list of parameter views. State is
/// keyed by slot index; reset() clears it (done at every task boundary,
/// where parameter shapes may have grown).
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(std::span<const ParamRef> params, const HeadGrads& grads) = 0;
  virtual void reset() = 0;
};

std::unique_ptr<Optimizer> make_optimizer(const OptimConfig& cfg);

}  // namespace kac
