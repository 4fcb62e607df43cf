#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kac/heads.hpp"

namespace kac {

/// Finite-difference verification of the analytic head gradients.
/// For a random head configuration, random feature f and random upstream u,
/// the scalar J = u . logits(f) is differentiated two ways: the head's
/// backward pass, and central differences with step 1e-6 over every
/// parameter coordinate and every feature coordinate.
///
/// A coordinate passes when |analytic - fd| <= max(1e-7, 1e-4 * scale)
/// with scale = max(|analytic|, |fd|); the reported violation is
/// |analytic - fd| / max(|analytic|, |fd|, 1e-3), so the pass condition
/// is violation < 1e-4.
struct GradCheckResult {
  std::string head_kind;
  double max_violation = 0.0;
  std::string worst_param;    // parameter name or "f"
  std::size_t worst_index = 0;
  std::size_t coords_checked = 0;
  bool passed() const { return max_violation < 1e-4; }
};

/// Checks one head kind over `trials` random configurations. `corrupt`
/// injects a deliberate error into one analytic gradient (negative
/// control).
GradCheckResult gradcheck_head(const std::string& kind, std::uint64_t seed, std::size_t trials,
                               bool corrupt = false);

/// All head kinds: kac, bspline, bspline_residual, mlp, linear.
std::vector<GradCheckResult> gradcheck_all(std::uint64_t seed, std::size_t trials,
                                           bool corrupt = false);

/// Single-head check on an existing head/feature/upstream triple;
/// exposed for the unit tests.
GradCheckResult gradcheck_one(Head& head, std::span<const double> f,
                              std::span<const double> upstream, bool corrupt = false);

}  // namespace kac
