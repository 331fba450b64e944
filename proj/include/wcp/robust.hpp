#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace wcp {

enum class KernelKind { None, Huber, Cauchy };

/// M-estimator applied to the whitened residual norm e of one factor.
struct RobustKernel {
  KernelKind kind = KernelKind::None;
  double k = 1.0;  // kernel parameter, > 0

  static RobustKernel none() { return {}; }
  static RobustKernel huber(double k) { return {KernelKind::Huber, k}; }
  static RobustKernel cauchy(double k) { return {KernelKind::Cauchy, k}; }
};

/// rho and its first two derivatives with respect to s = e^2.
///   None:   rho = s / 2
///   Huber:  rho = s / 2                 for e <= k
///           rho = k (e - k / 2)          for e >  k
///   Cauchy: rho = k^2 / 2 log(1 + s / k^2)
struct LossValue {
  double rho = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
};

LossValue loss(const RobustKernel& kernel, double squared_norm);

/// IRLS scale 2 rho'(e^2), in (0, 1]. Whitened rows are multiplied by its
/// square root before the normal equations are formed.
double irls_weight(const RobustKernel& kernel, double norm);

std::string_view kernel_name(KernelKind kind);
std::optional<KernelKind> parse_kernel(std::string_view name);

}  // namespace wcp
