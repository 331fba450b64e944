#include "wcp/robust.hpp"

#include <cmath>
#include <stdexcept>

namespace wcp {

LossValue loss(const RobustKernel& kernel, double s) {
  if (!(s >= 0.0)) throw std::invalid_argument("loss: negative squared residual");
  if (kernel.kind != KernelKind::None && !(kernel.k > 0.0))
    throw std::invalid_argument("loss: kernel parameter must be positive");

  switch (kernel.kind) {
    case KernelKind::None:
      return {0.5 * s, 0.5, 0.0};
    case KernelKind::Huber: {
      const double k = kernel.k;
      if (s <= k * k) return {0.5 * s, 0.5, 0.0};
      const double e = std::sqrt(s);
      return {k * (e - 0.5 * k), 0.5 * k / e, -0.25 * k / (s * e)};
    }
    case KernelKind::Cauchy: {
      const double k2 = kernel.k * kernel.k;
      const double a = 1.0 + s / k2;
      return {0.5 * k2 * std::log1p(s / k2), 0.5 / a, -0.5 / (k2 * a * a)};
    }
  }
  return {};
}

double irls_weight(const RobustKernel& kernel, double e) {
  if (!(e >= 0.0)) throw std::invalid_argument("irls_weight: negative residual norm");
  switch (kernel.kind) {
    case KernelKind::None:
      return 1.0;
    case KernelKind::Huber:
      return e <= kernel.k ? 1.0 : kernel.k / e;
    case KernelKind::Cauchy:
      return 1.0 / (1.0 + (e * e) / (kernel.k * kernel.k));
  }
  return 1.0;
}

std::string_view kernel_name(KernelKind kind) {
  switch (kind) {
    case KernelKind::None: return "none";
    case KernelKind::Huber: return "huber";
    case KernelKind::Cauchy: return "cauchy";
  }
  return "none";
}

std::optional<KernelKind> parse_kernel(std::string_view name) {
  if (name == "none" || name == "squared") return KernelKind::None;
  if (name == "huber") return KernelKind::Huber;
  if (name == "cauchy") return KernelKind::Cauchy;
  return std::nullopt;
}

}  // namespace wcp
