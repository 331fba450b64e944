#include "wcp/metrics.hpp"

#include "wcp/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace wcp {

ErrorMetrics evaluate(const Trajectory& estimated, const Trajectory& truth) {
  std::vector<std::pair<const ReceiverState*, const ReceiverState*>> pairs;
  for (const ReceiverState& t : truth.states)
    if (const ReceiverState* e = estimated.find(t.epoch.index)) pairs.emplace_back(e, &t);
  if (pairs.empty()) throw std::domain_error("evaluate: no common epochs");

  Vec3 centroid = Vec3::Zero();
  for (const auto& [e, t] : pairs) centroid += t->position;
  centroid /= static_cast<double>(pairs.size());
  const Eigen::Matrix3d rot = ecef_to_enu_rotation(ecef_to_geodetic(centroid));

  ErrorMetrics m;
  for (const auto& [e, t] : pairs) {
    const Vec3 d = rot * (e->position - t->position);
    EpochError err;
    err.epoch_index = t->epoch.index;
    err.east = d.x();
    err.north = d.y();
    err.up = d.z();
    err.horizontal = std::hypot(d.x(), d.y());
    err.three_d = d.norm();
    m.series.push_back(err);
  }
  const double n = static_cast<double>(m.series.size());
  for (const EpochError& e : m.series) {
    m.mean_2d += e.horizontal;
    m.mean_3d += e.three_d;
    m.max_2d = std::max(m.max_2d, e.horizontal);
    m.max_3d = std::max(m.max_3d, e.three_d);
  }
  m.mean_2d /= n;
  m.mean_3d /= n;
  double var = 0.0;
  for (const EpochError& e : m.series) var += (e.horizontal - m.mean_2d) * (e.horizontal - m.mean_2d);
  m.std_2d = std::sqrt(var / n);
  return m;
}

}  // namespace wcp
