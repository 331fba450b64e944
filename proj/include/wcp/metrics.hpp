#pragma once

#include "wcp/types.hpp"

#include <cstdint>
#include <vector>

namespace wcp {

struct EpochError {
  std::int64_t epoch_index = 0;
  double east = 0.0;
  double north = 0.0;
  double up = 0.0;
  double horizontal = 0.0;
  double three_d = 0.0;
};

/// Horizontal (east-north) error statistics in the ENU frame at the truth
/// centroid. STD is the population standard deviation.
struct ErrorMetrics {
  double mean_2d = 0.0;
  double std_2d = 0.0;
  double max_2d = 0.0;
  double mean_3d = 0.0;
  double max_3d = 0.0;
  std::vector<EpochError> series;
};

/// Inner-joins on epoch index. Throws std::domain_error without common epochs.
ErrorMetrics evaluate(const Trajectory& estimated, const Trajectory& truth);

}  // namespace wcp
