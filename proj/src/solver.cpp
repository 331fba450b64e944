#include "wcp/solver.hpp"

#include "wcp/kernels/kernels.hpp"

#include <Eigen/Cholesky>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>
#include <limits>

namespace wcp {

std::string_view factor_type_name(FactorType type) {
  switch (type) {
    case FactorType::Pseudorange: return "pseudorange";
    case FactorType::Doppler: return "doppler";
    case FactorType::Tdcp: return "tdcp";
    case FactorType::Wcp: return "wcp";
  }
  return "?";
}

std::string_view reason_name(ConvergenceReason reason) {
  switch (reason) {
    case ConvergenceReason::GradientTolerance: return "gradient-tolerance";
    case ConvergenceReason::StepTolerance: return "step-tolerance";
    case ConvergenceReason::FunctionTolerance: return "function-tolerance";
    case ConvergenceReason::MaxIterations: return "max-iterations";
    case ConvergenceReason::DampingOverflow: return "damping-overflow";
    case ConvergenceReason::PerEpoch: return "per-epoch";
  }
  return "?";
}

double& FactorCosts::operator[](FactorType type) {
  switch (type) {
    case FactorType::Pseudorange: return pseudorange;
    case FactorType::Doppler: return doppler;
    case FactorType::Tdcp: return tdcp;
    case FactorType::Wcp: return wcp;
  }
  return wcp;
}

double ResidualEntry::reweighted() const { return std::sqrt(weight) * whitened; }

std::vector<ResidualEntry> CostBreakdown::of(FactorType type) const {
  std::vector<ResidualEntry> out;
  for (const ResidualEntry& e : entries)
    if (e.type == type) out.push_back(e);
  return out;
}

CostBreakdown marginal_cost_breakdown(const SolveReport& report) {
  CostBreakdown out;
  out.costs = report.final_costs;
  out.entries = report.residuals;
  std::stable_sort(out.entries.begin(), out.entries.end(),
                   [](const ResidualEntry& a, const ResidualEntry& b) { return a.type < b.type; });
  out.windows = report.windows;
  return out;
}

namespace {

using Triplet = Eigen::Triplet<double>;
using SparseMatrix = Eigen::SparseMatrix<double>;

struct Linearization {
  std::vector<Triplet> triplets;
  Eigen::VectorXd gradient;
};

struct Record {
  std::vector<ResidualEntry> entries;
  std::vector<WindowDiagnostics> windows;
};

class Problem {
 public:
  // Ranges are evaluated as offsets from each epoch's starting position so
  // that millimetre changes are not lost against 2e7 m ranges.
  Problem(const FactorGraph& graph, const SolverConfig& config, const Eigen::VectorXd& x0)
      : g_(graph), c_(config), x0_(x0) {
    const StateLayout& layout = g_.layout;
    const double wc = g_.range.earth_rotation_rate / 299792458.0;
    auto add_link = [&](std::size_t epoch, const Vec3& sat) {
      const Vec3 ref = x0_.segment<3>(static_cast<Eigen::Index>(layout.position_index(epoch)));
      const Vec3 v = sat - ref;
      link_epoch_.push_back(epoch);
      sx_.push_back(v.x());
      sy_.push_back(v.y());
      sz_.push_back(v.z());
      sat_x_.push_back(sat.x());
      sat_y_.push_back(sat.y());
      base_.push_back(v.norm() + wc * (sat.x() * ref.y() - sat.y() * ref.x()));
      return link_epoch_.size() - 1;
    };
    for (const PseudorangeFactor& f : g_.pseudoranges) {
      psr_link_.push_back(add_link(f.epoch, f.satellite_position));
      psr_reduced_.push_back(f.corrected_pseudorange - base_.back());
      psr_clock_.push_back(layout.clock_index(f.epoch, f.sat.constellation));
    }
    for (const TdcpFactor& f : g_.tdcps) {
      const std::size_t l0 = add_link(f.epoch, f.satellite_position_t);
      const std::size_t l1 = add_link(f.epoch + 1, f.satellite_position_t1);
      tdcp_link_.push_back(l0);
      tdcp_reduced_.push_back(f.delta_phase - (base_[l1] - base_[l0]));
      tdcp_clock_.push_back({layout.clock_index(f.epoch, f.sat.constellation),
                             layout.clock_index(f.epoch + 1, f.sat.constellation)});
    }
    for (const PhaseWindow& w : g_.windows) {
      window_link_.push_back(link_epoch_.size());
      std::vector<std::size_t> clocks;
      std::vector<double> reduced;
      for (std::size_t t = 0; t < w.size(); ++t) {
        const std::size_t l = add_link(w.first_epoch + t, w.satellite_positions[t]);
        reduced.push_back(w.phases(static_cast<Eigen::Index>(t)) - base_[l]);
        clocks.push_back(layout.clock_index(w.first_epoch + t, w.sat.constellation));
      }
      // E 1 = 0, so a common shift is free; removing the ambiguity-sized
      // offset keeps the per-epoch misfits exact.
      const double shift = reduced.front() - x0_(static_cast<Eigen::Index>(clocks.front()));
      for (double& r : reduced) r -= shift;
      window_clock_.push_back(std::move(clocks));
      window_reduced_.push_back(std::move(reduced));
      window_we_.push_back(w.whitener * w.eliminator.entries);
    }
    for (const DopplerVelocityFactor& f : g_.dopplers) {
      Eigen::LLT<Eigen::Matrix3d> llt(f.covariance);
      if (llt.info() != Eigen::Success)
        throw SolverError("doppler factor covariance not positive definite");
      const Eigen::Matrix3d l = llt.matrixL();
      dv_whitener_.push_back(l.triangularView<Eigen::Lower>().solve(Eigen::Matrix3d::Identity()));
    }
    const std::size_t n = link_epoch_.size();
    rx_.resize(n);
    ry_.resize(n);
    rz_.resize(n);
    range_.resize(n);
    offset_.resize(n);
    gx_.resize(n);
    gy_.resize(n);
    gz_.resize(n);
  }

  std::size_t dimension() const { return g_.layout.dimension; }
  /// Per-factor robust costs of the last evaluation, in assembly order.
  const std::vector<double>& terms() const { return terms_; }

  FactorCosts evaluate(const Eigen::VectorXd& x, Linearization* lin, Record* rec) {
    geometry(x);
    terms_.clear();
    FactorCosts costs;
    if (lin) {
      lin->triplets.clear();
      lin->gradient = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dimension()));
    }
    const StateLayout& layout = g_.layout;

    for (std::size_t i = 0; i < g_.pseudoranges.size(); ++i) {
      const PseudorangeFactor& f = g_.pseudoranges[i];
      const std::size_t l = psr_link_[i];
      const std::size_t p = layout.position_index(f.epoch);
      const double s = 1.0 / std::sqrt(f.variance);
      cols_ = {p, p + 1, p + 2, psr_clock_[i]};
      a_ = {s * gx_[l], s * gy_[l], s * gz_[l], -s};
      e_ = {s * ((psr_reduced_[i] - x(static_cast<Eigen::Index>(psr_clock_[i]))) - offset_[l])};
      finish(FactorType::Pseudorange, i, c_.kernels.pseudorange, f.sat, f.epoch, costs, lin, rec);
    }

    for (std::size_t i = 0; i < g_.dopplers.size(); ++i) {
      const DopplerVelocityFactor& f = g_.dopplers[i];
      const std::size_t p0 = layout.position_index(f.epoch);
      const std::size_t p1 = layout.position_index(f.epoch + 1);
      const Vec3 pos0 = x.segment<3>(static_cast<Eigen::Index>(p0));
      const Vec3 pos1 = x.segment<3>(static_cast<Eigen::Index>(p1));
      const Vec3 r = f.velocity - (pos1 - pos0) / f.dt;
      const Eigen::Matrix3d& w = dv_whitener_[i];
      const Vec3 e = w * r;
      const Eigen::Matrix3d j = w / f.dt;
      cols_ = {p0, p0 + 1, p0 + 2, p1, p1 + 1, p1 + 2};
      a_.assign(18, 0.0);
      e_.assign(3, 0.0);
      for (int row = 0; row < 3; ++row) {
        e_[static_cast<std::size_t>(row)] = e(row);
        for (int col = 0; col < 3; ++col) {
          a_[static_cast<std::size_t>(row * 6 + col)] = j(row, col);
          a_[static_cast<std::size_t>(row * 6 + 3 + col)] = -j(row, col);
        }
      }
      finish(FactorType::Doppler, i, c_.kernels.doppler, SatelliteId{}, f.epoch, costs, lin, rec);
    }

    for (std::size_t i = 0; i < g_.tdcps.size(); ++i) {
      const TdcpFactor& f = g_.tdcps[i];
      const std::size_t l0 = tdcp_link_[i], l1 = l0 + 1;
      const std::size_t p0 = layout.position_index(f.epoch);
      const std::size_t p1 = layout.position_index(f.epoch + 1);
      const auto [c0, c1] = tdcp_clock_[i];
      const double s = 1.0 / std::sqrt(f.variance);
      const double dh = (offset_[l1] - offset_[l0]) +
                        (x(static_cast<Eigen::Index>(c1)) - x(static_cast<Eigen::Index>(c0)));
      cols_ = {p0, p0 + 1, p0 + 2, c0, p1, p1 + 1, p1 + 2, c1};
      a_ = {-s * gx_[l0], -s * gy_[l0], -s * gz_[l0], s,
            s * gx_[l1],  s * gy_[l1],  s * gz_[l1],  -s};
      e_ = {s * (tdcp_reduced_[i] - dh)};
      finish(FactorType::Tdcp, i, c_.kernels.tdcp, f.sat, f.epoch, costs, lin, rec);
    }

    for (std::size_t i = 0; i < g_.windows.size(); ++i) {
      const PhaseWindow& w = g_.windows[i];
      const Eigen::MatrixXd& we = window_we_[i];
      const std::size_t n = w.size();
      const auto m = static_cast<std::size_t>(we.rows());
      const std::size_t base = window_link_[i];
      misfit_.resize(n);
      cols_.clear();
      for (std::size_t t = 0; t < n; ++t) {
        const std::size_t l = base + t;
        const std::size_t clk = window_clock_[i][t];
        misfit_[t] = (window_reduced_[i][t] - x(static_cast<Eigen::Index>(clk))) - offset_[l];
        const std::size_t p = layout.position_index(w.first_epoch + t);
        cols_.insert(cols_.end(), {p, p + 1, p + 2, clk});
      }
      const std::size_t k = 4 * n;
      e_.assign(m, 0.0);
      a_.assign(m * k, 0.0);
      for (std::size_t row = 0; row < m; ++row) {
        double acc = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
          const double coef = we(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(t));
          acc += coef * misfit_[t];
          const std::size_t l = base + t;
          double* dst = a_.data() + row * k + 4 * t;
          dst[0] = coef * gx_[l];
          dst[1] = coef * gy_[l];
          dst[2] = coef * gz_[l];
          dst[3] = -coef;
        }
        e_[row] = acc;
      }
      const double weight =
          finish(FactorType::Wcp, i, c_.kernels.wcp, w.sat, w.first_epoch, costs, lin, rec);
      if (rec) {
        double norm2 = 0.0;
        for (double v : e_) norm2 += v * v;
        rec->windows.push_back(
            {w.sat, g_.epochs[w.first_epoch].index, n, std::sqrt(norm2), weight});
      }
    }
    return costs;
  }

 private:
  void geometry(const Eigen::VectorXd& x) {
    for (std::size_t i = 0; i < link_epoch_.size(); ++i) {
      const auto p = static_cast<Eigen::Index>(g_.layout.position_index(link_epoch_[i]));
      rx_[i] = x(p) - x0_(p);
      ry_[i] = x(p + 1) - x0_(p + 1);
      rz_[i] = x(p + 2) - x0_(p + 2);
    }
    kernels::link_geometry({rx_, ry_, rz_, sx_, sy_, sz_, 0.0}, {range_, gx_, gy_, gz_, offset_});
    const double w = g_.range.earth_rotation_rate;
    if (w == 0.0) return;
    const double wc = w / 299792458.0;
    for (std::size_t i = 0; i < link_epoch_.size(); ++i) {
      offset_[i] += w * (sat_x_[i] * ry_[i] - sat_y_[i] * rx_[i]) / 299792458.0;
      gx_[i] += wc * sat_y_[i];
      gy_[i] -= wc * sat_x_[i];
    }
  }

  // Applies the robust kernel to the whitened block in e_/a_/cols_ and
  // accumulates cost, normal equations and diagnostics. Returns the IRLS weight.
  double finish(FactorType type, std::size_t index, const RobustKernel& kernel,
                const SatelliteId& sat, std::size_t epoch, FactorCosts& costs, Linearization* lin,
                Record* rec) {
    double norm2 = 0.0;
    for (double v : e_) norm2 += v * v;
    const double norm = std::sqrt(norm2);
    const double rho = loss(kernel, norm2).rho;
    costs[type] += rho;
    terms_.push_back(rho);
    const double weight = irls_weight(kernel, norm);
    if (rec) {
      for (std::size_t c = 0; c < e_.size(); ++c)
        rec->entries.push_back({type, index, sat, g_.epochs[epoch].index, c, e_[c], weight});
    }
    if (!lin) return weight;

    const int m = static_cast<int>(e_.size());
    const int k = static_cast<int>(cols_.size());
    if (weight != 1.0) {
      const double s = std::sqrt(weight);
      for (double& v : e_) v *= s;
      for (double& v : a_) v *= s;
    }
    h_.assign(static_cast<std::size_t>(k * k), 0.0);
    gl_.assign(static_cast<std::size_t>(k), 0.0);
    kernels::gram_update(a_, e_, m, k, h_, gl_);
    for (int i = 0; i < k; ++i) {
      const auto ci = static_cast<Eigen::Index>(cols_[static_cast<std::size_t>(i)]);
      lin->gradient(ci) += gl_[static_cast<std::size_t>(i)];
      for (int j = 0; j < k; ++j) {
        const auto cj = static_cast<Eigen::Index>(cols_[static_cast<std::size_t>(j)]);
        if (cj > ci) continue;  // lower triangle suffices for LDLT
        const double v = h_[static_cast<std::size_t>(i * k + j)];
        if (v != 0.0 || ci == cj) lin->triplets.emplace_back(ci, cj, v);
      }
    }
    return weight;
  }

  const FactorGraph& g_;
  const SolverConfig& c_;
  const Eigen::VectorXd x0_;
  std::vector<std::size_t> link_epoch_;
  std::vector<double> sx_, sy_, sz_, rx_, ry_, rz_, range_, offset_, gx_, gy_, gz_;
  std::vector<double> sat_x_, sat_y_, base_, psr_reduced_, tdcp_reduced_;
  std::vector<std::vector<double>> window_reduced_;
  std::vector<std::size_t> psr_link_, psr_clock_, tdcp_link_, window_link_;
  std::vector<std::pair<std::size_t, std::size_t>> tdcp_clock_;
  std::vector<std::vector<std::size_t>> window_clock_;
  std::vector<Eigen::MatrixXd> window_we_;
  std::vector<Eigen::Matrix3d> dv_whitener_;

  std::vector<std::size_t> cols_;
  std::vector<double> a_, e_, h_, gl_, misfit_, terms_;
};

std::size_t epoch_of_state(const StateLayout& layout, std::size_t index) {
  auto it = std::upper_bound(layout.offset.begin(), layout.offset.end(), index);
  return static_cast<std::size_t>(it - layout.offset.begin()) - 1;
}

[[noreturn]] void unobservable(const FactorGraph& graph, std::size_t state) {
  const std::size_t epoch = epoch_of_state(graph.layout, state);
  const std::int64_t index = graph.epochs[epoch].index;
  throw UnobservableError(index, "rank-deficient normal matrix: state of epoch " +
                                     std::to_string(index) + " is unobservable");
}

Eigen::VectorXd pack(const FactorGraph& graph, std::span<const ReceiverState> states) {
  const StateLayout& layout = graph.layout;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.dimension));
  for (std::size_t t = 0; t < graph.epochs.size(); ++t) {
    const auto p = static_cast<Eigen::Index>(layout.position_index(t));
    x.segment<3>(p) = states[t].position;
    for (std::size_t c = 0; c < layout.clocks[t].size(); ++c) {
      const Constellation sys = layout.clocks[t][c];
      double value = 0.0;
      auto it = states[t].clock_bias.find(sys);
      if (it != states[t].clock_bias.end()) {
        value = it->second;
      } else {
        // Mean pseudorange misfit of that system at this epoch.
        double sum = 0.0;
        int count = 0;
        for (const PseudorangeFactor& f : graph.pseudoranges) {
          if (f.epoch != t || f.sat.constellation != sys) continue;
          sum += f.corrected_pseudorange -
                 kernels::link_range(states[t].position, f.satellite_position,
                                     graph.range.earth_rotation_rate);
          ++count;
        }
        if (count) value = sum / count;
      }
      x(p + 3 + static_cast<Eigen::Index>(c)) = value;
    }
  }
  return x;
}

Trajectory unpack(const FactorGraph& graph, const Eigen::VectorXd& x) {
  Trajectory out;
  const StateLayout& layout = graph.layout;
  for (std::size_t t = 0; t < graph.epochs.size(); ++t) {
    ReceiverState s;
    s.epoch = graph.epochs[t];
    const auto p = static_cast<Eigen::Index>(layout.position_index(t));
    s.position = x.segment<3>(p);
    for (std::size_t c = 0; c < layout.clocks[t].size(); ++c)
      s.clock_bias[layout.clocks[t][c]] = x(p + 3 + static_cast<Eigen::Index>(c));
    if (graph.doppler_velocity[t]) s.velocity = graph.doppler_velocity[t]->velocity;
    out.states.push_back(std::move(s));
  }
  return out;
}

}  // namespace

SolveReport solve(const FactorGraph& graph, const SolverConfig& config) {
  return solve(graph, config, graph.initial);
}

SolveReport solve(const FactorGraph& graph, const SolverConfig& config,
                  std::span<const ReceiverState> initial) {
  config.validate();
  if (initial.size() != graph.epochs.size())
    throw std::invalid_argument("solve: initial states do not match graph epochs");

  SolveReport report;
  report.mode = graph.mode;
  if (graph.mode == EstimatorMode::WLS_SPP) {
    report.reason = ConvergenceReason::PerEpoch;
    report.trajectory.states.assign(initial.begin(), initial.end());
    for (std::size_t t = 0; t < graph.epochs.size(); ++t) {
      report.trajectory.states[t].epoch = graph.epochs[t];
      if (graph.doppler_velocity[t]) report.trajectory.states[t].velocity = graph.doppler_velocity[t]->velocity;
    }
    return report;
  }

  Eigen::VectorXd x = pack(graph, initial);
  Problem problem(graph, config, x);
  const auto dim = static_cast<Eigen::Index>(problem.dimension());

  Linearization lin;
  FactorCosts costs = problem.evaluate(x, &lin, nullptr);
  double cost = costs.total();
  std::vector<double> terms = problem.terms();
  report.initial_cost = cost;
  report.cost_history.push_back(cost);

  SparseMatrix h(dim, dim);
  h.setFromTriplets(lin.triplets.begin(), lin.triplets.end());
  Eigen::VectorXd diag = h.diagonal();
  for (Eigen::Index i = 0; i < dim; ++i)
    if (!(diag(i) > 0.0)) unobservable(graph, static_cast<std::size_t>(i));

  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower> ldlt;
  ldlt.analyzePattern(h);

  double lambda = config.initial_lambda;
  auto scale = [&](const Eigen::VectorXd& v) { return v.cwiseAbs().maxCoeff(); };
  // Positions are measured from the first epoch's starting point so that the
  // relative step test is not swamped by the Earth radius.
  Eigen::VectorXd anchor = Eigen::VectorXd::Zero(dim);
  for (std::size_t t = 0; t < graph.epochs.size(); ++t)
    anchor.segment<3>(static_cast<Eigen::Index>(graph.layout.position_index(t))) =
        x.segment<3>(static_cast<Eigen::Index>(graph.layout.position_index(0)));
  report.reason = ConvergenceReason::MaxIterations;

  while (report.iterations < config.max_iterations) {
    report.final_gradient = scale(lin.gradient);
    if (report.final_gradient < config.gradient_tolerance) {
      report.reason = ConvergenceReason::GradientTolerance;
      break;
    }
    ++report.iterations;

    SparseMatrix damped = h;
    for (Eigen::Index i = 0; i < dim; ++i) damped.coeffRef(i, i) = diag(i) * (1.0 + lambda);
    ldlt.factorize(damped);
    if (ldlt.info() != Eigen::Success) unobservable(graph, 0);
    const Eigen::VectorXd& d = ldlt.vectorD();
    for (Eigen::Index j = 0; j < dim; ++j) {
      if (!(d(j) > 0.0)) {
        const auto& perm = ldlt.permutationP().indices();
        for (Eigen::Index i = 0; i < dim; ++i)
          if (perm(i) == j) unobservable(graph, static_cast<std::size_t>(i));
        unobservable(graph, 0);
      }
    }
    const Eigen::VectorXd dx = ldlt.solve(-lin.gradient);
    const double step = scale(dx);
    const bool small = step <= config.step_tolerance * (scale(x - anchor) + config.step_tolerance);

    const Eigen::VectorXd candidate = x + dx;
    const double trial = problem.evaluate(candidate, nullptr, nullptr).total();
    // Cost change summed factor by factor: far less rounding than the
    // difference of two totals once the steps become small.
    double gain = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) gain += terms[i] - problem.terms()[i];
    if (std::isfinite(trial) && gain > 0.0) {
      x = candidate;
      ++report.accepted_steps;
      lambda = std::max(lambda / 3.0, 1e-12);
      costs = problem.evaluate(x, &lin, nullptr);
      terms = problem.terms();
      const double previous = cost;
      cost = costs.total();
      report.cost_history.push_back(cost);
      h.setFromTriplets(lin.triplets.begin(), lin.triplets.end());
      diag = h.diagonal();
      if (small) {
        report.reason = ConvergenceReason::StepTolerance;
        break;
      }
      if (gain <= config.function_tolerance * previous) {
        report.reason = ConvergenceReason::FunctionTolerance;
        break;
      }
    } else {
      lambda *= 5.0;
      if (small) {
        report.reason = ConvergenceReason::StepTolerance;
        break;
      }
      if (lambda > 1e12) {
        report.reason = ConvergenceReason::DampingOverflow;
        break;
      }
    }
  }
  // Undamped polish: LM may stop while the damping still hides a weak
  // common-mode direction.
  const bool settled = report.reason == ConvergenceReason::StepTolerance ||
                       report.reason == ConvergenceReason::FunctionTolerance;
  for (int k = 0; settled && k < 3; ++k) {
    ldlt.factorize(h);
    if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().minCoeff() > 0.0)) break;
    const Eigen::VectorXd candidate = x + ldlt.solve(-lin.gradient);
    const double trial = problem.evaluate(candidate, nullptr, nullptr).total();
    double gain = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) gain += terms[i] - problem.terms()[i];
    if (!std::isfinite(trial) || !(gain > 0.0) || trial > cost) break;
    x = candidate;
    costs = problem.evaluate(x, &lin, nullptr);
    terms = problem.terms();
    cost = costs.total();
    report.cost_history.push_back(cost);
    h.setFromTriplets(lin.triplets.begin(), lin.triplets.end());
  }
  report.final_gradient = scale(lin.gradient);

  Record rec;
  report.final_costs = problem.evaluate(x, nullptr, &rec);
  report.final_cost = report.final_costs.total();
  report.residuals = std::move(rec.entries);
  report.windows = std::move(rec.windows);
  report.trajectory = unpack(graph, x);
  return report;
}

SolveReport run_estimator(const Dataset& dataset, const SolverConfig& config) {
  return solve(build_graph(dataset, config), config);
}

}  // namespace wcp
