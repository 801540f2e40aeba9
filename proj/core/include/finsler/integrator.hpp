#pragma once

// Adaptive worldline integration of the closed systems with monitor logging.

#include <string>
#include <vector>

#include "finsler/dynamics.hpp"

namespace finsler {

enum class StepMethod { Rk4Fixed, Rk45Adaptive };
enum class ProjectionMode { Off, RenormalizeConstraints };

struct IntegratorConfig {
  StepMethod method = StepMethod::Rk45Adaptive;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double max_step = 1.0;
  double min_step = 1e-12;
  double init_step = 0.0;  // 0 = choose automatically; fixed step for Rk4Fixed
  int monitor_stride = 1;
  ProjectionMode projection = ProjectionMode::Off;
  double tau_end = 1.0;
  void validate() const;
};

enum class Termination { ReachedTauEnd, ClosureSingularity, Stiffness, EvaluationFailure };

struct TrajectorySample {
  WorldlineState state;
  MonitorRecord monitors;
};

struct TrajectoryRecord {
  std::vector<TrajectorySample> samples;
  std::vector<double> accepted_steps;
  std::vector<double> error_estimates;
  Termination termination = Termination::ReachedTauEnd;
  std::string termination_detail;
  double termination_tau = 0.0;
  long steps_accepted = 0;
  long steps_rejected = 0;
  long rhs_evaluations = 0;
  std::vector<std::string> psi_names;

  const TrajectorySample& front() const { return samples.front(); }
  const TrajectorySample& back() const { return samples.back(); }
};

// Integrates to tau_end or until a closure singularity / stiffness event; the
// outcome is recorded in the termination fields, with monitors sampled every
// monitor_stride accepted steps.  Throws InputError when the initial state
// violates the closure constraints beyond 1e-10.
TrajectoryRecord integrate(const FinslerSpace& space, const ClosureSpec& closure,
                           const WorldlineState& initial, const IntegratorConfig& config);

struct ConvergenceReport {
  std::vector<double> tols;
  std::vector<double> final_errors;
  std::vector<double> mean_steps;
  double observed_order = 0.0;
  bool monotone = true;
  bool aborted = false;
  std::string note;
};

// Self-convergence against the tightest tolerance in the list.  For the
// adaptive method the entries are relative tolerances; for the fixed-step
// method they are step sizes.  The observed order is the slope of the final
// error against the mean accepted step.
ConvergenceReport convergence_study(const FinslerSpace& space, const ClosureSpec& closure,
                                    const WorldlineState& initial, const IntegratorConfig& base,
                                    const std::vector<double>& tol_list);

struct AuditChannel {
  std::string name;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;
};

struct AuditReport {
  std::vector<AuditChannel> channels;
  const AuditChannel* find(const std::string& name) const {
    for (const auto& c : channels)
      if (c.name == name) return &c;
    return nullptr;
  }
};

// Per-channel drift over a completed record: every requested conserved
// quantity plus P.P, s^2, the supplementary-condition residual, and L.
AuditReport conservation_audit(const TrajectoryRecord& record,
                               const std::vector<std::string>& killing_names);

}  // namespace finsler
