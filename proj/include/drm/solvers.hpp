#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "drm/q_operator.hpp"

namespace drm {

struct DrmHyperParams {
  double alpha = 0.0;
  double beta = 1.0;

  /// alpha >= 0, beta > 0, both finite.
  void validate() const;
};

enum class SolverMethod { closed_form, gd, ppa, apg };

std::string method_name(SolverMethod method);
SolverMethod parse_method(const std::string& name);

/// How the PPA constant c >= sigma_max(Q) is obtained.
struct CStrategy {
  enum class Kind { power_iteration, gershgorin, fixed };

  Kind kind = Kind::power_iteration;
  double value = 0.0;  // used by `fixed`
  double power_tol = 1e-3;
  int power_max_iter = 200;

  static CStrategy power() { return {}; }
  static CStrategy gershgorin() { return {Kind::gershgorin}; }
  static CStrategy fixed(double c) { return {Kind::fixed, c}; }

  /// Parses "power", "gershgorin" or "fixed:<value>".
  static CStrategy parse(const std::string& text);
  std::string to_string() const;
};

struct SolverConfig {
  SolverMethod method = SolverMethod::closed_form;
  double eps = 1e-5;  // stop when |w(t+1) - w(t)|_2 <= eps
  int max_iter = 150;
  CStrategy c_strategy;
  /// APG initial Lipschitz estimate; <= 0 selects beta + mean(diag Q).
  double apg_b0 = 0.0;
  double apg_eta = 2.0;
  bool apg_backtracking = true;
  /// Record objective values in the trace (costs one extra matvec per APG
  /// iteration; free for GD and PPA).
  bool record_trace = true;

  void validate() const;
};

enum class Termination { tolerance, max_iter, one_shot };

std::string termination_name(Termination t);

struct TraceEntry {
  int iteration = 0;
  double objective = 0.0;  // f(w(iteration)); NaN when not recorded
  double step_norm = 0.0;  // |w(iteration) - w(iteration-1)|_2, 0 for iteration 0
  std::int64_t elapsed_ns = 0;  // solver time up to this iterate, excluding trace bookkeeping
};

struct SolverReport {
  Eigen::VectorXd w;
  int iterations = 0;
  std::vector<TraceEntry> trace;
  Termination termination = Termination::one_shot;
  /// PPA: the c in use. APG: the final Lipschitz estimate b.
  double step_constant = 0.0;
  /// APG: b used to produce w(t), aligned with trace.
  std::vector<double> lipschitz_history;

  bool converged() const { return termination != Termination::max_iter; }
};

/// f(w) = 1/2 w'Qw - w'Kx + beta/2 |w|^2, using one matvec.
double objective(const QOperator& op, const Eigen::VectorXd& kx, double beta, const Eigen::VectorXd& w);
/// (Q + beta I) w - Kx.
Eigen::VectorXd gradient(const QOperator& op, const Eigen::VectorXd& kx, double beta, const Eigen::VectorXd& w);

/// Cholesky factor of Q + beta I, reusable across any number of right-hand
/// sides Kx.
class ClosedFormSolver {
 public:
  ClosedFormSolver(const Eigen::MatrixXd& q, double beta);
  ClosedFormSolver(const QOperator& op, double beta);

  Index size() const { return size_; }
  SolverReport solve(const Eigen::VectorXd& kx) const;
  Eigen::MatrixXd solve_many(const Eigen::MatrixXd& kx) const;

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Index size_ = 0;
};

/// Solves (K + alpha H - alpha B + beta I) w = Kx by Cholesky factorization.
/// `B` holds the per-class blocks; their sizes define the class structure.
SolverReport solve_closed_form(const Eigen::MatrixXd& K, const Eigen::VectorXd& H,
                               const std::vector<Eigen::MatrixXd>& B, const Eigen::VectorXd& kx,
                               const DrmHyperParams& params);

/// Resolves the PPA constant c for `op` according to `strategy`.
double resolve_c(const QOperator& op, const CStrategy& strategy);

/// Gradient descent with exact line search. Two matvecs per iteration.
SolverReport solve_gd(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                      const SolverConfig& config, const Eigen::VectorXd* w0 = nullptr);

/// Proximal-point iteration w <- (Kx - Qw + c w) / (beta + c). One matvec per
/// iteration. `c` overrides config.c_strategy when given.
SolverReport solve_ppa(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                       const SolverConfig& config, std::optional<double> c = std::nullopt,
                       const Eigen::VectorXd* w0 = nullptr);

/// Accelerated proximal gradient with optional backtracking on b.
SolverReport solve_apg(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                       const SolverConfig& config, const Eigen::VectorXd* w0 = nullptr);

/// Momentum update d(t+1) = (1 + sqrt(1 + 4 d(t)^2)) / 2.
double apg_next_momentum(double d);

/// Dispatches on config.method. Closed form factors Q + beta I on the fly.
SolverReport solve(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                   const SolverConfig& config);

/// Writes `iteration,objective,step_norm,elapsed_ns` rows with a header.
void write_trace_csv(std::ostream& out, const SolverReport& report);

}  // namespace drm
