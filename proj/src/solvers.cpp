#include "drm/solvers.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "drm/error.hpp"

namespace drm {

void DrmHyperParams::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ValidationError("alpha must be finite and >= 0");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be finite and > 0");
}

std::string method_name(SolverMethod method) {
  switch (method) {
    case SolverMethod::closed_form:
      return "closed";
    case SolverMethod::gd:
      return "gd";
    case SolverMethod::ppa:
      return "ppa";
    case SolverMethod::apg:
      return "apg";
  }
  return "unknown";
}

SolverMethod parse_method(const std::string& name) {
  if (name == "closed" || name == "closed_form") return SolverMethod::closed_form;
  if (name == "gd") return SolverMethod::gd;
  if (name == "ppa") return SolverMethod::ppa;
  if (name == "apg") return SolverMethod::apg;
  throw ValidationError("unknown solver '" + name + "' (expected closed, gd, ppa or apg)");
}

CStrategy CStrategy::parse(const std::string& text) {
  if (text == "power" || text == "power_iteration") return power();
  if (text == "gershgorin") return gershgorin();
  if (text.rfind("fixed:", 0) == 0) {
    const std::string value = text.substr(6);
    std::size_t used = 0;
    double c = 0;
    try {
      c = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size() || value.empty()) throw ValidationError("invalid fixed c value '" + value + "'");
    if (!(c > 0.0)) throw ValidationError("fixed c must be > 0");
    return fixed(c);
  }
  throw ValidationError("unknown c strategy '" + text + "' (expected power, gershgorin or fixed:<v>)");
}

std::string CStrategy::to_string() const {
  switch (kind) {
    case Kind::power_iteration:
      return "power";
    case Kind::gershgorin:
      return "gershgorin";
    case Kind::fixed: {
      std::ostringstream os;
      os.precision(17);
      os << "fixed:" << value;
      return os.str();
    }
  }
  return "power";
}

void SolverConfig::validate() const {
  if (!(eps > 0.0)) throw ValidationError("eps must be > 0");
  if (max_iter < 1) throw ValidationError("max_iter must be >= 1");
  if (!(apg_eta > 1.0)) throw ValidationError("APG eta must be > 1");
  if (c_strategy.kind == CStrategy::Kind::fixed && !(c_strategy.value > 0.0))
    throw ValidationError("fixed c must be > 0");
}

std::string termination_name(Termination t) {
  switch (t) {
    case Termination::tolerance:
      return "tolerance";
    case Termination::max_iter:
      return "max_iter";
    case Termination::one_shot:
      return "one_shot";
  }
  return "unknown";
}

double objective(const QOperator& op, const Eigen::VectorXd& kx, double beta, const Eigen::VectorXd& w) {
  if (kx.size() != op.size() || w.size() != op.size()) throw DimensionError("objective: size mismatch");
  const Eigen::VectorXd qw = op.apply(w);
  return 0.5 * w.dot(qw) - w.dot(kx) + 0.5 * beta * w.squaredNorm();
}

Eigen::VectorXd gradient(const QOperator& op, const Eigen::VectorXd& kx, double beta, const Eigen::VectorXd& w) {
  if (kx.size() != op.size() || w.size() != op.size()) throw DimensionError("gradient: size mismatch");
  Eigen::VectorXd g = op.apply(w);
  g += beta * w - kx;
  return g;
}

namespace {

using Clock = std::chrono::steady_clock;

// Accumulates solver time; paused around trace bookkeeping.
class Stopwatch {
 public:
  Stopwatch() : start_(Clock::now()) {}
  void pause() {
    if (running_) {
      total_ += Clock::now() - start_;
      running_ = false;
    }
  }
  void resume() {
    if (!running_) {
      start_ = Clock::now();
      running_ = true;
    }
  }
  std::int64_t elapsed_ns() const {
    auto t = total_;
    if (running_) t += Clock::now() - start_;
    return std::chrono::duration_cast<std::chrono::nanoseconds>(t).count();
  }

 private:
  Clock::time_point start_;
  Clock::duration total_{};
  bool running_ = true;
};

double objective_from_qw(const Eigen::VectorXd& w, const Eigen::VectorXd& qw, const Eigen::VectorXd& kx,
                         double beta) {
  return 0.5 * w.dot(qw) - w.dot(kx) + 0.5 * beta * w.squaredNorm();
}

void check_inputs(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                  const SolverConfig& config, const Eigen::VectorXd* w0) {
  params.validate();
  config.validate();
  if (params.alpha != op.alpha())
    throw ValidationError("hyperparameter alpha does not match the operator's alpha");
  if (kx.size() != op.size())
    throw DimensionError("Kx has length " + std::to_string(kx.size()) + ", expected " + std::to_string(op.size()));
  if (w0 && w0->size() != op.size()) throw DimensionError("initial point has the wrong length");
}

void check_finite(const Eigen::VectorXd& w, const char* solver) {
  if (!w.allFinite()) throw NumericalError(std::string(solver) + " produced non-finite iterates");
}

// Fills in the objective of the last trace entry if it was not recorded
// during the iteration (needs one extra matvec).
void finish_trace(SolverReport& report, const QOperator& op, const Eigen::VectorXd& kx, double beta,
                  const SolverConfig& config) {
  if (!config.record_trace || report.trace.empty()) return;
  auto& last = report.trace.back();
  if (std::isnan(last.objective)) last.objective = objective(op, kx, beta, report.w);
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

// ---------------------------------------------------------------------------
// Closed form

ClosedFormSolver::ClosedFormSolver(const Eigen::MatrixXd& q, double beta) : size_(q.rows()) {
  if (!(beta > 0.0)) throw ValidationError("beta must be > 0");
  if (q.rows() != q.cols()) throw DimensionError("Q must be square");
  Eigen::MatrixXd m = q;
  m.diagonal().array() += beta;
  llt_.compute(m);
  if (llt_.info() != Eigen::Success)
    throw NumericalError("Cholesky factorization of Q + beta I failed (non-finite or ill-conditioned input)");
}

ClosedFormSolver::ClosedFormSolver(const QOperator& op, double beta)
    : ClosedFormSolver(op.dense_q() ? *op.dense_q() : op.to_dense(), beta) {}

SolverReport ClosedFormSolver::solve(const Eigen::VectorXd& kx) const {
  if (kx.size() != size_) throw DimensionError("Kx length does not match the factorization");
  Stopwatch sw;
  SolverReport report;
  report.w = llt_.solve(kx);
  check_finite(report.w, "closed form");
  report.termination = Termination::one_shot;
  // (Q + beta I) w = Kx, hence f(w) = -1/2 w'Kx at the solution.
  report.trace.push_back({0, -0.5 * report.w.dot(kx), 0.0, sw.elapsed_ns()});
  return report;
}

Eigen::MatrixXd ClosedFormSolver::solve_many(const Eigen::MatrixXd& kx) const {
  if (kx.rows() != size_) throw DimensionError("Kx rows do not match the factorization");
  Eigen::MatrixXd w = llt_.solve(kx);
  if (!w.allFinite()) throw NumericalError("closed form produced non-finite values");
  return w;
}

SolverReport solve_closed_form(const Eigen::MatrixXd& K, const Eigen::VectorXd& H,
                               const std::vector<Eigen::MatrixXd>& B, const Eigen::VectorXd& kx,
                               const DrmHyperParams& params) {
  params.validate();
  const Index n = K.rows();
  if (K.cols() != n || H.size() != n || kx.size() != n) throw DimensionError("closed form: size mismatch");
  Eigen::MatrixXd q = K;
  q.diagonal() += params.alpha * H;
  Index off = 0;
  for (const auto& block : B) {
    if (block.rows() != block.cols() || off + block.rows() > n) throw DimensionError("closed form: bad B block");
    q.block(off, off, block.rows(), block.cols()) -= params.alpha * block;
    off += block.rows();
  }
  if (off != n) throw DimensionError("closed form: B blocks do not cover K");
  return ClosedFormSolver(q, params.beta).solve(kx);
}

// ---------------------------------------------------------------------------
// Iterative solvers

double resolve_c(const QOperator& op, const CStrategy& strategy) {
  switch (strategy.kind) {
    case CStrategy::Kind::fixed:
      if (!(strategy.value > 0.0)) throw ValidationError("fixed c must be > 0");
      return strategy.value;
    case CStrategy::Kind::gershgorin:
      return gershgorin_bound(op);
    case CStrategy::Kind::power_iteration:
      return sigma_max_estimate(op, strategy.power_tol, strategy.power_max_iter).c;
  }
  return gershgorin_bound(op);
}

namespace {

// Feature-backed operators: each iteration streams F once through
// QOperator::sweep and carries the per-class projections F_k w_k forward.
// Projections updated by linear combination are recomputed exactly every
// kRefresh iterations so rounding cannot accumulate.
constexpr int kRefresh = 64;

double objective_from_projection(const QOperator& op, const Eigen::MatrixXd& proj, const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& kx, double beta) {
  return 0.5 * op.quadratic(proj, w) - w.dot(kx) + 0.5 * beta * w.squaredNorm();
}

void finish_streaming_trace(SolverReport& report, const QOperator& op, const Eigen::MatrixXd& proj,
                            const Eigen::VectorXd& kx, double beta, const SolverConfig& config) {
  if (!config.record_trace || report.trace.empty()) return;
  auto& last = report.trace.back();
  if (std::isnan(last.objective)) last.objective = objective_from_projection(op, proj, report.w, kx, beta);
}

SolverReport gd_streaming(const QOperator& op, const Eigen::VectorXd& kx, double beta, const SolverConfig& config,
                          const Eigen::VectorXd* w0) {
  Stopwatch sw;
  SolverReport report;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::MatrixXd pw = op.project(w);
  Eigen::VectorXd g(op.size());
  const auto gradient_block = [&](Index off, const Eigen::Ref<const Eigen::VectorXd>& qv,
                                  Eigen::Ref<Eigen::VectorXd> y) {
    const Index len = qv.size();
    y = qv + beta * w.segment(off, len) - kx.segment(off, len);
  };
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});

  for (int t = 0;; ++t) {
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective_from_projection(op, pw, w, kx, beta);
      sw.resume();
    }
    if (t == config.max_iter) break;
    const Eigen::MatrixXd pg = op.sweep(w, pw, g, gradient_block);
    const double gg = g.squaredNorm();
    if (gg == 0.0) {
      report.termination = Termination::tolerance;
      break;
    }
    const double step = gg / (op.quadratic(pg, g) + beta * gg);
    w -= step * g;
    check_finite(w, "gradient descent");
    if ((t + 1) % kRefresh == 0)
      pw = op.project(w);
    else
      pw -= step * pg;
    const double step_norm = step * std::sqrt(gg);
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  sw.pause();
  finish_streaming_trace(report, op, pw, kx, beta, config);
  return report;
}

SolverReport ppa_streaming(const QOperator& op, const Eigen::VectorXd& kx, double beta, double c,
                           const SolverConfig& config, const Eigen::VectorXd* w0) {
  Stopwatch sw;
  SolverReport report;
  report.step_constant = c;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::MatrixXd pw = op.project(w);
  Eigen::VectorXd next(op.size());
  const double inv = 1.0 / (beta + c);
  double step_sq = 0.0;
  const auto prox_block = [&](Index off, const Eigen::Ref<const Eigen::VectorXd>& qv,
                              Eigen::Ref<Eigen::VectorXd> y) {
    const Index len = qv.size();
    const auto wb = w.segment(off, len);
    y = (kx.segment(off, len) - qv + c * wb) * inv;
    step_sq += (y - wb).squaredNorm();
  };
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});

  for (int t = 0; t < config.max_iter; ++t) {
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective_from_projection(op, pw, w, kx, beta);
      sw.resume();
    }
    step_sq = 0.0;
    pw = op.sweep(w, pw, next, prox_block);
    const double step_norm = std::sqrt(step_sq);
    w.swap(next);
    check_finite(w, "PPA");
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  sw.pause();
  finish_streaming_trace(report, op, pw, kx, beta, config);
  return report;
}

SolverReport apg_streaming(const QOperator& op, const Eigen::VectorXd& kx, double beta, double b,
                           const SolverConfig& config, const Eigen::VectorXd* w0) {
  Stopwatch sw;
  SolverReport report;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::MatrixXd pw = op.project(w);
  Eigen::VectorXd v = w, gv(op.size()), next(op.size());
  Eigen::MatrixXd pv = pw, pnext;
  double d = 1.0;
  const auto gradient_block = [&](Index off, const Eigen::Ref<const Eigen::VectorXd>& qv,
                                  Eigen::Ref<Eigen::VectorXd> y) {
    const Index len = qv.size();
    y = qv + beta * v.segment(off, len) - kx.segment(off, len);
  };
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});
  report.lipschitz_history.push_back(b);
  if (config.record_trace) {
    sw.pause();
    report.trace.back().objective = objective_from_projection(op, pw, w, kx, beta);
    sw.resume();
  }

  for (int t = 0; t < config.max_iter; ++t) {
    const Eigen::MatrixXd pg = op.sweep(v, pv, gv, gradient_block);
    if (config.apg_backtracking) {
      const double gg = gv.squaredNorm();
      const double gqg = op.quadratic(pg, gv);
      while (gqg > (b - beta) * gg) b *= config.apg_eta;
    }
    next = v - gv / b;
    pnext = pv - pg / b;
    const double d_next = apg_next_momentum(d);
    const double m = (d - 1.0) / d_next;
    const double step_norm = (next - w).norm();
    v = next + m * (next - w);
    pv = pnext + m * (pnext - pw);
    w.swap(next);
    pw.swap(pnext);
    d = d_next;
    check_finite(w, "APG");
    if ((t + 1) % kRefresh == 0) {
      pw = op.project(w);
      pv = op.project(v);
    }
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    report.lipschitz_history.push_back(b);
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective_from_projection(op, pw, w, kx, beta);
      sw.resume();
    }
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  report.step_constant = b;
  return report;
}

}  // namespace

SolverReport solve_gd(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                      const SolverConfig& config, const Eigen::VectorXd* w0) {
  check_inputs(op, kx, params, config, w0);
  const double beta = params.beta;
  if (op.feature_backed()) return gd_streaming(op, kx, beta, config, w0);
  Stopwatch sw;
  SolverReport report;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::VectorXd qw(op.size()), g(op.size()), qg(op.size());
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});

  for (int t = 0;; ++t) {
    op.apply(w, qw);
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective_from_qw(w, qw, kx, beta);
      sw.resume();
    }
    if (t == config.max_iter) break;
    g = qw + beta * w - kx;
    const double gg = g.squaredNorm();
    if (gg == 0.0) {  // w is the unique minimizer
      report.termination = Termination::tolerance;
      break;
    }
    op.apply(g, qg);
    const double step = gg / (g.dot(qg) + beta * gg);
    w -= step * g;
    check_finite(w, "gradient descent");
    const double step_norm = step * std::sqrt(gg);
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  sw.pause();
  finish_trace(report, op, kx, beta, config);
  return report;
}

SolverReport solve_ppa(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                       const SolverConfig& config, std::optional<double> c_override, const Eigen::VectorXd* w0) {
  check_inputs(op, kx, params, config, w0);
  const double beta = params.beta;
  const double c = c_override ? *c_override : resolve_c(op, config.c_strategy);
  if (!(c >= 0.0) || !std::isfinite(c)) throw ValidationError("PPA constant c must be finite and >= 0");
  if (op.feature_backed()) return ppa_streaming(op, kx, beta, c, config, w0);

  Stopwatch sw;
  SolverReport report;
  report.step_constant = c;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::VectorXd qw(op.size()), next(op.size());
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});
  const double inv = 1.0 / (beta + c);

  for (int t = 0; t < config.max_iter; ++t) {
    op.apply(w, qw);
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective_from_qw(w, qw, kx, beta);
      sw.resume();
    }
    next = (kx - qw + c * w) * inv;
    const double step_norm = (next - w).norm();
    w.swap(next);
    check_finite(w, "PPA");
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  sw.pause();
  finish_trace(report, op, kx, beta, config);
  return report;
}

double apg_next_momentum(double d) { return (1.0 + std::sqrt(1.0 + 4.0 * d * d)) / 2.0; }

SolverReport solve_apg(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                       const SolverConfig& config, const Eigen::VectorXd* w0) {
  check_inputs(op, kx, params, config, w0);
  const double beta = params.beta;
  double b = config.apg_b0;
  if (!(b > 0.0)) {
    b = config.apg_backtracking ? beta + op.mean_diagonal() : resolve_c(op, config.c_strategy) + beta;
    if (!(b > 0.0)) b = beta;
  }
  if (op.feature_backed()) return apg_streaming(op, kx, beta, b, config, w0);

  Stopwatch sw;
  SolverReport report;
  Eigen::VectorXd& w = report.w;
  w = w0 ? *w0 : Eigen::VectorXd::Zero(op.size());
  Eigen::VectorXd v = w, qv(op.size()), gv(op.size()), qg(op.size()), next(op.size());
  double d = 1.0;
  report.termination = Termination::max_iter;
  report.trace.push_back({0, kNaN, 0.0, 0});
  report.lipschitz_history.push_back(b);
  if (config.record_trace) {
    sw.pause();
    report.trace.back().objective = objective(op, kx, beta, w);
    sw.resume();
  }

  for (int t = 0; t < config.max_iter; ++t) {
    op.apply(v, qv);
    gv = qv + beta * v - kx;
    if (config.apg_backtracking) {
      const double gg = gv.squaredNorm();
      op.apply(gv, qg);
      const double gqg = gv.dot(qg);
      while (gqg > (b - beta) * gg) b *= config.apg_eta;
    }
    next = v - gv / b;
    const double d_next = apg_next_momentum(d);
    const double step_norm = (next - w).norm();
    v = next + ((d - 1.0) / d_next) * (next - w);
    w.swap(next);
    d = d_next;
    check_finite(w, "APG");
    report.iterations = t + 1;
    report.trace.push_back({t + 1, kNaN, step_norm, sw.elapsed_ns()});
    report.lipschitz_history.push_back(b);
    if (config.record_trace) {
      sw.pause();
      report.trace.back().objective = objective(op, kx, beta, w);
      sw.resume();
    }
    if (step_norm <= config.eps) {
      report.termination = Termination::tolerance;
      break;
    }
  }
  report.step_constant = b;
  return report;
}

SolverReport solve(const QOperator& op, const Eigen::VectorXd& kx, const DrmHyperParams& params,
                   const SolverConfig& config) {
  switch (config.method) {
    case SolverMethod::closed_form:
      params.validate();
      if (params.alpha != op.alpha())
        throw ValidationError("hyperparameter alpha does not match the operator's alpha");
      return ClosedFormSolver(op, params.beta).solve(kx);
    case SolverMethod::gd:
      return solve_gd(op, kx, params, config);
    case SolverMethod::ppa:
      return solve_ppa(op, kx, params, config);
    case SolverMethod::apg:
      return solve_apg(op, kx, params, config);
  }
  throw ValidationError("unknown solver method");
}

void write_trace_csv(std::ostream& out, const SolverReport& report) {
  const auto old_precision = out.precision(17);
  out << "iteration,objective,step_norm,elapsed_ns\n";
  for (const auto& e : report.trace)
    out << e.iteration << ',' << e.objective << ',' << e.step_norm << ',' << e.elapsed_ns << '\n';
  out.precision(old_precision);
}

}  // namespace drm
