#include "vc/lmpc.hpp"

#include <algorithm>

namespace vc {

void record_iteration(SafeSet& set, int iteration_id, IterationTrace trace,
                      std::vector<double> stage_cost) {
  const size_t n = trace.s.size();
  if (trace.t.size() != n || trace.v.size() != n || trace.f.size() != n ||
      trace.u.size() != n || stage_cost.size() != n)
    throw LengthMismatch("record_iteration: arrays differ in length");
  if (n == 0) throw LengthMismatch("record_iteration: empty traversal");
  StoredIteration it;
  it.iteration_id = iteration_id;
  it.trace = std::move(trace);
  it.stage_cost = std::move(stage_cost);
  it.cost_to_go.resize(n);
  double acc = 0;
  for (size_t k = n; k-- > 0;) {
    acc += it.stage_cost[k];
    it.cost_to_go[k] = acc;
  }
  set.iterations.push_back(std::move(it));
}

SafeSampleWindow window_at(const SafeSet& set, double s_now, int h_p, QfMode mode) {
  if (set.iterations.empty())
    throw EmptySafeSet("window_at: no stored iterations");
  SafeSampleWindow w;
  w.speeds.reserve(set.iterations.size() * (h_p + 1));
  w.qf.reserve(set.iterations.size() * (h_p + 1));
  for (const auto& it : set.iterations) {
    const auto& s = it.trace.s;
    const auto first = std::lower_bound(s.begin(), s.end(), s_now);
    const int last = static_cast<int>(s.size()) - 1;
    const int j0 = std::min(static_cast<int>(first - s.begin()), last);
    for (int off = 0; off <= h_p; ++off) {
      int j = std::min(j0 + off, last);
      w.speeds.push_back(it.trace.v[j]);
      w.qf.push_back(mode == QfMode::CostToGo ? it.cost_to_go[j] : it.stage_cost[j]);
    }
  }
  return w;
}

void augment_with_learning(QpProblem& qp, const SafeSampleWindow& window,
                           int terminal_speed_var_index) {
  const int nl = static_cast<int>(window.speeds.size());
  if (nl == 0) throw EmptySafeSet("augment_with_learning: empty window");
  const int n0 = static_cast<int>(qp.P.rows());
  const int m0 = static_cast<int>(qp.A.rows());
  if (terminal_speed_var_index < 0 || terminal_speed_var_index >= n0)
    throw ValidationError("augment_with_learning: bad terminal variable index");

  qp.P.conservativeResize(n0 + nl, n0 + nl);
  qp.P.rightCols(nl).setZero();
  qp.P.bottomRows(nl).setZero();
  qp.q.conservativeResize(n0 + nl);
  for (int i = 0; i < nl; ++i) qp.q[n0 + i] = window.qf[i];

  qp.A.conservativeResize(m0 + 2 + nl, n0 + nl);
  qp.A.rightCols(nl).setZero();
  qp.A.bottomRows(2 + nl).setZero();
  qp.lo.conservativeResize(m0 + 2 + nl);
  qp.hi.conservativeResize(m0 + 2 + nl);

  for (int i = 0; i < nl; ++i) qp.A(m0, n0 + i) = 1.0;
  qp.lo[m0] = qp.hi[m0] = 1.0;

  qp.A(m0 + 1, terminal_speed_var_index) = 1.0;
  for (int i = 0; i < nl; ++i) qp.A(m0 + 1, n0 + i) = -window.speeds[i];
  qp.lo[m0 + 1] = qp.hi[m0 + 1] = 0.0;

  for (int i = 0; i < nl; ++i) {
    qp.A(m0 + 2 + i, n0 + i) = 1.0;
    qp.lo[m0 + 2 + i] = 0.0;
    qp.hi[m0 + 2 + i] = std::numeric_limits<double>::infinity();
  }
}

HorizonDecision lmpc_plan(const SolveContext& ctx, const SafeSet& set) {
  if (!ctx.cfg) throw ValidationError("lmpc_plan: incomplete context");
  if (set.iterations.empty()) return plan(ctx);
  SafeSampleWindow window =
      window_at(set, ctx.current.s, ctx.cfg->h_p, ctx.cfg->qf_mode);
  detail::PlanHooks hooks;
  hooks.augment = [&window](QpProblem& qp, int i_vterm) {
    augment_with_learning(qp, window, i_vterm);
  };
  hooks.learning_weights = &window.qf;
  hooks.window_speeds = &window.speeds;
  return detail::plan_impl(ctx, &hooks);
}

}  // namespace vc
