#include "vc/mpc.hpp"

#include <algorithm>
#include <cmath>

namespace vc {

namespace {

struct RowBuf {
  std::vector<std::pair<int, double>> nz;
  double lo = 0;
  double hi = 0;
};

double pred_s(const PlannedTrajectory& p, int k) {
  if (p.s.empty()) return 0;
  return k < static_cast<int>(p.s.size()) ? p.s[k] : p.s.back();
}

double pred_v(const PlannedTrajectory& p, int k) {
  if (p.v.empty()) return 0;
  return k < static_cast<int>(p.v.size()) ? p.v[k] : p.v.back();
}

std::vector<TrainState> rollout(const SolveContext& ctx, const std::vector<double>& u) {
  const auto& cfg = *ctx.cfg;
  std::vector<TrainState> states(cfg.h_p + 2);
  states[0] = ctx.current;
  for (int k = 0; k <= cfg.h_p; ++k) {
    TrackPoint track = ctx.line->track_at(states[k].s);
    states[k + 1] = euler_step(*ctx.train, states[k], u[k], track, cfg.t_s, true);
  }
  return states;
}

bool vmin_rows_on(const SolveContext& ctx) {
  // Progress incentive for the leader only: a follower takes its pace from
  // the preceding plan through the gap terms, and must be free to stand
  // still whenever its predecessor does.
  return ctx.role == MpcRole::Leader &&
         ctx.profile->max_ahead(ctx.current.s) > ctx.cfg->v_min;
}

double eval_policy_cost(const SolveContext& ctx, const HorizonDecision& dec) {
  const auto& cfg = *ctx.cfg;
  const auto& p = *ctx.train;
  const int h = cfg.h_p;
  const double wj = 1.0 / (p.mass_kg * cfg.t_s * cfg.j_max);
  auto sq = [](double v) { return v * v; };

  double cost = sq(wj * (dec.u[0] - ctx.prev_input));
  for (int k = 0; k + 1 <= h; ++k) cost += sq(wj * (dec.u[k + 1] - dec.u[k]));
  for (int k = 0; k <= h; ++k) {
    cost += cfg.w_eps_vmax / cfg.v_max * dec.slacks.eps_vmax[k];
    cost += cfg.w_eps_vmin / cfg.v_max * dec.slacks.eps_vmin[k];
  }
  if (ctx.role == MpcRole::Leader) {
    for (int k = 1; k <= h; ++k)
      cost += sq((dec.states[k].v - ctx.profile->query(dec.states[k].s)) / cfg.v_max);
  } else {
    for (int k = 1; k <= h + 1; ++k) {
      double d = gap_distance(pred_s(*ctx.preceding, k), dec.states[k].s,
                              ctx.preceding_length);
      cost += sq((d - cfg.d_des) / cfg.d_des);
    }
    for (int k = 0; k <= h + 1; ++k)
      cost += cfg.w_eps_drel / cfg.d_des * dec.slacks.eps_drel[k];
    cost += cfg.w_eps_d / cfg.d_des * dec.slacks.eps_d;
  }
  return cost;
}

// Exact feasibility restore: force bounds and the jerk chain from prev
// onward hold with equality-grade precision, absorbing solver tolerance.
void chain_clamp(const SolveContext& ctx, std::vector<double>& u) {
  const auto& p = *ctx.train;
  const double delta = p.mass_kg * ctx.cfg->t_s * ctx.cfg->j_max;
  double prev = ctx.prev_input;
  for (double& uk : u) {
    const double lo = std::max(-p.f_brake_max, prev - delta);
    const double hi = std::min(p.f_traction_max, prev + delta);
    uk = std::clamp(uk, lo, hi);
    prev = uk;
  }
}

}  // namespace

Linearization linearize_dynamics(const TrainParams& p, const LineProfile& line,
                                 const std::vector<TrainState>& ref,
                                 const std::vector<double>& u_ref, double t_s) {
  const int h = static_cast<int>(u_ref.size()) - 1;  // inputs 0..h
  Linearization lin;
  lin.a.resize(h + 1);
  lin.b.resize(h + 1);
  lin.g.resize(h + 1);
  lin.s_ref.resize(h + 2);
  lin.v_ref.resize(h + 2);
  lin.u_ref = u_ref;
  for (int k = 0; k <= h + 1; ++k) {
    lin.s_ref[k] = ref[k].s;
    lin.v_ref[k] = ref[k].v;
  }
  for (int k = 0; k <= h; ++k) {
    double v0 = ref[k].v;
    TrackPoint track = line.track_at(ref[k].s);
    double drag_slope = p.davis_b + 2.0 * p.davis_c * v0;
    Eigen::Matrix3d a;
    a << 1, t_s, 0,
         0, 1 - t_s * drag_slope / p.mass_kg, t_s / p.mass_kg,
         0, 0, 1 - t_s / p.tau_s;
    lin.a[k] = a;
    lin.b[k] = Eigen::Vector3d(0, 0, t_s / p.tau_s);
    // Residual offset: the affine model reproduces the reference rollout
    // exactly, including steps where the standstill clamp held the train,
    // so a resting train is a fixed point of the prediction.
    const Eigen::Vector3d xk(ref[k].s, ref[k].v, ref[k].f);
    const Eigen::Vector3d xn(ref[k + 1].s, ref[k + 1].v, ref[k + 1].f);
    lin.g[k] = xn - a * xk - lin.b[k] * u_ref[k];
  }
  return lin;
}

PowerRow linearize_power(const TrainParams& p, double v_ref, double u_ref) {
  PowerRow row;
  if (v_ref < 0.5) return row;
  row.active = true;
  row.c_u = v_ref;
  row.c_v = u_ref;
  row.rhs_hi = p.p_traction_max + u_ref * v_ref;
  row.rhs_lo = -p.p_brake_max + u_ref * v_ref;
  return row;
}

PolicyQp build_policy_qp(const SolveContext& ctx, const Linearization& lin) {
  const auto& cfg = *ctx.cfg;
  const auto& p = *ctx.train;
  const int h = cfg.h_p;
  const int nf = cfg.h_c;
  const bool follower = ctx.role == MpcRole::Follower;
  const bool vmin_on = vmin_rows_on(ctx);

  QpLayout lay;
  lay.n_free = nf;
  lay.i_eps_vmax = nf;
  lay.i_eps_vmin = nf + (h + 1);
  int cursor = nf + 2 * (h + 1);
  if (follower) {
    lay.i_eps_drel = cursor;
    cursor += h + 2;
    lay.i_eps_d = cursor;
    cursor += 1;
  }
  lay.i_vterm = cursor;
  lay.n_vars = cursor + 1;
  const int n = lay.n_vars;

  // Condensed state maps: x_k = cst[k] + sens[k] * u_free.
  std::vector<Eigen::Vector3d> cst(h + 2);
  std::vector<Eigen::Matrix<double, 3, Eigen::Dynamic>> sens(h + 2);
  cst[0] = Eigen::Vector3d(ctx.current.s, ctx.current.v, ctx.current.f);
  sens[0].setZero(3, nf);
  for (int k = 0; k <= h; ++k) {
    int ki = std::min(k, nf - 1);
    cst[k + 1] = lin.a[k] * cst[k] + lin.g[k];
    sens[k + 1] = lin.a[k] * sens[k];
    sens[k + 1].col(ki) += lin.b[k];
  }

  Eigen::MatrixXd bigp = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(n);
  std::vector<RowBuf> rows;
  rows.reserve(6 * h + 20);
  constexpr double inf = std::numeric_limits<double>::infinity();

  const double wj = 1.0 / (p.mass_kg * cfg.t_s * cfg.j_max);
  bigp(0, 0) += 2.0 * wj * wj;
  q[0] += -2.0 * wj * wj * ctx.prev_input;
  for (int k = 0; k + 1 < nf; ++k) {
    bigp(k, k) += 2.0 * wj * wj;
    bigp(k + 1, k + 1) += 2.0 * wj * wj;
    bigp(k, k + 1) -= 2.0 * wj * wj;
    bigp(k + 1, k) -= 2.0 * wj * wj;
  }

  auto add_tracking = [&](const Eigen::RowVectorXd& coeff, double cval) {
    // adds (coeff*u + cval)^2 to the objective
    for (int a = 0; a < nf; ++a) {
      if (coeff[a] == 0.0) continue;
      q[a] += 2.0 * cval * coeff[a];
      for (int b = 0; b < nf; ++b) bigp(a, b) += 2.0 * coeff[a] * coeff[b];
    }
  };

  // The envelope moves with position, so its local slope must enter the
  // linearization: without it a train resting at a station sees a zero
  // ceiling everywhere ahead and never finds departure worthwhile.
  std::vector<double> vdp_ref(h + 2), vdp_slope(h + 2);
  const double half = 0.5 * std::max(cfg.grid_ds, 1e-6);
  for (int k = 0; k <= h + 1; ++k) {
    vdp_ref[k] = ctx.profile->query(lin.s_ref[k]);
    vdp_slope[k] = (ctx.profile->query(lin.s_ref[k] + half) -
                    ctx.profile->query(lin.s_ref[k] - half)) /
                   (2.0 * half);
  }

  if (ctx.role == MpcRole::Leader) {
    for (int k = 1; k <= h; ++k) {
      Eigen::RowVectorXd c =
          (sens[k].row(1) - vdp_slope[k] * sens[k].row(0)) / cfg.v_max;
      const double target0 =
          vdp_ref[k] + vdp_slope[k] * (cst[k][0] - lin.s_ref[k]);
      add_tracking(c, (cst[k][1] - target0) / cfg.v_max);
    }
  } else {
    for (int k = 1; k <= h + 1; ++k) {
      Eigen::RowVectorXd c = -sens[k].row(0) / cfg.d_des;
      double d_const =
          gap_distance(pred_s(*ctx.preceding, k), cst[k][0], ctx.preceding_length);
      add_tracking(c, (d_const - cfg.d_des) / cfg.d_des);
    }
  }

  for (int k = 0; k <= h; ++k) {
    q[lay.i_eps_vmax + k] += cfg.w_eps_vmax / cfg.v_max;
    q[lay.i_eps_vmin + k] += cfg.w_eps_vmin / cfg.v_max;
  }
  if (follower) {
    for (int k = 0; k <= h + 1; ++k) q[lay.i_eps_drel + k] += cfg.w_eps_drel / cfg.d_des;
    q[lay.i_eps_d] += cfg.w_eps_d / cfg.d_des;
  }

  for (int k = 0; k < nf; ++k)
    rows.push_back({{{k, 1.0}}, -p.f_brake_max, p.f_traction_max});

  const double jerk_step = p.mass_kg * cfg.t_s * cfg.j_max;
  rows.push_back({{{0, 1.0}}, ctx.prev_input - jerk_step, ctx.prev_input + jerk_step});
  for (int k = 0; k + 1 < nf; ++k)
    rows.push_back({{{k, -1.0}, {k + 1, 1.0}}, -jerk_step, jerk_step});

  auto state_row = [&](int k, int comp, double extra_idx_coeff, int extra_idx,
                       double lo, double hi) {
    RowBuf r;
    for (int a = 0; a < nf; ++a) {
      double c = sens[k](comp, a);
      if (c != 0.0) r.nz.push_back({a, c});
    }
    if (extra_idx >= 0) r.nz.push_back({extra_idx, extra_idx_coeff});
    r.lo = lo;
    r.hi = hi;
    return r;
  };

  for (int k = 0; k <= h; ++k) {
    PowerRow pw = linearize_power(p, lin.v_ref[k], lin.u_ref[k]);
    if (!pw.active) continue;
    RowBuf r;
    int ki = std::min(k, nf - 1);
    Eigen::RowVectorXd coeff = pw.c_v * sens[k].row(1);
    coeff[ki] += pw.c_u;
    for (int a = 0; a < nf; ++a)
      if (coeff[a] != 0.0) r.nz.push_back({a, coeff[a]});
    double cval = pw.c_v * cst[k][1];
    r.lo = pw.rhs_lo - cval;
    r.hi = pw.rhs_hi - cval;
    rows.push_back(std::move(r));
  }

  for (int k = 1; k <= h + 1; ++k) {
    if (lin.v_ref[k] <= 1e-9) continue;  // resting reference: drift is not reversal
    rows.push_back(state_row(k, 1, 0, -1, -cst[k][1], inf));
  }

  for (int k = 0; k <= h; ++k) {
    // v_k - eps <= envelope, with the ceiling following predicted position
    RowBuf r;
    for (int a = 0; a < nf; ++a) {
      double c = sens[k](1, a) - vdp_slope[k] * sens[k](0, a);
      if (c != 0.0) r.nz.push_back({a, c});
    }
    r.nz.push_back({lay.i_eps_vmax + k, -1.0});
    const double ceil0 = vdp_ref[k] + vdp_slope[k] * (cst[k][0] - lin.s_ref[k]);
    r.lo = -inf;
    r.hi = ceil0 - cst[k][1];
    rows.push_back(std::move(r));
  }
  if (vmin_on) {
    for (int k = 0; k <= h; ++k)
      rows.push_back(state_row(k, 1, 1.0, lay.i_eps_vmin + k, cfg.v_min - cst[k][1], inf));
  }

  if (follower) {
    const auto& pre = *ctx.preceding;
    for (int k = 0; k <= h + 1; ++k) {
      double vp = pred_v(pre, k);
      double vr = lin.v_ref[k];
      // d_rel with own speed term linearized at vr:
      //   gap + vp^2/(2 a_l) - (2 vr v - vr^2)/(2 a_f) >= d_des - eps
      RowBuf r;
      for (int a = 0; a < nf; ++a) {
        double c = -sens[k](0, a) - vr / p.brake_rate_self * sens[k](1, a);
        if (c != 0.0) r.nz.push_back({a, c});
      }
      r.nz.push_back({lay.i_eps_drel + k, 1.0});
      double cval = gap_distance(pred_s(pre, k), cst[k][0], ctx.preceding_length) +
                    vp * vp / (2.0 * p.brake_rate_lead) -
                    (2.0 * vr * cst[k][1] - vr * vr) / (2.0 * p.brake_rate_self);
      r.lo = cfg.d_des - cval;
      r.hi = inf;
      rows.push_back(std::move(r));
    }
    RowBuf r;
    for (int a = 0; a < nf; ++a) {
      double c = -sens[h + 1](0, a);
      if (c != 0.0) r.nz.push_back({a, c});
    }
    r.nz.push_back({lay.i_eps_d, 1.0});
    double d_const =
        gap_distance(pred_s(pre, h + 1), cst[h + 1][0], ctx.preceding_length);
    r.lo = cfg.d_min - d_const;
    r.hi = inf;
    rows.push_back(std::move(r));
  }

  {
    // v_term - v_{h+1} = 0
    RowBuf r;
    for (int a = 0; a < nf; ++a) {
      double c = -sens[h + 1](1, a);
      if (c != 0.0) r.nz.push_back({a, c});
    }
    r.nz.push_back({lay.i_vterm, 1.0});
    r.lo = r.hi = cst[h + 1][1];
    rows.push_back(std::move(r));
  }

  for (int j = lay.i_eps_vmax; j < lay.i_vterm; ++j)
    rows.push_back({{{j, 1.0}}, 0.0, inf});

  PolicyQp out;
  out.layout = lay;
  out.qp.P = std::move(bigp);
  out.qp.q = std::move(q);
  const int m = static_cast<int>(rows.size());
  out.qp.A = Eigen::MatrixXd::Zero(m, n);
  out.qp.lo.resize(m);
  out.qp.hi.resize(m);
  for (int i = 0; i < m; ++i) {
    for (const auto& [j, v] : rows[i].nz) out.qp.A(i, j) += v;
    out.qp.lo[i] = rows[i].lo;
    out.qp.hi[i] = rows[i].hi;
  }
  return out;
}

namespace detail {

HorizonDecision plan_impl(const SolveContext& ctx, const PlanHooks* hooks) {
  if (!ctx.train || !ctx.line || !ctx.profile || !ctx.cfg)
    throw ValidationError("plan: incomplete context");
  if (ctx.role == MpcRole::Follower && !ctx.preceding)
    throw ValidationError("plan: follower without a preceding plan");
  const auto& cfg = *ctx.cfg;
  const int h = cfg.h_p;
  const int nf = cfg.h_c;

  std::vector<double> u_ref(h + 1, 0.0);
  if (ctx.reference_guess &&
      ctx.reference_guess->u.size() == static_cast<size_t>(h + 1))
    u_ref = ctx.reference_guess->u;
  std::vector<TrainState> ref_states = rollout(ctx, u_ref);

  // A resting reference pins the whole linearization to the stopped state,
  // where departure never looks worthwhile. Seed a jerk-limited pull-away
  // instead and let the passes refine it; followers are paced by the gap
  // terms and need no seed.
  const bool resting =
      ctx.current.v < 0.01 &&
      std::all_of(u_ref.begin(), u_ref.end(),
                  [](double u) { return std::abs(u) < 1.0; });
  if (resting && vmin_rows_on(ctx)) {
    const double jerk_step = ctx.train->mass_kg * cfg.t_s * cfg.j_max;
    const double cap =
        std::min(ctx.train->f_traction_max,
                 ctx.train->adhesion_mu * ctx.train->mass_kg * kGravity);
    for (int k = 0; k <= h; ++k)
      u_ref[k] = std::min(cap, ctx.prev_input + (k + 1) * jerk_step);
    ref_states = rollout(ctx, u_ref);
  }

  QpSolution sol;
  QpSolution warm;
  bool have_warm = false;
  bool degraded = false;
  PolicyQp pol;
  int passes = 0;
  long qp_iters = 0;

  for (int pass = 1; pass <= cfg.sqp_max_passes; ++pass) {
    Linearization lin =
        linearize_dynamics(*ctx.train, *ctx.line, ref_states, u_ref, cfg.t_s);
    pol = build_policy_qp(ctx, lin);
    if (hooks && hooks->augment) hooks->augment(pol.qp, pol.layout.i_vterm);
    sol = solve(pol.qp, cfg.qp, have_warm ? &warm : nullptr);
    qp_iters += sol.iterations;
    if (sol.status == QpStatus::Infeasible)
      throw SolverFailure("plan: policy program reported infeasible");
    warm = sol;
    have_warm = true;
    passes = pass;

    std::vector<double> u_new(h + 1);
    for (int k = 0; k <= h; ++k) u_new[k] = sol.x[std::min(k, nf - 1)];
    chain_clamp(ctx, u_new);
    double step = 0;
    for (int k = 0; k <= h; ++k) step += (u_new[k] - u_ref[k]) * (u_new[k] - u_ref[k]);
    step = std::sqrt(step / (h + 1));
    u_ref = u_new;
    ref_states = rollout(ctx, u_ref);
    if (sol.status == QpStatus::MaxIterations) {
      degraded = true;  // best iterate kept; not worth refining further
      break;
    }
    if (step < cfg.sqp_step_tol) break;
  }

  HorizonDecision dec;
  dec.u = u_ref;
  dec.states = ref_states;
  dec.degraded = degraded;
  dec.sqp_passes = passes;
  dec.qp_iterations = qp_iters;
  const auto& lay = pol.layout;
  dec.slacks.eps_vmax.resize(h + 1);
  dec.slacks.eps_vmin.resize(h + 1);
  for (int k = 0; k <= h; ++k) {
    dec.slacks.eps_vmax[k] = std::max(0.0, warm.x[lay.i_eps_vmax + k]);
    dec.slacks.eps_vmin[k] = std::max(0.0, warm.x[lay.i_eps_vmin + k]);
  }
  if (ctx.role == MpcRole::Follower) {
    dec.slacks.eps_drel.resize(h + 2);
    for (int k = 0; k <= h + 1; ++k)
      dec.slacks.eps_drel[k] = std::max(0.0, warm.x[lay.i_eps_drel + k]);
    dec.slacks.eps_d = std::max(0.0, warm.x[lay.i_eps_d]);
  }
  if (hooks && hooks->learning_weights) {
    const auto& qf = *hooks->learning_weights;
    int nl = static_cast<int>(qf.size());
    dec.lambda.resize(nl);
    double lcost = 0;
    for (int i = 0; i < nl; ++i) {
      dec.lambda[i] = warm.x[lay.n_vars + i];
      lcost += qf[i] * dec.lambda[i];
    }
    dec.learning_cost = lcost;
    if (hooks->window_speeds) {
      double mix = 0;
      for (int i = 0; i < nl; ++i) mix += (*hooks->window_speeds)[i] * dec.lambda[i];
      dec.vterm_mix_gap = std::abs(warm.x[lay.i_vterm] - mix);
    }
  }
  dec.policy_cost = eval_policy_cost(ctx, dec);
  return dec;
}

}  // namespace detail

HorizonDecision plan(const SolveContext& ctx) { return detail::plan_impl(ctx, nullptr); }

PlannedTrajectory published_plan(const HorizonDecision& d, double t_s) {
  PlannedTrajectory out;
  out.t_s = t_s;
  out.s.reserve(d.states.size());
  out.v.reserve(d.states.size());
  for (const auto& st : d.states) {
    out.s.push_back(st.s);
    out.v.push_back(st.v);
  }
  return out;
}

}  // namespace vc
