#include "vc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <json.hpp>

namespace vc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SparseRows {
  std::vector<int> offset;  // size m+1
  std::vector<int> col;
  std::vector<double> val;

  void build(const Eigen::MatrixXd& a) {
    int m = static_cast<int>(a.rows());
    int n = static_cast<int>(a.cols());
    offset.assign(1, 0);
    col.clear();
    val.clear();
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) {
        double v = a(i, j);
        if (v != 0.0) {
          col.push_back(j);
          val.push_back(v);
        }
      }
      offset.push_back(static_cast<int>(col.size()));
    }
  }

  // out = A x
  void mul(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    int m = static_cast<int>(offset.size()) - 1;
    for (int i = 0; i < m; ++i) {
      double acc = 0;
      for (int k = offset[i]; k < offset[i + 1]; ++k) acc += val[k] * x[col[k]];
      out[i] = acc;
    }
  }

  // out = A' w
  void mul_t(const Eigen::VectorXd& w, Eigen::VectorXd& out) const {
    out.setZero();
    int m = static_cast<int>(offset.size()) - 1;
    for (int i = 0; i < m; ++i) {
      double wi = w[i];
      if (wi == 0.0) continue;
      for (int k = offset[i]; k < offset[i + 1]; ++k) out[col[k]] += val[k] * wi;
    }
  }

  double row_dot(int i, const Eigen::VectorXd& x) const {
    double acc = 0;
    for (int k = offset[i]; k < offset[i + 1]; ++k) acc += val[k] * x[col[k]];
    return acc;
  }
};

struct Residuals {
  double primal = 0;
  double dual = 0;
  double max() const { return std::max(primal, dual); }
};

Residuals residuals_unscaled(const QpProblem& p, const SparseRows& rows,
                             const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                             Eigen::VectorXd& ax, Eigen::VectorXd& px,
                             Eigen::VectorXd& aty) {
  rows.mul(x, ax);
  px.noalias() = p.P * x;
  rows.mul_t(y, aty);

  // Each row is measured against its own magnitude; normalizing by a global
  // bound norm lets a small-scale row hide behind a large-scale one.
  double viol = 0;
  for (int i = 0; i < p.m(); ++i) {
    double row_scale = std::abs(ax[i]);
    double row_viol = 0;
    if (std::isfinite(p.lo[i])) {
      row_scale = std::max(row_scale, std::abs(p.lo[i]));
      row_viol = std::max(row_viol, p.lo[i] - ax[i]);
    }
    if (std::isfinite(p.hi[i])) {
      row_scale = std::max(row_scale, std::abs(p.hi[i]));
      row_viol = std::max(row_viol, ax[i] - p.hi[i]);
    }
    viol = std::max(viol, row_viol / (1.0 + row_scale));
  }
  double px_norm = px.lpNorm<Eigen::Infinity>();
  double q_norm = p.q.lpNorm<Eigen::Infinity>();
  double aty_norm = aty.lpNorm<Eigen::Infinity>();
  double stat = (px + p.q + aty).lpNorm<Eigen::Infinity>();

  Residuals r;
  r.primal = viol;
  r.dual = stat / (1.0 + std::max({px_norm, q_norm, aty_norm}));
  return r;
}

struct Scaling {
  Eigen::VectorXd d;  // variable scaling, x = d .* x_scaled
  Eigen::VectorXd e;  // row scaling
  double c = 1.0;     // cost scaling
};

void ruiz_equilibrate(Eigen::MatrixXd& P, Eigen::VectorXd& q, Eigen::MatrixXd& A,
                      Eigen::VectorXd& lo, Eigen::VectorXd& hi, Scaling& sc) {
  int n = static_cast<int>(q.size());
  int m = static_cast<int>(lo.size());
  sc.d = Eigen::VectorXd::Ones(n);
  sc.e = Eigen::VectorXd::Ones(m);
  sc.c = 1.0;

  Eigen::VectorXd dj(n), ei(m);
  for (int pass = 0; pass < 10; ++pass) {
    for (int j = 0; j < n; ++j) {
      double norm = P.col(j).lpNorm<Eigen::Infinity>();
      if (m > 0) norm = std::max(norm, A.col(j).lpNorm<Eigen::Infinity>());
      dj[j] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    for (int i = 0; i < m; ++i) {
      double norm = A.row(i).lpNorm<Eigen::Infinity>();
      ei[i] = norm > 1e-12 ? 1.0 / std::sqrt(norm) : 1.0;
    }
    P = dj.asDiagonal() * P * dj.asDiagonal();
    q = dj.cwiseProduct(q);
    if (m > 0) {
      A = ei.asDiagonal() * A * dj.asDiagonal();
      for (int i = 0; i < m; ++i) {
        if (std::isfinite(lo[i])) lo[i] *= ei[i];
        if (std::isfinite(hi[i])) hi[i] *= ei[i];
      }
    }
    sc.d = sc.d.cwiseProduct(dj);
    sc.e = sc.e.cwiseProduct(ei);

    double col_mean = 0;
    for (int j = 0; j < n; ++j) col_mean += P.col(j).lpNorm<Eigen::Infinity>();
    col_mean /= std::max(n, 1);
    double g_denom = std::max(col_mean, q.lpNorm<Eigen::Infinity>());
    double g = g_denom > 1e-12 ? 1.0 / g_denom : 1.0;
    P *= g;
    q *= g;
    sc.c *= g;
  }
}

// (P + delta I)^-1 given P's coupled block is small: columns with off-diagonal
// entries get a dense factor, the rest stay scalar.
struct RegularizedInverse {
  std::vector<int> coupled;         // column indices in the dense block
  std::vector<int> place;           // n -> position in coupled, or -1
  Eigen::LLT<Eigen::MatrixXd> llt;  // block factor
  Eigen::VectorXd diag_inv;         // scalar part, 0 on coupled entries
  bool ok = false;

  void build(const Eigen::MatrixXd& P, double delta) {
    int n = static_cast<int>(P.rows());
    coupled.clear();
    place.assign(n, -1);
    for (int j = 0; j < n; ++j) {
      bool off = false;
      for (int i = 0; i < n && !off; ++i)
        if (i != j && P(i, j) != 0.0) off = true;
      if (off) {
        place[j] = static_cast<int>(coupled.size());
        coupled.push_back(j);
      }
    }
    diag_inv.resize(n);
    for (int j = 0; j < n; ++j)
      diag_inv[j] = place[j] < 0 ? 1.0 / (P(j, j) + delta) : 0.0;
    int k = static_cast<int>(coupled.size());
    if (k > 0) {
      Eigen::MatrixXd block(k, k);
      for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
          block(a, b) = P(coupled[a], coupled[b]) + (a == b ? delta : 0.0);
      llt.compute(block);
      ok = llt.info() == Eigen::Success;
    } else {
      ok = true;
    }
  }

  void apply(const Eigen::VectorXd& rhs, Eigen::VectorXd& out) const {
    out = rhs.cwiseProduct(diag_inv);
    int k = static_cast<int>(coupled.size());
    if (k > 0) {
      Eigen::VectorXd sub(k);
      for (int a = 0; a < k; ++a) sub[a] = rhs[coupled[a]];
      Eigen::VectorXd sol = llt.solve(sub);
      for (int a = 0; a < k; ++a) out[coupled[a]] = sol[a];
    }
  }
};

struct PolishResult {
  bool ok = false;
  Eigen::VectorXd x;
  Eigen::VectorXd y;
};

PolishResult polish(const Eigen::MatrixXd& P, const Eigen::VectorXd& q,
                    const SparseRows& rows, const Eigen::VectorXd& lo,
                    const Eigen::VectorXd& hi, const Eigen::VectorXd& z,
                    const Eigen::VectorXd& y) {
  PolishResult res;
  int n = static_cast<int>(q.size());
  int m = static_cast<int>(lo.size());
  constexpr double delta = 1e-9;

  std::vector<int> act;
  std::vector<double> rhs_act;
  for (int i = 0; i < m; ++i) {
    bool eq = std::isfinite(lo[i]) && lo[i] == hi[i];
    bool low = std::isfinite(lo[i]) &&
               (y[i] < -1e-10 || z[i] - lo[i] < 1e-7 * (1.0 + std::abs(lo[i])));
    bool up = std::isfinite(hi[i]) &&
              (y[i] > 1e-10 || hi[i] - z[i] < 1e-7 * (1.0 + std::abs(hi[i])));
    if (eq) {
      act.push_back(i);
      rhs_act.push_back(lo[i]);
    } else if (up && !low) {
      act.push_back(i);
      rhs_act.push_back(hi[i]);
    } else if (low && !up) {
      act.push_back(i);
      rhs_act.push_back(lo[i]);
    }
    // both sides near-active on an inequality: ambiguous, leave it out
  }
  int k = static_cast<int>(act.size());

  // Single-variable active rows pin their variable outright. Eliminating
  // them first keeps duplicated and near-parallel rows out of the Schur
  // complement, where zero-curvature variables would turn them into
  // indistinguishable 1/delta entries and wreck the factorization.
  std::vector<char> is_fixed(n, 0);
  std::vector<double> fixval(n, 0.0);
  std::vector<int> nnz_of(k, 0);
  for (int a = 0; a < k; ++a) {
    int i = act[a];
    nnz_of[a] = rows.offset[i + 1] - rows.offset[i];
    if (nnz_of[a] != 1) continue;
    int j = rows.col[rows.offset[i]];
    double v = rhs_act[a] / rows.val[rows.offset[i]];
    if (is_fixed[j] && std::abs(v - fixval[j]) > 1e-9 * (1.0 + std::abs(v)))
      return res;  // contradictory pins, wrong active set
    is_fixed[j] = 1;
    fixval[j] = v;
  }

  std::vector<int> free_idx;
  std::vector<int> free_of(n, -1);
  for (int j = 0; j < n; ++j)
    if (!is_fixed[j]) {
      free_of[j] = static_cast<int>(free_idx.size());
      free_idx.push_back(j);
    }
  int nf = static_cast<int>(free_idx.size());

  Eigen::VectorXd xfix = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j)
    if (is_fixed[j]) xfix[j] = fixval[j];

  Eigen::VectorXd grad_shift = q + P * xfix;
  Eigen::MatrixXd pf(nf, nf);
  Eigen::VectorXd qf(nf);
  for (int a = 0; a < nf; ++a) {
    qf[a] = grad_shift[free_idx[a]];
    for (int b = 0; b < nf; ++b) pf(a, b) = P(free_idx[a], free_idx[b]);
  }

  // Multi-variable active rows, restricted to the free variables.
  struct RRow {
    int slot;  // index into act
    std::vector<std::pair<int, double>> nz;
    double rhs;
  };
  std::vector<RRow> mrows;
  for (int a = 0; a < k; ++a) {
    if (nnz_of[a] == 1) continue;
    int i = act[a];
    RRow r;
    r.slot = a;
    r.rhs = rhs_act[a];
    for (int kk = rows.offset[i]; kk < rows.offset[i + 1]; ++kk) {
      int j = rows.col[kk];
      if (is_fixed[j])
        r.rhs -= rows.val[kk] * fixval[j];
      else
        r.nz.emplace_back(free_of[j], rows.val[kk]);
    }
    if (r.nz.empty()) {
      if (std::abs(r.rhs) > 1e-7 * (1.0 + std::abs(rhs_act[a])))
        return res;  // row fully determined by the pins yet inconsistent
      continue;      // redundant, zero multiplier
    }
    mrows.push_back(std::move(r));
  }
  int km = static_cast<int>(mrows.size());

  RegularizedInverse pinv;
  pinv.build(pf, delta);
  if (!pinv.ok) return res;

  auto rrow_dot = [](const RRow& r, const Eigen::VectorXd& v) {
    double acc = 0;
    for (const auto& [j, c] : r.nz) acc += c * v[j];
    return acc;
  };

  Eigen::MatrixXd w(nf, km);
  Eigen::VectorXd arow = Eigen::VectorXd::Zero(nf);
  Eigen::VectorXd tmp(nf);
  for (int a = 0; a < km; ++a) {
    arow.setZero();
    for (const auto& [j, c] : mrows[a].nz) arow[j] = c;
    pinv.apply(arow, tmp);
    w.col(a) = tmp;
  }
  Eigen::MatrixXd s(km, km);
  for (int a = 0; a < km; ++a)
    for (int b = 0; b <= a; ++b) {
      double dot = rrow_dot(mrows[a], w.col(b));
      s(a, b) = dot;
      s(b, a) = dot;
    }
  // Relative regularization: a row touching only zero-curvature variables
  // still lands a 1/delta diagonal entry, where an absolute shift would
  // vanish in double precision.
  if (km > 0)
    s.diagonal().array() += delta * std::max(1.0, s.diagonal().maxCoeff());
  Eigen::LLT<Eigen::MatrixXd> sllt;
  if (km > 0) {
    sllt.compute(s);
    if (sllt.info() != Eigen::Success) return res;
  }

  // KKT solve with the regularized operator, then refinement against the
  // unregularized system.
  Eigen::VectorXd xf = Eigen::VectorXd::Zero(nf);
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(km);
  Eigen::VectorXd r1(nf), r2(km), dx(nf), dnu(km);
  for (int round = 0; round < 3; ++round) {
    // residuals of: Pf xf + Ared' nu = -qf ; Ared xf = rhs
    r1 = -qf - pf * xf;
    for (int a = 0; a < km; ++a) {
      double nua = nu[a];
      if (nua != 0.0)
        for (const auto& [j, c] : mrows[a].nz) r1[j] -= c * nua;
    }
    for (int a = 0; a < km; ++a) r2[a] = mrows[a].rhs - rrow_dot(mrows[a], xf);
    pinv.apply(r1, tmp);
    if (km > 0) {
      Eigen::VectorXd sr(km);
      for (int a = 0; a < km; ++a) sr[a] = rrow_dot(mrows[a], tmp) - r2[a];
      dnu = sllt.solve(sr);
      Eigen::VectorXd corr = r1;
      for (int a = 0; a < km; ++a)
        for (const auto& [j, c] : mrows[a].nz) corr[j] -= c * dnu[a];
      pinv.apply(corr, dx);
      nu += dnu;
    } else {
      dx = tmp;
    }
    xf += dx;
  }

  res.x = xfix;
  for (int a = 0; a < nf; ++a) res.x[free_idx[a]] = xf[a];
  res.y = Eigen::VectorXd::Zero(m);
  for (int a = 0; a < km; ++a) res.y[act[mrows[a].slot]] = nu[a];

  // Multipliers for the eliminated rows come from stationarity in their
  // pinned variable, least-norm distributed when several rows pin it.
  Eigen::VectorXd grad = P * res.x + q;
  for (int a = 0; a < km; ++a) {
    int i = act[mrows[a].slot];
    for (int kk = rows.offset[i]; kk < rows.offset[i + 1]; ++kk)
      grad[rows.col[kk]] += rows.val[kk] * nu[a];
  }
  std::vector<double> coeff_sq(n, 0.0);
  for (int a = 0; a < k; ++a) {
    if (nnz_of[a] != 1) continue;
    int kk = rows.offset[act[a]];
    coeff_sq[rows.col[kk]] += rows.val[kk] * rows.val[kk];
  }
  for (int a = 0; a < k; ++a) {
    if (nnz_of[a] != 1) continue;
    int kk = rows.offset[act[a]];
    int j = rows.col[kk];
    res.y[act[a]] = -rows.val[kk] * grad[j] / coeff_sq[j];
  }

  // Reject sign-infeasible duals: a lower-active row needs y <= 0, an
  // upper-active row y >= 0. Equalities are free.
  for (int a = 0; a < k; ++a) {
    int i = act[a];
    if (std::isfinite(lo[i]) && lo[i] == hi[i]) continue;
    bool at_hi = rhs_act[a] == hi[i];
    if (at_hi && res.y[i] < -1e-7) return res;
    if (!at_hi && res.y[i] > 1e-7) return res;
  }
  res.ok = true;
  return res;
}

void dump_problem(const QpProblem& p, const QpSettings& settings,
                  const QpSolution& sol) {
  nlohmann::json j;
  auto mat = [](const Eigen::MatrixXd& m) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < m.rows(); ++i) {
      std::vector<double> r(m.cols());
      for (int c = 0; c < m.cols(); ++c) r[c] = m(i, c);
      rows.push_back(std::move(r));
    }
    return rows;
  };
  auto vec = [](const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
  };
  j["P"] = mat(p.P);
  j["q"] = vec(p.q);
  j["A"] = mat(p.A);
  j["lo"] = vec(p.lo);
  j["hi"] = vec(p.hi);
  j["x"] = vec(sol.x);
  j["y"] = vec(sol.y);
  j["status"] = static_cast<int>(sol.status);
  j["iterations"] = sol.iterations;
  std::ofstream out(settings.debug_dump_path.empty() ? "qp_dump.json"
                                                     : settings.debug_dump_path);
  out << j.dump(2) << "\n";
}

}  // namespace

namespace {

void check_structure(const QpProblem& p) {
  if (p.P.rows() != p.n() || p.P.cols() != p.n())
    throw ValidationError("qp: P shape mismatch");
  if (p.A.rows() != p.m() || (p.m() > 0 && p.A.cols() != p.n()))
    throw ValidationError("qp: A shape mismatch");
  if (p.hi.size() != p.m()) throw ValidationError("qp: bound length mismatch");
  if (!p.P.allFinite() || !p.q.allFinite() || (p.m() > 0 && !p.A.allFinite()))
    throw ValidationError("qp: non-finite data");
  for (int i = 0; i < p.m(); ++i) {
    if (std::isnan(p.lo[i]) || std::isnan(p.hi[i]) || p.lo[i] > p.hi[i])
      throw ValidationError("qp: inconsistent bounds on row " + std::to_string(i));
  }
}

}  // namespace

void QpProblem::validate() const {
  check_structure(*this);
  if (n() == 0) return;
  const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
  const double tol = 1e-8 * scale;
  if ((P - P.transpose()).cwiseAbs().maxCoeff() > tol)
    throw ValidationError("qp: cost matrix not symmetric");
  // Gershgorin settles diagonally dominant cases without a factorization.
  double gersh = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n(); ++i) {
    double off = P.row(i).cwiseAbs().sum() - std::abs(P(i, i));
    gersh = std::min(gersh, P(i, i) - off);
  }
  if (gersh >= -tol) return;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(P);
  if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() < -tol)
    throw ValidationError("qp: cost matrix not positive semidefinite");
}

std::pair<double, double> kkt_residuals(const QpProblem& p, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& y) {
  SparseRows rows;
  rows.build(p.A);
  Eigen::VectorXd ax(p.m()), px(p.n()), aty(p.n());
  Residuals r = residuals_unscaled(p, rows, x, y, ax, px, aty);
  return {r.primal, r.dual};
}

QpSolution solve(const QpProblem& p, const QpSettings& settings, const QpSolution* warm) {
  check_structure(p);
  const int n = p.n();
  const int m = p.m();

  Eigen::MatrixXd ps = p.P;
  Eigen::VectorXd qs = p.q;
  Eigen::MatrixXd as = p.A;
  Eigen::VectorXd los = p.lo;
  Eigen::VectorXd his = p.hi;

  // A variable bounded through a dedicated row carries its natural magnitude
  // in that row's bounds, which entry equilibration alone cannot see.
  // Pre-scaling by it keeps mixed-unit problems (forces against speeds)
  // from defeating the splitting geometry.
  Eigen::VectorXd mag = Eigen::VectorXd::Ones(n);
  for (int i = 0; i < m; ++i) {
    int nz = -1;
    double coeff = 0;
    for (int j = 0; j < n; ++j) {
      double v = p.A(i, j);
      if (v != 0.0) {
        if (nz >= 0) {
          nz = -2;
          break;
        }
        nz = j;
        coeff = v;
      }
    }
    if (nz < 0) continue;
    double b = 0;
    if (std::isfinite(p.lo[i])) b = std::max(b, std::abs(p.lo[i]));
    if (std::isfinite(p.hi[i])) b = std::max(b, std::abs(p.hi[i]));
    if (b > 0) mag[nz] = std::max(mag[nz], b / std::abs(coeff));
  }
  ps = mag.asDiagonal() * ps * mag.asDiagonal();
  qs = mag.cwiseProduct(qs);
  if (m > 0) as = as * mag.asDiagonal();

  Scaling sc;
  ruiz_equilibrate(ps, qs, as, los, his, sc);
  sc.d = sc.d.cwiseProduct(mag);

  SparseRows rows_s;
  rows_s.build(as);
  SparseRows rows_o;
  rows_o.build(p.A);

  const double sigma = settings.sigma;
  double rho_bar = 0.1;
  Eigen::VectorXd rho(m), rho_inv(m);
  auto set_rho = [&]() {
    for (int i = 0; i < m; ++i) {
      bool eq = std::isfinite(los[i]) && los[i] == his[i];
      bool loose = !std::isfinite(los[i]) && !std::isfinite(his[i]);
      rho[i] = eq ? rho_bar * 1e3 : (loose ? rho_bar * 1e-6 : rho_bar);
      rho_inv[i] = 1.0 / rho[i];
    }
  };
  set_rho();

  Eigen::MatrixXd kkt(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt;
  auto factorize = [&]() {
    kkt = ps;
    kkt.diagonal().array() += sigma;
    for (int i = 0; i < m; ++i) {
      double r = rho[i];
      for (int a = rows_s.offset[i]; a < rows_s.offset[i + 1]; ++a)
        for (int b = rows_s.offset[i]; b < rows_s.offset[i + 1]; ++b)
          kkt(rows_s.col[a], rows_s.col[b]) += r * rows_s.val[a] * rows_s.val[b];
    }
    llt.compute(kkt);
    if (llt.info() != Eigen::Success) throw SolverFailure("qp: KKT factorization failed");
  };
  factorize();

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(m);
  if (warm && warm->x.size() == n && warm->y.size() == m) {
    x = warm->x.cwiseQuotient(sc.d);
    for (int i = 0; i < m; ++i) y[i] = sc.c * warm->y[i] / sc.e[i];
    rows_s.mul(x, z);
  }
  for (int i = 0; i < m; ++i) z[i] = std::clamp(z[i], los[i], his[i]);

  Eigen::VectorXd rhs(n), xt(n), zt(m), ax_hat(m);
  Eigen::VectorXd x_u(n), y_u(m), ax(m), px(n), aty(n);
  Eigen::VectorXd y_prev_check = y;

  QpSolution best;
  best.x = Eigen::VectorXd::Zero(n);
  best.y = Eigen::VectorXd::Zero(m);
  double best_res = kInf;
  double last_polish_res = kInf;
  int refactors = 0;
  const int check_every = 25;
  const double alpha = settings.alpha;

  auto unscale = [&]() {
    x_u = x.cwiseProduct(sc.d);
    for (int i = 0; i < m; ++i) y_u[i] = sc.e[i] * y[i] / sc.c;
  };

  auto finish = [&](QpStatus status, int iters, const Residuals& r,
                    bool polished) {
    QpSolution sol;
    sol.status = status;
    sol.x = x_u;
    sol.y = y_u;
    sol.objective = 0.5 * x_u.dot(p.P * x_u) + p.q.dot(x_u);
    sol.iterations = iters;
    sol.primal_residual = r.primal;
    sol.dual_residual = r.dual;
    sol.polished = polished;
    if (settings.debug_dump) dump_problem(p, settings, sol);
    return sol;
  };

  auto try_polish = [&](Residuals& r) -> bool {
    PolishResult pol = polish(ps, qs, rows_s, los, his, z, y);
    if (!pol.ok) return false;
    Eigen::VectorXd px_u = pol.x.cwiseProduct(sc.d);
    Eigen::VectorXd py_u(m);
    for (int i = 0; i < m; ++i) py_u[i] = sc.e[i] * pol.y[i] / sc.c;
    Eigen::VectorXd ax2(m), px2(n), aty2(n);
    Residuals pr = residuals_unscaled(p, rows_o, px_u, py_u, ax2, px2, aty2);
    if (pr.max() < r.max()) {
      x_u = px_u;
      y_u = py_u;
      r = pr;
      return true;
    }
    return false;
  };

  int iter = 0;
  for (iter = 1; iter <= settings.max_iterations; ++iter) {
    // x update: (P + sigma I + A' rho A) xt = sigma x - q + A'(rho z - y)
    for (int i = 0; i < m; ++i) ax_hat[i] = rho[i] * z[i] - y[i];
    rows_s.mul_t(ax_hat, rhs);
    rhs += sigma * x - qs;
    xt = llt.solve(rhs);
    rows_s.mul(xt, zt);

    x = alpha * xt + (1.0 - alpha) * x;
    for (int i = 0; i < m; ++i) {
      double z_relaxed = alpha * zt[i] + (1.0 - alpha) * z[i];
      double z_new = std::clamp(z_relaxed + rho_inv[i] * y[i], los[i], his[i]);
      y[i] += rho[i] * (z_relaxed - z_new);
      z[i] = z_new;
    }

    if (iter % check_every != 0 && iter != settings.max_iterations) continue;

    unscale();
    Residuals r = residuals_unscaled(p, rows_o, x_u, y_u, ax, px, aty);
    if (r.max() < best_res) {
      best_res = r.max();
      best.x = x_u;
      best.y = y_u;
    }

    if (r.max() <= settings.eps) {
      bool polished = try_polish(r);
      return finish(QpStatus::Optimal, iter, r, polished);
    }
    if (r.max() <= 1e-4 && iter >= 2 * check_every && r.max() < 0.1 * last_polish_res) {
      Residuals rp = r;
      if (try_polish(rp) && rp.max() <= settings.eps)
        return finish(QpStatus::Optimal, iter, rp, true);
      last_polish_res = r.max();
      unscale();  // polish rejected, restore the ADMM iterate views
    }

    // primal infeasibility certificate from the dual update direction
    Eigen::VectorXd dy = y - y_prev_check;
    y_prev_check = y;
    double dy_norm = dy.lpNorm<Eigen::Infinity>();
    if (dy_norm > 1e-12) {
      Eigen::VectorXd v = dy / dy_norm;
      bool bounded_support = true;
      double support = 0;
      for (int i = 0; i < m; ++i) {
        if (v[i] > 1e-10) {
          if (!std::isfinite(his[i])) { bounded_support = false; break; }
          support += his[i] * v[i];
        } else if (v[i] < -1e-10) {
          if (!std::isfinite(los[i])) { bounded_support = false; break; }
          support += los[i] * v[i];
        }
      }
      if (bounded_support) {
        Eigen::VectorXd atv(n);
        rows_s.mul_t(v, atv);
        if (atv.lpNorm<Eigen::Infinity>() <= 1e-8 && support <= -1e-8) {
          unscale();
          Residuals rr = residuals_unscaled(p, rows_o, x_u, y_u, ax, px, aty);
          return finish(QpStatus::Infeasible, iter, rr, false);
        }
      }
    }

    // rho adaptation when primal and dual progress diverge
    if (refactors < 4 && r.dual > 1e-14 && r.primal > 1e-14) {
      double ratio = std::sqrt(r.primal / r.dual);
      if (ratio > 5.0 || ratio < 0.2) {
        rho_bar = std::clamp(rho_bar * ratio, 1e-6, 1e3);
        set_rho();
        factorize();
        ++refactors;
      }
    }
  }

  x_u = best.x;
  y_u = best.y;
  Residuals r = residuals_unscaled(p, rows_o, x_u, y_u, ax, px, aty);
  bool polished = try_polish(r);
  if (r.max() <= settings.eps)
    return finish(QpStatus::Optimal, settings.max_iterations, r, polished);
  return finish(QpStatus::MaxIterations, settings.max_iterations, r, polished);
}

}  // namespace vc
