#include "sdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace irsma::sdp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Internal equality-standard-form problem
//   min <c, x>  s.t.  <a_i, x> = b_i,  x in (PSD blocks) x (nonneg orthant)
// Inequalities get orthant slacks, free scalars are split, rows are
// normalized, a maximize sense is flipped.
// ---------------------------------------------------------------------------

struct CompiledTermRefs {
  // Per block, per owner (constraints 0..m-1, objective = m).
  struct Diag {
    int owner;
    int index;
    double weight;
  };
  struct Rank1 {
    int owner;
    double weight;
    int column;  // column in the stacked vector matrix
  };
  struct Dense {
    int owner;
    Eigen::MatrixXd mat;
  };
  std::vector<Diag> diag;
  std::vector<Rank1> rank1;
  std::vector<Dense> dense;
  Eigen::MatrixXd vecs;  // n x K stacked rank-one vectors
};

struct Compiled {
  std::vector<int> dims;
  int orth = 0;
  int m = 0;
  Eigen::VectorXd b;
  std::vector<CompiledTermRefs> blocks;
  // Orthant coefficients grouped per coordinate: (owner, weight) pairs.
  std::vector<std::vector<std::pair<int, double>>> orth_entries;
  // Mapping back to the caller's problem.
  double obj_scale = 1.0;  // internal c = sense * original / obj_scale
  double sense = 1.0;      // -1 when maximizing
  Eigen::VectorXd row_scale;
  std::vector<int> scalar_pos;   // original scalar -> orthant coord (free: +part)
  std::vector<int> scalar_neg;   // free scalars: -part, else -1
  int nu = 0;                    // barrier parameter sum of block dims + orth
};

struct BlockTermsBuilder {
  std::vector<CompiledTermRefs::Diag> diag;
  std::vector<std::pair<CompiledTermRefs::Rank1, Eigen::VectorXd>> rank1;
  std::vector<CompiledTermRefs::Dense> dense;
};

void add_expr(const ConicProblem& p, const Compiled& map, const LinearExpr& e,
              int owner, double scale, std::vector<BlockTermsBuilder>& builders,
              std::vector<std::vector<std::pair<int, double>>>& orth_entries) {
  for (const auto& t : e.diag_terms())
    builders[t.block].diag.push_back({owner, t.index, t.weight * scale});
  for (const auto& t : e.rank1_terms())
    builders[t.block].rank1.push_back({{owner, t.weight * scale, 0}, t.vec});
  for (const auto& t : e.dense_terms())
    builders[t.block].dense.push_back({owner, (scale * 0.5) * (t.mat + t.mat.transpose())});
  for (const auto& [idx, w] : e.scalar_terms()) {
    orth_entries[map.scalar_pos[idx]].push_back({owner, w * scale});
    if (map.scalar_neg[idx] >= 0)
      orth_entries[map.scalar_neg[idx]].push_back({owner, -w * scale});
  }
}

double expr_norm(const LinearExpr& e) {
  double sq = 0.0;
  for (const auto& t : e.diag_terms()) sq += t.weight * t.weight;
  for (const auto& t : e.rank1_terms()) {
    const double n2 = t.vec.squaredNorm();
    sq += t.weight * t.weight * n2 * n2;
  }
  for (const auto& t : e.dense_terms()) sq += t.mat.squaredNorm();
  for (const auto& [idx, w] : e.scalar_terms()) sq += w * w;
  return std::sqrt(sq);
}

Compiled compile(const ConicProblem& p) {
  Compiled c;
  c.dims = p.block_dims;
  c.m = static_cast<int>(p.constraints.size());
  c.sense = p.maximize ? -1.0 : 1.0;

  c.scalar_pos.resize(p.num_scalars);
  c.scalar_neg.assign(p.num_scalars, -1);
  int orth = 0;
  for (int i = 0; i < p.num_scalars; ++i) {
    c.scalar_pos[i] = orth++;
    const bool is_free = !p.scalar_free.empty() && p.scalar_free[i];
    if (is_free) c.scalar_neg[i] = orth++;
  }
  std::vector<int> slack_coord(c.m, -1);
  std::vector<double> slack_sign(c.m, 0.0);
  for (int i = 0; i < c.m; ++i) {
    if (p.constraints[i].relation == Relation::LessEqual) {
      slack_coord[i] = orth++;
      slack_sign[i] = 1.0;
    } else if (p.constraints[i].relation == Relation::GreaterEqual) {
      slack_coord[i] = orth++;
      slack_sign[i] = -1.0;
    }
  }
  c.orth = orth;
  c.orth_entries.resize(orth);

  std::vector<BlockTermsBuilder> builders(c.dims.size());
  c.row_scale.resize(c.m);
  c.b.resize(c.m);
  for (int i = 0; i < c.m; ++i) {
    const auto& con = p.constraints[i];
    const double norm = std::max(expr_norm(con.lhs), 1e-10);
    c.row_scale(i) = norm;
    add_expr(p, c, con.lhs, i, 1.0 / norm, builders, c.orth_entries);
    if (slack_coord[i] >= 0) c.orth_entries[slack_coord[i]].push_back({i, slack_sign[i]});
    c.b(i) = con.rhs / norm;
  }
  c.obj_scale = std::max(expr_norm(p.objective), 1e-10);
  add_expr(p, c, p.objective, c.m, c.sense / c.obj_scale, builders, c.orth_entries);

  c.blocks.resize(c.dims.size());
  for (size_t bidx = 0; bidx < c.dims.size(); ++bidx) {
    auto& out = c.blocks[bidx];
    auto& in = builders[bidx];
    out.diag = std::move(in.diag);
    out.dense = std::move(in.dense);
    out.vecs.resize(c.dims[bidx], static_cast<Eigen::Index>(in.rank1.size()));
    out.rank1.reserve(in.rank1.size());
    for (size_t k = 0; k < in.rank1.size(); ++k) {
      auto term = in.rank1[k].first;
      term.column = static_cast<int>(k);
      out.rank1.push_back(term);
      out.vecs.col(static_cast<Eigen::Index>(k)) = in.rank1[k].second;
    }
  }
  c.nu = orth;
  for (int d : c.dims) c.nu += d;
  return c;
}

// ---------------------------------------------------------------------------
// Homogeneous self-dual interior point with NT scaling and a Mehrotra
// predictor-corrector step.
// ---------------------------------------------------------------------------

struct BlockState {
  Eigen::MatrixXd X, S;
  Eigen::MatrixXd R, Rinv, W;
  Eigen::VectorXd d;  // scaled spectrum, V = diag(d)
};

struct Point {
  std::vector<Eigen::MatrixXd> X, S;
  Eigen::VectorXd xo, so;
  Eigen::VectorXd y;
  double tau = 1.0, kappa = 1.0;
};

struct Direction {
  std::vector<Eigen::MatrixXd> dX, dS;
  Eigen::VectorXd dxo, dso;
  Eigen::VectorXd dy;
  double dtau = 0.0, dkappa = 0.0;
};

double inner(const Point& a, const Point& b) {
  double v = a.xo.dot(b.so);
  for (size_t i = 0; i < a.X.size(); ++i)
    v += a.X[i].cwiseProduct(b.S[i]).sum();
  return v;
}

// Largest step length keeping X + a dX positive semidefinite.
double max_step_psd(const Eigen::MatrixXd& X, const Eigen::MatrixXd& dX) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd B = L.triangularView<Eigen::Lower>().solve(dX);
  B = L.triangularView<Eigen::Lower>().solve(B.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (B + B.transpose()),
                                                    Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return lmin >= -1e-14 ? kInf : -1.0 / lmin;
}

double max_step_orthant(const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double a = kInf;
  for (Eigen::Index i = 0; i < x.size(); ++i)
    if (dx(i) < 0.0) a = std::min(a, -x(i) / dx(i));
  return a;
}

class Solver {
 public:
  Solver(const ConicProblem& problem, const SolverOptions& opt)
      : p_(problem), c_(compile(problem)), opt_(opt) {}

  ConicSolution run();

 private:
  void compute_scaling();
  void assemble_schur();
  // Evaluates every owner's functional on (G blocks, g orthant vector).
  Eigen::VectorXd eval_all(const std::vector<Eigen::MatrixXd>& G,
                           const Eigen::VectorXd& g) const;
  // Adjoint sum_i v(i) a_i plus v(m) * c into block/orthant form.
  void adjoint(const Eigen::VectorXd& v, std::vector<Eigen::MatrixXd>& G,
               Eigen::VectorXd& g) const;
  Direction solve_direction(double eta, const std::vector<Eigen::MatrixXd>& Rt,
                            const Eigen::VectorXd& rt_orth, double rtk);
  double max_step(const Direction& d) const;
  ConicSolution finish(SolveStatus status, const std::string& detail);

  const ConicProblem& p_;
  Compiled c_;
  SolverOptions opt_;

  Point pt_;
  std::vector<BlockState> bs_;
  Eigen::VectorXd wo_, vo_;  // orthant scaling / scaled point

  Eigen::MatrixXd schur_;  // (m+1) x (m+1), includes objective row/col
  Eigen::LDLT<Eigen::MatrixXd> schur_fac_;

  // Residuals and shared per-iteration quantities.
  Eigen::VectorXd rp_;
  std::vector<Eigen::MatrixXd> rd_;
  Eigen::VectorXd rd_orth_;
  double rg_ = 0.0;
  std::vector<Eigen::MatrixXd> WrdW_;
  Eigen::VectorXd wrdw_orth_;
  Eigen::VectorXd a_wrdw_;  // owner evaluations of W rd W
  Eigen::VectorXd a_x_;     // owner evaluations of x
  double mu_ = 0.0;

  std::vector<IterateRecord> trace_;
  int iters_ = 0;
};

void Solver::compute_scaling() {
  for (size_t b = 0; b < bs_.size(); ++b) {
    auto& s = bs_[b];
    Eigen::LLT<Eigen::MatrixXd> lltx(s.X), llts(s.S);
    if (lltx.info() != Eigen::Success || llts.info() != Eigen::Success) {
      // Nudge marginally indefinite iterates back inside the cone.
      const double ex = 1e-12 * (1.0 + s.X.trace());
      const double es = 1e-12 * (1.0 + s.S.trace());
      s.X += ex * Eigen::MatrixXd::Identity(s.X.rows(), s.X.cols());
      s.S += es * Eigen::MatrixXd::Identity(s.S.rows(), s.S.cols());
      lltx.compute(s.X);
      llts.compute(s.S);
    }
    const Eigen::MatrixXd Lx = lltx.matrixL();
    const Eigen::MatrixXd Ls = llts.matrixL();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Ls.transpose() * Lx,
                                          Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd dsqrt = svd.singularValues().cwiseMax(1e-150).cwiseSqrt();
    s.d = svd.singularValues();
    s.R = Lx * svd.matrixV() * dsqrt.cwiseInverse().asDiagonal();
    s.Rinv = dsqrt.cwiseInverse().asDiagonal() * svd.matrixU().transpose() * Ls.transpose();
    s.W = s.R * s.R.transpose();
  }
  wo_ = (pt_.xo.array() / pt_.so.array()).sqrt().matrix();
  vo_ = (pt_.xo.array() * pt_.so.array()).sqrt().matrix();
}

void Solver::assemble_schur() {
  const int mm = c_.m + 1;
  schur_.setZero(mm, mm);
  for (size_t b = 0; b < bs_.size(); ++b) {
    const auto& terms = c_.blocks[b];
    const auto& W = bs_[b].W;
    const Eigen::MatrixXd Y = W * terms.vecs;                     // n x K
    const Eigen::MatrixXd P = terms.vecs.transpose() * Y;        // K x K
    for (const auto& ti : terms.rank1)
      for (const auto& tj : terms.rank1) {
        const double pij = P(ti.column, tj.column);
        schur_(ti.owner, tj.owner) += ti.weight * tj.weight * pij * pij;
      }
    for (const auto& ti : terms.diag) {
      for (const auto& tj : terms.diag) {
        const double w = W(ti.index, tj.index);
        schur_(ti.owner, tj.owner) += ti.weight * tj.weight * w * w;
      }
      for (const auto& tj : terms.rank1) {
        const double yv = Y(ti.index, tj.column);
        const double v = ti.weight * tj.weight * yv * yv;
        schur_(ti.owner, tj.owner) += v;
        schur_(tj.owner, ti.owner) += v;
      }
    }
    for (const auto& ti : terms.dense) {
      const Eigen::MatrixXd T = W * ti.mat * W;
      for (const auto& tj : terms.dense)
        schur_(ti.owner, tj.owner) += T.cwiseProduct(tj.mat).sum();
      for (const auto& tj : terms.rank1) {
        const auto a = terms.vecs.col(tj.column);
        const double v = tj.weight * a.dot(T * a);
        schur_(ti.owner, tj.owner) += v;
        schur_(tj.owner, ti.owner) += v;
      }
      for (const auto& tj : terms.diag) {
        const double v = tj.weight * T(tj.index, tj.index);
        schur_(ti.owner, tj.owner) += v;
        schur_(tj.owner, ti.owner) += v;
      }
    }
  }
  for (int t = 0; t < c_.orth; ++t) {
    const double w2 = wo_(t) * wo_(t);
    const auto& entries = c_.orth_entries[t];
    for (const auto& [oi, wi] : entries)
      for (const auto& [oj, wj] : entries) schur_(oi, oj) += w2 * wi * wj;
  }
  // Tiny ridge keeps dependent constraint rows factorable.
  Eigen::MatrixXd reg = schur_.topLeftCorner(c_.m, c_.m);
  const double ridge = 1e-13 * std::max(1.0, reg.diagonal().maxCoeff());
  reg.diagonal().array() += ridge;
  schur_fac_.compute(reg);
}

Eigen::VectorXd Solver::eval_all(const std::vector<Eigen::MatrixXd>& G,
                                 const Eigen::VectorXd& g) const {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(c_.m + 1);
  for (size_t b = 0; b < bs_.size(); ++b) {
    const auto& terms = c_.blocks[b];
    const auto& T = G[b];
    for (const auto& t : terms.diag) out(t.owner) += t.weight * T(t.index, t.index);
    if (terms.vecs.cols() > 0) {
      const Eigen::MatrixXd TV = T.selfadjointView<Eigen::Lower>() * terms.vecs;
      for (const auto& t : terms.rank1)
        out(t.owner) += t.weight * terms.vecs.col(t.column).dot(TV.col(t.column));
    }
    for (const auto& t : terms.dense) out(t.owner) += T.cwiseProduct(t.mat).sum();
  }
  for (int t = 0; t < c_.orth; ++t)
    for (const auto& [owner, w] : c_.orth_entries[t]) out(owner) += w * g(t);
  return out;
}

void Solver::adjoint(const Eigen::VectorXd& v, std::vector<Eigen::MatrixXd>& G,
                     Eigen::VectorXd& g) const {
  G.resize(bs_.size());
  for (size_t b = 0; b < bs_.size(); ++b) {
    const auto& terms = c_.blocks[b];
    G[b].setZero(c_.dims[b], c_.dims[b]);
    for (const auto& t : terms.diag) G[b](t.index, t.index) += v(t.owner) * t.weight;
    for (const auto& t : terms.rank1) {
      const double w = v(t.owner) * t.weight;
      if (w != 0.0)
        G[b].selfadjointView<Eigen::Lower>().rankUpdate(terms.vecs.col(t.column), w);
    }
    for (const auto& t : terms.dense) G[b] += v(t.owner) * t.mat;
    G[b] = G[b].selfadjointView<Eigen::Lower>();
  }
  g.setZero(c_.orth);
  for (int t = 0; t < c_.orth; ++t)
    for (const auto& [owner, w] : c_.orth_entries[t]) g(t) += v(owner) * w;
}

Direction Solver::solve_direction(double eta, const std::vector<Eigen::MatrixXd>& Rt,
                                  const Eigen::VectorXd& rt_orth, double rtk) {
  Direction d;
  // G1 = R Rt R^T per block (orthant: w .* rt).
  std::vector<Eigen::MatrixXd> G1(bs_.size());
  for (size_t b = 0; b < bs_.size(); ++b)
    G1[b] = bs_[b].R * Rt[b] * bs_[b].R.transpose();
  const Eigen::VectorXd g1 = wo_.cwiseProduct(rt_orth);

  const Eigen::VectorXd a_g1 = eval_all(G1, g1);
  Eigen::VectorXd rhs1 = -eta * rp_ - a_g1.head(c_.m) + eta * a_wrdw_.head(c_.m);
  const Eigen::VectorXd q = schur_.topRightCorner(c_.m, 1);
  const double qc = schur_(c_.m, c_.m);

  const Eigen::VectorXd u1 = schur_fac_.solve(rhs1);
  const Eigen::VectorXd u2 = schur_fac_.solve(q + c_.b);

  const double denom = c_.b.dot(u2) - q.dot(u2) + qc + pt_.kappa / pt_.tau;
  double numer = -eta * rg_ - c_.b.dot(u1) + q.dot(u1) + a_g1(c_.m) - eta * a_wrdw_(c_.m) +
                 rtk / pt_.tau;
  d.dtau = std::abs(denom) > 1e-300 ? numer / denom : 0.0;
  d.dy = u1 + d.dtau * u2;

  // ds = -A^T dy + c dtau + eta rd
  Eigen::VectorXd owner_weights = Eigen::VectorXd::Zero(c_.m + 1);
  owner_weights.head(c_.m) = -d.dy;
  owner_weights(c_.m) = d.dtau;
  Eigen::VectorXd dso;
  adjoint(owner_weights, d.dS, dso);
  d.dso = dso;
  for (size_t b = 0; b < bs_.size(); ++b) d.dS[b] += eta * rd_[b];
  d.dso += eta * rd_orth_;

  // dX = R Rt R^T - W dS W.
  d.dX.resize(bs_.size());
  for (size_t b = 0; b < bs_.size(); ++b) {
    const auto& W = bs_[b].W;
    Eigen::MatrixXd WdSW = W * d.dS[b] * W;
    d.dX[b] = G1[b] - WdSW;
    d.dX[b] = 0.5 * (d.dX[b] + d.dX[b].transpose()).eval();
  }
  d.dxo = g1 - wo_.array().square().matrix().cwiseProduct(d.dso);
  d.dkappa = (rtk - pt_.kappa * d.dtau) / pt_.tau;
  return d;
}

double Solver::max_step(const Direction& d) const {
  double a = kInf;
  for (size_t b = 0; b < bs_.size(); ++b) {
    a = std::min(a, max_step_psd(pt_.X[b], d.dX[b]));
    a = std::min(a, max_step_psd(pt_.S[b], d.dS[b]));
  }
  a = std::min(a, max_step_orthant(pt_.xo, d.dxo));
  a = std::min(a, max_step_orthant(pt_.so, d.dso));
  if (d.dtau < 0.0) a = std::min(a, -pt_.tau / d.dtau);
  if (d.dkappa < 0.0) a = std::min(a, -pt_.kappa / d.dkappa);
  return a;
}

ConicSolution Solver::finish(SolveStatus status, const std::string& detail) {
  ConicSolution sol;
  sol.status = status;
  sol.detail = detail;
  sol.iterations = iters_;
  sol.trace = trace_;

  const double tau = std::max(pt_.tau, 1e-300);
  sol.blocks.resize(bs_.size());
  for (size_t b = 0; b < bs_.size(); ++b) sol.blocks[b] = pt_.X[b] / tau;
  sol.scalars.resize(p_.num_scalars);
  for (int i = 0; i < p_.num_scalars; ++i) {
    double v = pt_.xo(c_.scalar_pos[i]) / tau;
    if (c_.scalar_neg[i] >= 0) v -= pt_.xo(c_.scalar_neg[i]) / tau;
    sol.scalars(i) = v;
  }
  sol.objective_value = p_.objective.eval(sol.blocks, sol.scalars);
  sol.dual_values.resize(c_.m);
  for (int i = 0; i < c_.m; ++i)
    sol.dual_values(i) = c_.sense * pt_.y(i) * c_.obj_scale / (c_.row_scale(i) * tau);

  if (status == SolveStatus::Infeasible) {
    // Certificate residual: ||A^T y + s|| relative to b^T y for the primal
    // certificate (c^T x against ||A x|| for the dual one).
    Eigen::VectorXd ow = Eigen::VectorXd::Zero(c_.m + 1);
    ow.head(c_.m) = pt_.y;
    std::vector<Eigen::MatrixXd> aty;
    Eigen::VectorXd aty_o;
    adjoint(ow, aty, aty_o);
    double num = (aty_o + pt_.so).squaredNorm();
    for (size_t b = 0; b < bs_.size(); ++b) num += (aty[b] + pt_.S[b]).squaredNorm();
    sol.kkt_residual = std::sqrt(num) / std::max(1e-12, std::abs(c_.b.dot(pt_.y)));
  } else if (!trace_.empty()) {
    sol.kkt_residual = trace_.back().residual;
  }
  return sol;
}

ConicSolution Solver::run() {
  const int m = c_.m;
  const size_t nb = c_.dims.size();
  bs_.resize(nb);
  pt_.X.resize(nb);
  pt_.S.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    pt_.X[b] = Eigen::MatrixXd::Identity(c_.dims[b], c_.dims[b]);
    pt_.S[b] = Eigen::MatrixXd::Identity(c_.dims[b], c_.dims[b]);
    bs_[b].X = pt_.X[b];
    bs_[b].S = pt_.S[b];
  }
  pt_.xo = Eigen::VectorXd::Ones(c_.orth);
  pt_.so = Eigen::VectorXd::Ones(c_.orth);
  pt_.y = Eigen::VectorXd::Zero(m);
  pt_.tau = pt_.kappa = 1.0;

  const double bnorm = c_.b.norm();
  const double mu0 = (static_cast<double>(c_.nu) + 1.0) / (c_.nu + 1.0);  // == 1

  std::vector<Eigen::MatrixXd> cblocks;
  Eigen::VectorXd corth;
  {
    Eigen::VectorXd sel = Eigen::VectorXd::Zero(m + 1);
    sel(m) = 1.0;
    adjoint(sel, cblocks, corth);
  }
  double cnorm_sq = corth.squaredNorm();
  for (const auto& cb : cblocks) cnorm_sq += cb.squaredNorm();
  const double cnorm = std::sqrt(cnorm_sq);

  std::string stall_detail;
  for (iters_ = 0; iters_ < opt_.max_iterations; ++iters_) {
    for (size_t b = 0; b < nb; ++b) {
      bs_[b].X = pt_.X[b];
      bs_[b].S = pt_.S[b];
    }

    // Residuals.
    Eigen::VectorXd zero_orth = Eigen::VectorXd::Zero(c_.orth);
    a_x_ = eval_all(pt_.X, pt_.xo);
    rp_ = a_x_.head(m) - c_.b * pt_.tau;
    Eigen::VectorXd owner_weights = Eigen::VectorXd::Zero(m + 1);
    owner_weights.head(m) = -pt_.y;
    owner_weights(m) = pt_.tau;
    adjoint(owner_weights, rd_, rd_orth_);  // = -A^T y + c tau
    for (size_t b = 0; b < nb; ++b) rd_[b] -= pt_.S[b];
    rd_orth_ -= pt_.so;
    rg_ = c_.b.dot(pt_.y) - a_x_(m) - pt_.kappa;

    const double gap = inner(pt_, pt_) ;
    mu_ = (gap + pt_.tau * pt_.kappa) / (c_.nu + 1.0);

    // Unscaled convergence metrics (user sense applied at the end).
    const double tau = pt_.tau;
    const double pobj_int = a_x_(m) / tau;
    const double dobj_int = c_.b.dot(pt_.y) / tau;
    double rd_norm_sq = rd_orth_.squaredNorm();
    for (const auto& rb : rd_) rd_norm_sq += rb.squaredNorm();
    const double pres = rp_.norm() / (tau * (1.0 + bnorm));
    const double dres = std::sqrt(rd_norm_sq) / (tau * (1.0 + cnorm));
    const double relgap = gap / (tau * tau * (1.0 + std::abs(pobj_int) + std::abs(dobj_int)));
    const double total_res = std::max({pres, dres, relgap});

    const double user_scale = c_.sense * c_.obj_scale;
    trace_.push_back({user_scale * pobj_int, user_scale * dobj_int, total_res});

    if (pres <= opt_.tol && dres <= opt_.tol && relgap <= opt_.tol)
      return finish(SolveStatus::Optimal, "");

    // Certificate tests. Primal infeasibility: y with A^T y + s ~ 0 and
    // b^T y > 0. Dual infeasibility: x in the cone with A x ~ 0, c^T x < 0.
    {
      const double cert_tol = std::max(opt_.tol, 1e-9);
      const double by = c_.b.dot(pt_.y);
      if (by > 1e-10) {
        double n2 = (rd_orth_ - corth * pt_.tau).squaredNorm();
        for (size_t b = 0; b < nb; ++b) n2 += (rd_[b] - cblocks[b] * pt_.tau).squaredNorm();
        // A^T y + s = c tau - rd
        if (std::sqrt(n2) <= cert_tol * by)
          return finish(SolveStatus::Infeasible, "primal infeasible certificate");
      }
      const double cx = a_x_(m);
      // A x = rp + b tau
      if (cx < -1e-10 && (rp_ + c_.b * pt_.tau).norm() <= cert_tol * (-cx))
        return finish(SolveStatus::Infeasible, "dual infeasible certificate");
    }

    // tau -> 0 with kappa bounded away also signals an infeasible or
    // unbounded problem even without a clean certificate.
    if (pt_.tau < 1e-10 * std::max(1.0, pt_.kappa) && mu_ < 1e-8 * mu0) {
      const double by = c_.b.dot(pt_.y);
      const double cx = a_x_(m);
      if (by > 1e-12)
        return finish(SolveStatus::Infeasible, "primal infeasible certificate");
      if (cx < -1e-12)
        return finish(SolveStatus::Infeasible, "dual infeasible certificate");
      return finish(SolveStatus::Infeasible, "ill-posed: tau and kappa both vanish");
    }

    compute_scaling();
    assemble_schur();

    // W rd W evaluated once per iteration.
    WrdW_.resize(nb);
    for (size_t b = 0; b < nb; ++b) WrdW_[b] = bs_[b].W * rd_[b] * bs_[b].W;
    wrdw_orth_ = wo_.array().square().matrix().cwiseProduct(rd_orth_);
    a_wrdw_ = eval_all(WrdW_, wrdw_orth_);

    // Predictor.
    std::vector<Eigen::MatrixXd> Rt(nb);
    for (size_t b = 0; b < nb; ++b) Rt[b] = (-bs_[b].d).asDiagonal();
    Eigen::VectorXd rt_orth = -vo_;
    Direction aff = solve_direction(1.0, Rt, rt_orth, -pt_.tau * pt_.kappa);
    const double amax_aff = max_step(aff);
    const double a_aff = std::min(1.0, 0.999 * amax_aff);

    double gap_aff = 0.0;
    {
      Point trial = pt_;
      for (size_t b = 0; b < nb; ++b) {
        trial.X[b] += a_aff * aff.dX[b];
        trial.S[b] += a_aff * aff.dS[b];
      }
      trial.xo += a_aff * aff.dxo;
      trial.so += a_aff * aff.dso;
      gap_aff = inner(trial, trial) +
                (pt_.tau + a_aff * aff.dtau) * (pt_.kappa + a_aff * aff.dkappa);
    }
    const double mu_aff = gap_aff / (c_.nu + 1.0);
    double sigma = std::pow(std::clamp(mu_aff / mu_, 0.0, 1.0), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0 - 1e-8);

    // Corrector: centering + second order terms.
    for (size_t b = 0; b < nb; ++b) {
      const auto& st = bs_[b];
      const Eigen::MatrixXd dVx = st.Rinv * aff.dX[b] * st.Rinv.transpose();
      const Eigen::MatrixXd dVs = st.R.transpose() * aff.dS[b] * st.R;
      Eigen::MatrixXd Rc = -0.5 * (dVx * dVs + dVs * dVx);
      Rc.diagonal().array() += sigma * mu_ - st.d.array().square();
      for (Eigen::Index i = 0; i < Rc.rows(); ++i)
        for (Eigen::Index j = 0; j < Rc.cols(); ++j)
          Rt[b](i, j) = Rc(i, j) * 2.0 / (st.d(i) + st.d(j));
    }
    rt_orth = (sigma * mu_ - vo_.array().square() -
               aff.dxo.array() * aff.dso.array())
                  .matrix()
                  .cwiseQuotient(vo_);
    const double rtk = sigma * mu_ - pt_.tau * pt_.kappa - aff.dtau * aff.dkappa;

    Direction dir = solve_direction(1.0 - sigma, Rt, rt_orth, rtk);
    const double amax = max_step(dir);
    const double alpha = std::min(1.0, 0.98 * amax);
    if (!(alpha > 1e-12)) {
      // Stalled: accept a looser certificate before giving up.
      const double by = c_.b.dot(pt_.y);
      if (by > 1e-10) {
        double n2 = (rd_orth_ - corth * pt_.tau).squaredNorm();
        for (size_t b = 0; b < nb; ++b) n2 += (rd_[b] - cblocks[b] * pt_.tau).squaredNorm();
        if (std::sqrt(n2) <= 1e-6 * by)
          return finish(SolveStatus::Infeasible, "primal infeasible certificate");
      }
      const double cx = a_x_(m);
      if (cx < -1e-10 && (rp_ + c_.b * pt_.tau).norm() <= 1e-6 * (-cx))
        return finish(SolveStatus::Infeasible, "dual infeasible certificate");
      stall_detail = "step length collapsed";
      break;
    }

    for (size_t b = 0; b < nb; ++b) {
      pt_.X[b] += alpha * dir.dX[b];
      pt_.S[b] += alpha * dir.dS[b];
      pt_.X[b] = 0.5 * (pt_.X[b] + pt_.X[b].transpose()).eval();
      pt_.S[b] = 0.5 * (pt_.S[b] + pt_.S[b].transpose()).eval();
    }
    pt_.xo += alpha * dir.dxo;
    pt_.so += alpha * dir.dso;
    pt_.y += alpha * dir.dy;
    pt_.tau += alpha * dir.dtau;
    pt_.kappa += alpha * dir.dkappa;
  }
  return finish(SolveStatus::MaxIterations,
                stall_detail.empty() ? "iteration cap reached" : stall_detail);
}

}  // namespace

void LinearExpr::add_diag(int block, int index, double weight) {
  diag_.push_back({block, index, weight});
}
void LinearExpr::add_rank1(int block, double weight, const Eigen::VectorXd& vec) {
  rank1_.push_back({block, weight, vec});
}
void LinearExpr::add_dense(int block, const Eigen::MatrixXd& mat) {
  dense_.push_back({block, mat});
}
void LinearExpr::add_scalar(int index, double weight) {
  scalar_.push_back({index, weight});
}

double LinearExpr::eval(const std::vector<Eigen::MatrixXd>& blocks,
                        const Eigen::VectorXd& scalars) const {
  double v = 0.0;
  for (const auto& t : diag_) v += t.weight * blocks[t.block](t.index, t.index);
  for (const auto& t : rank1_) v += t.weight * t.vec.dot(blocks[t.block] * t.vec);
  for (const auto& t : dense_) v += blocks[t.block].cwiseProduct(t.mat).sum();
  for (const auto& [idx, w] : scalar_) v += w * scalars(idx);
  return v;
}

double LinearExpr::frobenius_norm() const {
  double sq = 0.0;
  for (const auto& t : diag_) sq += t.weight * t.weight;
  for (const auto& t : rank1_) {
    const double n2 = t.vec.squaredNorm();
    sq += t.weight * t.weight * n2 * n2;
  }
  for (const auto& t : dense_) sq += t.mat.squaredNorm();
  for (const auto& [idx, w] : scalar_) sq += w * w;
  return std::sqrt(sq);
}

namespace {
void dump_expr(std::ostream& os, const LinearExpr& e, int scalar_block) {
  for (const auto& t : e.diag_terms())
    os << t.block << ' ' << t.index << ' ' << t.index << ' ' << t.weight << '\n';
  for (const auto& t : e.rank1_terms()) {
    const auto& a = t.vec;
    for (Eigen::Index i = 0; i < a.size(); ++i)
      for (Eigen::Index j = 0; j < a.size(); ++j) {
        const double v = t.weight * a(i) * a(j);
        if (v != 0.0) os << t.block << ' ' << i << ' ' << j << ' ' << v << '\n';
      }
  }
  for (const auto& t : e.dense_terms())
    for (Eigen::Index i = 0; i < t.mat.rows(); ++i)
      for (Eigen::Index j = 0; j < t.mat.cols(); ++j)
        if (t.mat(i, j) != 0.0)
          os << t.block << ' ' << i << ' ' << j << ' ' << t.mat(i, j) << '\n';
  for (const auto& [idx, w] : e.scalar_terms())
    if (w != 0.0) os << scalar_block << ' ' << idx << ' ' << idx << ' ' << w << '\n';
}
}  // namespace

void ConicProblem::dump(std::ostream& os) const {
  const int scalar_block = static_cast<int>(block_dims.size());
  os << "objective " << (maximize ? "max" : "min") << '\n';
  dump_expr(os, objective, scalar_block);
  for (size_t i = 0; i < constraints.size(); ++i) {
    const char* rel = constraints[i].relation == Relation::Equal
                          ? "=="
                          : (constraints[i].relation == Relation::LessEqual ? "<=" : ">=");
    os << "constraint " << i << ' ' << rel << ' ' << constraints[i].rhs << '\n';
    dump_expr(os, constraints[i].lhs, scalar_block);
  }
}

ConicSolution solve(const ConicProblem& problem, const SolverOptions& options) {
  for (int d : problem.block_dims)
    if (d < 1) throw std::invalid_argument("conic block dimension must be >= 1");
  if (!problem.scalar_free.empty() &&
      static_cast<int>(problem.scalar_free.size()) != problem.num_scalars)
    throw std::invalid_argument("scalar_free size mismatch");
  Solver solver(problem, options);
  return solver.run();
}

ConicSolution solve(const ConicProblem& problem, double tol) {
  SolverOptions opt;
  opt.tol = tol;
  return solve(problem, opt);
}

namespace {

template <typename Matrix>
std::pair<double, Eigen::Matrix<typename Matrix::Scalar, Eigen::Dynamic, 1>>
max_eigpair_impl(const Matrix& m) {
  using Scalar = typename Matrix::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (m.rows() != m.cols()) throw std::invalid_argument("max_eigpair: square matrix required");
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
  const auto& evals = es.eigenvalues();
  const Eigen::Index n = m.rows();
  const double lmax = evals(n - 1);
  const double thresh = 1e-12 * std::max(1.0, std::abs(lmax)) * static_cast<double>(n);

  Eigen::Index lo = n - 1;
  while (lo > 0 && lmax - evals(lo - 1) <= thresh) --lo;
  const auto basis = es.eigenvectors().rightCols(n - lo);

  // Canonical representative: normalized eigenspace projection of the first
  // basis vector with a usable projection.
  Vector v;
  for (Eigen::Index i = 0; i < n; ++i) {
    Vector proj = basis * basis.adjoint().col(i);
    const double norm = proj.norm();
    if (norm > 1e-8) {
      v = proj / norm;
      break;
    }
  }
  if (v.size() == 0) v = basis.col(basis.cols() - 1);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar vi = v(i);
    if (std::abs(vi) > 1e-12) {
      if constexpr (std::is_same_v<Scalar, double>) {
        if (vi < 0.0) v = -v;
      } else {
        v *= std::conj(vi) / std::abs(vi);
      }
      break;
    }
  }
  return {lmax, v};
}

}  // namespace

std::pair<double, Eigen::VectorXd> max_eigpair(const Eigen::MatrixXd& sym) {
  return max_eigpair_impl(sym);
}

std::pair<double, Eigen::VectorXcd> max_eigpair(const Eigen::MatrixXcd& herm) {
  return max_eigpair_impl(herm);
}

Rank1Extraction rank1_extract(const Eigen::MatrixXcd& psd) {
  const double unorm = psd.norm();
  if (unorm == 0.0)
    return {Eigen::VectorXcd::Zero(psd.rows()), 0.0};
  auto [lmax, v] = max_eigpair(psd);
  Rank1Extraction out;
  out.u = std::sqrt(std::max(lmax, 0.0)) * v;
  out.residual = (psd - out.u * out.u.adjoint()).norm() / unorm;
  return out;
}

}  // namespace irsma::sdp
