#include "clqr/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace clqr {

namespace {

constexpr double kZeroStep = 1e-14;
constexpr double kIndependenceTol = 1e-10;

double InfNorm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

double MaxViolation(const QpProblem& prob, const Vector& x) {
  if (prob.num_constraints() == 0) return 0.0;
  return std::max(0.0, (prob.G * x - prob.h).maxCoeff());
}

// Null-space data for the current working set.
struct NullSpace {
  Matrix q1;  // d×k, orthonormal basis of range(G_Wᵀ)
  Matrix r;   // k×k upper triangular, G_Wᵀ = q1·r
  Matrix z;   // d×(d−k), orthonormal basis of null(G_W)
};

NullSpace Factor(const Matrix& G, const std::vector<int>& working, Index d, std::int64_t& flops) {
  const Index k = static_cast<Index>(working.size());
  NullSpace ns;
  if (k == 0) {
    ns.q1.resize(d, 0);
    ns.r.resize(0, 0);
    ns.z = Matrix::Identity(d, d);
    return ns;
  }
  Matrix at(d, k);
  for (Index j = 0; j < k; ++j) at.col(j) = G.row(working[static_cast<size_t>(j)]).transpose();
  Eigen::HouseholderQR<Matrix> qr(at);
  const Matrix q = qr.householderQ() * Matrix::Identity(d, d);
  ns.q1 = q.leftCols(k);
  ns.z = q.rightCols(d - k);
  ns.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  flops += 2 * d * k * k + 2 * d * d * k;
  return ns;
}

}  // namespace

void QpProblem::Check() const {
  const Index d = q.size();
  if (P.rows() != d || P.cols() != d) throw ConfigError("QP: P must be d×d with d = size(q)");
  if (G.cols() != d && G.rows() > 0) throw ConfigError("QP: G must have d columns");
  if (G.rows() != h.size()) throw ConfigError("QP: G and h row counts differ");
  if (d > 0 && (P - P.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + P.cwiseAbs().maxCoeff())) {
    throw ConfigError("QP: P is not symmetric");
  }
}

std::string ToString(QpStatus status) {
  switch (status) {
    case QpStatus::kOptimal: return "optimal";
    case QpStatus::kInfeasible: return "infeasible";
    case QpStatus::kMaxIter: return "maxIter";
    case QpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

KktReport CheckKkt(const QpProblem& prob, const Vector& x, const Vector& lambda) {
  KktReport rep;
  Vector stat = prob.P * x + prob.q;
  if (prob.num_constraints() > 0) {
    stat += prob.G.transpose() * lambda;
    const Vector slack = prob.h - prob.G * x;
    rep.primal_violation = std::max(0.0, -slack.minCoeff());
    rep.dual_violation = std::max(0.0, -lambda.minCoeff());
    rep.complementarity = lambda.cwiseProduct(slack).cwiseAbs().maxCoeff();
  }
  rep.stationarity = InfNorm(stat);
  return rep;
}

std::vector<int> ActiveSetSolver::IndependentSubset(const Matrix& G, const std::vector<int>& rows) {
  std::vector<int> sorted = rows;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<int> kept;
  std::vector<Vector> basis;
  for (int r : sorted) {
    if (r < 0 || r >= G.rows()) continue;
    Vector v = G.row(r).transpose();
    const double norm0 = v.norm();
    if (norm0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const Vector& b : basis) v -= b.dot(v) * b;
    }
    const double res = v.norm();
    flops_ += 8 * G.cols() * static_cast<std::int64_t>(basis.size() + 1);
    if (res > kIndependenceTol * norm0) {
      basis.push_back(v / res);
      kept.push_back(r);
    }
    if (static_cast<Index>(basis.size()) == G.cols()) break;
  }
  return kept;
}

std::optional<Vector> ActiveSetSolver::SolveOnWorkingSet(const QpProblem& prob,
                                                         std::vector<int>& working) {
  const Index d = prob.num_variables();
  working = IndependentSubset(prob.G, working);
  const NullSpace ns = Factor(prob.G, working, d, flops_);
  const Index k = static_cast<Index>(working.size());
  Vector x = Vector::Zero(d);
  if (k > 0) {
    Vector hw(k);
    for (Index j = 0; j < k; ++j) hw[j] = prob.h[working[static_cast<size_t>(j)]];
    // G_W x = h_W  with G_Wᵀ = Q1 R  ⇒  x_p = Q1 R⁻ᵀ h_W
    const Vector y = ns.r.transpose().triangularView<Eigen::Lower>().solve(hw);
    x = ns.q1 * y;
  }
  if (k < d) {
    const Matrix pz = prob.P * ns.z;
    const Matrix reduced = ns.z.transpose() * pz;
    Eigen::LLT<Matrix> llt(reduced);
    if (llt.info() != Eigen::Success) return std::nullopt;
    const Vector g = prob.P * x + prob.q;
    x -= ns.z * llt.solve(ns.z.transpose() * g);
  }
  return x;
}

ActiveSetSolver::Phase2Outcome ActiveSetSolver::RunPhase2(const QpProblem& prob, Vector& x,
                                                          std::vector<int>& working, Vector& lambda,
                                                          int max_iterations, double unbounded_norm) {
  const Index d = prob.num_variables();
  const Index c = prob.num_constraints();
  std::vector<char> in_working(static_cast<size_t>(c), 0);
  for (int w : working) in_working[static_cast<size_t>(w)] = 1;
  std::map<std::vector<int>, int> degenerate_visits;
  bool at_subspace_minimum = false;
  lambda = Vector::Zero(c);

  for (int iter = 1; iter <= max_iterations; ++iter) {
    const Index k = static_cast<Index>(working.size());
    const NullSpace ns = Factor(prob.G, working, d, flops_);
    const Vector g = prob.P * x + prob.q;
    flops_ += 2 * d * d;

    Vector p = Vector::Zero(d);
    if (!at_subspace_minimum && k < d) {
      const Matrix pz = prob.P * ns.z;
      const Matrix reduced = ns.z.transpose() * pz;
      Eigen::LLT<Matrix> llt(reduced);
      if (llt.info() != Eigen::Success) {
        throw ConfigError("QP: reduced Hessian is not positive definite (P not PD on the null space)");
      }
      p = -(ns.z * llt.solve(ns.z.transpose() * g));
      const Index nz = d - k;
      flops_ += 2 * d * d * nz + 2 * d * nz * nz + nz * nz * nz / 3 + 4 * d * nz + 2 * nz * nz;
    }

    if (InfNorm(p) <= kZeroStep * (1.0 + InfNorm(x))) {
      Vector lam_w = Vector::Zero(k);
      if (k > 0) {
        const Vector rhs = -(ns.q1.transpose() * (g + prob.P * p));
        lam_w = ns.r.triangularView<Eigen::Upper>().solve(rhs);
        flops_ += 2 * d * d + 2 * d * k + k * k;
      }
      const double dual_tol = 1e-11 * std::max(1.0, InfNorm(g));
      int drop = -1;
      double most_negative = -dual_tol;
      for (Index j = 0; j < k; ++j) {
        const int row = working[static_cast<size_t>(j)];
        if (lam_w[j] < most_negative ||
            (drop >= 0 && lam_w[j] == most_negative && row < working[static_cast<size_t>(drop)])) {
          most_negative = lam_w[j];
          drop = static_cast<int>(j);
        }
      }
      if (drop < 0) {
        for (Index j = 0; j < k; ++j) lambda[working[static_cast<size_t>(j)]] = std::max(0.0, lam_w[j]);
        std::sort(working.begin(), working.end());
        return {QpStatus::kOptimal, iter};
      }
      in_working[static_cast<size_t>(working[static_cast<size_t>(drop)])] = 0;
      working.erase(working.begin() + drop);
      at_subspace_minimum = false;
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    const double pnorm = p.norm();
    for (Index i = 0; i < c; ++i) {
      if (in_working[static_cast<size_t>(i)]) continue;
      const double gp = prob.G.row(i).dot(p);
      if (gp <= 1e-13 * prob.G.row(i).norm() * pnorm) continue;
      const double slack = prob.h[i] - prob.G.row(i).dot(x);
      const double a = std::max(0.0, slack / gp);
      if (a < alpha) {
        alpha = a;
        blocking = static_cast<int>(i);
      }
    }
    flops_ += 4 * c * d;
    x += alpha * p;
    flops_ += 2 * d;

    if (blocking >= 0) {
      working.push_back(blocking);
      in_working[static_cast<size_t>(blocking)] = 1;
      at_subspace_minimum = false;
      if (alpha == 0.0) {
        std::vector<int> key = working;
        std::sort(key.begin(), key.end());
        if (++degenerate_visits[key] > 2 * std::max<Index>(c, 1)) return {QpStatus::kMaxIter, iter};
      } else {
        degenerate_visits.clear();
      }
    } else {
      at_subspace_minimum = true;
      degenerate_visits.clear();
      if (InfNorm(x) > unbounded_norm) return {QpStatus::kUnbounded, iter};
    }
  }
  std::sort(working.begin(), working.end());
  return {QpStatus::kMaxIter, max_iterations};
}

bool ActiveSetSolver::FindFeasiblePoint(const QpProblem& prob, const Vector& start, Vector& x,
                                        std::vector<int>& working, int& iterations) {
  const Index d = prob.num_variables();
  const Index c = prob.num_constraints();
  const double eps = options_.phase1_regularization;

  // Variables (x, t):  min t + ε/2 (‖x − x₀‖² + t²)  s.t.  Gx − t ≤ h,  −t ≤ 0.
  QpProblem aux;
  aux.P = eps * Matrix::Identity(d + 1, d + 1);
  aux.q = Vector::Zero(d + 1);
  aux.q.head(d) = -eps * start;
  aux.q[d] = 1.0;
  aux.G = Matrix::Zero(c + 1, d + 1);
  aux.G.topLeftCorner(c, d) = prob.G;
  aux.G.col(d).head(c).setConstant(-1.0);
  aux.G(c, d) = -1.0;
  aux.h = Vector::Zero(c + 1);
  aux.h.head(c) = prob.h;

  Vector y(d + 1);
  y.head(d) = start;
  y[d] = std::max(0.0, (prob.G * start - prob.h).maxCoeff()) + 1.0;
  std::vector<int> aux_working;
  Vector aux_lambda;
  const int budget = options_.max_iterations > 0 ? options_.max_iterations
                                                  : static_cast<int>(10 * (d + 1 + c + 1) + 100);
  const Phase2Outcome out =
      RunPhase2(aux, y, aux_working, aux_lambda, budget, std::numeric_limits<double>::infinity());
  iterations += out.iterations;
  const double scale = 1.0 + InfNorm(prob.h);
  if (out.status != QpStatus::kOptimal || y[d] > options_.feasibility_tol * scale) return false;

  x = y.head(d);
  std::vector<int> candidates;
  for (int w : aux_working) {
    if (w < c) candidates.push_back(w);
  }
  working = IndependentSubset(prob.G, candidates);
  return MaxViolation(prob, x) <= options_.feasibility_tol * scale;
}

QpResult ActiveSetSolver::Solve(const QpProblem& prob, const QpWarmStart* warm) {
  prob.Check();
  const Index d = prob.num_variables();
  const Index c = prob.num_constraints();
  QpResult res;
  res.lambda = Vector::Zero(c);
  const int budget = options_.max_iterations > 0 ? options_.max_iterations
                                                  : static_cast<int>(10 * (d + c) + 100);
  const double scale = 1.0 + InfNorm(prob.h);
  const double feas_tol = options_.feasibility_tol * scale;

  Vector x;
  std::vector<int> working;
  bool started = false;

  if (warm != nullptr && !warm->active.empty()) {
    std::vector<int> guess = warm->active;
    if (auto xw = SolveOnWorkingSet(prob, guess); xw && MaxViolation(prob, *xw) <= feas_tol) {
      x = *xw;
      working = guess;
      started = true;
    }
  }
  if (!started && warm != nullptr && warm->x && warm->x->size() == d &&
      MaxViolation(prob, *warm->x) <= feas_tol) {
    x = *warm->x;
    std::vector<int> candidates;
    for (int a : warm->active) {
      if (a >= 0 && a < c && std::abs(prob.h[a] - prob.G.row(a).dot(x)) <= feas_tol) candidates.push_back(a);
    }
    working = IndependentSubset(prob.G, candidates);
    started = true;
  }
  if (!started) {
    const Vector start = (warm != nullptr && warm->x && warm->x->size() == d) ? *warm->x : Vector::Zero(d);
    if (MaxViolation(prob, start) <= feas_tol) {
      x = start;
    } else if (!FindFeasiblePoint(prob, start, x, working, res.iterations)) {
      res.x = start;
      res.status = QpStatus::kInfeasible;
      return res;
    }
  }

  const Phase2Outcome out = RunPhase2(prob, x, working, res.lambda, budget, options_.unbounded_norm);
  res.iterations += out.iterations;
  res.status = out.status;
  res.x = std::move(x);
  res.working_set = std::move(working);
  const KktReport kkt = CheckKkt(prob, res.x, res.lambda);
  res.kkt_residual = std::max({kkt.stationarity, kkt.primal_violation, kkt.complementarity});
  return res;
}

QpResult SolveQp(const QpProblem& prob, const QpWarmStart* warm) {
  ActiveSetSolver solver;
  return solver.Solve(prob, warm);
}

QpResult SolveLp(const Vector& q, const Matrix& G, const Vector& h, ActiveSetSolver* solver) {
  QpProblem prob{kLpRegularization * Matrix::Identity(q.size(), q.size()), q, G, h};
  ActiveSetSolver::Options opts = solver != nullptr ? solver->options() : ActiveSetSolver::Options{};
  opts.unbounded_norm = 1e-3 / kLpRegularization;
  ActiveSetSolver local(opts);
  QpResult res = local.Solve(prob);
  if (res.optimal() && InfNorm(res.x) > opts.unbounded_norm) res.status = QpStatus::kUnbounded;
  if (solver != nullptr) solver->AddFlops(local.flops());
  return res;
}

}  // namespace clqr
