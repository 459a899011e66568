#include "turboshape/optimizer.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>

#include <Eigen/QR>

#include "turboshape/case_study.hpp"

namespace turboshape {

void WeightVector::validate() const {
  if (!(w1 >= 0.0 && w2 >= 0.0)) throw InvalidArgument("weights must be non-negative");
  if (std::abs(w1 + w2 - 1.0) > 1e-12) throw InvalidArgument("weights must sum to one");
}

WeightVector WeightVector::normalized(double a, double b) {
  if (!(a >= 0.0 && b >= 0.0) || !(a + b > 0.0)) throw InvalidArgument("weights must be non-negative, not both zero");
  return {a / (a + b), b / (a + b)};
}

double weighted_sum(const std::vector<double>& J, const std::vector<double>& w) {
  if (J.size() != w.size()) throw InvalidArgument("objective and weight counts differ");
  double s = 0.0;
  for (std::size_t i = 0; i < J.size(); ++i) s += w[i] * J[i];
  return s;
}

double weighted_sum(double J1, double J2, const WeightVector& w) { return w.w1 * J1 + w.w2 * J2; }

bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidArgument("objective vectors differ in length");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

void DescentConfig::validate() const {
  if (!(c_armijo > 0.0 && c_armijo < 1.0)) throw InvalidArgument("Armijo constant must lie in (0, 1)");
  if (!(rho > 0.0 && rho < 1.0)) throw InvalidArgument("backtracking factor must lie in (0, 1)");
  if (!(initial_step > 0.0)) throw InvalidArgument("initial step must be positive");
  if (!(max_step > 0.0)) throw InvalidArgument("max step must be positive");
  if (max_iter < 0) throw InvalidArgument("max_iter must be non-negative");
  if (max_backtracks < 1) throw InvalidArgument("max_backtracks must be at least 1");
  if (!(grad_tol >= 0.0)) throw InvalidArgument("gradient tolerance must be non-negative");
  if (!(remesh_fraction > 0.0)) throw InvalidArgument("remesh fraction must be positive");
}

namespace {

struct Trial {
  AdaptedMesh mesh;
  Evaluation ev;
  bool remeshed = false;
};

// Move along -tau*s, re-adapting to the implied boundary when the move is large.
std::optional<Trial> try_step(const AdaptedMesh& mesh, const Eigen::VectorXd& s, double tau, double move,
                              const DescentConfig& cfg, const StructuralProblem& prob) {
  Trial t;
  try {
    t.mesh = deform_mesh(mesh, s, tau);
  } catch (const StepTooLargeError&) {
    return std::nullopt;
  }
  if (move > cfg.remesh_fraction * mesh.grid.mesh_size()) {
    try {
      t.mesh = adapt_to_boundary(mesh.grid, t.mesh.curve, mesh.options);
      t.mesh.check_quality();
      t.remeshed = true;
    } catch (const DegenerateMeshError&) {
      t.mesh = deform_mesh(mesh, s, tau);
    } catch (const InvalidArgument&) {
      return std::nullopt;
    }
  }
  try {
    t.ev = evaluate(t.mesh, prob, false);
  } catch (const SingularSystemError&) {
    return std::nullopt;
  } catch (const SolverError&) {
    return std::nullopt;
  }
  return t;
}

}  // namespace

DescentResult descent_loop(const AdaptedMesh& start, const WeightVector& w, const DescentConfig& cfg,
                           const StructuralProblem& prob, const MetricParams& metric, const ObjectiveScales& scales) {
  w.validate();
  cfg.validate();
  if (!(scales.J1 > 0.0 && scales.J2 > 0.0)) throw InvalidArgument("objective scales must be positive");
  const double h = start.grid.mesh_size();

  DescentResult res;
  res.mesh = start;
  Evaluation ev = evaluate(res.mesh, prob, true);
  auto scalar = [&](const Evaluation& e) { return w.w1 * e.J1 / scales.J1 + w.w2 * e.J2 / scales.J2; };

  res.stop_reason = "max_iter";
  for (int it = 0;; ++it) {
    const double Jw = scalar(ev);
    Eigen::VectorXd g = (w.w1 / scales.J1) * ev.dJ1 + (w.w2 / scales.J2) * ev.dJ2;
    Eigen::VectorXd s = represent_gradient(res.mesh, g, metric);
    const double slope = g.dot(s);
    const double gnorm = std::sqrt(std::max(slope, 0.0));

    IterationRecord rec;
    rec.iteration = it;
    rec.J1 = ev.J1;
    rec.J2 = ev.J2;
    rec.Jw = Jw;
    rec.grad_norm = gnorm;
    res.J1 = ev.J1;
    res.J2 = ev.J2;

    if (gnorm <= cfg.grad_tol) {
      res.log.push_back(rec);
      res.stop_reason = "gradient_tolerance";
      break;
    }
    if (it >= cfg.max_iter) {
      res.log.push_back(rec);
      break;
    }

    const double smax = max_nodal_norm(s);
    double tau = std::min(cfg.initial_step, cfg.max_step) * h / smax;
    std::optional<Trial> accepted;
    int k = 0;
    for (; k < cfg.max_backtracks; ++k, tau *= cfg.rho) {
      auto trial = try_step(res.mesh, s, tau, tau * smax, cfg, prob);
      if (!trial) continue;
      if (scalar(trial->ev) <= Jw - cfg.c_armijo * tau * slope) {
        accepted = std::move(trial);
        break;
      }
    }
    rec.backtracks = k;
    if (!accepted) {
      res.log.push_back(rec);
      res.stop_reason = "line_search_failure";
      break;
    }
    rec.step = tau;
    rec.remeshed = accepted->remeshed;
    res.log.push_back(rec);
    res.mesh = std::move(accepted->mesh);
    ev = evaluate(res.mesh, prob, true);
  }
  return res;
}

void ParetoArchive::filter() {
  std::vector<ArchiveRecord> kept;
  for (std::size_t i = 0; i < records_.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < records_.size() && !dominated; ++j) {
      if (i != j && dominates({records_[j].J1, records_[j].J2}, {records_[i].J1, records_[i].J2})) dominated = true;
    }
    if (!dominated) kept.push_back(std::move(records_[i]));
  }
  records_ = std::move(kept);
}

bool ParetoArchive::mutually_nondominated() const {
  for (const auto& a : records_) {
    for (const auto& b : records_) {
      if (dominates({a.J1, a.J2}, {b.J1, b.J2})) return false;
    }
  }
  return true;
}

ParetoArchive front_sweep(const AdaptedMesh& start, const std::vector<WeightVector>& weights,
                          const DescentConfig& cfg, const StructuralProblem& prob, const MetricParams& metric,
                          int threads, double thickness_x) {
  if (threads < 1) throw InvalidArgument("thread count must be positive");
  const Evaluation ev0 = evaluate(start, prob, false);
  const ObjectiveScales scales{ev0.J1, ev0.J2};

  std::vector<std::optional<ArchiveRecord>> slots(weights.size());
  std::vector<std::string> errors(weights.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < weights.size(); i = next++) {
      try {
        auto r = descent_loop(start, weights[i], cfg, prob, metric, scales);
        ArchiveRecord rec;
        rec.weight = weights[i];
        rec.J1 = r.J1;
        rec.J2 = r.J2;
        rec.mid_thickness = thickness_x >= 0.0 ? thickness_at(r.mesh, thickness_x) : 0.0;
        rec.stop_reason = r.stop_reason;
        rec.mesh = std::move(r.mesh);
        rec.log = std::move(r.log);
        slots[i] = std::move(rec);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  const int n = std::min<int>(threads, static_cast<int>(std::max<std::size_t>(weights.size(), 1)));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ParetoArchive archive;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (slots[i]) {
      archive.add(std::move(*slots[i]));
    } else {
      archive.failures.push_back("w1=" + std::to_string(weights[i].w1) + ": " + errors[i]);
    }
  }
  archive.filter();
  return archive;
}

Eigen::VectorXd common_descent_direction(const std::vector<Eigen::VectorXd>& grads, const InnerProduct& inner) {
  if (grads.empty()) throw InvalidArgument("need at least one gradient");
  for (const auto& g : grads) {
    if (g.size() != grads[0].size()) throw InvalidArgument("gradients differ in length");
  }
  const InnerProduct ip = inner ? inner : [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b); };
  const int k = static_cast<int>(grads.size());
  if (k == 1) return -grads[0];
  Eigen::MatrixXd G(k, k);
  for (int i = 0; i < k; ++i) {
    for (int j = i; j < k; ++j) G(i, j) = G(j, i) = ip(grads[i], grads[j]);
  }
  Eigen::VectorXd a = Eigen::VectorXd::Constant(k, 1.0 / k);
  if (k == 2) {
    const double den = G(0, 0) - 2.0 * G(0, 1) + G(1, 1);
    const double a0 = den > 0.0 ? std::clamp((G(1, 1) - G(0, 1)) / den, 0.0, 1.0) : 0.5;
    a << a0, 1.0 - a0;
  } else {
    // exact: minimize over the affine hull of every affinely independent subset, keep feasible minima
    if (k > 16) throw InvalidArgument("too many gradients for the min-norm subproblem");
    double best = std::numeric_limits<double>::infinity();
    for (unsigned mask = 1; mask < (1u << k); ++mask) {
      std::vector<int> idx;
      for (int i = 0; i < k; ++i) {
        if (mask & (1u << i)) idx.push_back(i);
      }
      const int m = static_cast<int>(idx.size());
      Eigen::MatrixXd K = Eigen::MatrixXd::Zero(m + 1, m + 1);
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m + 1);
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) K(i, j) = G(idx[i], idx[j]);
        K(i, m) = K(m, i) = 1.0;
      }
      rhs[m] = 1.0;
      const auto cod = K.completeOrthogonalDecomposition();
      if (cod.rank() < m + 1) continue;  // affinely dependent subset
      const Eigen::VectorXd sol = cod.solve(rhs);
      Eigen::VectorXd cand = Eigen::VectorXd::Zero(k);
      bool feasible = true;
      for (int i = 0; i < m; ++i) {
        if (sol[i] < -1e-12) feasible = false;
        cand[idx[i]] = std::max(sol[i], 0.0);
      }
      if (!feasible || !(cand.sum() > 0.0)) continue;
      cand /= cand.sum();
      const double val = cand.dot(G * cand);
      if (val < best) {
        best = val;
        a = cand;
      }
    }
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grads[0].size());
  for (int i = 0; i < k; ++i) out -= a[i] * grads[i];
  return out;
}

}  // namespace turboshape
