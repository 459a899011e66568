#include "turboshape/surrogate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "turboshape/errors.hpp"

namespace turboshape {

void TrainingSet::validate(double dedup_tol) const {
  if (x.size() < 2) throw InvalidArgument("training set needs at least two samples");
  if (y.size() != x.size()) throw InvalidArgument("one response per sample required");
  const int d = dim();
  if (d < 1) throw InvalidArgument("design dimension must be positive");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw InvalidArgument("samples differ in dimension");
    if (!std::isfinite(y[i]) || !x[i].allFinite()) throw InvalidArgument("samples and responses must be finite");
    for (std::size_t j = 0; j < i; ++j) {
      if ((x[i] - x[j]).norm() <= dedup_tol) throw InvalidArgument("duplicate sample point");
    }
  }
  if (!grad.empty()) {
    if (grad.size() != x.size()) throw InvalidArgument("one gradient per sample required");
    for (const auto& g : grad) {
      if (g.size() != d || !g.allFinite()) throw InvalidArgument("gradient dimension must match the design dimension");
    }
  }
}

namespace {

// Correlation matrix of values (and gradients) for unit process variance.
Eigen::MatrixXd correlation(const TrainingSet& s, bool grad, const Eigen::VectorXd& len) {
  const int n = s.size();
  const int d = s.dim();
  const int N = grad ? n * (1 + d) : n;
  Eigen::MatrixXd R(N, N);
  const Eigen::VectorXd il2 = len.array().square().inverse();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const Eigen::VectorXd diff = s.x[i] - s.x[j];
      const double k = std::exp(-0.5 * diff.cwiseProduct(diff).dot(il2));
      R(i, j) = k;
      if (!grad) continue;
      const Eigen::VectorXd t = diff.cwiseProduct(il2);  // (x_i - x_j) / l^2
      for (int a = 0; a < d; ++a) {
        // cov(y_i, dy_j/dx_a) and cov(dy_i/dx_a, y_j)
        R(i, n + j * d + a) = k * t[a];
        R(n + i * d + a, j) = -k * t[a];
        for (int b = 0; b < d; ++b) {
          R(n + i * d + a, n + j * d + b) = k * ((a == b ? il2[a] : 0.0) - t[a] * t[b]);
        }
      }
    }
  }
  return R;
}

Eigen::VectorXd observations(const TrainingSet& s, bool grad) {
  const int n = s.size();
  const int d = s.dim();
  Eigen::VectorXd Y(grad ? n * (1 + d) : n);
  for (int i = 0; i < n; ++i) Y[i] = s.y[i];
  if (grad) {
    for (int i = 0; i < n; ++i) Y.segment(n + i * d, d) = s.grad[i];
  }
  return Y;
}

Eigen::VectorXd mean_basis(int n, int N) {
  Eigen::VectorXd F = Eigen::VectorXd::Zero(N);
  F.head(n).setOnes();
  return F;
}

struct Factorized {
  Eigen::MatrixXd L;
  double nugget = 0.0;
  double mu = 0.0;
  double sigma2 = 0.0;
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd alpha;
  /// Largest misfit of the model at the training data (values and gradients).
  double residual = 0.0;
  /// Admissible misfit: 10 nugget times the data magnitude (at least one).
  double residual_tol = 0.0;
  bool ok = false;
  bool escalated = false;
};

Factorized factorize(const TrainingSet& s, bool grad, const Eigen::VectorXd& len, double nugget, double nugget_max) {
  Factorized f;
  const Eigen::MatrixXd R0 = correlation(s, grad, len);
  const int N = static_cast<int>(R0.rows());
  const Eigen::VectorXd Y = observations(s, grad);
  const Eigen::VectorXd F = mean_basis(s.size(), N);
  for (double nug = nugget; nug <= nugget_max * (1.0 + 1e-12); nug *= 10.0) {
    Eigen::MatrixXd R = R0;
    R.diagonal().array() += nug;
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
      f.escalated = true;
      continue;
    }
    f.L = llt.matrixL();
    // the nugget only stabilizes the factorization: solve against R0 by
    // conjugate gradients preconditioned with the regularized factor
    auto solve = [&](const Eigen::VectorXd& b) {
      Eigen::VectorXd x = llt.solve(b);
      Eigen::VectorXd r = b - R0 * x;
      Eigen::VectorXd best = x;
      double best_res = r.norm();
      Eigen::VectorXd z = llt.solve(r), p = z;
      double rz = r.dot(z);
      for (int it = 0; it < 2 * N && best_res > 0.0; ++it) {
        const Eigen::VectorXd Ap = R0 * p;
        const double pAp = p.dot(Ap);
        if (!(pAp > 0.0) || !(rz > 0.0)) break;
        const double a = rz / pAp;
        x += a * p;
        r = b - R0 * x;
        const double res = r.norm();
        if (res < best_res) {
          best_res = res;
          best = x;
        }
        z = llt.solve(r);
        const double rz_new = r.dot(z);
        p = z + (rz_new / rz) * p;
        rz = rz_new;
      }
      return best;
    };
    const Eigen::VectorXd RiF = solve(F);
    const Eigen::VectorXd RiY = solve(Y);
    f.mu = F.dot(RiY) / F.dot(RiF);
    const Eigen::VectorXd r = Y - f.mu * F;
    f.alpha = solve(r);
    f.residual = (r - R0 * f.alpha).lpNorm<Eigen::Infinity>();
    f.residual_tol = 10.0 * nug * std::max(1.0, Y.cwiseAbs().maxCoeff());
    const double scale = std::max(1.0, Y.head(s.size()).cwiseAbs().maxCoeff());
    f.sigma2 = std::max(r.dot(f.alpha) / N, 1e-20 * scale * scale);
    const double logdet = 2.0 * f.L.diagonal().array().log().sum();
    f.loglik = -0.5 * (N * std::log(f.sigma2) + logdet);
    f.nugget = nug;
    f.ok = std::isfinite(f.loglik);
    if (f.ok) return f;
  }
  return f;
}

// Bounded Nelder-Mead (coordinates clamped to the box) maximizing `obj`.
Eigen::VectorXd nelder_mead(const std::function<double(const Eigen::VectorXd&)>& obj, Eigen::VectorXd x0,
                            const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int max_evals, double& best) {
  const int d = static_cast<int>(x0.size());
  auto clamp = [&](Eigen::VectorXd v) { return v.cwiseMax(lo).cwiseMin(hi); };
  auto f = [&](const Eigen::VectorXd& v) {
    const double o = obj(v);
    return std::isfinite(o) ? -o : std::numeric_limits<double>::infinity();
  };
  std::vector<Eigen::VectorXd> p(d + 1, clamp(x0));
  std::vector<double> fv(d + 1);
  for (int i = 0; i < d; ++i) {
    const double step = 0.25 * (hi[i] - lo[i]);
    p[i + 1][i] += (p[i + 1][i] + step <= hi[i]) ? step : -step;
  }
  for (int i = 0; i <= d; ++i) fv[i] = f(p[i]);
  int evals = d + 1;
  std::vector<int> order(d + 1);
  while (evals < max_evals) {
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fv[a] < fv[b]; });
    const int ib = order.front();
    const int iw = order.back();
    const int is = order[d - 1 >= 0 ? d - 1 : 0];
    if (std::abs(fv[iw] - fv[ib]) <= 1e-10 * (1.0 + std::abs(fv[ib]))) break;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(d);
    for (int i = 0; i <= d; ++i) {
      if (i != iw) c += p[i];
    }
    c /= d;
    const Eigen::VectorXd xr = clamp(c + (c - p[iw]));
    const double fr = f(xr);
    ++evals;
    if (fr < fv[ib]) {
      const Eigen::VectorXd xe = clamp(c + 2.0 * (c - p[iw]));
      const double fe = f(xe);
      ++evals;
      if (fe < fr) {
        p[iw] = xe;
        fv[iw] = fe;
      } else {
        p[iw] = xr;
        fv[iw] = fr;
      }
    } else if (fr < fv[is]) {
      p[iw] = xr;
      fv[iw] = fr;
    } else {
      const Eigen::VectorXd xc = clamp(c + 0.5 * (p[iw] - c));
      const double fc = f(xc);
      ++evals;
      if (fc < fv[iw]) {
        p[iw] = xc;
        fv[iw] = fc;
      } else {
        for (int i = 0; i <= d; ++i) {
          if (i == ib) continue;
          p[i] = clamp(p[ib] + 0.5 * (p[i] - p[ib]));
          fv[i] = f(p[i]);
          ++evals;
        }
      }
    }
  }
  int ib = 0;
  for (int i = 1; i <= d; ++i) {
    if (fv[i] < fv[ib]) ib = i;
  }
  best = -fv[ib];
  return p[ib];
}

constexpr double kInadmissible = -1e10;

double norm_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

struct KrigingAccess {
  static void install(KrigingModel& m, const Factorized& f) {
    m.L_ = f.L;
    m.alpha_ = f.alpha;
    m.mu_ = f.mu;
    m.sigma2_ = f.sigma2;
    m.nugget_ = f.nugget;
    m.loglik_ = f.loglik;
    m.residual_ = f.residual;
  }
};

KrigingModel KrigingModel::with_hyperparameters(const TrainingSet& data, bool use_gradients,
                                                const Eigen::VectorXd& length_scales, double nugget) {
  data.validate();
  if (use_gradients && !data.has_gradients()) throw InvalidArgument("gradient-enhanced model needs gradients");
  if (length_scales.size() != data.dim() || !(length_scales.array() > 0.0).all()) {
    throw InvalidArgument("length scales must be positive, one per dimension");
  }
  if (!(nugget > 0.0)) throw InvalidArgument("nugget must be positive");
  KrigingModel m;
  m.data_ = data;
  m.use_grad_ = use_gradients;
  m.length_ = length_scales;
  const Factorized f = factorize(data, use_gradients, length_scales, nugget, nugget);
  if (!f.ok) throw SingularSystemError("Kriging correlation matrix is singular");
  KrigingAccess::install(m, f);
  return m;
}

KrigingModel KrigingModel::fit(const TrainingSet& data, bool use_gradients, const FitOptions& opt) {
  data.validate();
  if (use_gradients && !data.has_gradients()) throw InvalidArgument("gradient-enhanced model needs gradients");
  if (opt.n_starts < 1 || opt.max_evals < 1 || opt.threads < 1) throw InvalidArgument("invalid fit options");
  if (!(opt.nugget > 0.0 && opt.nugget_max >= opt.nugget)) throw InvalidArgument("invalid nugget bounds");
  const int d = data.dim();
  Eigen::VectorXd lo(d), hi(d);
  for (int a = 0; a < d; ++a) {
    double mn = data.x[0][a], mx = data.x[0][a];
    for (const auto& x : data.x) {
      mn = std::min(mn, x[a]);
      mx = std::max(mx, x[a]);
    }
    const double range = mx > mn ? mx - mn : 1.0;
    lo[a] = std::log(opt.min_length * range);
    hi[a] = std::log(opt.max_length * range);
  }

  // starting points: box centre, then uniform draws from a seeded generator
  std::mt19937_64 rng(opt.seed);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(0.5 * (lo + hi) - 0.25 * (hi - lo));
  for (int s = 1; s < opt.n_starts; ++s) {
    Eigen::VectorXd v(d);
    for (int a = 0; a < d; ++a) v[a] = std::uniform_real_distribution<double>(lo[a], hi[a])(rng);
    starts.push_back(v);
  }

  auto objective = [&](const Eigen::VectorXd& loglen) {
    const Factorized f = factorize(data, use_gradients, loglen.array().exp().matrix(), opt.nugget, opt.nugget_max);
    if (!f.ok) return -std::numeric_limits<double>::infinity();
    // hyperparameters whose correlation matrix is too ill-conditioned to
    // reproduce the data are ranked below every admissible point, ordered by misfit
    if (f.residual > f.residual_tol) return kInadmissible - std::log(f.residual / f.residual_tol);
    return f.loglik;
  };
  std::vector<Eigen::VectorXd> found(starts.size());
  std::vector<double> value(starts.size(), -std::numeric_limits<double>::infinity());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < starts.size(); i = next++) {
      found[i] = nelder_mead(objective, starts[i], lo, hi, opt.max_evals, value[i]);
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::min<int>(opt.threads, static_cast<int>(starts.size()));
  for (int t = 1; t < nt; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::size_t best = 0;
  for (std::size_t i = 1; i < starts.size(); ++i) {
    if (value[i] > value[best]) best = i;
  }
  if (!std::isfinite(value[best])) throw SingularSystemError("Kriging correlation matrix is singular for every start");

  KrigingModel m;
  m.data_ = data;
  m.use_grad_ = use_gradients;
  m.length_ = found[best].array().exp().matrix();
  const Factorized f = factorize(data, use_gradients, m.length_, opt.nugget, opt.nugget_max);
  if (!f.ok) throw SingularSystemError("Kriging correlation matrix is singular");
  m.residual_ = f.residual;
  if (value[best] <= kInadmissible) {
    m.warnings_.push_back("no length scales reproduce the training data within 10 nugget; residual " +
                          std::to_string(f.residual));
  }
  if (f.escalated) {
    m.warnings_.push_back("nugget escalated to " + std::to_string(f.nugget) + " to factorize the correlation matrix");
  }
  KrigingAccess::install(m, f);
  return m;
}

Eigen::VectorXd KrigingModel::cross_correlation(const Eigen::VectorXd& x) const {
  const int n = data_.size();
  const int d = data_.dim();
  if (x.size() != d) throw InvalidArgument("prediction point has the wrong dimension");
  const Eigen::VectorXd il2 = length_.array().square().inverse();
  Eigen::VectorXd r(use_grad_ ? n * (1 + d) : n);
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd diff = x - data_.x[j];
    const double k = std::exp(-0.5 * diff.cwiseProduct(diff).dot(il2));
    r[j] = k;
    if (use_grad_) r.segment(n + j * d, d) = k * diff.cwiseProduct(il2);
  }
  return r;
}

Prediction KrigingModel::predict(const Eigen::VectorXd& x) const {
  const Eigen::VectorXd r = cross_correlation(x);
  Prediction p;
  p.mean = mu_ + r.dot(alpha_);
  const Eigen::VectorXd v = L_.triangularView<Eigen::Lower>().solve(r);
  p.sd = std::sqrt(std::max(0.0, sigma2_ * (1.0 - v.squaredNorm())));
  return p;
}

Eigen::VectorXd KrigingModel::predict_gradient(const Eigen::VectorXd& x) const {
  const int n = data_.size();
  const int d = data_.dim();
  if (x.size() != d) throw InvalidArgument("prediction point has the wrong dimension");
  const Eigen::VectorXd il2 = length_.array().square().inverse();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d);
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd diff = x - data_.x[j];
    const double k = std::exp(-0.5 * diff.cwiseProduct(diff).dot(il2));
    const Eigen::VectorXd t = diff.cwiseProduct(il2);
    g -= alpha_[j] * k * t;
    if (!use_grad_) continue;
    for (int a = 0; a < d; ++a) {
      for (int e = 0; e < d; ++e) {
        g[e] += alpha_[n + j * d + a] * k * ((a == e ? il2[a] : 0.0) - t[a] * t[e]);
      }
    }
  }
  return g;
}

void KrigingModel::save(const std::string& path) const {
  nlohmann::json j;
  j["format"] = "turboshape-kriging";
  j["version"] = 1;
  j["gradients"] = use_grad_;
  j["length_scales"] = std::vector<double>(length_.data(), length_.data() + length_.size());
  j["nugget"] = nugget_;
  auto vecs = [](const std::vector<Eigen::VectorXd>& vs) {
    std::vector<std::vector<double>> out;
    for (const auto& v : vs) out.emplace_back(v.data(), v.data() + v.size());
    return out;
  };
  j["x"] = vecs(data_.x);
  j["y"] = data_.y;
  j["grad"] = vecs(data_.grad);
  std::ofstream os(path);
  if (!os) throw InvalidArgument("cannot write model file " + path);
  os << j.dump(1) << '\n';
}

KrigingModel KrigingModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument("cannot read model file " + path);
  nlohmann::json j;
  try {
    is >> j;
    if (j.at("format") != "turboshape-kriging" || j.at("version") != 1) {
      throw InvalidArgument("unsupported model file " + path);
    }
    auto vecs = [](const nlohmann::json& a) {
      std::vector<Eigen::VectorXd> out;
      for (const auto& row : a) {
        const auto v = row.get<std::vector<double>>();
        out.emplace_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
      }
      return out;
    };
    TrainingSet s;
    s.x = vecs(j.at("x"));
    s.y = j.at("y").get<std::vector<double>>();
    s.grad = vecs(j.at("grad"));
    const auto len = j.at("length_scales").get<std::vector<double>>();
    return with_hyperparameters(s, j.at("gradients").get<bool>(),
                                Eigen::Map<const Eigen::VectorXd>(len.data(), static_cast<Eigen::Index>(len.size())),
                                j.at("nugget").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("malformed model file " + path + ": " + e.what());
  }
}

double expected_improvement(double mean, double sd, double best) {
  const double gain = best - mean;
  if (!(sd > 0.0)) return std::max(gain, 0.0);
  const double z = gain / sd;
  return gain * norm_cdf(z) + sd * norm_pdf(z);
}

std::vector<RankedCandidate> acquire(const KrigingModel& model, const std::vector<Eigen::VectorXd>& candidates,
                                     double best_so_far) {
  if (!std::isfinite(best_so_far)) throw InvalidArgument("best value must be finite");
  std::vector<RankedCandidate> out;
  out.reserve(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    RankedCandidate c;
    c.index = static_cast<int>(i);
    c.prediction = model.predict(candidates[i]);
    c.ei = expected_improvement(c.prediction.mean, c.prediction.sd, best_so_far);
    out.push_back(c);
  }
  std::stable_sort(out.begin(), out.end(), [](const RankedCandidate& a, const RankedCandidate& b) {
    if (a.ei != b.ei) return a.ei > b.ei;
    return a.prediction.sd > b.prediction.sd;
  });
  return out;
}

EiLoopResult ei_loop(const std::function<double(const Eigen::VectorXd&)>& f,
                     const std::vector<Eigen::VectorXd>& initial, const std::vector<Eigen::VectorXd>& candidates,
                     int n_iter, const FitOptions& opt) {
  if (n_iter < 0) throw InvalidArgument("iteration count must be non-negative");
  EiLoopResult res;
  for (const auto& x : initial) {
    res.data.x.push_back(x);
    res.data.y.push_back(f(x));
  }
  auto sampled = [&](const Eigen::VectorXd& c) {
    for (const auto& x : res.data.x) {
      if ((x - c).norm() <= 1e-12) return true;
    }
    return false;
  };
  for (int it = 0; it < n_iter; ++it) {
    const auto model = KrigingModel::fit(res.data, false, opt);
    const double best = *std::min_element(res.data.y.begin(), res.data.y.end());
    int pick = -1;
    for (const auto& c : acquire(model, candidates, best)) {
      if (!sampled(candidates[c.index])) {
        pick = c.index;
        break;
      }
    }
    if (pick < 0) break;
    res.data.x.push_back(candidates[pick]);
    res.data.y.push_back(f(candidates[pick]));
  }
  res.best_index = static_cast<int>(std::min_element(res.data.y.begin(), res.data.y.end()) - res.data.y.begin());
  return res;
}

}  // namespace turboshape
