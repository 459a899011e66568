#pragma once

// Kriging and gradient-enhanced Kriging (GEK) with an anisotropic
// squared-exponential kernel and a constant mean.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace turboshape {

struct TrainingSet {
  std::vector<Eigen::VectorXd> x;
  std::vector<double> y;
  /// Empty, or one gradient per sample.
  std::vector<Eigen::VectorXd> grad;

  int dim() const { return x.empty() ? 0 : static_cast<int>(x.front().size()); }
  int size() const { return static_cast<int>(x.size()); }
  bool has_gradients() const { return !grad.empty(); }
  void validate(double dedup_tol = 1e-12) const;
};

struct FitOptions {
  int n_starts = 8;
  std::uint64_t seed = 1;
  /// Nugget relative to the process variance, and its escalation cap.
  double nugget = 1e-10;
  double nugget_max = 1e-4;
  /// Length-scale search box relative to the data range per dimension.
  double min_length = 1e-2;
  double max_length = 1e2;
  int max_evals = 300;
  /// The likelihood search only accepts length scales whose model reproduces
  /// the data within 10 nugget (relative to the data magnitude).
  int threads = 1;
};

struct Prediction {
  double mean = 0.0;
  double sd = 0.0;
};

class KrigingModel {
 public:
  static KrigingModel fit(const TrainingSet& data, bool use_gradients, const FitOptions& opt = {});
  /// Rebuild a model from stored hyperparameters without a likelihood search.
  static KrigingModel with_hyperparameters(const TrainingSet& data, bool use_gradients,
                                           const Eigen::VectorXd& length_scales, double nugget);

  Prediction predict(const Eigen::VectorXd& x) const;
  Eigen::VectorXd predict_gradient(const Eigen::VectorXd& x) const;

  const Eigen::VectorXd& length_scales() const { return length_; }
  double process_variance() const { return sigma2_; }
  double mean_value() const { return mu_; }
  double nugget() const { return nugget_; }
  double log_likelihood() const { return loglik_; }
  /// Largest misfit at the training values and gradients.
  double interpolation_residual() const { return residual_; }
  bool uses_gradients() const { return use_grad_; }
  const TrainingSet& data() const { return data_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  /// JSON document with hyperparameters and training data.
  void save(const std::string& path) const;
  static KrigingModel load(const std::string& path);

 private:
  TrainingSet data_;
  bool use_grad_ = false;
  Eigen::VectorXd length_;
  double sigma2_ = 1.0;
  double mu_ = 0.0;
  double nugget_ = 1e-10;
  double loglik_ = 0.0;
  double residual_ = 0.0;
  Eigen::VectorXd alpha_;
  Eigen::MatrixXd L_;  // Cholesky factor of the correlation matrix
  std::vector<std::string> warnings_;

  Eigen::VectorXd cross_correlation(const Eigen::VectorXd& x) const;
  friend struct KrigingAccess;
};

/// Expected improvement below `best` for minimization.
double expected_improvement(double mean, double sd, double best);

struct RankedCandidate {
  int index = 0;
  double ei = 0.0;
  Prediction prediction;
};

/// Candidates ranked by expected improvement, descending (ties by index).
std::vector<RankedCandidate> acquire(const KrigingModel& model, const std::vector<Eigen::VectorXd>& candidates,
                                     double best_so_far);

struct EiLoopResult {
  TrainingSet data;
  int best_index = 0;
};

/// Evaluate f at the initial designs, then add the best-EI candidate
/// (not yet sampled) `n_iter` times, refitting after each evaluation.
EiLoopResult ei_loop(const std::function<double(const Eigen::VectorXd&)>& f,
                     const std::vector<Eigen::VectorXd>& initial, const std::vector<Eigen::VectorXd>& candidates,
                     int n_iter, const FitOptions& opt = {});

}  // namespace turboshape
