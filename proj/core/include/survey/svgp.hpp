#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "survey/common.hpp"

namespace survey {

// Isotropic Matern-5/2 over 2-D inputs; nu is fixed.
struct KernelParams {
  double signal_variance = 1.0;  // m^2
  double lengthscale = 10.0;     // m
  static constexpr double nu = 2.5;

  void validate() const {
    if (!(signal_variance > 0.0)) throw std::invalid_argument("KernelParams: signal_variance must be > 0");
    if (!(lengthscale > 0.0)) throw std::invalid_argument("KernelParams: lengthscale must be > 0");
  }
};

double matern52(const Vec2& a, const Vec2& b, const KernelParams& k);

// Sparse variational GP state. The variational distribution is
// q(u) = N(var_mean, S) with S = var_chol var_chol^T, prior p(u) = N(0, Kzz).
// Targets are regressed as z - mean_offset; predictions add the offset back.
struct SvgpModel {
  Eigen::MatrixXd inducing;   // u x 2
  Eigen::VectorXd var_mean;   // u
  Eigen::MatrixXd var_chol;   // u x u lower triangular, positive diagonal
  KernelParams kernel;
  double noise_variance = 1e-4;  // m^2
  double mean_offset = 0.0;      // m, constant mean in target units
  std::uint64_t beams_seen = 0;  // N_t, total beams ever observed

  int num_inducing() const { return static_cast<int>(inducing.rows()); }
  int num_params() const;

  // Flat parameter vector used by the optimizer and the finite-difference
  // tests: [var_mean | lower(var_chol), diagonal as log | inducing row-major |
  // log lengthscale | log signal_variance | log noise_variance].
  Eigen::VectorXd get_params() const;
  void set_params(const Eigen::VectorXd& p);

  // u points on a jittered uniform grid over the extent; q(u) = prior (m = 0,
  // S = Kzz) so the initial KL is zero.
  static SvgpModel init_grid(const Extent& extent, int num_inducing, const KernelParams& kernel,
                             double noise_variance, Rng& rng);
};

// One training sample: horizontal input, target z (already in regression
// units, i.e. -depth), and the input covariance Omega.
struct BeamSample {
  Vec2 input = Vec2::Zero();
  double target = 0.0;
  Mat2 omega = Mat2::Zero();
};

// Ring buffer over the most recent beams; minibatches are uniform over contents.
class TrainBuffer {
 public:
  explicit TrainBuffer(std::size_t capacity);
  void push(const BeamSample& sample);
  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }
  const BeamSample& at(std::size_t i) const { return data_[i]; }
  // Without replacement when m <= size, with replacement otherwise.
  std::vector<BeamSample> sample_minibatch(std::size_t m, Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<BeamSample> data_;
};

struct UiSample {
  Vec2 input;
  double target;
};

// Monte Carlo uncertain-input draw: each input is resampled once from
// N(input, omega). Exactly-zero omegas are passed through without consuming
// randomness. Non-PSD omegas fall back to a diagonal square root.
std::vector<UiSample> sample_ui_batch(const std::vector<BeamSample>& batch, Rng& rng);

struct TrainConfig {
  int minibatch = 1024;      // M
  double learning_rate = 1e-2;
  int steps_per_ping = 1;
  bool use_adam = true;      // plain SGD when false
  bool train_hyperparams = true;
  bool train_inducing = true;

  void validate() const {
    if (minibatch < 1) throw std::invalid_argument("TrainConfig: minibatch must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("TrainConfig: learning_rate must be >= 0");
  }
};

struct ElboResult {
  double value = 0.0;
  Eigen::VectorXd grad;  // same layout as SvgpModel::get_params
};

// Minibatch ELBO and its gradient w.r.t. every free parameter:
//   (N_t / M) * sum_j E_q [ln p(z_j | f_j)] - KL[q(u) || p(u)]
// with the Gaussian expected log-density in closed form. n_total is N_t.
ElboResult elbo_minibatch(const SvgpModel& model, const std::vector<UiSample>& batch,
                          std::uint64_t n_total);

// Onestep-at-a-time trainer with adaptive moments; owns the model.
class SvgpTrainer {
 public:
  SvgpTrainer(SvgpModel model, TrainConfig cfg);

  const SvgpModel& model() const { return model_; }
  void add_beams_observed(std::uint64_t n) { model_.beams_seen += n; }
  void set_mean_offset(double offset) { model_.mean_offset = offset; }

  // One ascent step on a fresh minibatch. Non-finite ELBO rejects the step
  // and halves the learning rate, up to 5 recoveries per call.
  void train_step(const TrainBuffer& buffer, Rng& rng);

  double last_elbo() const { return last_elbo_; }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }  // schedules keep the moments

 private:
  SvgpModel model_;
  TrainConfig cfg_;
  double lr_;
  Eigen::VectorXd adam_m_, adam_v_;
  std::int64_t adam_t_ = 0;
  double last_elbo_ = 0.0;
};

// Immutable posterior view: deep copy of the model plus the factorizations
// needed for O(u^2) point predictions. Safe to share across threads.
class SvgpSnapshot {
 public:
  explicit SvgpSnapshot(const SvgpModel& model);

  const SvgpModel& model() const { return model_; }
  // Posterior mean and variance (clamped at 0). observation_noise adds
  // noise_variance on top of the latent variance.
  void predict(const std::vector<Vec2>& queries, Eigen::VectorXd& mean, Eigen::VectorXd& variance,
               bool observation_noise = false) const;
  std::pair<double, double> predict_one(const Vec2& query, bool observation_noise = false) const;
  // Latent variance without the non-negativity clamp (diagnostics).
  double predict_variance_unclamped(const Vec2& query) const;

 private:
  SvgpModel model_;
  Eigen::VectorXd w_;   // Kzz^-1 m
  Eigen::MatrixXd q_;   // Kzz^-1 (Kzz - S) Kzz^-1
};

// Convenience wrapper constructing a snapshot per call.
void predict(const SvgpModel& model, const std::vector<Vec2>& queries, Eigen::VectorXd& mean,
             Eigen::VectorXd& variance, bool observation_noise = false);

// Binary checkpoint; restores predictions bit-exactly. The survey extent is
// stored alongside the model so exports can be reconstructed from the file.
void save_checkpoint(const SvgpModel& model, const Extent& extent, const std::string& path);
std::pair<SvgpModel, Extent> load_checkpoint(const std::string& path);

}  // namespace survey
