#include "survey/svgp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace survey {

namespace {

constexpr double kSqrt5 = 2.2360679774997896;
constexpr double kBaseJitterRel = 1e-6;
constexpr double kMaxJitterRel = 1e-2;

struct KernelDerivs {
  double k;         // value
  double gor;       // (dk/dr) / r, finite at r = 0
  double dlogl;     // dk / d(log lengthscale)
};

KernelDerivs kernel_derivs(double r, double sf2, double len) {
  const double s5 = kSqrt5 * r / len;
  const double e = std::exp(-s5);
  KernelDerivs kd;
  kd.k = sf2 * (1.0 + s5 + s5 * s5 / 3.0) * e;
  kd.gor = -sf2 * e * (1.0 + s5) * 5.0 / (3.0 * len * len);
  kd.dlogl = sf2 * e * s5 * s5 * (1.0 + s5) / 3.0;
  return kd;
}

// Cholesky of Kzz; jitter is the failure path, starting at 1e-6 * sf2 and
// escalating x10. Returns the (possibly jittered) matrix through kzzj.
Eigen::LLT<Eigen::MatrixXd> factor_with_jitter(const Eigen::MatrixXd& kzz, double sf2,
                                               Eigen::MatrixXd& kzzj) {
  const int u = static_cast<int>(kzz.rows());
  double rel = 0.0;
  while (true) {
    kzzj = kzz + rel * sf2 * Eigen::MatrixXd::Identity(u, u);
    Eigen::LLT<Eigen::MatrixXd> llt(kzzj);
    if (llt.info() == Eigen::Success) return llt;
    rel = rel == 0.0 ? kBaseJitterRel : rel * 10.0;
    if (rel > kMaxJitterRel * 1.0001)
      throw std::runtime_error("svgp: Kzz not positive definite even at maximum jitter");
  }
}

}  // namespace

double matern52(const Vec2& a, const Vec2& b, const KernelParams& k) {
  const double s5 = kSqrt5 * (a - b).norm() / k.lengthscale;
  return k.signal_variance * (1.0 + s5 + s5 * s5 / 3.0) * std::exp(-s5);
}

int SvgpModel::num_params() const {
  const int u = num_inducing();
  return u + u * (u + 1) / 2 + 2 * u + 3;
}

Eigen::VectorXd SvgpModel::get_params() const {
  const int u = num_inducing();
  Eigen::VectorXd p(num_params());
  int idx = 0;
  for (int i = 0; i < u; ++i) p[idx++] = var_mean[i];
  for (int i = 0; i < u; ++i)
    for (int j = 0; j <= i; ++j) p[idx++] = (i == j) ? std::log(var_chol(i, i)) : var_chol(i, j);
  for (int i = 0; i < u; ++i) {
    p[idx++] = inducing(i, 0);
    p[idx++] = inducing(i, 1);
  }
  p[idx++] = std::log(kernel.lengthscale);
  p[idx++] = std::log(kernel.signal_variance);
  p[idx++] = std::log(noise_variance);
  return p;
}

void SvgpModel::set_params(const Eigen::VectorXd& p) {
  const int u = num_inducing();
  if (p.size() != num_params()) throw std::invalid_argument("SvgpModel::set_params: size mismatch");
  int idx = 0;
  for (int i = 0; i < u; ++i) var_mean[i] = p[idx++];
  for (int i = 0; i < u; ++i)
    for (int j = 0; j <= i; ++j) {
      var_chol(i, j) = (i == j) ? std::exp(p[idx]) : p[idx];
      ++idx;
    }
  for (int i = 0; i < u; ++i) {
    inducing(i, 0) = p[idx++];
    inducing(i, 1) = p[idx++];
  }
  kernel.lengthscale = std::exp(p[idx++]);
  kernel.signal_variance = std::exp(p[idx++]);
  noise_variance = std::exp(p[idx++]);
}

SvgpModel SvgpModel::init_grid(const Extent& extent, int num_inducing, const KernelParams& kernel,
                               double noise_variance, Rng& rng) {
  kernel.validate();
  if (num_inducing < 1) throw std::invalid_argument("init_grid: need num_inducing >= 1");
  if (!(noise_variance > 0.0)) throw std::invalid_argument("init_grid: noise_variance must be > 0");

  SvgpModel m;
  m.kernel = kernel;
  m.noise_variance = noise_variance;
  m.inducing.resize(num_inducing, 2);

  const double aspect = extent.width() > 0 && extent.height() > 0
                            ? extent.width() / extent.height()
                            : 1.0;
  int nx = std::max(1, static_cast<int>(std::round(std::sqrt(num_inducing * aspect))));
  int ny = (num_inducing + nx - 1) / nx;
  const double dx = extent.width() / nx;
  const double dy = extent.height() / ny;
  std::uniform_real_distribution<double> jit(-0.25, 0.25);
  for (int i = 0; i < num_inducing; ++i) {
    const int gx = i % nx;
    const int gy = i / nx;
    const double x = extent.min_x + (gx + 0.5 + jit(rng)) * dx;
    const double y = extent.min_y + (gy + 0.5 + jit(rng)) * dy;
    m.inducing(i, 0) = std::clamp(x, extent.min_x, extent.max_x);
    m.inducing(i, 1) = std::clamp(y, extent.min_y, extent.max_y);
  }

  m.var_mean = Eigen::VectorXd::Zero(num_inducing);
  // q(u) starts at the prior: S = Kzz (with the base jitter), so KL = 0.
  Eigen::MatrixXd kzz(num_inducing, num_inducing);
  for (int i = 0; i < num_inducing; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = matern52(m.inducing.row(i), m.inducing.row(j), kernel);
      kzz(i, j) = v;
      kzz(j, i) = v;
    }
  Eigen::MatrixXd kzzj;
  auto llt = factor_with_jitter(kzz, kernel.signal_variance, kzzj);
  m.var_chol = llt.matrixL();
  return m;
}

TrainBuffer::TrainBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("TrainBuffer: capacity must be > 0");
  data_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
}

void TrainBuffer::push(const BeamSample& sample) {
  if (data_.size() < capacity_) {
    data_.push_back(sample);
  } else {
    data_[head_] = sample;
    head_ = (head_ + 1) % capacity_;
  }
}

std::vector<BeamSample> TrainBuffer::sample_minibatch(std::size_t m, Rng& rng) const {
  if (data_.empty()) throw std::runtime_error("TrainBuffer: cannot sample from an empty buffer");
  std::vector<BeamSample> out;
  out.reserve(m);
  if (m >= data_.size() && m > 0) {
    if (m == data_.size()) return data_;
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    for (std::size_t i = 0; i < m; ++i) out.push_back(data_[pick(rng)]);
    return out;
  }
  std::sample(data_.begin(), data_.end(), std::back_inserter(out), m, rng);
  return out;
}

std::vector<UiSample> sample_ui_batch(const std::vector<BeamSample>& batch, Rng& rng) {
  std::vector<UiSample> out;
  out.reserve(batch.size());
  std::normal_distribution<double> n01(0.0, 1.0);
  for (const auto& s : batch) {
    UiSample ui{s.input, s.target};
    const Mat2& om = s.omega;
    if (!om.isZero(0.0)) {
      const double a00 = om(0, 0);
      const double a01 = 0.5 * (om(0, 1) + om(1, 0));
      const double a11 = om(1, 1);
      const double z0 = n01(rng);
      const double z1 = n01(rng);
      if (a00 > 0.0 && a11 - a01 * a01 / a00 >= 0.0) {
        const double l00 = std::sqrt(a00);
        const double l10 = a01 / l00;
        const double l11 = std::sqrt(std::max(0.0, a11 - l10 * l10));
        ui.input.x() += l00 * z0;
        ui.input.y() += l10 * z0 + l11 * z1;
      } else {
        // Cholesky failed: diagonal square-root fallback.
        ui.input.x() += std::sqrt(std::max(0.0, a00)) * z0;
        ui.input.y() += std::sqrt(std::max(0.0, a11)) * z1;
      }
    }
    out.push_back(ui);
  }
  return out;
}

ElboResult elbo_minibatch(const SvgpModel& model, const std::vector<UiSample>& batch,
                          std::uint64_t n_total) {
  const int u = model.num_inducing();
  const auto mb = static_cast<int>(batch.size());
  if (mb == 0) throw std::invalid_argument("elbo_minibatch: empty batch");
  model.kernel.validate();
  if (!(model.noise_variance > 0.0))
    throw std::invalid_argument("elbo_minibatch: noise_variance must be > 0");

  const double sf2 = model.kernel.signal_variance;
  const double len = model.kernel.lengthscale;
  const double sn2 = model.noise_variance;
  const Eigen::MatrixXd& zpts = model.inducing;

  // Kernel matrices plus the derivative fields needed for backprop.
  Eigen::MatrixXd kzz(u, u), dl_zz(u, u), gor_zz(u, u);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j <= i; ++j) {
      const double r = (zpts.row(i) - zpts.row(j)).norm();
      const KernelDerivs kd = kernel_derivs(r, sf2, len);
      kzz(i, j) = kzz(j, i) = kd.k;
      dl_zz(i, j) = dl_zz(j, i) = kd.dlogl;
      gor_zz(i, j) = gor_zz(j, i) = kd.gor;
    }
  Eigen::MatrixXd kxz(mb, u), dl_xz(mb, u), gor_xz(mb, u);
  Eigen::MatrixXd xpts(mb, 2);
  Eigen::VectorXd zc(mb);
  for (int j = 0; j < mb; ++j) {
    xpts(j, 0) = batch[j].input.x();
    xpts(j, 1) = batch[j].input.y();
    zc[j] = batch[j].target - model.mean_offset;
    for (int i = 0; i < u; ++i) {
      const double r = (batch[j].input.transpose() - zpts.row(i)).norm();
      const KernelDerivs kd = kernel_derivs(r, sf2, len);
      kxz(j, i) = kd.k;
      dl_xz(j, i) = kd.dlogl;
      gor_xz(j, i) = kd.gor;
    }
  }

  Eigen::MatrixXd kzzj;
  auto llt = factor_with_jitter(kzz, sf2, kzzj);

  const Eigen::VectorXd& m = model.var_mean;
  const Eigen::MatrixXd L = model.var_chol.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd S = L * L.transpose();

  const Eigen::MatrixXd at = llt.solve(kxz.transpose());  // u x mb, equals A^T
  const Eigen::MatrixXd a = at.transpose();               // A = Kxz Kzz^-1
  const Eigen::VectorXd w = llt.solve(m);                 // Kzz^-1 m
  const Eigen::VectorXd mu = kxz * w;
  const Eigen::VectorXd bq = (a * L).rowwise().squaredNorm();          // A_j S A_j^T
  const Eigen::VectorXd kq = (a.array() * kxz.array()).rowwise().sum();  // k_j^T Kzz^-1 k_j
  const Eigen::VectorXd v = Eigen::VectorXd::Constant(mb, sf2) - kq + bq;
  const Eigen::VectorXd resid = zc - mu;

  const double scale = static_cast<double>(std::max<std::uint64_t>(n_total, mb)) / mb;

  double data_ll = 0.0;
  const double log_norm = -0.5 * std::log(2.0 * kPi * sn2);
  for (int j = 0; j < mb; ++j)
    data_ll += log_norm - resid[j] * resid[j] / (2.0 * sn2) - v[j] / (2.0 * sn2);

  const Eigen::MatrixXd pmat = llt.solve(Eigen::MatrixXd::Identity(u, u));
  const double tr_ps = (pmat.array() * S.array()).sum();
  const double m_pm = m.dot(w);
  const double lndet_k = 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
  const double lndet_s = 2.0 * L.diagonal().array().log().sum();
  const double kl = 0.5 * (tr_ps + m_pm - u + lndet_k - lndet_s);

  ElboResult res;
  res.value = scale * data_ll - kl;

  // --- gradient assembly (reverse mode through the closed forms) ---
  const Eigen::VectorXd gmu = (scale / sn2) * resid;
  const double cv = -scale / (2.0 * sn2);  // d/dv_j, identical for all j

  // var_mean
  Eigen::VectorXd g_m = at * gmu - w;

  // S via var_chol
  const Eigen::MatrixXd gs_data = cv * (at * at.transpose());  // P Mv P
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(u, u);
  L.triangularView<Eigen::Lower>().solveInPlace(linv);
  const Eigen::MatrixXd sinv = linv.transpose() * linv;
  const Eigen::MatrixXd gs = gs_data - 0.5 * pmat + 0.5 * sinv;
  Eigen::MatrixXd g_l = 2.0 * gs * L;

  // Kxz
  const Eigen::MatrixXd asp = llt.solve(S * at).transpose();  // A S Kzz^-1
  const Eigen::MatrixXd g_kxz = gmu * w.transpose() + 2.0 * cv * (asp - a);

  // Kzz through P = Kzz^-1 and the KL log-determinant
  const Eigen::VectorXd t_vec = kxz.transpose() * gmu;
  const Eigen::MatrixXd mv = cv * (kxz.transpose() * kxz);
  const Eigen::MatrixXd ps = pmat * S;
  Eigen::MatrixXd g_p = t_vec * m.transpose() - mv + mv * ps + ps.transpose() * mv;
  g_p += -0.5 * S - 0.5 * (m * m.transpose());
  const Eigen::MatrixXd g_kzz = -pmat * g_p * pmat - 0.5 * pmat;

  // hyperparameters (log-space)
  const double g_logsf2 = (g_kzz.array() * kzzj.array()).sum() +
                          (g_kxz.array() * kxz.array()).sum() + cv * sf2 * mb;
  const double g_logl =
      (g_kzz.array() * dl_zz.array()).sum() + (g_kxz.array() * dl_xz.array()).sum();
  double g_logsn2 = 0.0;
  for (int j = 0; j < mb; ++j)
    g_logsn2 += scale * (-0.5 + (resid[j] * resid[j] + v[j]) / (2.0 * sn2));

  // inducing inputs
  const Eigen::MatrixXd wzz = (g_kzz + g_kzz.transpose()).array() * gor_zz.array();
  const Eigen::MatrixXd wxz = g_kxz.array() * gor_xz.array();
  const Eigen::VectorXd wzz_row = wzz.rowwise().sum();
  const Eigen::VectorXd wxz_col = wxz.colwise().sum();
  Eigen::MatrixXd g_z = wzz_row.asDiagonal() * zpts - wzz * zpts;
  g_z += wxz_col.asDiagonal() * zpts - wxz.transpose() * xpts;

  // pack
  res.grad.resize(model.num_params());
  int idx = 0;
  for (int i = 0; i < u; ++i) res.grad[idx++] = g_m[i];
  for (int i = 0; i < u; ++i)
    for (int j = 0; j <= i; ++j)
      res.grad[idx++] = (i == j) ? g_l(i, i) * L(i, i) : g_l(i, j);
  for (int i = 0; i < u; ++i) {
    res.grad[idx++] = g_z(i, 0);
    res.grad[idx++] = g_z(i, 1);
  }
  res.grad[idx++] = g_logl;
  res.grad[idx++] = g_logsf2;
  res.grad[idx++] = g_logsn2;
  return res;
}

SvgpTrainer::SvgpTrainer(SvgpModel model, TrainConfig cfg)
    : model_(std::move(model)), cfg_(cfg), lr_(cfg.learning_rate) {
  cfg_.validate();
  const int n = model_.num_params();
  adam_m_ = Eigen::VectorXd::Zero(n);
  adam_v_ = Eigen::VectorXd::Zero(n);
}

void SvgpTrainer::train_step(const TrainBuffer& buffer, Rng& rng) {
  if (buffer.empty()) throw std::runtime_error("train_step: empty buffer");
  const int u = model_.num_inducing();
  const int n_m = u;
  const int n_l = u * (u + 1) / 2;
  const int n_z = 2 * u;

  for (int attempt = 0;; ++attempt) {
    auto batch = buffer.sample_minibatch(static_cast<std::size_t>(cfg_.minibatch), rng);
    auto perturbed = sample_ui_batch(batch, rng);
    ElboResult res;
    bool ok = true;
    try {
      res = elbo_minibatch(model_, perturbed, model_.beams_seen);
    } catch (const std::runtime_error&) {
      ok = false;
    }
    if (ok && std::isfinite(res.value) && res.grad.allFinite()) {
      last_elbo_ = res.value;
      if (lr_ == 0.0) return;
      if (!cfg_.train_inducing) res.grad.segment(n_m + n_l, n_z).setZero();
      if (!cfg_.train_hyperparams) res.grad.tail(3).setZero();

      Eigen::VectorXd params = model_.get_params();
      if (cfg_.use_adam) {
        ++adam_t_;
        adam_m_ = 0.9 * adam_m_ + 0.1 * res.grad;
        adam_v_ = (0.999 * adam_v_.array() + 0.001 * res.grad.array().square()).matrix();
        const double c1 = 1.0 - std::pow(0.9, static_cast<double>(adam_t_));
        const double c2 = 1.0 - std::pow(0.999, static_cast<double>(adam_t_));
        params += lr_ * ((adam_m_ / c1).array() / ((adam_v_ / c2).array().sqrt() + 1e-8)).matrix();
      } else {
        params += lr_ * res.grad;
      }
      model_.set_params(params);
      return;
    }
    if (attempt >= 5)
      throw std::runtime_error("train_step: ELBO non-finite after 5 recovery attempts");
    lr_ *= 0.5;
  }
}

SvgpSnapshot::SvgpSnapshot(const SvgpModel& model) : model_(model) {
  const int u = model_.num_inducing();
  Eigen::MatrixXd kzz(u, u);
  for (int i = 0; i < u; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = matern52(model_.inducing.row(i), model_.inducing.row(j), model_.kernel);
      kzz(i, j) = kzz(j, i) = v;
    }
  Eigen::MatrixXd kzzj;
  auto llt = factor_with_jitter(kzz, model_.kernel.signal_variance, kzzj);
  w_ = llt.solve(model_.var_mean);
  const Eigen::MatrixXd L = model_.var_chol.triangularView<Eigen::Lower>();
  const Eigen::MatrixXd S = L * L.transpose();
  const Eigen::MatrixXd pmat = llt.solve(Eigen::MatrixXd::Identity(u, u));
  q_ = pmat - pmat * S * pmat;
  q_ = 0.5 * (q_ + q_.transpose()).eval();
}

std::pair<double, double> SvgpSnapshot::predict_one(const Vec2& query, bool observation_noise) const {
  const int u = model_.num_inducing();
  Eigen::VectorXd k(u);
  for (int i = 0; i < u; ++i) k[i] = matern52(query, model_.inducing.row(i), model_.kernel);
  const double mean = k.dot(w_) + model_.mean_offset;
  double var = model_.kernel.signal_variance - k.dot(q_ * k);
  if (observation_noise) var += model_.noise_variance;
  return {mean, std::max(0.0, var)};
}

double SvgpSnapshot::predict_variance_unclamped(const Vec2& query) const {
  const int u = model_.num_inducing();
  Eigen::VectorXd k(u);
  for (int i = 0; i < u; ++i) k[i] = matern52(query, model_.inducing.row(i), model_.kernel);
  return model_.kernel.signal_variance - k.dot(q_ * k);
}

void SvgpSnapshot::predict(const std::vector<Vec2>& queries, Eigen::VectorXd& mean,
                           Eigen::VectorXd& variance, bool observation_noise) const {
  const auto n = static_cast<int>(queries.size());
  mean.resize(n);
  variance.resize(n);
  for (int i = 0; i < n; ++i) {
    auto [mu, var] = predict_one(queries[i], observation_noise);
    mean[i] = mu;
    variance[i] = var;
  }
}

void predict(const SvgpModel& model, const std::vector<Vec2>& queries, Eigen::VectorXd& mean,
             Eigen::VectorXd& variance, bool observation_noise) {
  SvgpSnapshot snap(model);
  snap.predict(queries, mean, variance, observation_noise);
}

namespace {
constexpr char kCkptMagic[] = "SVGPCKPT v1\n";

void write_doubles(std::ofstream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}
void read_doubles(std::ifstream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error("load_checkpoint: truncated file");
}
}  // namespace

void save_checkpoint(const SvgpModel& model, const Extent& extent, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  out.write(kCkptMagic, sizeof(kCkptMagic) - 1);
  const std::int64_t u = model.num_inducing();
  out.write(reinterpret_cast<const char*>(&u), sizeof(u));
  write_doubles(out, model.inducing.data(), static_cast<std::size_t>(2 * u));
  write_doubles(out, model.var_mean.data(), static_cast<std::size_t>(u));
  write_doubles(out, model.var_chol.data(), static_cast<std::size_t>(u * u));
  const double scalars[4] = {model.kernel.lengthscale, model.kernel.signal_variance,
                             model.noise_variance, model.mean_offset};
  write_doubles(out, scalars, 4);
  out.write(reinterpret_cast<const char*>(&model.beams_seen), sizeof(model.beams_seen));
  const double ext[4] = {extent.min_x, extent.min_y, extent.max_x, extent.max_y};
  write_doubles(out, ext, 4);
  if (!out) throw std::runtime_error("save_checkpoint: write failed for " + path);
}

std::pair<SvgpModel, Extent> load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  char magic[sizeof(kCkptMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCkptMagic, sizeof(magic)) != 0)
    throw std::runtime_error("load_checkpoint: bad magic in " + path);
  std::int64_t u = 0;
  in.read(reinterpret_cast<char*>(&u), sizeof(u));
  if (!in || u < 1 || u > (1 << 20)) throw std::runtime_error("load_checkpoint: bad inducing count");
  SvgpModel model;
  model.inducing.resize(u, 2);
  model.var_mean.resize(u);
  model.var_chol.resize(u, u);
  read_doubles(in, model.inducing.data(), static_cast<std::size_t>(2 * u));
  read_doubles(in, model.var_mean.data(), static_cast<std::size_t>(u));
  read_doubles(in, model.var_chol.data(), static_cast<std::size_t>(u * u));
  double scalars[4];
  read_doubles(in, scalars, 4);
  model.kernel.lengthscale = scalars[0];
  model.kernel.signal_variance = scalars[1];
  model.noise_variance = scalars[2];
  model.mean_offset = scalars[3];
  in.read(reinterpret_cast<char*>(&model.beams_seen), sizeof(model.beams_seen));
  double ext[4];
  read_doubles(in, ext, 4);
  if (!in) throw std::runtime_error("load_checkpoint: truncated file");
  return {std::move(model), Extent{ext[0], ext[1], ext[2], ext[3]}};
}

}  // namespace survey
