#include "survey/planner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace survey {

namespace {

Vec2 disc_point(const Vec2& center, double radius, Rng& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double r = radius * std::sqrt(u01(rng));
  const double phi = 2.0 * kPi * u01(rng);
  return center + Vec2{r * std::cos(phi), r * std::sin(phi)};
}

Vec2 sample_disc_extent(const Vec2& center, double radius, const Extent& extent, Rng& rng) {
  for (int i = 0; i < 64; ++i) {
    const Vec2 p = disc_point(center, radius, rng);
    if (extent.contains(p)) return p;
  }
  return extent.clamp(disc_point(center, radius, rng));
}

// Approximate projection into disc(center, radius) intersected with the extent.
Vec2 project_feasible(Vec2 p, const Vec2& center, double radius, const Extent& extent) {
  for (int i = 0; i < 4; ++i) {
    p = extent.clamp(p);
    const Vec2 d = p - center;
    const double n = d.norm();
    if (n > radius) p = center + d * (radius / n);
  }
  return extent.clamp(p);
}

double now_seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

const char* to_string(PlanTag tag) {
  switch (tag) {
    case PlanTag::nonmyopic: return "nonmyopic";
    case PlanTag::myopic_fallback: return "myopic_fallback";
    default: return "random_fallback";
  }
}

double ucb(double mu, double sigma, double beta) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("ucb: sigma must be >= 0");
  return mu + std::sqrt(beta) * sigma;
}

double qucb(const Eigen::VectorXd& mus, const Eigen::VectorXd& sigmas, double beta, int n_samples,
            Rng& rng) {
  if (mus.size() != sigmas.size() || mus.size() < 1)
    throw std::invalid_argument("qucb: mus/sigmas size mismatch");
  if (n_samples < 1) throw std::invalid_argument("qucb: n_samples must be >= 1");
  if ((sigmas.array() < 0.0).any()) throw std::invalid_argument("qucb: sigmas must be >= 0");
  const auto q = static_cast<int>(mus.size());
  const double scale = std::sqrt(beta * kPi / 2.0);
  std::normal_distribution<double> n01(0.0, 1.0);
  double acc = 0.0;
  for (int n = 0; n < n_samples; ++n) {
    double best = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < q; ++j)
      best = std::max(best, mus[j] + scale * sigmas[j] * std::abs(n01(rng)));
    acc += best;
  }
  return acc / n_samples;
}

CandidateBatch optimize_q_candidates(const SvgpSnapshot& snap, const Vec2& center,
                                     const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                                     int q_override) {
  cfg.validate();
  const int q = q_override > 0 ? q_override : cfg.q;
  const double radius = cfg.horizon_radius;
  if ((extent.clamp(center) - center).norm() > radius)
    throw std::invalid_argument("optimize_q_candidates: horizon disc does not reach the extent");

  const double sigma_f = std::sqrt(snap.model().kernel.signal_variance);
  const double scale = std::sqrt(cfg.beta * kPi / 2.0);

  // Common random numbers: one fixed draw matrix per call keeps the
  // acquisition deterministic and smooth during the ascent.
  Eigen::MatrixXd abs_draws(cfg.n_mc_qucb, q);
  {
    std::normal_distribution<double> n01(0.0, 1.0);
    for (int n = 0; n < cfg.n_mc_qucb; ++n)
      for (int j = 0; j < q; ++j) abs_draws(n, j) = std::abs(n01(rng));
  }

  auto evaluate = [&](const std::vector<Vec2>& pts) {
    Eigen::VectorXd mus(q), devs(q);
    for (int j = 0; j < q; ++j) {
      auto [mu, var] = snap.predict_one(pts[j]);
      mus[j] = mu;
      devs[j] = scale * std::sqrt(var);
    }
    double acc = 0.0;
    for (int n = 0; n < cfg.n_mc_qucb; ++n) {
      double best = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < q; ++j) best = std::max(best, mus[j] + devs[j] * abs_draws(n, j));
      acc += best;
    }
    return acc / cfg.n_mc_qucb;
  };

  std::vector<std::vector<Vec2>> starts;

  // Coarse single-point UCB grid: seeds the probe start and later serves as
  // the alternate pool when batch slots collapse onto one maximum.
  std::vector<std::pair<double, Vec2>> scored;
  {
    const int g = 9;
    for (int iy = 0; iy < g; ++iy)
      for (int ix = 0; ix < g; ++ix) {
        Vec2 p = center + Vec2{(-1.0 + 2.0 * (ix + 0.5) / g) * radius,
                               (-1.0 + 2.0 * (iy + 0.5) / g) * radius};
        if ((p - center).norm() > radius || !extent.contains(p)) continue;
        auto [mu, var] = snap.predict_one(p);
        scored.emplace_back(ucb(mu, std::sqrt(var), cfg.beta), p);
      }
    std::sort(scored.begin(), scored.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    // seed distinct local maxima: a greedy pick with a separation floor keeps
    // the batch from collapsing onto the single best cell
    std::vector<Vec2> probe;
    const double min_sep = radius / 3.0;
    for (const auto& [val, p] : scored) {
      if (static_cast<int>(probe.size()) >= q) break;
      bool close = false;
      for (const auto& taken : probe)
        if ((p - taken).norm() < min_sep) {
          close = true;
          break;
        }
      if (!close) probe.push_back(p);
    }
    while (static_cast<int>(probe.size()) < q)
      probe.push_back(project_feasible(sample_disc_extent(center, radius, extent, rng), center,
                                       radius, extent));
    starts.push_back(std::move(probe));
  }

  // Latin hypercube over the remaining starts: one stratified value per
  // (point, coordinate) dimension, mapped to area-uniform disc coordinates.
  const int n_lhs = std::max(0, cfg.restarts - 1);
  if (n_lhs > 0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const int dims = 2 * q;
    std::vector<std::vector<int>> perm(dims, std::vector<int>(n_lhs));
    for (int d = 0; d < dims; ++d) {
      std::iota(perm[d].begin(), perm[d].end(), 0);
      std::shuffle(perm[d].begin(), perm[d].end(), rng);
    }
    for (int s = 0; s < n_lhs; ++s) {
      std::vector<Vec2> pts(q);
      for (int j = 0; j < q; ++j) {
        const double a = (perm[2 * j][s] + u01(rng)) / n_lhs;
        const double b = (perm[2 * j + 1][s] + u01(rng)) / n_lhs;
        const double r = radius * std::sqrt(a);
        const double phi = 2.0 * kPi * b;
        pts[j] = project_feasible(center + Vec2{r * std::cos(phi), r * std::sin(phi)}, center,
                                  radius, extent);
      }
      starts.push_back(std::move(pts));
    }
  }

  CandidateBatch best;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  const double fd_h = 0.25;

  for (auto& pts : starts) {
    for (auto& p : pts) p = project_feasible(p, center, radius, extent);
    double f = evaluate(pts);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    double step = radius / 8.0;
    for (int iter = 0; iter < 60 && step > 0.05; ++iter) {
      // numerical gradient of the projected objective
      Eigen::VectorXd grad(2 * q);
      for (int j = 0; j < q; ++j)
        for (int d = 0; d < 2; ++d) {
          auto plus = pts, minus = pts;
          plus[j][d] += fd_h;
          minus[j][d] -= fd_h;
          plus[j] = project_feasible(plus[j], center, radius, extent);
          minus[j] = project_feasible(minus[j], center, radius, extent);
          grad[2 * j + d] = (evaluate(plus) - evaluate(minus)) / (2.0 * fd_h);
        }
      const double gn = grad.norm();
      if (gn < 1e-300) break;
      auto cand = pts;
      for (int j = 0; j < q; ++j) {
        cand[j].x() += step * grad[2 * j] / gn;
        cand[j].y() += step * grad[2 * j + 1] / gn;
        cand[j] = project_feasible(cand[j], center, radius, extent);
      }
      const double fc = evaluate(cand);
      lo = std::min(lo, fc);
      hi = std::max(hi, fc);
      if (fc > f) {
        pts = cand;
        f = fc;
        step *= 1.4;
      } else {
        step *= 0.5;
      }
    }
    if (f > best.value) {
      best.value = f;
      best.points = pts;
    }
  }

  // The diagonal batch acquisition rewards stacking draws on one maximum;
  // the contract wants q distinct viewpoints. Collapsed slots are refilled
  // with the best-scoring sufficiently-separated probe cells.
  const double dedupe_sep = std::max(2.0, radius / 6.0);
  for (std::size_t j = 1; j < best.points.size(); ++j) {
    bool dup = false;
    for (std::size_t i = 0; i < j; ++i)
      if ((best.points[j] - best.points[i]).norm() < dedupe_sep) {
        dup = true;
        break;
      }
    if (!dup) continue;
    bool replaced = false;
    for (const auto& [val, p] : scored) {
      bool clear = true;
      for (std::size_t i = 0; i < best.points.size(); ++i)
        if (i != j && (p - best.points[i]).norm() < dedupe_sep) {
          clear = false;
          break;
        }
      if (clear) {
        best.points[j] = p;
        replaced = true;
        break;
      }
    }
    for (int tries = 0; !replaced && tries < 32; ++tries) {
      const Vec2 p = sample_disc_extent(center, radius, extent, rng);
      bool clear = true;
      for (std::size_t i = 0; i < best.points.size(); ++i)
        if (i != j && (p - best.points[i]).norm() < dedupe_sep) {
          clear = false;
          break;
        }
      if (clear) {
        best.points[j] = p;
        replaced = true;
      }
    }
  }
  if (!best.points.empty()) best.value = evaluate(best.points);

  best.converged = (hi - lo) >= cfg.flatness_tol * sigma_f;
  return best;
}

double rollout_value(const SvgpSnapshot& snap, const Vec2& viewpoint, const Extent& extent,
                     const PlannerConfig& cfg, Rng& rng) {
  if (cfg.rollout_samples < 1) throw std::invalid_argument("rollout_value: need samples >= 1");
  const double rr = cfg.effective_rollout_radius();
  double acc = 0.0;
  for (int i = 0; i < cfg.rollout_samples; ++i) {
    const Vec2 p = extent.clamp(disc_point(viewpoint, rr, rng));
    auto [mu, var] = snap.predict_one(p);
    (void)mu;
    acc += std::sqrt(var);
  }
  return acc / cfg.rollout_samples;
}

int select_child(const TreeNode& node, double uct_c) {
  if (node.children.empty()) throw std::invalid_argument("select_child: node has no children");
  for (std::size_t i = 0; i < node.children.size(); ++i)
    if (node.children[i]->visits == 0) return static_cast<int>(i);
  const double ln_n = std::log(static_cast<double>(std::max(node.visits, 1)));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    const TreeNode& c = *node.children[i];
    const double score = c.value + uct_c * std::sqrt(ln_n / c.visits);
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

void backprop_max(const std::vector<TreeNode*>& path_root_to_leaf, double leaf_return,
                  double gamma) {
  if (path_root_to_leaf.empty()) throw std::invalid_argument("backprop_max: empty path");
  if (!std::isfinite(leaf_return)) throw std::invalid_argument("backprop_max: non-finite return");
  double v = leaf_return;
  for (auto it = path_root_to_leaf.rbegin(); it != path_root_to_leaf.rend(); ++it) {
    TreeNode* node = *it;
    v = node->reward + gamma * v;
    node->value = std::max(node->value, v);
    node->visits += 1;
  }
}

std::shared_ptr<const SvgpSnapshot> condition_on_leg(const SvgpSnapshot& parent, const Pose& from,
                                                     const Pose& to, const PlannerConfig& cfg,
                                                     const TrainConfig& tcfg, Rng& rng) {
  const DubinsPath leg = dubins_shortest(from, to, cfg.turn_radius);
  const auto poses = sample_path(leg, std::max(0.5, cfg.fantasy_spacing));
  TrainBuffer buffer(std::max<std::size_t>(poses.size(), 1));
  const double sn2 = parent.model().noise_variance;
  for (const auto& p : poses) {
    auto [mu, var] = parent.predict_one(p.position());
    BeamSample b;
    b.input = p.position();
    b.target = mu;
    b.omega = (var + sn2) * Mat2::Identity();
    buffer.push(b);
  }
  TrainConfig ft = tcfg;
  ft.minibatch = std::min<int>(ft.minibatch, static_cast<int>(buffer.size()));
  SvgpTrainer trainer(parent.model(), ft);
  trainer.add_beams_observed(buffer.size());
  for (int s = 0; s < cfg.fantasy_steps; ++s) trainer.train_step(buffer, rng);
  return std::make_shared<SvgpSnapshot>(trainer.model());
}

bool expand_node(TreeNode& node, const TreeNode* parent, const Extent& extent,
                 const PlannerConfig& cfg, const TrainConfig& tcfg, Rng& rng,
                 int* models_trained) {
  if (node.depth >= cfg.d_max || !node.children.empty()) return false;
  if (!node.model_ref) {
    if (!parent || !parent->model_ref)
      throw std::logic_error("expand_node: no parent snapshot to condition from");
    if (cfg.fantasy_steps <= 0) {
      node.model_ref = parent->model_ref;
    } else {
      const Pose from{parent->viewpoint.x(), parent->viewpoint.y(), parent->approach_theta};
      const Pose to{node.viewpoint.x(), node.viewpoint.y(), node.approach_theta};
      node.model_ref = condition_on_leg(*parent->model_ref, from, to, cfg, tcfg, rng);
      if (models_trained) ++(*models_trained);
    }
  }
  const CandidateBatch batch =
      optimize_q_candidates(*node.model_ref, node.viewpoint, extent, cfg, rng);
  if (!batch.converged) return false;
  for (const Vec2& p : batch.points) {
    auto child = std::make_unique<TreeNode>();
    child->viewpoint = p;
    const Vec2 d = p - node.viewpoint;
    child->approach_theta = d.norm() > 1e-9 ? std::atan2(d.y(), d.x()) : node.approach_theta;
    child->depth = node.depth + 1;
    auto [mu, var] = node.model_ref->predict_one(p);
    child->reward = ucb(mu, std::sqrt(var), cfg.beta);
    node.children.push_back(std::move(child));
  }
  // unvisited children are explored in insertion order: best reward first
  std::sort(node.children.begin(), node.children.end(),
            [](const auto& a, const auto& b) { return a->reward > b->reward; });
  return true;
}

TreeSearchResult tree_search(std::shared_ptr<const SvgpSnapshot> root_model,
                             const PoseBelief& belief, const Extent& extent,
                             const PlannerConfig& cfg, const TrainConfig& tcfg, Rng& rng,
                             const PlanBudget& budget) {
  cfg.validate();
  if (!root_model) throw std::invalid_argument("tree_search: null snapshot");

  TreeSearchResult result;
  TreeNode root;
  root.viewpoint = extent.clamp(belief.mean.position());
  root.approach_theta = belief.mean.theta;
  root.model_ref = root_model;
  root.visits = 1;  // the root is never rolled out, only expanded
  root.value = 0.0;

  int completed_expansions = 0;
  for (int iter = 0; iter < budget.tree_iterations; ++iter) {
    if (budget.expired()) break;
    result.iterations = iter + 1;

    TreeNode* node = &root;
    std::vector<TreeNode*> path{&root};
    while (!node->children.empty()) {
      node = node->children[select_child(*node, cfg.uct_c)].get();
      path.push_back(node);
    }
    TreeNode* parent = path.size() >= 2 ? path[path.size() - 2] : nullptr;

    if (node->visits > 0 && node->depth < cfg.d_max && !node->dead_end) {
      if (expand_node(*node, parent, extent, cfg, tcfg, rng, &result.models_trained)) {
        ++completed_expansions;
        TreeNode* child = node->children[select_child(*node, cfg.uct_c)].get();
        path.push_back(child);
        const double ret = rollout_value(*node->model_ref, child->viewpoint, extent, cfg, rng);
        backprop_max(path, ret, cfg.gamma);
        continue;
      }
      node->dead_end = true;
      if (!parent) break;  // root acquisition landscape flat: nothing to search
    }
    // Frontier or terminal leaf: rollout from the parent snapshot.
    const SvgpSnapshot& eval_model =
        parent && parent->model_ref ? *parent->model_ref : *root_model;
    const double ret = rollout_value(eval_model, node->viewpoint, extent, cfg, rng);
    backprop_max(path, ret, cfg.gamma);
  }

  if (completed_expansions == 0 || root.children.empty()) {
    result.converged = false;
    return result;
  }
  int best = 0;
  for (std::size_t i = 1; i < root.children.size(); ++i) {
    const TreeNode& c = *root.children[i];
    const TreeNode& b = *root.children[best];
    if (c.value > b.value || (c.value == b.value && c.visits > b.visits))
      best = static_cast<int>(i);
  }
  result.converged = true;
  result.viewpoint = root.children[best]->viewpoint;
  result.value = root.children[best]->value;
  return result;
}

double path_value(const SvgpSnapshot& snap, const DubinsPath& path, double depth_nominal,
                  int n_samples, const PlannerConfig& cfg, const Extent& extent, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("path_value: n_samples must be >= 1");
  const double len = path.length();
  if (len <= 0.0) return 0.0;
  const double width = swath_width(depth_nominal, cfg.swath_opening);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double acc = 0.0;
  for (int i = 0; i < n_samples; ++i) {
    const double s = u01(rng) * len;
    const double off = (u01(rng) - 0.5) * width;
    const Pose p = path.pose_at(s);
    const Vec2 across{-std::sin(p.theta), std::cos(p.theta)};
    const Vec2 pos = extent.clamp(p.position() + off * across);
    auto [mu, var] = snap.predict_one(pos);
    acc += ucb(mu, std::sqrt(var), cfg.beta);
  }
  return acc / n_samples * (len * width);
}

HeadingSurrogate::HeadingSurrogate(double lengthscale_chord, double signal_variance,
                                   double noise_variance)
    : noise_(noise_variance) {
  kp_.lengthscale = lengthscale_chord;
  kp_.signal_variance = signal_variance;
  kp_.validate();
}

double HeadingSurrogate::kernel(double t1, double t2) const {
  const Vec2 e1{std::cos(t1), std::sin(t1)};
  const Vec2 e2{std::cos(t2), std::sin(t2)};
  return matern52(e1, e2, kp_);
}

void HeadingSurrogate::add(double theta, double value) {
  const int n = size();
  if (n >= kMaxObservations) throw std::runtime_error("HeadingSurrogate: observation cap reached");
  if (!offset_set_) {
    offset_ = value;
    offset_set_ = true;
  }
  const double kself = kernel(theta, theta) + noise_;
  if (n == 0) {
    chol_.resize(1, 1);
    chol_(0, 0) = std::sqrt(kself);
  } else {
    Eigen::VectorXd knew(n);
    for (int i = 0; i < n; ++i) knew[i] = kernel(theta, thetas_[i]);
    const Eigen::VectorXd l =
        chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solve(knew);
    const double d2 = kself - l.squaredNorm();
    chol_.conservativeResize(n + 1, n + 1);
    chol_.row(n).head(n) = l.transpose();
    chol_.col(n).head(n).setZero();
    chol_(n, n) = std::sqrt(std::max(d2, 1e-12 * kself));
  }
  thetas_.push_back(theta);
  values_.push_back(value);
  Eigen::VectorXd centered(n + 1);
  for (int i = 0; i <= n; ++i) centered[i] = values_[i] - offset_;
  alpha_ = chol_.triangularView<Eigen::Lower>().solve(centered);
  chol_.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
}

std::pair<double, double> HeadingSurrogate::predict(double theta) const {
  const int n = size();
  if (n == 0) return {offset_, std::sqrt(kp_.signal_variance)};
  Eigen::VectorXd k(n);
  for (int i = 0; i < n; ++i) k[i] = kernel(theta, thetas_[i]);
  const double mean = offset_ + k.dot(alpha_);
  const Eigen::VectorXd l = chol_.triangularView<Eigen::Lower>().solve(k);
  const double var = std::max(0.0, kernel(theta, theta) - l.squaredNorm());
  return {mean, std::sqrt(var)};
}

HeadingChoice optimize_heading(const SvgpSnapshot& snap, const Pose& from, const Vec2& target,
                               const PlannerConfig& cfg, const Extent& extent, Rng& rng,
                               const PlanBudget& budget) {
  if (!extent.contains(target, 1e-9))
    throw std::invalid_argument("optimize_heading: target outside extent");
  if ((target - from.position()).norm() < 1e-9)
    throw std::invalid_argument("optimize_heading: target equals current position");

  auto evaluate = [&](double theta) {
    const DubinsPath path =
        dubins_shortest(from, Pose::make(target.x(), target.y(), theta), cfg.turn_radius);
    const double v =
        path_value(snap, path, cfg.nominal_depth, cfg.path_value_samples, cfg, extent, rng);
    return std::make_pair(path, v);
  };

  HeadingChoice best;
  best.value = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<double, double>> seeds_vals;
  std::vector<std::pair<double, DubinsPath>> evaluated;  // theta, path
  const double seed_thetas[4] = {-kPi / 2.0, 0.0, kPi / 2.0, kPi};
  for (double th : seed_thetas) {
    auto [path, v] = evaluate(th);
    seeds_vals.emplace_back(th, v);
    evaluated.emplace_back(th, path);
    ++best.evaluations;
    if (v > best.value) {
      best.value = v;
      best.theta = th;
      best.path = path;
    }
  }

  // Kernel scale from the seed spread; lengthscale in chord units (domain wraps).
  double mean_v = 0.0;
  for (auto& [th, v] : seeds_vals) mean_v += v;
  mean_v /= seeds_vals.size();
  double var_v = 0.0;
  for (auto& [th, v] : seeds_vals) var_v += (v - mean_v) * (v - mean_v);
  var_v = var_v / seeds_vals.size() + 1e-12 + 1e-6 * mean_v * mean_v;
  HeadingSurrogate surrogate(0.6, var_v, 1e-3 * var_v);
  for (auto& [th, v] : seeds_vals) surrogate.add(th, v);

  std::vector<double> seen;
  for (auto& [th, v] : seeds_vals) seen.push_back(th);

  const int max_extra = std::min(cfg.heading_max_evals, HeadingSurrogate::kMaxObservations - 4);
  const double min_sep = 0.75 * kPi / 180.0;
  for (int e = 0; e < max_extra; ++e) {
    if (budget.expired()) break;
    double best_acq = -std::numeric_limits<double>::infinity();
    double next_theta = 0.0;
    bool found = false;
    for (int g = 0; g < 360; ++g) {
      const double th = -kPi + 2.0 * kPi * (g + 1) / 360.0;
      bool near_existing = false;
      for (double s : seen) {
        if (std::abs(wrap_angle(th - s)) < min_sep) {
          near_existing = true;
          break;
        }
      }
      if (near_existing) continue;
      auto [mu, sd] = surrogate.predict(th);
      const double acq = ucb(mu, sd, cfg.beta);
      if (acq > best_acq) {
        best_acq = acq;
        next_theta = th;
        found = true;
      }
    }
    if (!found) break;
    seen.push_back(next_theta);
    auto [path, v] = evaluate(next_theta);
    evaluated.emplace_back(next_theta, path);
    ++best.evaluations;
    if (v > best.value) {
      best.value = v;
      best.theta = next_theta;
      best.path = path;
    }
    surrogate.add(next_theta, v);
  }

  // Recommend by the surrogate mean over the evaluated headings: individual
  // evaluations are Monte Carlo estimates and the GP averages their noise.
  double best_mu = -std::numeric_limits<double>::infinity();
  for (const auto& [th, path] : evaluated) {
    const double mu = surrogate.predict(th).first;
    if (mu > best_mu) {
      best_mu = mu;
      best.theta = th;
      best.path = path;
      best.value = mu;
    }
  }
  return best;
}

namespace {

PlanResult finish_with_heading(std::shared_ptr<const SvgpSnapshot> snap, const Pose& from,
                               const Vec2& viewpoint, const Extent& extent,
                               const PlannerConfig& cfg, Rng& rng, const PlanBudget& budget,
                               PlanTag tag) {
  PlanResult out;
  out.viewpoint = viewpoint;
  out.tag = tag;
  if (budget.allow_heading && !budget.expired()) {
    const HeadingChoice hc = optimize_heading(*snap, from, viewpoint, cfg, extent, rng, budget);
    out.path = hc.path;
    out.heading = hc.theta;
  } else {
    const Vec2 d = viewpoint - from.position();
    const double theta = std::atan2(d.y(), d.x());
    out.path = dubins_shortest(from, Pose::make(viewpoint.x(), viewpoint.y(), theta),
                               cfg.turn_radius);
    out.heading = wrap_angle(theta);
  }
  return out;
}

PlanResult plan_random(const Pose& from, const Extent& extent, const PlannerConfig& cfg,
                       Rng& rng) {
  Vec2 vp = sample_disc_extent(from.position(), cfg.horizon_radius, extent, rng);
  if ((vp - from.position()).norm() < 1e-6)
    vp = extent.clamp(from.position() +
                      Vec2{2.0 * cfg.turn_radius, 0.0});  // degenerate draw: nudge forward
  if ((vp - from.position()).norm() < 1e-6) vp = extent.center();
  const Vec2 d = vp - from.position();
  const double theta = std::atan2(d.y(), d.x());
  PlanResult out;
  out.tag = PlanTag::random_fallback;
  out.viewpoint = vp;
  out.heading = wrap_angle(theta);
  out.path = dubins_shortest(from, Pose::make(vp.x(), vp.y(), theta), cfg.turn_radius);
  return out;
}

// A viewpoint (nearly) under the vehicle cannot anchor a Dubins leg; survey
// it with a short straight overpass instead of looping back onto it.
Vec2 overpass_target(const Pose& from, const Vec2& vp, const Extent& extent,
                     const PlannerConfig& cfg) {
  const double hop = 2.5 * cfg.turn_radius;
  const Vec2 ahead{from.x + hop * std::cos(from.theta), from.y + hop * std::sin(from.theta)};
  if (extent.contains(ahead)) return ahead;
  const Vec2 behind{from.x - hop * std::cos(from.theta), from.y - hop * std::sin(from.theta)};
  if (extent.contains(behind)) return behind;
  return extent.clamp(ahead);
}

}  // namespace

PlanResult plan_myopic(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                       const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                       const PlanBudget& budget, bool strict_flatness) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  const Pose from = belief.mean;
  if (!budget.expired()) {
    bool usable = false;
    Vec2 vp = Vec2::Zero();
    try {
      const CandidateBatch cb = optimize_q_candidates(*snap, from.position(), extent, cfg, rng, 1);
      if (!cb.points.empty() && (cb.converged || !strict_flatness)) {
        vp = cb.points[0];
        if ((vp - from.position()).norm() <= 0.5 * cfg.turn_radius)
          vp = overpass_target(from, vp, extent, cfg);
        usable = (vp - from.position()).norm() > 1e-6;
      }
    } catch (const std::exception&) {
      usable = false;
    }
    if (usable) {
      PlanResult out =
          finish_with_heading(snap, from, vp, extent, cfg, rng, budget, PlanTag::myopic_fallback);
      out.wall_time_s = now_seconds_since(t0);
      return out;
    }
  }
  PlanResult out = plan_random(from, extent, cfg, rng);
  out.wall_time_s = now_seconds_since(t0);
  return out;
}

PlanResult plan_next(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                     const Extent& extent, const PlannerConfig& cfg, const TrainConfig& tcfg,
                     Rng& rng, const PlanBudget& budget) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  if (!snap) throw std::invalid_argument("plan_next: null snapshot");
  const Pose from = belief.mean;

  if (budget.allow_tree && budget.tree_iterations > 0 && !budget.expired()) {
    const TreeSearchResult ts = tree_search(snap, belief, extent, cfg, tcfg, rng, budget);
    Vec2 vp = ts.viewpoint;
    if (ts.converged && (vp - from.position()).norm() <= 0.5 * cfg.turn_radius)
      vp = overpass_target(from, vp, extent, cfg);
    if (ts.converged && (vp - from.position()).norm() > 1e-6) {
      PlanResult out =
          finish_with_heading(snap, from, vp, extent, cfg, rng, budget, PlanTag::nonmyopic);
      out.tree_iterations = ts.iterations;
      out.models_trained = ts.models_trained;
      out.wall_time_s = now_seconds_since(t0);
      return out;
    }
    if (budget.allow_myopic && !budget.expired()) {
      PlanResult out = plan_myopic(snap, belief, extent, cfg, rng, budget, false);
      out.tree_iterations = ts.iterations;
      out.models_trained = ts.models_trained;
      out.wall_time_s = now_seconds_since(t0);
      return out;
    }
    PlanResult out = plan_random(from, extent, cfg, rng);
    out.tree_iterations = ts.iterations;
    out.models_trained = ts.models_trained;
    out.wall_time_s = now_seconds_since(t0);
    return out;
  }

  if (budget.allow_myopic && !budget.expired()) {
    PlanResult out = plan_myopic(snap, belief, extent, cfg, rng, budget, false);
    out.wall_time_s = now_seconds_since(t0);
    return out;
  }
  PlanResult out = plan_random(from, extent, cfg, rng);
  out.wall_time_s = now_seconds_since(t0);
  return out;
}

}  // namespace survey
