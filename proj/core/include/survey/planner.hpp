#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <vector>

#include "survey/sensor.hpp"
#include "survey/svgp.hpp"
#include "survey/vehicle.hpp"

namespace survey {

struct PlannerConfig {
  double beta = 100.0;          // UCB exploration weight
  double uct_c = 12.0;          // UCT exploration constant
  double gamma = 0.9;           // discount
  int d_max = 2;                // max tree depth
  int q = 3;                    // branching factor
  int n_mc_qucb = 512;          // MC samples for the batch acquisition
  double horizon_radius = 60.0; // viewpoint search disc, m
  int rollout_samples = 64;
  double rollout_radius = 0.0;  // <= 0: horizon_radius / 2
  double replan_threshold = 30.0;  // m of remaining path triggering a replan
  double time_budget = 15.0;       // s per planning cycle (real-time mode)
  int restarts = 8;                // multi-start count for candidate optimization
  int tree_iterations = 24;        // synchronous-mode iteration budget
  int fantasy_steps = 50;          // fine-tune steps when conditioning a child model
  double fantasy_spacing = 5.0;    // m between fantasized beams along a leg
  int heading_max_evals = 12;      // heading BO evaluations after the 4 seeds
  int path_value_samples = 1024;   // MC samples for the swath value integral
  double nominal_depth = 20.0;     // m, swath geometry for layer 2
  double swath_opening = kPi / 2.0;
  double turn_radius = 10.0;       // m, synced from the vehicle config
  double flatness_tol = 1e-9;      // * signal std: acquisition-landscape floor

  double effective_rollout_radius() const {
    return rollout_radius > 0.0 ? rollout_radius : horizon_radius / 2.0;
  }
  void validate() const {
    if (q < 1) throw std::invalid_argument("PlannerConfig: q must be >= 1");
    if (d_max < 0) throw std::invalid_argument("PlannerConfig: d_max must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("PlannerConfig: gamma in (0, 1]");
    if (!(beta >= 0.0)) throw std::invalid_argument("PlannerConfig: beta must be >= 0");
    if (!(horizon_radius > turn_radius))
      throw std::invalid_argument("PlannerConfig: horizon_radius must exceed turn_radius");
  }
};

// Resource envelope for one planning cycle. Synchronous runs bound the tree by
// iterations; real-time runs also set a wall deadline checked between
// iterations (anytime contract).
struct PlanBudget {
  int tree_iterations = 32;
  bool allow_tree = true;
  bool allow_myopic = true;
  bool allow_heading = true;
  std::optional<std::chrono::steady_clock::time_point> deadline;

  bool expired() const {
    return deadline && std::chrono::steady_clock::now() >= *deadline;
  }
  static PlanBudget exhausted() { return {0, false, false, false, std::nullopt}; }
  static PlanBudget iterations(int n) { return {n, true, true, true, std::nullopt}; }
};

// Flat-UCT node. The model reference is the surrogate snapshot this node's
// subtree is evaluated on; it is materialized lazily on expansion.
struct TreeNode {
  Vec2 viewpoint = Vec2::Zero();
  double approach_theta = 0.0;   // arrival heading used for fantasy legs
  double reward = 0.0;
  double value = -std::numeric_limits<double>::infinity();
  int visits = 0;
  int depth = 0;
  bool dead_end = false;
  std::shared_ptr<const SvgpSnapshot> model_ref;  // null until expanded
  std::vector<std::unique_ptr<TreeNode>> children;
};

// Eq.-style acquisition: mu + sqrt(beta) * sigma.
double ucb(double mu, double sigma, double beta);

// Reparameterized batch acquisition:
//   (1/N) sum_n max_j (mu_j + |L a_n|_j),  a_n ~ N(0, I),  L L^T = diag(sigma^2) beta pi/2.
double qucb(const Eigen::VectorXd& mus, const Eigen::VectorXd& sigmas, double beta, int n_samples,
            Rng& rng);

struct CandidateBatch {
  std::vector<Vec2> points;
  double value = -std::numeric_limits<double>::infinity();
  bool converged = false;  // false: acquisition landscape flat within tolerance
};

// Jointly optimizes q viewpoints inside the horizon disc (clipped to the
// extent) to maximize the batch acquisition under the snapshot. Multi-start
// ascent from Latin-hypercube starts plus one coarse greedy probe.
CandidateBatch optimize_q_candidates(const SvgpSnapshot& snap, const Vec2& center,
                                     const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                                     int q_override = 0);

// Mean predictive standard deviation over points uniform in the rollout disc.
double rollout_value(const SvgpSnapshot& snap, const Vec2& viewpoint, const Extent& extent,
                     const PlannerConfig& cfg, Rng& rng);

// Flat-UCT selection: unvisited children first (insertion order), then
// argmax of value + c sqrt(ln(parent visits) / child visits).
int select_child(const TreeNode& node, double uct_c);

// Max-backup along a root-to-leaf path: v <- reward + gamma * v at each level,
// node values only ever increase; visits increment by one.
void backprop_max(const std::vector<TreeNode*>& path_root_to_leaf, double leaf_return,
                  double gamma);

// Copy of the parent posterior fine-tuned on beams fantasized along the leg:
// predicted means as targets, predicted variance + noise as input covariance.
std::shared_ptr<const SvgpSnapshot> condition_on_leg(const SvgpSnapshot& parent, const Pose& from,
                                                     const Pose& to, const PlannerConfig& cfg,
                                                     const TrainConfig& tcfg, Rng& rng);

// Expansion: materialize the node's surrogate (conditioning on the leg from
// its parent), run the batch acquisition around its viewpoint, attach q
// children ordered by decreasing UCB reward under that same surrogate.
// Returns false when the node refuses (at depth, already expanded) or the
// acquisition landscape is flat (propagates BO non-convergence).
bool expand_node(TreeNode& node, const TreeNode* parent, const Extent& extent,
                 const PlannerConfig& cfg, const TrainConfig& tcfg, Rng& rng,
                 int* models_trained = nullptr);

struct TreeSearchResult {
  bool converged = false;
  Vec2 viewpoint = Vec2::Zero();
  double value = 0.0;
  int iterations = 0;
  int models_trained = 0;
};

// Anytime non-myopic search; returns the best root child once at least one
// expansion completed, otherwise signals non-convergence.
TreeSearchResult tree_search(std::shared_ptr<const SvgpSnapshot> root_model,
                             const PoseBelief& belief, const Extent& extent,
                             const PlannerConfig& cfg, const TrainConfig& tcfg, Rng& rng,
                             const PlanBudget& budget);

// MC approximation of the swath value integral along a path: mean UCB over
// the insonified region times its area.
double path_value(const SvgpSnapshot& snap, const DubinsPath& path, double depth_nominal,
                  int n_samples, const PlannerConfig& cfg, const Extent& extent, Rng& rng);

// Exact-GP Bayesian optimization state over arrival headings. Observations
// live on the circle; the kernel acts on the chordal embedding so the domain
// wraps. Appends update the Cholesky factor incrementally.
class HeadingSurrogate {
 public:
  HeadingSurrogate(double lengthscale_chord, double signal_variance, double noise_variance);

  void add(double theta, double value);
  std::pair<double, double> predict(double theta) const;  // mean, std
  int size() const { return static_cast<int>(thetas_.size()); }
  static constexpr int kMaxObservations = 32;

 private:
  double kernel(double t1, double t2) const;
  KernelParams kp_;
  double noise_;
  double offset_ = 0.0;
  bool offset_set_ = false;
  std::vector<double> thetas_;
  std::vector<double> values_;
  Eigen::MatrixXd chol_;   // grown incrementally
  Eigen::VectorXd alpha_;  // K^-1 (v - offset)
};

struct HeadingChoice {
  double theta = 0.0;
  DubinsPath path;
  double value = 0.0;
  int evaluations = 0;
};

// Layer-2 BO over theta in (-pi, pi]: 4 seed evaluations, then UCB-driven
// evaluations on a 360-point grid against the exact-GP surrogate.
HeadingChoice optimize_heading(const SvgpSnapshot& snap, const Pose& from, const Vec2& target,
                               const PlannerConfig& cfg, const Extent& extent, Rng& rng,
                               const PlanBudget& budget = PlanBudget::iterations(1));

enum class PlanTag { nonmyopic, myopic_fallback, random_fallback };
const char* to_string(PlanTag tag);

struct PlanResult {
  DubinsPath path;
  PlanTag tag = PlanTag::random_fallback;
  Vec2 viewpoint = Vec2::Zero();
  double heading = 0.0;
  int tree_iterations = 0;
  int models_trained = 0;
  double wall_time_s = 0.0;
};

// Full fail-safe ladder: non-myopic tree search, then myopic single-candidate
// BO, then a uniform-random viewpoint with straight-in heading. Total: always
// returns a feasible path ending inside the extent.
PlanResult plan_next(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                     const Extent& extent, const PlannerConfig& cfg, const TrainConfig& tcfg,
                     Rng& rng, const PlanBudget& budget);

// Single-candidate stage shared by plan_next and the myopic baseline. With
// strict_flatness, a flat acquisition landscape falls through to the random
// tail instead of returning the best evaluated point.
PlanResult plan_myopic(std::shared_ptr<const SvgpSnapshot> snap, const PoseBelief& belief,
                       const Extent& extent, const PlannerConfig& cfg, Rng& rng,
                       const PlanBudget& budget, bool strict_flatness);

}  // namespace survey
