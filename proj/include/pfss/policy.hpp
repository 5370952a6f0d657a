#pragma once

// Graph-encoder / attention-decoder scheduling policy.
//
// Jobs are nodes of a sparse k-nearest-neighbour graph built from their
// processing-time columns. A stack of gated graph convolutions (residual node
// and edge updates, edge sigmoids gating neighbour messages) embeds the jobs.
// Decoding appends one job per step: a context of [graph mean, first job,
// previous job] attends over all job embeddings, and clipped dot-product
// logits over the unscheduled jobs give the action distribution.
//
// Weight shapes depend only on the machine count m and the width d, so one
// set of parameters serves any job count.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfss/autodiff.hpp"
#include "pfss/core.hpp"
#include "pfss/mdp.hpp"

namespace pfss {

enum class Aggregation { kMean, kSum, kMax };
enum class Normalization { kBatch, kLayer, kNone };

std::string to_string(Aggregation a);
std::string to_string(Normalization n);
Aggregation parse_aggregation(const std::string& s);
Normalization parse_normalization(const std::string& s);

struct PolicyConfig {
  int machines = 5;
  int dim = 128;
  int layers = 3;
  int heads = 8;
  double clip = 10.0;
  double rho = 0.2;  // neighbour fraction: k = max(1, floor(rho * n))
  Aggregation aggregation = Aggregation::kMean;
  Normalization normalization = Normalization::kBatch;
  bool dense_graph = false;   // aggregate over all other jobs instead of the k nearest
  bool scale_inputs = false;  // divide each instance by its largest processing time
  double bn_momentum = 0.1;
  double norm_eps = 1e-5;

  void validate() const;
  nlohmann::json to_json() const;
  static PolicyConfig from_json(const nlohmann::json& j);
};

struct NormParams {
  ad::Parameter gamma;
  ad::Parameter beta;
  Eigen::RowVectorXd running_mean;
  Eigen::RowVectorXd running_var;
};

struct LayerParams {
  ad::Parameter B, C, D, E, F;
  // Present unless normalization is kNone.
  std::optional<NormParams> node_norm;
  std::optional<NormParams> edge_norm;
};

struct PolicyParams {
  PolicyConfig config;
  ad::Parameter W_h;  // d x m
  ad::Parameter W_e;  // d x 1
  std::vector<LayerParams> layers;
  ad::Parameter mha_query;  // d x 3d
  ad::Parameter mha_key;    // d x d
  ad::Parameter mha_value;  // d x d
  ad::Parameter mha_out;    // d x d
  ad::Parameter W_Q;        // d x d
  ad::Parameter W_K;        // d x d
  ad::Parameter v1;         // 1 x d
  ad::Parameter v2;         // 1 x d

  // All weights uniform in [-1/sqrt(d), 1/sqrt(d)]; norm scales 1, shifts 0.
  static PolicyParams init(const PolicyConfig& config, uint64_t seed);

  void for_each(const std::function<void(ad::Parameter&)>& fn);
  void for_each(const std::function<void(const ad::Parameter&)>& fn) const;
  void zero_grad();
  size_t parameter_count() const;
};

// d*m + d + L*(5 d^2 + norm terms) + (3d*d + 3 d^2) + 2 d^2 + 2d.
size_t closed_form_parameter_count(const PolicyConfig& config);

struct JobGraph {
  int jobs = 0;
  int k = 0;
  std::vector<int> neighbors;     // jobs * k entries; row j lists N_j nearest first
  std::vector<double> distances;  // matching Euclidean distances

  std::span<const int> of(int job) const { return {neighbors.data() + static_cast<size_t>(job) * k, static_cast<size_t>(k)}; }
};

int neighbor_count(int jobs, double rho);
// Throws ValidationError for fewer than two jobs. Ties in distance go to the
// lower job index. `dense` connects every job to all others.
JobGraph build_graph(const Instance& inst, double rho, bool dense = false);

enum class Mode { kTrain, kEval };

struct Activations {
  JobGraph graph;
  std::vector<ad::Mat> nodes;  // h^0 .. h^L, each n x d
  std::vector<ad::Mat> edges;  // e^0 .. e^{L-1}, each (n*k) x d, row j*k + r is edge (j, N_j[r])
  Eigen::RowVectorXd graph_embedding;
};

// Single-instance forward pass of the encoder. In train mode batch
// normalization uses the statistics of this instance alone.
Activations encode(const PolicyParams& params, const Instance& inst, Mode mode = Mode::kEval);

// Context vector [h_g, h_first, h_prev] (placeholders v1, v2 at step 0).
Eigen::RowVectorXd context(const PolicyParams& params, const Activations& acts, const ScheduleState& state);

// Precomputed keys and values for step-by-step decoding of one instance.
class DecoderCache {
 public:
  DecoderCache(const PolicyParams& params, Activations acts);

  const Activations& activations() const { return acts_; }
  // Clipped logits; scheduled jobs get -infinity. Throws on an all-masked state.
  std::vector<double> logits(const ScheduleState& state) const;
  std::vector<double> probabilities(const ScheduleState& state) const;
  Eigen::RowVectorXd refined_context(const ScheduleState& state) const;

 private:
  const PolicyParams* params_;
  Activations acts_;
  ad::Mat keys_, values_, pointer_keys_;
};

std::vector<double> decode_step(const PolicyParams& params, const Activations& acts, const ScheduleState& state);

// Greedy argmax decoding (ties to the lowest job index).
Permutation rollout_greedy(const PolicyParams& params, const Instance& inst);

// Batched teacher-forced pass over complete expert sequences.
struct BcBatch {
  std::vector<const Instance*> instances;
  std::vector<const Permutation*> actions;
};

struct BcResult {
  double loss = 0.0;  // mean negative log-likelihood per decode step
  int steps = 0;
  ad::Mat logits;     // steps x max_jobs, rows in (instance, step) order
  ad::Mask allowed;
};

// Forward and (if `backward`) reverse pass; gradients are added to each
// parameter's grad. In train mode batch statistics of the whole batch are
// used and, if `update_running_stats`, folded into the running estimates.
BcResult bc_loss(PolicyParams& params, const BcBatch& batch, Mode mode, bool backward = true,
                 bool update_running_stats = false);

inline constexpr uint8_t kCheckpointVersion = 1;

struct Checkpoint {
  PolicyParams params;
  int epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace pfss
