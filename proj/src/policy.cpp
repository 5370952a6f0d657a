#include "pfss/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "pfss/container.hpp"
#include "pfss/errors.hpp"
#include "pfss/rng.hpp"

namespace pfss {

using ad::Mat;
using ad::Tape;
using ad::Var;

std::string to_string(Aggregation a) {
  switch (a) {
    case Aggregation::kMean: return "mean";
    case Aggregation::kSum: return "sum";
    case Aggregation::kMax: return "max";
  }
  return "?";
}

std::string to_string(Normalization n) {
  switch (n) {
    case Normalization::kBatch: return "batch";
    case Normalization::kLayer: return "layer";
    case Normalization::kNone: return "none";
  }
  return "?";
}

Aggregation parse_aggregation(const std::string& s) {
  if (s == "mean") return Aggregation::kMean;
  if (s == "sum") return Aggregation::kSum;
  if (s == "max") return Aggregation::kMax;
  throw ValidationError("unknown aggregation '" + s + "' (expected mean, sum or max)");
}

Normalization parse_normalization(const std::string& s) {
  if (s == "batch") return Normalization::kBatch;
  if (s == "layer") return Normalization::kLayer;
  if (s == "none") return Normalization::kNone;
  throw ValidationError("unknown normalization '" + s + "' (expected batch, layer or none)");
}

void PolicyConfig::validate() const {
  if (machines < 1) throw ValidationError("policy needs at least one machine");
  if (dim < 1 || layers < 1 || heads < 1) throw ValidationError("dim, layers and heads must be positive");
  if (dim % heads != 0) throw ValidationError("dim must be divisible by the number of heads");
  if (!(rho > 0.0 && rho <= 1.0)) throw ValidationError("neighbour fraction rho must lie in (0, 1]");
  if (!(clip > 0.0)) throw ValidationError("logit clip must be positive");
  if (!(bn_momentum > 0.0 && bn_momentum <= 1.0)) throw ValidationError("batch-norm momentum must lie in (0, 1]");
  if (!(norm_eps > 0.0)) throw ValidationError("normalization epsilon must be positive");
}

nlohmann::json PolicyConfig::to_json() const {
  return {{"machines", machines},
          {"dim", dim},
          {"layers", layers},
          {"heads", heads},
          {"clip", clip},
          {"rho", rho},
          {"aggregation", to_string(aggregation)},
          {"normalization", to_string(normalization)},
          {"dense_graph", dense_graph},
          {"scale_inputs", scale_inputs},
          {"bn_momentum", bn_momentum},
          {"norm_eps", norm_eps}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& j) {
  PolicyConfig c;
  c.machines = j.at("machines").get<int>();
  c.dim = j.at("dim").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.clip = j.at("clip").get<double>();
  c.rho = j.at("rho").get<double>();
  c.aggregation = parse_aggregation(j.at("aggregation").get<std::string>());
  c.normalization = parse_normalization(j.at("normalization").get<std::string>());
  c.dense_graph = j.value("dense_graph", false);
  c.scale_inputs = j.value("scale_inputs", false);
  c.bn_momentum = j.value("bn_momentum", 0.1);
  c.norm_eps = j.value("norm_eps", 1e-5);
  c.validate();
  return c;
}

namespace {

ad::Parameter uniform_param(std::string name, int rows, int cols, double bound, Rng& rng) {
  Mat v(rows, cols);
  for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-bound, bound);
  return ad::Parameter(std::move(name), std::move(v));
}

NormParams make_norm(const std::string& prefix, int d) {
  return NormParams{ad::Parameter(prefix + ".gamma", Mat::Ones(1, d)), ad::Parameter(prefix + ".beta", Mat::Zero(1, d)),
                    Eigen::RowVectorXd::Zero(d), Eigen::RowVectorXd::Ones(d)};
}

template <typename P, typename Fn>
void visit(P& p, Fn&& fn) {
  fn(p.W_h);
  fn(p.W_e);
  for (auto& layer : p.layers) {
    fn(layer.B);
    fn(layer.C);
    fn(layer.D);
    fn(layer.E);
    fn(layer.F);
    for (auto* norm : {&layer.node_norm, &layer.edge_norm}) {
      if (*norm) {
        fn((*norm)->gamma);
        fn((*norm)->beta);
      }
    }
  }
  fn(p.mha_query);
  fn(p.mha_key);
  fn(p.mha_value);
  fn(p.mha_out);
  fn(p.W_Q);
  fn(p.W_K);
  fn(p.v1);
  fn(p.v2);
}

}  // namespace

PolicyParams PolicyParams::init(const PolicyConfig& config, uint64_t seed) {
  config.validate();
  const int d = config.dim;
  const int m = config.machines;
  const double b = 1.0 / std::sqrt(static_cast<double>(d));
  Rng rng(seed);
  PolicyParams p;
  p.config = config;
  p.W_h = uniform_param("W_h", d, m, b, rng);
  p.W_e = uniform_param("W_e", d, 1, b, rng);
  for (int l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l) + ".";
    LayerParams layer;
    layer.B = uniform_param(pre + "B", d, d, b, rng);
    layer.C = uniform_param(pre + "C", d, d, b, rng);
    layer.D = uniform_param(pre + "D", d, d, b, rng);
    layer.E = uniform_param(pre + "E", d, d, b, rng);
    layer.F = uniform_param(pre + "F", d, d, b, rng);
    if (config.normalization != Normalization::kNone) {
      layer.node_norm = make_norm(pre + "node_norm", d);
      layer.edge_norm = make_norm(pre + "edge_norm", d);
    }
    p.layers.push_back(std::move(layer));
  }
  p.mha_query = uniform_param("mha.query", d, 3 * d, b, rng);
  p.mha_key = uniform_param("mha.key", d, d, b, rng);
  p.mha_value = uniform_param("mha.value", d, d, b, rng);
  p.mha_out = uniform_param("mha.out", d, d, b, rng);
  p.W_Q = uniform_param("W_Q", d, d, b, rng);
  p.W_K = uniform_param("W_K", d, d, b, rng);
  p.v1 = uniform_param("v1", 1, d, b, rng);
  p.v2 = uniform_param("v2", 1, d, b, rng);
  return p;
}

void PolicyParams::for_each(const std::function<void(ad::Parameter&)>& fn) { visit(*this, fn); }
void PolicyParams::for_each(const std::function<void(const ad::Parameter&)>& fn) const { visit(*this, fn); }

void PolicyParams::zero_grad() {
  for_each([](ad::Parameter& p) { p.zero_grad(); });
}

size_t PolicyParams::parameter_count() const {
  size_t n = 0;
  for_each([&n](const ad::Parameter& p) { n += static_cast<size_t>(p.value.size()); });
  return n;
}

size_t closed_form_parameter_count(const PolicyConfig& c) {
  const size_t d = static_cast<size_t>(c.dim);
  const size_t m = static_cast<size_t>(c.machines);
  const size_t norm = c.normalization == Normalization::kNone ? 0 : 2 * (2 * d);
  const size_t per_layer = 5 * d * d + norm;
  const size_t mha = 3 * d * d + 3 * d * d;
  return d * m + d + static_cast<size_t>(c.layers) * per_layer + mha + 2 * d * d + 2 * d;
}

int neighbor_count(int jobs, double rho) {
  return std::max(1, static_cast<int>(std::floor(rho * jobs + 1e-9)));
}

JobGraph build_graph(const Instance& inst, double rho, bool dense) {
  const int n = inst.jobs();
  const int m = inst.machines();
  if (n < 2) throw ValidationError("a job graph needs at least two jobs");
  if (!(rho > 0.0 && rho <= 1.0)) throw ValidationError("neighbour fraction rho must lie in (0, 1]");
  JobGraph g;
  g.jobs = n;
  g.k = dense ? n - 1 : std::min(n - 1, neighbor_count(n, rho));
  g.neighbors.reserve(static_cast<size_t>(n) * g.k);
  g.distances.reserve(static_cast<size_t>(n) * g.k);
  std::vector<std::pair<double, int>> cand;
  for (int j = 0; j < n; ++j) {
    cand.clear();
    for (int k = 0; k < n; ++k) {
      if (k == j) continue;
      double s = 0.0;
      for (int i = 0; i < m; ++i) {
        const double diff = inst.at(i, j) - inst.at(i, k);
        s += diff * diff;
      }
      cand.emplace_back(std::sqrt(s), k);
    }
    std::partial_sort(cand.begin(), cand.begin() + g.k, cand.end());
    for (int r = 0; r < g.k; ++r) {
      g.neighbors.push_back(cand[r].second);
      g.distances.push_back(cand[r].first);
    }
  }
  return g;
}

namespace {

double feature_scale(const PolicyConfig& c, const Instance& inst) {
  if (!c.scale_inputs) return 1.0;
  const auto& t = inst.times();
  const double mx = t.empty() ? 0.0 : *std::max_element(t.begin(), t.end());
  return mx > 0.0 ? 1.0 / mx : 1.0;
}

// Graph on the features the encoder actually sees.
JobGraph graph_for(const PolicyConfig& c, const Instance& inst) {
  const double s = feature_scale(c, inst);
  if (s == 1.0) return build_graph(inst, c.rho, c.dense_graph);
  std::vector<double> scaled(inst.times());
  for (double& v : scaled) v *= s;
  return build_graph(Instance(inst.machines(), inst.jobs(), std::move(scaled)), c.rho, c.dense_graph);
}

struct NormSite {
  int layer = 0;
  bool edge = false;
  ad::BatchStats stats;
  Eigen::Index rows = 0;
};

struct EncodedBatch {
  Var nodes;
  Var graph;
  std::vector<int> node_offsets;
  std::vector<JobGraph> graphs;
  std::vector<NormSite> norm_sites;  // filled in train mode with batch norm
};

void check_finite(const Mat& m, const std::string& where) {
  if (!m.allFinite()) throw NumericError("non-finite activation in " + where);
}

Var normalize(Tape& t, Var x, const std::optional<NormParams>& np, int layer, bool edge, const PolicyConfig& c,
              Mode mode, std::vector<NormSite>& sites) {
  switch (c.normalization) {
    case Normalization::kNone: return x;
    case Normalization::kLayer: return ad::layer_norm(t, x, t.param(np->gamma), t.param(np->beta), c.norm_eps);
    case Normalization::kBatch:
      if (mode == Mode::kEval)
        return ad::batch_norm_eval(t, x, t.param(np->gamma), t.param(np->beta), np->running_mean, np->running_var,
                                   c.norm_eps);
      NormSite site{layer, edge, {}, t.value(x).rows()};
      Var y = ad::batch_norm_train(t, x, t.param(np->gamma), t.param(np->beta), c.norm_eps, &site.stats);
      sites.push_back(std::move(site));
      return y;
  }
  return x;
}

EncodedBatch encode_batch(Tape& t, const PolicyParams& p, std::span<const Instance* const> insts, Mode mode,
                          Activations* capture) {
  const PolicyConfig& c = p.config;
  EncodedBatch out;
  out.node_offsets.push_back(0);
  int total_nodes = 0;
  int total_edges = 0;
  for (const Instance* inst : insts) {
    if (inst->machines() != c.machines)
      throw DataError("instance has " + std::to_string(inst->machines()) + " machines but the policy expects " +
                      std::to_string(c.machines));
    out.graphs.push_back(graph_for(c, *inst));
    total_nodes += inst->jobs();
    total_edges += inst->jobs() * out.graphs.back().k;
    out.node_offsets.push_back(total_nodes);
  }

  Mat x(total_nodes, c.machines);
  Mat dist(total_edges, 1);
  std::vector<int> src, dst, edge_offsets{0};
  src.reserve(total_edges);
  dst.reserve(total_edges);
  for (size_t b = 0; b < insts.size(); ++b) {
    const Instance& inst = *insts[b];
    const JobGraph& g = out.graphs[b];
    const int base = out.node_offsets[b];
    const double s = feature_scale(c, inst);
    for (int j = 0; j < inst.jobs(); ++j) {
      for (int i = 0; i < c.machines; ++i) x(base + j, i) = inst.at(i, j) * s;
      for (int r = 0; r < g.k; ++r) {
        dist(static_cast<Eigen::Index>(src.size()), 0) = g.distances[static_cast<size_t>(j) * g.k + r];
        src.push_back(base + j);
        dst.push_back(base + g.neighbors[static_cast<size_t>(j) * g.k + r]);
      }
      edge_offsets.push_back(static_cast<int>(src.size()));
    }
  }

  Var h = ad::linear(t, t.constant(std::move(x)), t.param(p.W_h));
  Var e = ad::linear(t, t.constant(std::move(dist)), t.param(p.W_e));
  check_finite(t.value(h), "the input embedding");
  check_finite(t.value(e), "the input edge embedding");
  if (capture) {
    capture->nodes.push_back(t.value(h));
    capture->edges.push_back(t.value(e));
  }
  const ad::Reduce reduce = c.aggregation == Aggregation::kMean  ? ad::Reduce::kMean
                            : c.aggregation == Aggregation::kSum ? ad::Reduce::kSum
                                                                 : ad::Reduce::kMax;
  for (int l = 0; l < c.layers; ++l) {
    const LayerParams& lp = p.layers[l];
    const Var ch = ad::gather_rows(t, ad::linear(t, h, t.param(lp.C)), dst);
    const Var msg = ad::mul(t, ad::sigmoid(t, e), ch);
    const Var agg = ad::segment_reduce(t, msg, edge_offsets, reduce);
    const Var pre = ad::add(t, ad::linear(t, h, t.param(lp.B)), agg);
    const Var h_next = ad::add(t, h, ad::relu(t, normalize(t, pre, lp.node_norm, l, false, c, mode, out.norm_sites)));
    // The last edge update would feed nothing downstream.
    if (l + 1 < c.layers) {
      Var epre = ad::linear(t, e, t.param(lp.D));
      epre = ad::add(t, epre, ad::gather_rows(t, ad::linear(t, h, t.param(lp.E)), src));
      epre = ad::add(t, epre, ad::gather_rows(t, ad::linear(t, h, t.param(lp.F)), dst));
      e = ad::add(t, e, ad::relu(t, normalize(t, epre, lp.edge_norm, l, true, c, mode, out.norm_sites)));
      check_finite(t.value(e), "encoder layer " + std::to_string(l + 1) + " (edges)");
    }
    h = h_next;
    check_finite(t.value(h), "encoder layer " + std::to_string(l + 1));
    if (capture) {
      capture->nodes.push_back(t.value(h));
      if (l + 1 < c.layers) capture->edges.push_back(t.value(e));
    }
  }
  out.nodes = h;
  out.graph = ad::segment_reduce(t, h, out.node_offsets, ad::Reduce::kMean);
  return out;
}

void fold_running_stats(PolicyParams& p, const std::vector<NormSite>& sites) {
  const PolicyConfig& c = p.config;
  for (const NormSite& s : sites) {
    auto& layer = p.layers[s.layer];
    NormParams* np = s.edge ? &*layer.edge_norm : &*layer.node_norm;
    const double n = static_cast<double>(s.rows);
    // Running variance tracks the unbiased estimate, as is conventional.
    const Eigen::RowVectorXd unbiased = n > 1 ? Eigen::RowVectorXd(s.stats.var * (n / (n - 1))) : s.stats.var;
    np->running_mean = (1.0 - c.bn_momentum) * np->running_mean + c.bn_momentum * s.stats.mean;
    np->running_var = (1.0 - c.bn_momentum) * np->running_var + c.bn_momentum * unbiased;
  }
}

}  // namespace

Activations encode(const PolicyParams& params, const Instance& inst, Mode mode) {
  Tape t(false);
  Activations acts;
  const Instance* one[] = {&inst};
  EncodedBatch enc = encode_batch(t, params, one, mode, &acts);
  acts.graph = std::move(enc.graphs.front());
  acts.graph_embedding = t.value(enc.graph).row(0);
  return acts;
}

Eigen::RowVectorXd context(const PolicyParams& params, const Activations& acts, const ScheduleState& state) {
  const Mat& h = acts.nodes.back();
  const int d = params.config.dim;
  if (state.jobs() != h.rows()) throw ValidationError("state and activations disagree on the job count");
  Eigen::RowVectorXd ctx(3 * d);
  ctx.segment(0, d) = acts.graph_embedding;
  if (state.step_index() == 0) {
    ctx.segment(d, d) = params.v1.value.row(0);
    ctx.segment(2 * d, d) = params.v2.value.row(0);
  } else {
    ctx.segment(d, d) = h.row(state.scheduled().front());
    ctx.segment(2 * d, d) = h.row(state.scheduled().back());
  }
  return ctx;
}

DecoderCache::DecoderCache(const PolicyParams& params, Activations acts) : params_(&params), acts_(std::move(acts)) {
  const Mat& h = acts_.nodes.back();
  keys_ = h * params.mha_key.value.transpose();
  values_ = h * params.mha_value.value.transpose();
  pointer_keys_ = h * params.W_K.value.transpose();
}

Eigen::RowVectorXd DecoderCache::refined_context(const ScheduleState& state) const {
  const PolicyParams& p = *params_;
  const int d = p.config.dim;
  const int heads = p.config.heads;
  const int dh = d / heads;
  const Eigen::RowVectorXd ctx = context(p, acts_, state);
  const Eigen::RowVectorXd q = ctx * p.mha_query.value.transpose();
  Eigen::RowVectorXd att(d);
  const double s = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads; ++h) {
    Eigen::RowVectorXd a = (q.segment(h * dh, dh) * keys_.middleCols(h * dh, dh).transpose()) * s;
    a = (a.array() - a.maxCoeff()).exp().matrix();
    a /= a.sum();
    att.segment(h * dh, dh) = a * values_.middleCols(h * dh, dh);
  }
  return att * p.mha_out.value.transpose();
}

std::vector<double> DecoderCache::logits(const ScheduleState& state) const {
  if (state.terminal()) throw ValidationError("every job is already scheduled");
  const PolicyParams& p = *params_;
  const Eigen::RowVectorXd qq = refined_context(state) * p.W_Q.value.transpose();
  const double s = 1.0 / std::sqrt(static_cast<double>(p.config.dim));
  const int n = state.jobs();
  std::vector<double> u(n, -std::numeric_limits<double>::infinity());
  for (int j = 0; j < n; ++j)
    if (state.is_unscheduled(j)) u[j] = p.config.clip * std::tanh(qq.dot(pointer_keys_.row(j)) * s);
  return u;
}

std::vector<double> DecoderCache::probabilities(const ScheduleState& state) const {
  const std::vector<double> u = logits(state);
  const int n = static_cast<int>(u.size());
  Mat row(1, n);
  ad::Mask allowed(1, n);
  for (int j = 0; j < n; ++j) {
    allowed(0, j) = state.is_unscheduled(j) ? 1 : 0;
    row(0, j) = allowed(0, j) ? u[j] : 0.0;
  }
  const Mat pm = ad::masked_softmax(row, allowed);
  return std::vector<double>(pm.data(), pm.data() + n);
}

std::vector<double> decode_step(const PolicyParams& params, const Activations& acts, const ScheduleState& state) {
  return DecoderCache(params, acts).probabilities(state);
}

Permutation rollout_greedy(const PolicyParams& params, const Instance& inst) {
  if (inst.jobs() == 1) return {0};
  const DecoderCache dec(params, encode(params, inst, Mode::kEval));
  ScheduleState state = reset(inst);
  while (!state.terminal()) {
    const std::vector<double> u = dec.logits(state);
    int best = -1;
    for (int j = 0; j < static_cast<int>(u.size()); ++j)
      if (state.is_unscheduled(j) && (best < 0 || u[j] > u[best])) best = j;
    state = step(state, best);
  }
  return state.scheduled();
}

BcResult bc_loss(PolicyParams& params, const BcBatch& batch, Mode mode, bool backward, bool update_running_stats) {
  if (batch.instances.size() != batch.actions.size() || batch.instances.empty())
    throw ValidationError("a behaviour-cloning batch needs one action sequence per instance");
  const PolicyConfig& c = params.config;
  Tape t(backward);
  EncodedBatch enc = encode_batch(t, params, batch.instances, mode, nullptr);
  const int total_nodes = enc.node_offsets.back();

  int width = 0;
  std::vector<int> step_offsets{0};
  for (size_t b = 0; b < batch.instances.size(); ++b) {
    const int n = batch.instances[b]->jobs();
    if (static_cast<int>(batch.actions[b]->size()) != n)
      throw DataError("trace " + std::to_string(b) + " has " + std::to_string(batch.actions[b]->size()) +
                      " actions for " + std::to_string(n) + " jobs");
    width = std::max(width, n);
    step_offsets.push_back(step_offsets.back() + n);
  }
  const int steps = step_offsets.back();
  std::vector<int> inst_of(steps), first_of(steps), prev_of(steps), targets(steps);
  ad::Mask allowed = ad::Mask::Zero(steps, width);
  for (size_t b = 0; b < batch.instances.size(); ++b) {
    const Permutation& a = *batch.actions[b];
    const int n = static_cast<int>(a.size());
    const int base = enc.node_offsets[b];
    std::vector<char> free(n, 1);
    for (int tt = 0; tt < n; ++tt) {
      const int s = step_offsets[b] + tt;
      if (a[tt] < 0 || a[tt] >= n) throw DataError("trace action " + std::to_string(a[tt]) + " out of range");
      for (int j = 0; j < n; ++j) allowed(s, j) = free[j] ? 1 : 0;
      inst_of[s] = static_cast<int>(b);
      first_of[s] = tt == 0 ? total_nodes : base + a[0];
      prev_of[s] = tt == 0 ? total_nodes + 1 : base + a[tt - 1];
      targets[s] = a[tt];
      free[a[tt]] = 0;
    }
  }

  const Var h = enc.nodes;
  const Var with_placeholders[] = {h, t.param(params.v1), t.param(params.v2)};
  const Var hx = ad::concat_rows(t, with_placeholders);
  const Var ctx_parts[] = {ad::gather_rows(t, enc.graph, inst_of), ad::gather_rows(t, hx, first_of),
                           ad::gather_rows(t, hx, prev_of)};
  const Var ctx = ad::concat_cols(t, ctx_parts);
  const Var q = ad::linear(t, ctx, t.param(params.mha_query));
  const Var k = ad::linear(t, h, t.param(params.mha_key));
  const Var v = ad::linear(t, h, t.param(params.mha_value));
  const Var att = ad::segmented_attention(t, q, k, v, step_offsets, enc.node_offsets, c.heads);
  const Var hc = ad::linear(t, att, t.param(params.mha_out));
  const Var qq = ad::linear(t, hc, t.param(params.W_Q));
  const Var kk = ad::linear(t, h, t.param(params.W_K));
  const Var logits = ad::segmented_pointer_logits(t, qq, kk, step_offsets, enc.node_offsets, width, c.clip);
  const Var nll = ad::masked_nll(t, logits, allowed, targets);
  const Var loss = ad::scale(t, nll, 1.0 / steps);

  BcResult res;
  res.loss = t.value(loss)(0, 0);
  if (!std::isfinite(res.loss)) throw NumericError("non-finite behaviour-cloning loss");
  res.steps = steps;
  res.logits = t.value(logits);
  res.allowed = std::move(allowed);
  if (backward) t.backward(loss);
  if (update_running_stats && mode == Mode::kTrain) fold_running_stats(params, enc.norm_sites);
  return res;
}

namespace {

void visit_tensors(PolicyParams& p, const std::function<void(const std::string&, Mat&)>& fn) {
  p.for_each([&](ad::Parameter& prm) { fn(prm.name, prm.value); });
  for (size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    for (auto [norm, tag] : {std::pair{&layer.node_norm, "node_norm"}, std::pair{&layer.edge_norm, "edge_norm"}}) {
      if (!*norm) continue;
      const std::string pre = "layer" + std::to_string(l) + "." + tag + ".";
      Mat mean = (*norm)->running_mean;
      Mat var = (*norm)->running_var;
      fn(pre + "running_mean", mean);
      fn(pre + "running_var", var);
      (*norm)->running_mean = mean.row(0);
      (*norm)->running_var = var.row(0);
    }
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  PolicyParams copy = ckpt.params;
  nlohmann::json header;
  header["kind"] = "pfss-policy";
  header["config"] = copy.config.to_json();
  header["epoch"] = ckpt.epoch;
  header["metrics"] = ckpt.metrics;
  header["parameter_count"] = copy.parameter_count();
  auto& tensors = header["tensors"] = nlohmann::json::array();
  std::vector<uint8_t> body;
  visit_tensors(copy, [&](const std::string& name, Mat& m) {
    tensors.push_back({{"name", name}, {"shape", {m.rows(), m.cols()}}, {"offset", body.size()}});
    for (Eigen::Index i = 0; i < m.size(); ++i) container::append_f32(body, static_cast<float>(m.data()[i]));
  });
  container::write(path, "PFCK", kCheckpointVersion, std::move(header), body);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto f = container::read(path, "PFCK", kCheckpointVersion);
  Checkpoint ckpt;
  try {
    ckpt.params = PolicyParams::init(PolicyConfig::from_json(f.header.at("config")), 0);
    ckpt.epoch = f.header.value("epoch", 0);
    ckpt.metrics = f.header.value("metrics", nlohmann::json::object());
    std::map<std::string, nlohmann::json> index;
    for (const auto& t : f.header.at("tensors")) index[t.at("name").get<std::string>()] = t;
    visit_tensors(ckpt.params, [&](const std::string& name, Mat& m) {
      const auto it = index.find(name);
      if (it == index.end()) throw DataError(path.string() + ": checkpoint lacks tensor " + name);
      const auto shape = it->second.at("shape");
      if (shape.at(0).get<Eigen::Index>() != m.rows() || shape.at(1).get<Eigen::Index>() != m.cols())
        throw DataError(path.string() + ": tensor " + name + " has the wrong shape");
      const size_t off = it->second.at("offset").get<size_t>();
      if (off + 4 * static_cast<size_t>(m.size()) > f.body.size())
        throw DataError(path.string() + ": tensor " + name + " runs past the body");
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = container::read_f32(f.body.data() + off + 4 * i);
      if (!m.allFinite()) throw DataError(path.string() + ": tensor " + name + " has non-finite entries");
    });
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed checkpoint header: " + e.what());
  } catch (const ValidationError& e) {
    throw DataError(path.string() + ": invalid policy config: " + e.what());
  }
  return ckpt;
}

}  // namespace pfss
