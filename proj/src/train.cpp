#include "pfss/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <thread>

#include "pfss/errors.hpp"
#include "pfss/heuristics.hpp"
#include "pfss/rng.hpp"

namespace pfss {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ValidationError("batch size must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(decay > 0.0 && decay <= 1.0)) throw ValidationError("learning-rate decay must lie in (0, 1]");
  if (epochs < 1) throw ValidationError("epochs must be positive");
  if (checkpoint_every < 0) throw ValidationError("checkpoint cadence cannot be negative");
  if (eval_threads < 1) throw ValidationError("evaluation threads must be positive");
}

void Adam::step(PolicyParams& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  size_t i = 0;
  params.for_each([&](ad::Parameter& p) {
    if (m_.size() <= i) {
      m_.push_back(ad::Mat::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(ad::Mat::Zero(p.value.rows(), p.value.cols()));
    }
    ad::Mat& m = m_[i];
    ad::Mat& v = v_[i];
    m = b1_ * m + (1.0 - b1_) * p.grad;
    v = b2_ * v + (1.0 - b2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps_);
    ++i;
  });
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename Fn>
void parallel_for(int count, int threads, Fn&& fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j{{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"elapsed_s", e.elapsed_s}};
  j["val_gap"] = std::isfinite(e.val_gap) ? nlohmann::json(e.val_gap) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

TrainResult train(const TrainConfig& config, PolicyParams params, const std::vector<Instance>& train_set,
                  const std::vector<ExpertTrace>& traces, const std::vector<Instance>& val_set, std::ostream* log_out) {
  config.validate();
  if (traces.empty()) throw DataError("no expert traces to train on");
  for (const auto& tr : traces) {
    if (tr.instance_id < 0 || tr.instance_id >= static_cast<int>(train_set.size()))
      throw DataError("trace refers to missing instance " + std::to_string(tr.instance_id));
    const Instance& inst = train_set[tr.instance_id];
    if (inst.machines() != params.config.machines)
      throw DataError("traces come from " + std::to_string(inst.machines()) + "-machine instances but the policy has " +
                      std::to_string(params.config.machines) + " machines");
    validate_trace(tr, inst.jobs());
  }
  for (const auto& inst : val_set)
    if (inst.machines() != params.config.machines) throw DataError("validation set has a different machine count");

  std::vector<double> val_expert;
  for (const auto& inst : val_set) val_expert.push_back(neh(inst).makespan);

  std::ofstream file_log;
  if (!config.out_dir.empty()) {
    std::filesystem::create_directories(config.out_dir);
    file_log.open(config.out_dir / "train_log.ndjson");
    if (!file_log) throw DataError("cannot write " + (config.out_dir / "train_log.ndjson").string());
  }

  TrainResult result;
  Adam opt;
  Rng rng(config.seed);
  std::vector<int> order(traces.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = config.learning_rate;
  const auto t0 = Clock::now();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<int>(order));
    double loss_sum = 0.0;
    long step_sum = 0;
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      BcBatch batch;
      for (size_t i = start; i < end; ++i) {
        const ExpertTrace& tr = traces[order[i]];
        batch.instances.push_back(&train_set[tr.instance_id]);
        batch.actions.push_back(&tr.actions);
      }
      params.zero_grad();
      const BcResult r = bc_loss(params, batch, Mode::kTrain, true, true);
      opt.step(params, lr);
      loss_sum += r.loss * r.steps;
      step_sum += r.steps;
    }
    EpochLog rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(step_sum);
    rec.val_gap = val_set.empty() ? std::numeric_limits<double>::quiet_NaN()
                                  : evaluate(params, val_set, val_expert, config.eval_threads).mean_gap;
    rec.elapsed_s = seconds_since(t0);
    result.log.push_back(rec);
    const std::string line = to_json(rec).dump();
    if (log_out) *log_out << line << '\n' << std::flush;
    if (file_log) file_log << line << '\n' << std::flush;
    if (!config.out_dir.empty() && config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0)
      save_checkpoint(config.out_dir / ("epoch_" + std::to_string(epoch) + ".pfck"),
                      Checkpoint{params, epoch, to_json(rec)});
    lr *= config.decay;
  }
  if (!config.out_dir.empty())
    save_checkpoint(config.out_dir / "policy.pfck", Checkpoint{params, config.epochs, to_json(result.log.back())});
  result.params = std::move(params);
  return result;
}

EvalResult evaluate_solver(const std::function<Permutation(const Instance&)>& solver,
                           const std::vector<Instance>& instances, const std::vector<double>& expert_makespans,
                           int threads) {
  if (expert_makespans.size() != instances.size())
    throw ValidationError("need one expert makespan per instance");
  EvalResult r;
  const int n = static_cast<int>(instances.size());
  r.perms.resize(n);
  r.makespans.resize(n);
  r.gaps.resize(n);
  const auto t0 = Clock::now();
  parallel_for(n, threads, [&](int i) {
    r.perms[i] = solver(instances[i]);
    r.makespans[i] = makespan(instances[i], r.perms[i]);
    r.gaps[i] = gap_percent(r.makespans[i], expert_makespans[i]);
  });
  r.time_s = seconds_since(t0);
  if (n > 0) {
    r.mean_makespan = std::accumulate(r.makespans.begin(), r.makespans.end(), 0.0) / n;
    r.mean_gap = std::accumulate(r.gaps.begin(), r.gaps.end(), 0.0) / n;
  }
  return r;
}

EvalResult evaluate(const PolicyParams& params, const std::vector<Instance>& instances,
                    const std::vector<double>& expert_makespans, int threads) {
  for (const auto& inst : instances)
    if (inst.machines() != params.config.machines)
      throw DataError("dataset has " + std::to_string(inst.machines()) + " machines but the policy was trained for " +
                      std::to_string(params.config.machines));
  return evaluate_solver([&params](const Instance& inst) { return rollout_greedy(params, inst); }, instances,
                         expert_makespans, threads);
}

}  // namespace pfss
