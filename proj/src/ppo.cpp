#include "mrte/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "mrte/checkpoint.hpp"
#include "mrte/error.hpp"

namespace mrte {

namespace fs = std::filesystem;
using nlohmann::json;

std::shared_ptr<const Instance> make_instance(Topology topo, TrafficMatrix tm,
                                              std::uint64_t seed, double scale) {
  auto inst = std::make_shared<Instance>(Instance{
      std::move(topo), PathTable{}, LinkGraph{}, std::move(tm), Vector{}, seed, scale});
  auto* mutable_inst = const_cast<Instance*>(inst.get());
  mutable_inst->table = PathTable::compute(inst->topology);
  mutable_inst->graph = LinkGraph::build(inst->topology);
  mutable_inst->x_cap = normalized_capacities(inst->topology);
  return inst;
}

void PpoConfig::validate() const {
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0))
    throw ValidationError("ppo config: clip ratio must be in (0, 1)");
  if (!(discount > 0.0 && discount <= 1.0))
    throw ValidationError("ppo config: discount must be in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0))
    throw ValidationError("ppo config: GAE lambda must be in (0, 1]");
  if (minibatch_size <= 0) throw ValidationError("ppo config: mini-batch size must be positive");
  if (epochs <= 0 || episodes_per_update <= 0 || updates < 0 || eval_every <= 0)
    throw ValidationError("ppo config: counts must be positive (updates may be zero)");
  if (entropy_coef < 0.0 || value_coef < 0.0)
    throw ValidationError("ppo config: coefficients must be non-negative");
}

json PpoConfig::to_json() const {
  return json{{"clip_ratio", clip_ratio},
              {"discount", discount},
              {"gae_lambda", gae_lambda},
              {"entropy_coef", entropy_coef},
              {"value_coef", value_coef},
              {"epochs", epochs},
              {"minibatch_size", minibatch_size},
              {"episodes_per_update", episodes_per_update},
              {"updates", updates},
              {"eval_every", eval_every},
              {"seed", seed},
              {"adam",
               {{"learning_rate", adam.learning_rate},
                {"beta1", adam.beta1},
                {"beta2", adam.beta2},
                {"epsilon", adam.epsilon},
                {"decay_factor", adam.decay_factor},
                {"decay_interval", adam.decay_interval}}},
              {"gnn",
               {{"hidden", gnn.hidden},
                {"msg_hidden", gnn.msg_hidden},
                {"readout_hidden", gnn.readout_hidden},
                {"rounds", gnn.rounds}}}};
}

PpoConfig PpoConfig::from_json(const json& j) {
  PpoConfig c;
  c.clip_ratio = j.value("clip_ratio", c.clip_ratio);
  c.discount = j.value("discount", c.discount);
  c.gae_lambda = j.value("gae_lambda", c.gae_lambda);
  c.entropy_coef = j.value("entropy_coef", c.entropy_coef);
  c.value_coef = j.value("value_coef", c.value_coef);
  c.epochs = j.value("epochs", c.epochs);
  c.minibatch_size = j.value("minibatch_size", c.minibatch_size);
  c.episodes_per_update = j.value("episodes_per_update", c.episodes_per_update);
  c.updates = j.value("updates", c.updates);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.seed = j.value("seed", c.seed);
  if (j.contains("adam")) {
    const auto& a = j.at("adam");
    c.adam.learning_rate = a.value("learning_rate", c.adam.learning_rate);
    c.adam.beta1 = a.value("beta1", c.adam.beta1);
    c.adam.beta2 = a.value("beta2", c.adam.beta2);
    c.adam.epsilon = a.value("epsilon", c.adam.epsilon);
    c.adam.decay_factor = a.value("decay_factor", c.adam.decay_factor);
    c.adam.decay_interval = a.value("decay_interval", c.adam.decay_interval);
  }
  if (j.contains("gnn")) {
    const auto& g = j.at("gnn");
    c.gnn.hidden = g.value("hidden", c.gnn.hidden);
    c.gnn.msg_hidden = g.value("msg_hidden", c.gnn.msg_hidden);
    c.gnn.readout_hidden = g.value("readout_hidden", c.gnn.readout_hidden);
    c.gnn.rounds = g.value("rounds", c.gnn.rounds);
  }
  c.validate();
  return c;
}

std::vector<TrajectoryRecord> collect(const GnnModel& model, const InstancePool& pool,
                                      int episodes, Rng& rng, std::uint64_t policy_version,
                                      CollectStats* stats) {
  require(!pool.empty(), "collect: empty traffic-matrix pool");
  std::vector<TrajectoryRecord> records;
  double return_sum = 0.0, final_util_sum = 0.0;
  for (int e = 0; e < episodes; ++e) {
    const auto& inst = pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
    Env env(inst->topology, inst->table, inst->tm);
    double ep_return = 0.0;
    while (!env.done()) {
      auto enc = std::make_shared<StepEncoding>(encode_step(env));
      const PolicyForward fwd = policy_forward(model, inst->graph, inst->x_cap, *enc);
      const auto [idx, logp] = softmax_sample(fwd.logits, rng);
      const StepOutcome outcome = env.step(enc->middlepoints[static_cast<std::size_t>(idx)]);
      records.push_back(TrajectoryRecord{inst, std::move(enc), idx, logp, fwd.value,
                                         outcome.reward, outcome.done, policy_version});
      ep_return += outcome.reward;
    }
    return_sum += ep_return;
    final_util_sum += env.max_utilization();
  }
  if (stats != nullptr) {
    stats->episodes = episodes;
    stats->mean_return = episodes > 0 ? return_sum / episodes : 0.0;
    stats->mean_final_max_util = episodes > 0 ? final_util_sum / episodes : 0.0;
  }
  return records;
}

void gae(std::vector<TrajectoryRecord>& records, double discount, double lambda) {
  std::size_t start = 0;
  while (start < records.size()) {
    std::size_t end = start;
    while (end < records.size() && !records[end].done) ++end;
    require(end < records.size(), "gae: trajectory does not terminate");
    double adv_next = 0.0, value_next = 0.0;  // terminal state bootstraps zero
    for (std::size_t i = end + 1; i-- > start;) {
      const double delta = records[i].reward + discount * value_next - records[i].value;
      adv_next = delta + discount * lambda * adv_next;
      value_next = records[i].value;
      records[i].advantage = adv_next;
      records[i].ret = adv_next + records[i].value;
    }
    start = end + 1;
  }
}

namespace {

struct ChunkStats {
  double policy_loss = 0.0, value_loss = 0.0, entropy = 0.0, kl = 0.0;
  std::int64_t clipped = 0, count = 0;
  bool finite = true;
};

// Forward + backward over a slice of records. Gradients are scaled by
// inv_batch so the sum over chunks equals the mini-batch mean gradient.
ChunkStats process_chunk(GnnModel& model, const std::vector<const TrajectoryRecord*>& recs,
                         const std::vector<double>& norm_adv, const PpoConfig& cfg,
                         double inv_batch, bool with_grad) {
  thread_local GnnBatch batch;
  const int hidden = model.config().hidden;
  std::vector<GraphSegmentRef> segments;
  std::vector<int> actor_cols, critic_cols;  // segment indices
  std::vector<int> rec_offset;               // first actor column per record
  int actions_total = 0;
  for (const TrajectoryRecord* r : recs) {
    rec_offset.push_back(actions_total);
    const auto& enc = *r->obs;
    for (std::size_t a = 0; a < enc.action_x3.size(); ++a) {
      actor_cols.push_back(static_cast<int>(segments.size()));
      segments.push_back({&r->instance->graph, &r->instance->x_cap, &enc.x_util,
                          &enc.action_x3[a]});
    }
    actions_total += static_cast<int>(enc.action_x3.size());
    critic_cols.push_back(static_cast<int>(segments.size()));
    segments.push_back({&r->instance->graph, &r->instance->x_cap, &enc.x_util, nullptr});
  }

  batch.assign(model, segments);
  batch.forward(model, with_grad);
  const Matrix sums = batch.segment_sums();

  Matrix actor_in(hidden, actions_total), critic_in(hidden, static_cast<Index>(recs.size()));
  for (int i = 0; i < actions_total; ++i) actor_in.col(i) = sums.col(actor_cols[static_cast<std::size_t>(i)]);
  for (std::size_t i = 0; i < recs.size(); ++i) critic_in.col(static_cast<Index>(i)) = sums.col(critic_cols[i]);

  DenseTape a1t, a2t, c1t, c2t;
  const Matrix a1 = dense_forward(model.actor_fc1, actor_in, with_grad ? &a1t : nullptr);
  const Matrix logits_row = dense_forward(model.actor_fc2, a1, with_grad ? &a2t : nullptr);
  const Matrix c1 = dense_forward(model.critic_fc1, critic_in, with_grad ? &c1t : nullptr);
  const Matrix values_row = dense_forward(model.critic_fc2, c1, with_grad ? &c2t : nullptr);

  ChunkStats stats;
  Matrix dlogits = Matrix::Zero(1, actions_total);
  Matrix dvalues = Matrix::Zero(1, static_cast<Index>(recs.size()));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const TrajectoryRecord& r = *recs[i];
    const int actions = static_cast<int>(r.obs->action_x3.size());
    const int off = rec_offset[i];
    const Vector logits = logits_row.row(0).segment(off, actions).transpose();
    const double lse = log_sum_exp(logits);
    const Vector probs = (logits.array() - lse).exp().matrix();
    const double logp_new = logits(r.action_index) - lse;
    const double ratio = std::exp(logp_new - r.logprob);
    const double advantage = norm_adv[i];
    const double unclipped = ratio * advantage;
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio);
    const double clipped = clipped_ratio * advantage;
    stats.policy_loss += -std::min(unclipped, clipped);
    if (std::abs(ratio - 1.0) > cfg.clip_ratio) ++stats.clipped;
    stats.kl += r.logprob - logp_new;

    double entropy = 0.0;
    for (int a = 0; a < actions; ++a) entropy -= probs(a) * (logits(a) - lse);
    stats.entropy += entropy;

    const double v = values_row(0, static_cast<Index>(i));
    stats.value_loss += (v - r.ret) * (v - r.ret);

    if (with_grad) {
      // d(-min)/dlogp: the clipped branch is constant in the parameters.
      const double gpol = (unclipped <= clipped) ? -advantage * ratio : 0.0;
      Vector dl = Vector::Zero(actions);
      dl(r.action_index) += gpol;
      dl -= gpol * probs;
      // Entropy bonus: dH/dlogit_a = -p_a (logp_a + H).
      for (int a = 0; a < actions; ++a)
        dl(a) += cfg.entropy_coef * probs(a) * ((logits(a) - lse) + entropy);
      dlogits.row(0).segment(off, actions) = dl.transpose() * inv_batch;
      dvalues(0, static_cast<Index>(i)) = cfg.value_coef * 2.0 * (v - r.ret) * inv_batch;
    }
  }
  stats.count = static_cast<std::int64_t>(recs.size());
  stats.finite = std::isfinite(stats.policy_loss) && std::isfinite(stats.value_loss) &&
                 std::isfinite(stats.entropy);

  if (with_grad && stats.finite) {
    const Matrix da1 = dense_backward(model.actor_fc2, a2t, dlogits);
    const Matrix dactor_in = dense_backward(model.actor_fc1, a1t, da1);
    const Matrix dc1 = dense_backward(model.critic_fc2, c2t, dvalues);
    const Matrix dcritic_in = dense_backward(model.critic_fc1, c1t, dc1);
    Matrix dsums = Matrix::Zero(hidden, static_cast<Index>(segments.size()));
    for (int i = 0; i < actions_total; ++i)
      dsums.col(actor_cols[static_cast<std::size_t>(i)]) = dactor_in.col(i);
    for (std::size_t i = 0; i < recs.size(); ++i)
      dsums.col(critic_cols[i]) = dcritic_in.col(static_cast<Index>(i));
    batch.backward(model, dsums);
  }
  return stats;
}

void shuffle_indices(std::vector<std::size_t>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i)
    std::swap(idx[i - 1], idx[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i)))]);
}

}  // namespace

double ppo_loss(GnnModel& model, const std::vector<const TrajectoryRecord*>& records,
                const std::vector<double>& norm_advantages, const PpoConfig& config,
                bool with_grad) {
  require(!records.empty() && records.size() == norm_advantages.size(),
          "ppo_loss: records and advantages must pair up");
  const double inv = 1.0 / static_cast<double>(records.size());
  const ChunkStats stats = process_chunk(model, records, norm_advantages, config, inv, with_grad);
  return (stats.policy_loss + config.value_coef * stats.value_loss -
          config.entropy_coef * stats.entropy) *
         inv;
}

UpdateStats ppo_update(GnnModel& model, AdamOptimizer& optimizer,
                       std::vector<TrajectoryRecord>& records, const PpoConfig& config,
                       Rng& rng, std::uint64_t expected_version) {
  config.validate();
  require(!records.empty(), "ppo_update: no records");
  require(static_cast<std::size_t>(config.minibatch_size) <= records.size(),
          "ppo_update: mini-batch size exceeds collected records");
  for (const TrajectoryRecord& r : records)
    if (r.policy_version != expected_version)
      throw ContractError("ppo_update: stale experience (policy version " +
                          std::to_string(r.policy_version) + ", expected " +
                          std::to_string(expected_version) + ")");

  // Advantage normalization over the whole update batch.
  double mean = 0.0;
  for (const auto& r : records) mean += r.advantage;
  mean /= static_cast<double>(records.size());
  double var = 0.0;
  for (const auto& r : records) var += (r.advantage - mean) * (r.advantage - mean);
  var /= static_cast<double>(records.size());
  const double inv_std = 1.0 / std::sqrt(var + 1e-8);

  // Snapshot for the abort path.
  std::vector<Matrix> snapshot;
  for (ParamTensor* p : model.parameters()) snapshot.push_back(p->values);
  auto restore = [&]() {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->values = snapshot[i];
      params[i]->zero_grad();
    }
  };

  // Keep forward-pass memory bounded regardless of mini-batch size.
  const int chunk_records = 25;

  UpdateStats total;
  std::int64_t total_count = 0, total_clipped = 0;
  std::vector<std::size_t> order(records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_indices(order, rng);
    for (std::size_t mb_start = 0; mb_start < order.size();
         mb_start += static_cast<std::size_t>(config.minibatch_size)) {
      const std::size_t mb_end =
          std::min(order.size(), mb_start + static_cast<std::size_t>(config.minibatch_size));
      const double inv_batch = 1.0 / static_cast<double>(mb_end - mb_start);
      for (std::size_t c = mb_start; c < mb_end; c += chunk_records) {
        const std::size_t c_end = std::min(mb_end, c + chunk_records);
        std::vector<const TrajectoryRecord*> recs;
        std::vector<double> adv;
        for (std::size_t i = c; i < c_end; ++i) {
          recs.push_back(&records[order[i]]);
          adv.push_back((records[order[i]].advantage - mean) * inv_std);
        }
        const ChunkStats stats = process_chunk(model, recs, adv, config, inv_batch, true);
        if (!stats.finite) {
          restore();
          throw NumericError("ppo_update: non-finite loss, previous weights kept");
        }
        total.policy_loss += stats.policy_loss;
        total.value_loss += stats.value_loss;
        total.entropy += stats.entropy;
        total.approx_kl += stats.kl;
        total_clipped += stats.clipped;
        total_count += stats.count;
      }
      try {
        optimizer.apply();
      } catch (const NumericError&) {
        restore();
        throw;
      }
    }
  }
  optimizer.end_update();
  records.clear();  // on-policy: old experiences are discarded

  total.policy_loss /= static_cast<double>(total_count);
  total.value_loss /= static_cast<double>(total_count);
  total.entropy /= static_cast<double>(total_count);
  total.approx_kl /= static_cast<double>(total_count);
  total.clip_fraction = static_cast<double>(total_clipped) / static_cast<double>(total_count);
  return total;
}

EvalSummary evaluate_greedy(const GnnModel& model, const InstancePool& pool) {
  require(!pool.empty(), "evaluate_greedy: empty pool");
  std::vector<double> utils;
  utils.reserve(pool.size());
  for (const auto& inst : pool) {
    Env env(inst->topology, inst->table, inst->tm);
    utils.push_back(run_greedy_episode(model, env, inst->graph));
  }
  EvalSummary out;
  for (double u : utils) out.mean_max_util += u;
  out.mean_max_util /= static_cast<double>(utils.size());
  std::sort(utils.begin(), utils.end());
  out.p90_max_util = utils[static_cast<std::size_t>(0.9 * (utils.size() - 1))];
  return out;
}

namespace {

json train_checkpoint_json(const GnnModel& model, const AdamOptimizer& opt, const Rng& rng,
                           int updates_done, double best_eval) {
  json j;
  j["format"] = "mrte-train-checkpoint";
  j["version"] = 1;
  j["model"] = model.to_json();
  j["optimizer"] = adam_state_to_json(opt);
  j["rng"] = rng.save_state();
  j["updates_done"] = updates_done;
  j["best_eval_mean_max_util"] = best_eval;
  return j;
}

void atomic_write_json(const std::string& path, const json& j) {
  const std::string tmp = path + ".tmp";
  write_json_file(tmp, j);
  fs::rename(tmp, path);
}

}  // namespace

TrainResult train(const PpoConfig& config, const InstancePool& train_pool,
                  const InstancePool& eval_pool, const std::string& out_dir, bool resume,
                  bool deterministic_timing) {
  config.validate();
  require(!train_pool.empty(), "train: empty training pool");
  require(!eval_pool.empty(), "train: empty held-out pool");
  fs::create_directories(out_dir);

  GnnModel model(config.gnn, config.seed);
  AdamOptimizer optimizer(model.parameters(), config.adam);
  Rng rng = Rng::child(config.seed, 0x7472);
  int updates_done = 0;
  double best_eval = std::numeric_limits<double>::infinity();

  const std::string last_path = out_dir + "/checkpoint_last.json";
  const std::string best_path = out_dir + "/checkpoint_best.json";
  const std::string metrics_path = out_dir + "/metrics.csv";

  bool resumed = false;
  if (resume && fs::exists(last_path)) {
    const json j = read_json_file(last_path);
    if (j.value("format", "") != "mrte-train-checkpoint")
      throw ValidationError("train: " + last_path + " is not a training checkpoint");
    tensors_from_json(j.at("model").at("params"), model.parameters());
    adam_state_from_json(j.at("optimizer"), optimizer);
    rng.load_state(j.at("rng").get<std::string>());
    updates_done = j.at("updates_done").get<int>();
    best_eval = j.at("best_eval_mean_max_util").get<double>();
    resumed = true;
  }

  std::ofstream metrics(metrics_path, resumed ? std::ios::app : std::ios::trunc);
  if (!metrics) throw ValidationError("train: cannot open " + metrics_path);
  metrics.precision(17);
  if (!resumed)
    metrics << "update,mean_return,collect_mean_max_util,eval_mean_max_util,eval_p90_max_util,"
               "policy_loss,value_loss,entropy,clip_fraction,approx_kl,learning_rate,"
               "wall_clock_s\n";

  EvalSummary eval = evaluate_greedy(model, eval_pool);
  auto maybe_save_best = [&](int update) {
    if (eval.mean_max_util < best_eval) {
      best_eval = eval.mean_max_util;
      json j = model.to_json();
      j["meta"] = {{"update", update}, {"eval_mean_max_util", eval.mean_max_util}};
      atomic_write_json(best_path, j);
    }
  };
  if (!resumed) {
    maybe_save_best(0);
    metrics << 0 << ",0,0," << eval.mean_max_util << ',' << eval.p90_max_util
            << ",0,0,0,0,0," << optimizer.learning_rate() << ",0\n";
    metrics.flush();
    atomic_write_json(last_path, train_checkpoint_json(model, optimizer, rng, 0, best_eval));
  }

  const auto train_start = std::chrono::steady_clock::now();
  for (int update = updates_done + 1; update <= config.updates; ++update) {
    CollectStats cstats;
    std::vector<TrajectoryRecord> records =
        collect(model, train_pool, config.episodes_per_update, rng,
                static_cast<std::uint64_t>(update - 1), &cstats);
    gae(records, config.discount, config.gae_lambda);
    const UpdateStats ustats = ppo_update(model, optimizer, records, config, rng,
                                          static_cast<std::uint64_t>(update - 1));

    if (update % config.eval_every == 0 || update == config.updates) {
      eval = evaluate_greedy(model, eval_pool);
      maybe_save_best(update);
    }
    const double wall = deterministic_timing
                            ? 0.0
                            : std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                            train_start)
                                  .count();
    metrics << update << ',' << cstats.mean_return << ',' << cstats.mean_final_max_util << ','
            << eval.mean_max_util << ',' << eval.p90_max_util << ',' << ustats.policy_loss << ','
            << ustats.value_loss << ',' << ustats.entropy << ',' << ustats.clip_fraction << ','
            << ustats.approx_kl << ',' << optimizer.learning_rate() << ',' << wall << '\n';
    metrics.flush();
    atomic_write_json(last_path, train_checkpoint_json(model, optimizer, rng, update, best_eval));
    updates_done = update;
  }

  TrainResult result;
  result.updates_done = updates_done;
  result.best_eval_mean_max_util = best_eval;
  result.best_checkpoint_path = best_path;
  result.last_checkpoint_path = last_path;
  result.metrics_path = metrics_path;
  return result;
}

}  // namespace mrte
