#include "mrte/gnn.hpp"

#include <cstring>
#include <map>

#include "mrte/checkpoint.hpp"
#include "mrte/error.hpp"

namespace mrte {

using nlohmann::json;

LinkGraph LinkGraph::build(const Topology& topo) {
  LinkGraph g;
  g.links = topo.num_links();
  for (int l = 0; l < g.links; ++l) {
    const int tail = topo.link(l).from;
    for (int k : topo.in_links(tail)) {
      g.pair_dst.push_back(l);
      g.pair_src.push_back(k);
    }
  }
  return g;
}

GnnModel::GnnModel(GnnConfig config, std::uint64_t init_seed)
    : msg_fc1("msg.fc1", config.msg_hidden, 2 * config.hidden, Activation::kRelu),
      msg_fc2("msg.fc2", config.hidden, config.msg_hidden, Activation::kIdentity),
      update("update", config.hidden, config.hidden),
      actor_fc1("actor.fc1", config.readout_hidden, config.hidden, Activation::kRelu),
      actor_fc2("actor.fc2", 1, config.readout_hidden, Activation::kIdentity),
      critic_fc1("critic.fc1", config.readout_hidden, config.hidden, Activation::kRelu),
      critic_fc2("critic.fc2", 1, config.readout_hidden, Activation::kIdentity),
      cfg_(config) {
  if (config.hidden < 3) throw ValidationError("gnn: hidden width must be at least 3");
  if (config.rounds < 1) throw ValidationError("gnn: need at least one round");
  Rng rng = Rng::child(init_seed, 0x6e6e);
  msg_fc1.init(rng);
  msg_fc2.init(rng);
  update.init(rng);
  actor_fc1.init(rng);
  actor_fc2.init(rng);
  critic_fc1.init(rng);
  critic_fc2.init(rng);
}

std::vector<ParamTensor*> GnnModel::parameters() {
  return {&msg_fc1.weight,   &msg_fc1.bias,   &msg_fc2.weight,   &msg_fc2.bias,
          &update.w_update,  &update.b_update, &update.w_reset,  &update.b_reset,
          &update.w_cand,    &update.b_cand,  &actor_fc1.weight, &actor_fc1.bias,
          &actor_fc2.weight, &actor_fc2.bias, &critic_fc1.weight, &critic_fc1.bias,
          &critic_fc2.weight, &critic_fc2.bias};
}

std::vector<const ParamTensor*> GnnModel::parameters() const {
  auto mutable_params = const_cast<GnnModel*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

json GnnModel::to_json() const {
  json j;
  j["format"] = "mrte-model";
  j["version"] = 1;
  j["config"] = {{"hidden", cfg_.hidden},
                 {"msg_hidden", cfg_.msg_hidden},
                 {"readout_hidden", cfg_.readout_hidden},
                 {"rounds", cfg_.rounds}};
  j["normalization"] = "max_capacity";
  json params = json::object();
  for (const ParamTensor* p : parameters()) params[p->name] = matrix_to_json(p->values);
  j["params"] = std::move(params);
  return j;
}

GnnModel GnnModel::from_json(const json& j) {
  if (j.value("format", "") != "mrte-model")
    throw ValidationError("model checkpoint: unrecognized format");
  const auto& jc = j.at("config");
  GnnConfig cfg;
  cfg.hidden = jc.at("hidden").get<int>();
  cfg.msg_hidden = jc.at("msg_hidden").get<int>();
  cfg.readout_hidden = jc.at("readout_hidden").get<int>();
  cfg.rounds = jc.at("rounds").get<int>();
  GnnModel model(cfg, 0);
  tensors_from_json(j.at("params"), model.parameters());
  return model;
}

Vector normalized_capacities(const Topology& topo) {
  return topo.capacities() / topo.max_capacity();
}

Vector action_free_utilization(const Env& env) {
  Vector loads = env.loads();
  const Demand& d = env.current_demand();
  if (d.volume != 0.0) {
    const MiddlepointPath current =
        middlepoint_path(env.table(), d.src, d.dst, env.assignment(env.cursor()));
    for (int id : current.links) loads(id) -= d.volume;
  }
  return (loads.array() / env.capacities().array()).matrix();
}

std::vector<std::pair<int, double>> action_feature(const Env& env, int m) {
  const Demand& d = env.current_demand();
  require(m != d.src, "action_feature: middlepoint equals demand source");
  const double unit = d.volume / env.topology().max_capacity();
  std::map<int, double> acc;
  const MiddlepointPath p = middlepoint_path(env.table(), d.src, d.dst, m);
  for (int id : p.links) acc[id] += unit;
  return {acc.begin(), acc.end()};
}

Matrix initial_hidden(int hidden, const Vector& x_cap, const Vector& x_util,
                      const std::vector<std::pair<int, double>>* x3) {
  require(x_cap.size() == x_util.size(), "initial_hidden: feature size mismatch");
  Matrix h0 = Matrix::Zero(hidden, x_cap.size());
  h0.row(0) = x_cap.transpose();
  h0.row(1) = x_util.transpose();
  if (x3 != nullptr)
    for (const auto& [link, value] : *x3) h0(2, link) += value;
  return h0;
}

StepEncoding encode_step(const Env& env) {
  StepEncoding enc;
  enc.x_util = action_free_utilization(env);
  enc.middlepoints = action_set(env.topology(), env.current_demand().src);
  enc.action_x3.reserve(enc.middlepoints.size());
  for (int m : enc.middlepoints) enc.action_x3.push_back(action_feature(env, m));
  return enc;
}

// ---- GnnBatch --------------------------------------------------------------

GnnBatch::GnnBatch(const GnnModel& model, const std::vector<GraphSegmentRef>& segments) {
  assign(model, segments);
}

void GnnBatch::assign(const GnnModel& model, const std::vector<GraphSegmentRef>& segments) {
  require(!segments.empty(), "gnn batch: empty segment list");
  const int hidden = model.config().hidden;
  int total_links = 0, total_pairs = 0;
  for (const auto& s : segments) {
    total_links += s.graph->links;
    total_pairs += static_cast<int>(s.graph->pair_dst.size());
  }
  seg_offset_.clear();
  seg_links_.clear();
  pair_dst_.clear();
  pair_src_.clear();
  pair_dst_.reserve(static_cast<std::size_t>(total_pairs));
  pair_src_.reserve(static_cast<std::size_t>(total_pairs));
  h0_.resize(hidden, total_links);
  int offset = 0;
  for (const auto& s : segments) {
    seg_offset_.push_back(offset);
    seg_links_.push_back(s.graph->links);
    auto block = h0_.middleCols(offset, s.graph->links);
    block.setZero();
    block.row(0) = s.x_cap->transpose();
    block.row(1) = s.x_util->transpose();
    if (s.x3 != nullptr)
      for (const auto& [link, value] : *s.x3) block(2, link) += value;
    for (std::size_t p = 0; p < s.graph->pair_dst.size(); ++p) {
      pair_dst_.push_back(offset + s.graph->pair_dst[p]);
      pair_src_.push_back(offset + s.graph->pair_src[p]);
    }
    offset += s.graph->links;
  }
  forwarded_ = false;
}

void GnnBatch::gather_pairs(const Matrix& h) {
  const Index hidden = h.rows();
  const Index pairs = static_cast<Index>(pair_dst_.size());
  u_.resize(2 * hidden, pairs);
  const double* src = h.data();
  double* dst = u_.data();
  const std::size_t block = sizeof(double) * static_cast<std::size_t>(hidden);
  for (Index p = 0; p < pairs; ++p) {
    std::memcpy(dst + 2 * hidden * p, src + hidden * pair_dst_[static_cast<std::size_t>(p)], block);
    std::memcpy(dst + 2 * hidden * p + hidden, src + hidden * pair_src_[static_cast<std::size_t>(p)],
                block);
  }
}

void GnnBatch::forward(const GnnModel& model, bool keep_tape) {
  const int hidden = model.config().hidden;
  const Index pairs = static_cast<Index>(pair_dst_.size());
  const Index links = h0_.cols();
  const GruCell& cell = model.update;
  has_tape_ = keep_tape;
  if (keep_tape) tape_.resize(static_cast<std::size_t>(model.config().rounds));

  h_ = h0_;
  for (int t = 0; t < model.config().rounds; ++t) {
    RoundTape* rt = keep_tape ? &tape_[static_cast<std::size_t>(t)] : nullptr;
    // Messages: two dense layers over the gathered neighbour pairs.
    gather_pairs(h_);
    Matrix& m1 = rt ? rt->m1 : scratch_a_;
    m1.resize(model.config().msg_hidden, pairs);
    m1.noalias() = model.msg_fc1.weight.values * u_;
    m1.colwise() += Vector(model.msg_fc1.bias.values.col(0));
    m1 = m1.cwiseMax(0.0);
    msg_.resize(hidden, pairs);
    msg_.noalias() = model.msg_fc2.weight.values * m1;
    msg_.colwise() += Vector(model.msg_fc2.bias.values.col(0));

    Matrix& agg = rt ? rt->agg : agg_;
    agg.setZero(hidden, links);
    for (Index p = 0; p < pairs; ++p)
      agg.col(pair_dst_[static_cast<std::size_t>(p)]) += msg_.col(p);

    // Gated recurrent update, all links at once. Weight layout is
    // [hidden-part | input-part] over the concatenated (h, agg) vector.
    if (rt) rt->h_in = h_;
    const auto wz_h = cell.w_update.values.leftCols(hidden);
    const auto wz_x = cell.w_update.values.rightCols(cell.input);
    const auto wr_h = cell.w_reset.values.leftCols(hidden);
    const auto wr_x = cell.w_reset.values.rightCols(cell.input);
    const auto wc_h = cell.w_cand.values.leftCols(hidden);
    const auto wc_x = cell.w_cand.values.rightCols(cell.input);

    Matrix& z = rt ? rt->z : scratch_b_;
    z.resize(hidden, links);
    z.noalias() = wz_h * h_ + wz_x * agg;
    z.colwise() += Vector(cell.b_update.values.col(0));
    z = (1.0 / (1.0 + (-z.array()).exp())).matrix();

    Matrix& r = rt ? rt->r : scratch_c_;
    r.resize(hidden, links);
    r.noalias() = wr_h * h_ + wr_x * agg;
    r.colwise() += Vector(cell.b_reset.values.col(0));
    r = (1.0 / (1.0 + (-r.array()).exp())).matrix();

    Matrix& cand = rt ? rt->cand : msg_;  // msg_ is free by now
    Matrix& gated = u_;                   // u_ is free as well, reuse the head
    gated.resize(hidden, links);
    gated = r.cwiseProduct(h_);
    cand.resize(hidden, links);
    cand.noalias() = wc_h * gated + wc_x * agg;
    cand.colwise() += Vector(cell.b_cand.values.col(0));
    cand = cand.array().tanh().matrix();

    h_ = (1.0 - z.array()).matrix().cwiseProduct(h_) + z.cwiseProduct(cand);
  }
  forwarded_ = true;
}

Matrix GnnBatch::segment_sums() const {
  require(forwarded_, "gnn batch: forward() not run");
  Matrix sums(h_.rows(), segments());
  for (int s = 0; s < segments(); ++s)
    sums.col(s) = h_.middleCols(seg_offset_[static_cast<std::size_t>(s)],
                                seg_links_[static_cast<std::size_t>(s)])
                      .rowwise()
                      .sum();
  return sums;
}

void GnnBatch::backward(GnnModel& model, const Matrix& dsums) {
  require(forwarded_ && has_tape_, "gnn batch: backward requires a taped forward");
  require(dsums.cols() == segments() && dsums.rows() == h_.rows(),
          "gnn batch: dsums shape mismatch");
  const int hidden = model.config().hidden;
  const Index pairs = static_cast<Index>(pair_dst_.size());
  const Index links = h0_.cols();
  GruCell& cell = model.update;

  // The readout sum broadcasts its gradient to every link of the segment.
  Matrix dh(hidden, links);
  for (int s = 0; s < segments(); ++s)
    dh.middleCols(seg_offset_[static_cast<std::size_t>(s)],
                  seg_links_[static_cast<std::size_t>(s)])
        .colwise() = Vector(dsums.col(s));

  Matrix dz_pre, dr_pre, dcand_pre, dgated, dagg, dmsg, dm1;
  for (int t = model.config().rounds - 1; t >= 0; --t) {
    RoundTape& rt = tape_[static_cast<std::size_t>(t)];

    // Gated recurrent backward.
    dcand_pre = dh.cwiseProduct(rt.z).cwiseProduct((1.0 - rt.cand.array().square()).matrix());
    dz_pre = dh.cwiseProduct(rt.cand - rt.h_in)
                 .cwiseProduct(rt.z.cwiseProduct((1.0 - rt.z.array()).matrix()));
    dh = dh.cwiseProduct((1.0 - rt.z.array()).matrix());

    const Matrix gated = rt.r.cwiseProduct(rt.h_in);
    cell.w_cand.grad.leftCols(hidden).noalias() += dcand_pre * gated.transpose();
    cell.w_cand.grad.rightCols(cell.input).noalias() += dcand_pre * rt.agg.transpose();
    cell.b_cand.grad.col(0).noalias() += dcand_pre.rowwise().sum();
    dgated.resize(hidden, links);
    dgated.noalias() = cell.w_cand.values.leftCols(hidden).transpose() * dcand_pre;
    dagg.resize(cell.input, links);
    dagg.noalias() = cell.w_cand.values.rightCols(cell.input).transpose() * dcand_pre;

    dr_pre = dgated.cwiseProduct(rt.h_in)
                 .cwiseProduct(rt.r.cwiseProduct((1.0 - rt.r.array()).matrix()));
    dh += dgated.cwiseProduct(rt.r);

    cell.w_update.grad.leftCols(hidden).noalias() += dz_pre * rt.h_in.transpose();
    cell.w_update.grad.rightCols(cell.input).noalias() += dz_pre * rt.agg.transpose();
    cell.b_update.grad.col(0).noalias() += dz_pre.rowwise().sum();
    cell.w_reset.grad.leftCols(hidden).noalias() += dr_pre * rt.h_in.transpose();
    cell.w_reset.grad.rightCols(cell.input).noalias() += dr_pre * rt.agg.transpose();
    cell.b_reset.grad.col(0).noalias() += dr_pre.rowwise().sum();

    dh.noalias() += cell.w_update.values.leftCols(hidden).transpose() * dz_pre;
    dh.noalias() += cell.w_reset.values.leftCols(hidden).transpose() * dr_pre;
    dagg.noalias() += cell.w_update.values.rightCols(cell.input).transpose() * dz_pre;
    dagg.noalias() += cell.w_reset.values.rightCols(cell.input).transpose() * dr_pre;

    // Message backward: scatter-add gradient goes back to every pair.
    dmsg.resize(hidden, pairs);
    {
      const double* src = dagg.data();
      double* dst = dmsg.data();
      const std::size_t block = sizeof(double) * static_cast<std::size_t>(hidden);
      for (Index p = 0; p < pairs; ++p)
        std::memcpy(dst + hidden * p, src + hidden * pair_dst_[static_cast<std::size_t>(p)], block);
    }
    model.msg_fc2.weight.grad.noalias() += dmsg * rt.m1.transpose();
    model.msg_fc2.bias.grad.col(0).noalias() += dmsg.rowwise().sum();
    dm1.resize(model.config().msg_hidden, pairs);
    dm1.noalias() = model.msg_fc2.weight.values.transpose() * dmsg;
    dm1 = dm1.cwiseProduct((rt.m1.array() > 0.0).cast<double>().matrix());

    gather_pairs(rt.h_in);  // u_ <- pair inputs of this round
    model.msg_fc1.weight.grad.noalias() += dm1 * u_.transpose();
    model.msg_fc1.bias.grad.col(0).noalias() += dm1.rowwise().sum();
    msg_.resize(2 * hidden, pairs);
    msg_.noalias() = model.msg_fc1.weight.values.transpose() * dm1;
    for (Index p = 0; p < pairs; ++p) {
      dh.col(pair_dst_[static_cast<std::size_t>(p)]) += msg_.col(p).head(hidden);
      dh.col(pair_src_[static_cast<std::size_t>(p)]) += msg_.col(p).tail(hidden);
    }
  }
}

// ---- Policy ----------------------------------------------------------------

PolicyForward policy_forward(const GnnModel& model, const LinkGraph& graph, const Vector& x_cap,
                             const StepEncoding& enc) {
  const int actions = static_cast<int>(enc.middlepoints.size());
  std::vector<GraphSegmentRef> segments;
  segments.reserve(static_cast<std::size_t>(actions) + 1);
  for (int a = 0; a < actions; ++a)
    segments.push_back({&graph, &x_cap, &enc.x_util, &enc.action_x3[static_cast<std::size_t>(a)]});
  segments.push_back({&graph, &x_cap, &enc.x_util, nullptr});

  // Reuse one workspace per thread across the many per-step invocations.
  thread_local GnnBatch batch;
  batch.assign(model, segments);
  batch.forward(model, /*keep_tape=*/false);
  const Matrix sums = batch.segment_sums();

  PolicyForward out;
  const Matrix actor_h = dense_forward(model.actor_fc1, Matrix(sums.leftCols(actions)));
  out.logits = dense_forward(model.actor_fc2, actor_h).row(0).transpose();
  const Matrix critic_h = dense_forward(model.critic_fc1, Matrix(sums.rightCols(1)));
  out.value = dense_forward(model.critic_fc2, critic_h)(0, 0);
  return out;
}

namespace {

PolicyOutput make_output(PolicyForward&& fwd) {
  PolicyOutput out;
  out.logits = std::move(fwd.logits);
  out.probs = softmax(out.logits);
  out.value = fwd.value;
  return out;
}

}  // namespace

PolicyOutput policy(const GnnModel& model, const Env& env, const LinkGraph& graph, Rng& rng) {
  require(!env.done(), "policy: episode is done");
  const StepEncoding enc = encode_step(env);
  const Vector x_cap = normalized_capacities(env.topology());
  PolicyOutput out = make_output(policy_forward(model, graph, x_cap, enc));
  const auto [idx, logp] = softmax_sample(out.logits, rng);
  out.action_index = idx;
  out.middlepoint = enc.middlepoints[static_cast<std::size_t>(idx)];
  out.logprob = logp;
  return out;
}

PolicyOutput policy_greedy(const GnnModel& model, const Env& env, const LinkGraph& graph) {
  require(!env.done(), "policy: episode is done");
  const StepEncoding enc = encode_step(env);
  const Vector x_cap = normalized_capacities(env.topology());
  PolicyOutput out = make_output(policy_forward(model, graph, x_cap, enc));
  out.action_index = argmax(out.logits);
  out.middlepoint = enc.middlepoints[static_cast<std::size_t>(out.action_index)];
  out.logprob = std::log(out.probs(out.action_index));
  return out;
}

double evaluate_action(const GnnModel& model, const Env& env, const LinkGraph& graph, int m) {
  const Vector x_cap = normalized_capacities(env.topology());
  const Vector x_util = action_free_utilization(env);
  const auto x3 = action_feature(env, m);
  std::vector<GraphSegmentRef> segments{{&graph, &x_cap, &x_util, &x3}};
  GnnBatch batch(model, segments);
  batch.forward(model, /*keep_tape=*/false);
  const Matrix sums = batch.segment_sums();
  const Matrix actor_h = dense_forward(model.actor_fc1, sums);
  return dense_forward(model.actor_fc2, actor_h)(0, 0);
}

double run_greedy_episode(const GnnModel& model, Env& env, const LinkGraph& graph) {
  while (!env.done()) {
    const PolicyOutput out = policy_greedy(model, env, graph);
    env.step(out.middlepoint);
  }
  return env.max_utilization();
}

}  // namespace mrte
