#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mrte/dataset.hpp"
#include "mrte/error.hpp"
#include "mrte/ppo.hpp"

using namespace mrte;

namespace {

Topology ring4(double cap = 20.0) {
  std::vector<Link> links;
  for (auto [u, v] : {std::pair{0, 1}, {1, 2}, {2, 3}, {3, 0}}) {
    links.push_back({u, v, cap});
    links.push_back({v, u, cap});
  }
  return Topology(4, links);
}

InstancePool tiny_pool(int count, double total = 60.0) {
  InstancePool pool;
  for (int i = 0; i < count; ++i) {
    const Topology topo = ring4();
    Rng rng(splitmix64(static_cast<std::uint64_t>(i) + 1000));
    pool.push_back(make_instance(topo, gravity_tm(topo, total, rng)));
  }
  return pool;
}

PpoConfig tiny_config() {
  PpoConfig cfg;
  cfg.gnn.hidden = 6;
  cfg.gnn.msg_hidden = 8;
  cfg.gnn.readout_hidden = 8;
  cfg.gnn.rounds = 2;
  cfg.minibatch_size = 12;
  cfg.epochs = 1;
  cfg.episodes_per_update = 1;
  cfg.eval_every = 1;
  return cfg;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

}  // namespace

TEST_CASE("collect: one episode yields N(N-1) records ending with done") {
  const InstancePool pool = tiny_pool(1);
  GnnModel model(tiny_config().gnn, 3);
  Rng rng(5);
  CollectStats stats;
  const auto records = collect(model, pool, 1, rng, 0, &stats);
  REQUIRE(records.size() == 12);
  for (std::size_t i = 0; i + 1 < records.size(); ++i) CHECK_FALSE(records[i].done);
  CHECK(records.back().done);
  CHECK(stats.episodes == 1);
  for (const auto& r : records) {
    CHECK(std::isfinite(r.logprob));
    CHECK(r.policy_version == 0);
  }
}

TEST_CASE("collect: an NSFNet episode has 182 records") {
  const Topology topo = load_topology_by_name("nsfnet");
  Rng trng(7);
  InstancePool pool{make_instance(topo, gravity_tm(topo, 150000.0, trng))};
  GnnModel model(tiny_config().gnn, 9);
  Rng rng(11);
  const auto records = collect(model, pool, 1, rng, 0);
  CHECK(records.size() == 182);
}

TEST_CASE("collect: fixed seed reproduces the identical trajectory set") {
  const InstancePool pool = tiny_pool(3);
  GnnModel model(tiny_config().gnn, 13);
  Rng rng_a(17), rng_b(17);
  const auto a = collect(model, pool, 4, rng_a, 0);
  const auto b = collect(model, pool, 4, rng_b, 0);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].action_index == b[i].action_index);
    CHECK(a[i].logprob == b[i].logprob);
    CHECK(a[i].value == b[i].value);
    CHECK(a[i].reward == b[i].reward);
  }
}

TEST_CASE("gae: zero rewards and values give zero advantages") {
  std::vector<TrajectoryRecord> records(3);
  records[2].done = true;
  gae(records, 0.99, 0.95);
  for (const auto& r : records) {
    CHECK(r.advantage == 0.0);
    CHECK(r.ret == 0.0);
  }
}

TEST_CASE("gae: single-step episode with gamma = lambda = 1 gives r - v") {
  std::vector<TrajectoryRecord> records(1);
  records[0].reward = 2.5;
  records[0].value = 0.75;
  records[0].done = true;
  gae(records, 1.0, 1.0);
  CHECK(records[0].advantage == doctest::Approx(2.5 - 0.75).epsilon(1e-15));
  CHECK(records[0].ret == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("gae: three-step episode matches the hand-unrolled recursion") {
  std::vector<TrajectoryRecord> records(3);
  const double r[3] = {1.0, -0.5, 2.0};
  const double v[3] = {0.3, 0.1, -0.2};
  for (int i = 0; i < 3; ++i) {
    records[static_cast<std::size_t>(i)].reward = r[i];
    records[static_cast<std::size_t>(i)].value = v[i];
  }
  records[2].done = true;
  const double gamma = 0.9, lambda = 0.8;
  gae(records, gamma, lambda);

  // Oracle: direct two-pass unroll.
  const double d2 = r[2] + 0.0 - v[2];
  const double d1 = r[1] + gamma * v[2] - v[1];
  const double d0 = r[0] + gamma * v[1] - v[0];
  const double a2 = d2;
  const double a1 = d1 + gamma * lambda * a2;
  const double a0 = d0 + gamma * lambda * a1;
  CHECK(records[2].advantage == doctest::Approx(a2).epsilon(1e-14));
  CHECK(records[1].advantage == doctest::Approx(a1).epsilon(1e-14));
  CHECK(records[0].advantage == doctest::Approx(a0).epsilon(1e-14));
  CHECK(records[0].ret == doctest::Approx(a0 + v[0]).epsilon(1e-14));

  // Two concatenated episodes stay independent.
  std::vector<TrajectoryRecord> twice = records;
  twice.insert(twice.end(), records.begin(), records.end());
  gae(twice, gamma, lambda);
  CHECK(twice[3].advantage == doctest::Approx(a0).epsilon(1e-14));
}

TEST_CASE("ppo loss: ratio 1 makes the surrogate the negative mean advantage") {
  const InstancePool pool = tiny_pool(1);
  const PpoConfig cfg = tiny_config();
  GnnModel model(cfg.gnn, 19);
  Rng rng(23);
  auto records = collect(model, pool, 1, rng, 0);
  gae(records, cfg.discount, cfg.gae_lambda);

  std::vector<const TrajectoryRecord*> refs;
  std::vector<double> advs;
  double mean_adv = 0.0;
  for (const auto& r : records) {
    refs.push_back(&r);
    advs.push_back(r.advantage);
    mean_adv += r.advantage;
  }
  mean_adv /= static_cast<double>(records.size());

  PpoConfig no_extras = cfg;
  no_extras.value_coef = 0.0;
  no_extras.entropy_coef = 0.0;
  const double loss = ppo_loss(model, refs, advs, no_extras, false);
  CHECK(loss == doctest::Approx(-mean_adv).epsilon(1e-9));
}

TEST_CASE("ppo update: zero advantages leave no policy-gradient term") {
  const InstancePool pool = tiny_pool(1);
  const PpoConfig cfg = tiny_config();
  GnnModel model(cfg.gnn, 29);
  Rng rng(31);
  auto records = collect(model, pool, 1, rng, 0);
  for (auto& r : records) {
    r.advantage = 0.0;
    r.ret = 0.5;
  }
  AdamOptimizer opt(model.parameters(), cfg.adam);
  const Matrix critic_before = model.critic_fc1.weight.values;
  const UpdateStats stats = ppo_update(model, opt, records, cfg, rng, 0);
  CHECK(stats.policy_loss == 0.0);
  CHECK(stats.clip_fraction == 0.0);
  CHECK((model.critic_fc1.weight.values - critic_before).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("ppo update: loss decreases after the step in at least 9/10 seeded trials") {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const InstancePool pool = tiny_pool(1, 80.0);
    PpoConfig cfg = tiny_config();
    cfg.adam.learning_rate = 5e-3;
    GnnModel model(cfg.gnn, 100 + seed);
    Rng rng(200 + seed);
    auto records = collect(model, pool, 1, rng, 0);
    gae(records, cfg.discount, cfg.gae_lambda);

    // Normalized advantages, frozen for both evaluations.
    double mean = 0.0, var = 0.0;
    for (const auto& r : records) mean += r.advantage;
    mean /= static_cast<double>(records.size());
    for (const auto& r : records) var += (r.advantage - mean) * (r.advantage - mean);
    var /= static_cast<double>(records.size());
    std::vector<const TrajectoryRecord*> refs;
    std::vector<double> advs;
    for (const auto& r : records) {
      refs.push_back(&r);
      advs.push_back((r.advantage - mean) / std::sqrt(var + 1e-8));
    }
    const double before = ppo_loss(model, refs, advs, cfg, false);
    auto batch = records;  // ppo_update consumes its argument
    AdamOptimizer opt(model.parameters(), cfg.adam);
    ppo_update(model, opt, batch, cfg, rng, 0);
    const double after = ppo_loss(model, refs, advs, cfg, false);
    if (after < before) ++improved;
  }
  CHECK(improved >= 9);
}

TEST_CASE("ppo update: stale experience is rejected") {
  const InstancePool pool = tiny_pool(1);
  const PpoConfig cfg = tiny_config();
  GnnModel model(cfg.gnn, 37);
  Rng rng(41);
  auto records = collect(model, pool, 1, rng, 7);
  gae(records, cfg.discount, cfg.gae_lambda);
  AdamOptimizer opt(model.parameters(), cfg.adam);
  CHECK_THROWS_WITH_AS(ppo_update(model, opt, records, cfg, rng, 8),
                       doctest::Contains("stale"), ContractError);
}

TEST_CASE("ppo update: mini-batch larger than the record set is rejected") {
  const InstancePool pool = tiny_pool(1);
  PpoConfig cfg = tiny_config();
  cfg.minibatch_size = 1000;
  GnnModel model(cfg.gnn, 43);
  Rng rng(47);
  auto records = collect(model, pool, 1, rng, 0);
  AdamOptimizer opt(model.parameters(), cfg.adam);
  CHECK_THROWS_AS(ppo_update(model, opt, records, cfg, rng, 0), ContractError);
}

TEST_CASE("ppo update: non-finite loss keeps the previous weights") {
  const InstancePool pool = tiny_pool(1);
  const PpoConfig cfg = tiny_config();
  GnnModel model(cfg.gnn, 53);
  Rng rng(59);
  auto records = collect(model, pool, 1, rng, 0);
  gae(records, cfg.discount, cfg.gae_lambda);
  records[3].advantage = std::numeric_limits<double>::quiet_NaN();

  std::vector<Matrix> before;
  for (ParamTensor* p : model.parameters()) before.push_back(p->values);
  AdamOptimizer opt(model.parameters(), cfg.adam);
  CHECK_THROWS_AS(ppo_update(model, opt, records, cfg, rng, 0), NumericError);
  const auto params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    CHECK((params[i]->values - before[i]).cwiseAbs().maxCoeff() == 0.0);
    CHECK(params[i]->grad.cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("train: zero updates emit a checkpoint and one evaluation row") {
  const std::string dir = "/tmp/mrte_train_zero";
  std::filesystem::remove_all(dir);
  PpoConfig cfg = tiny_config();
  cfg.updates = 0;
  const TrainResult result = train(cfg, tiny_pool(2), tiny_pool(1), dir, false, true);
  CHECK(result.updates_done == 0);
  CHECK(std::filesystem::exists(result.best_checkpoint_path));
  CHECK(std::filesystem::exists(result.last_checkpoint_path));
  const auto lines = read_lines(result.metrics_path);
  REQUIRE(lines.size() == 2);  // header + update-0 evaluation row
  CHECK(lines[1].rfind("0,", 0) == 0);
}

TEST_CASE("train: tiny run writes one metrics row per update, lr non-increasing") {
  const std::string dir = "/tmp/mrte_train_tiny";
  std::filesystem::remove_all(dir);
  PpoConfig cfg = tiny_config();
  cfg.updates = 4;
  cfg.adam.decay_interval = 2;
  const TrainResult result = train(cfg, tiny_pool(2), tiny_pool(1), dir, false, true);
  CHECK(result.updates_done == 4);
  const auto lines = read_lines(result.metrics_path);
  REQUIRE(lines.size() == 6);  // header + update 0 + 4 updates
  double prev_lr = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::stringstream ss(lines[i]);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() == 12);
    const double lr = std::stod(fields[10]);
    CHECK(lr <= prev_lr);
    CHECK(lr > 0.0);
    prev_lr = lr;
  }

  // Reruns are byte-identical under deterministic timing.
  const std::string dir2 = "/tmp/mrte_train_tiny2";
  std::filesystem::remove_all(dir2);
  train(cfg, tiny_pool(2), tiny_pool(1), dir2, false, true);
  const auto a = read_lines(dir + "/metrics.csv");
  const auto b = read_lines(dir2 + "/metrics.csv");
  CHECK(a == b);
  std::ifstream ca(dir + "/checkpoint_last.json"), cb(dir2 + "/checkpoint_last.json");
  const std::string sa((std::istreambuf_iterator<char>(ca)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(cb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("train: resuming reproduces the uninterrupted run exactly") {
  const std::string full_dir = "/tmp/mrte_train_full";
  const std::string resumed_dir = "/tmp/mrte_train_resumed";
  std::filesystem::remove_all(full_dir);
  std::filesystem::remove_all(resumed_dir);

  PpoConfig cfg = tiny_config();
  cfg.updates = 4;
  train(cfg, tiny_pool(2), tiny_pool(1), full_dir, false, true);

  PpoConfig half = cfg;
  half.updates = 2;
  train(half, tiny_pool(2), tiny_pool(1), resumed_dir, false, true);
  train(cfg, tiny_pool(2), tiny_pool(1), resumed_dir, true, true);

  const auto full = read_lines(full_dir + "/metrics.csv");
  const auto resumed = read_lines(resumed_dir + "/metrics.csv");
  CHECK(full == resumed);
  std::ifstream ca(full_dir + "/checkpoint_last.json"), cb(resumed_dir + "/checkpoint_last.json");
  const std::string sa((std::istreambuf_iterator<char>(ca)), std::istreambuf_iterator<char>());
  const std::string sb((std::istreambuf_iterator<char>(cb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
}

TEST_CASE("ppo config: json round trip and validation") {
  PpoConfig cfg;
  cfg.clip_ratio = 0.15;
  cfg.updates = 7;
  const PpoConfig loaded = PpoConfig::from_json(cfg.to_json());
  CHECK(loaded.clip_ratio == 0.15);
  CHECK(loaded.updates == 7);

  nlohmann::json bad = cfg.to_json();
  bad["clip_ratio"] = 1.5;
  CHECK_THROWS_AS(PpoConfig::from_json(bad), ValidationError);
}
