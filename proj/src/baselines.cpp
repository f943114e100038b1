#include "mrte/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

#include "mrte/error.hpp"

namespace mrte {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

double replay_assignment(const Topology& topo, const PathTable& table, const TrafficMatrix& tm,
                         const std::vector<int>& middlepoints) {
  Env env(topo, table, tm);
  require(middlepoints.size() == env.demands().size(),
          "replay_assignment: wrong vector length");
  for (int m : middlepoints) env.step(m);
  return env.max_utilization();
}

Assignment ospf_baseline(const Topology& topo, const PathTable& table, const TrafficMatrix& tm) {
  const auto start = Clock::now();
  Env env(topo, table, tm);
  Assignment out;
  out.middlepoints.reserve(env.demands().size());
  for (const Demand& d : env.demands()) out.middlepoints.push_back(d.dst);
  out.max_utilization = env.max_utilization();
  out.wall_clock_s = elapsed_s(start);
  return out;
}

// ---- SAP -------------------------------------------------------------------

namespace {

// Hop distances from every node (BFS); symmetric link set makes
// dist(u, v) == dist(v, u).
std::vector<std::vector<int>> all_pairs_distances(const Topology& topo) {
  const int n = topo.nodes();
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(n),
                                     std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int s = 0; s < n; ++s) {
    auto& row = dist[static_cast<std::size_t>(s)];
    std::queue<int> q;
    row[static_cast<std::size_t>(s)] = 0;
    q.push(s);
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int id : topo.out_links(u)) {
        const int v = topo.link(id).to;
        if (row[static_cast<std::size_t>(v)] == -1) {
          row[static_cast<std::size_t>(v)] = row[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
  }
  return dist;
}

struct WidestSearch {
  const Topology* topo;
  const std::vector<std::vector<int>>* dist;
  const Vector* residual;
  int dst = -1, total = 0;
  std::vector<int> current, best;
  // Residuals may go negative in the fluid model (utilization above 1).
  double best_width = -std::numeric_limits<double>::infinity();

  // Depth-first over the shortest-path DAG in ascending neighbour order, so
  // the first path achieving the maximum width is the lexicographically
  // smallest one.
  void dfs(int u, int depth, double width) {
    if (u == dst) {
      if (width > best_width) {
        best_width = width;
        best = current;
      }
      return;
    }
    for (int id : topo->out_links(u)) {
      const int v = topo->link(id).to;
      if (depth + 1 + (*dist)[static_cast<std::size_t>(v)][static_cast<std::size_t>(dst)] != total)
        continue;
      current.push_back(v);
      dfs(v, depth + 1, std::min(width, (*residual)(id)));
      current.pop_back();
    }
  }
};

}  // namespace

SapResult sap(const Topology& topo, const TrafficMatrix& tm) {
  const auto start = Clock::now();
  const int n = topo.nodes();
  require(tm.rows() == n && tm.cols() == n, "sap: matrix size does not match topology");
  const auto dist = all_pairs_distances(topo);

  std::vector<Demand> demands;
  for (int s = 0; s < n; ++s)
    for (int d = 0; d < n; ++d)
      if (s != d) demands.push_back(Demand{s, d, tm(s, d)});
  std::stable_sort(demands.begin(), demands.end(), [](const Demand& a, const Demand& b) {
    if (a.volume != b.volume) return a.volume > b.volume;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
  });

  Vector loads = Vector::Zero(topo.num_links());
  const Vector caps = topo.capacities();
  SapResult out;
  out.node_paths.reserve(demands.size());
  for (const Demand& d : demands) {
    Vector residual = caps - loads;
    WidestSearch search;
    search.topo = &topo;
    search.dist = &dist;
    search.residual = &residual;
    search.dst = d.dst;
    search.total = dist[static_cast<std::size_t>(d.src)][static_cast<std::size_t>(d.dst)];
    search.current = {d.src};
    search.dfs(d.src, 0, std::numeric_limits<double>::infinity());
    require(!search.best.empty(), "sap: no shortest path found");
    for (std::size_t i = 0; i + 1 < search.best.size(); ++i)
      loads(topo.link_index(search.best[i], search.best[i + 1])) += d.volume;
    out.node_paths.push_back(std::move(search.best));
  }
  out.max_utilization = (loads.array() / caps.array()).maxCoeff();
  out.wall_clock_s = elapsed_s(start);
  return out;
}

// ---- Simulated annealing ----------------------------------------------------

AnnealSchedule AnnealSchedule::derive(double t0, double t_end, std::int64_t steps) {
  if (!(t0 > t_end) || !(t_end > 0.0))
    throw ValidationError("anneal schedule: need t0 > t_end > 0");
  if (steps <= 0) throw ValidationError("anneal schedule: need a positive step count");
  AnnealSchedule s;
  s.t0 = t0;
  s.t_end = t_end;
  s.steps = steps;
  s.decay = std::pow(t_end / t0, 1.0 / static_cast<double>(steps));
  return s;
}

namespace {

// Candidate middlepoint paths for every (demand, action) pair, flattened.
struct MoveTable {
  std::vector<Demand> demands;
  std::vector<std::vector<std::vector<int>>> paths;  // [demand][action] -> link seq
  std::vector<std::vector<int>> actions;             // [demand] -> middlepoints

  MoveTable(const Env& env) {
    demands = env.demands();
    const int n = env.topology().nodes();
    paths.resize(demands.size());
    actions.resize(demands.size());
    for (std::size_t i = 0; i < demands.size(); ++i) {
      actions[i] = action_set(env.topology(), demands[i].src);
      paths[i].reserve(static_cast<std::size_t>(n - 1));
      for (int m : actions[i])
        paths[i].push_back(middlepoint_path(env.table(), demands[i].src, demands[i].dst, m).links);
    }
  }
};

struct SaState {
  Vector loads, caps;
  double energy = 0.0;
  int arg_max = 0;

  void refresh_max() {
    energy = 0.0;
    arg_max = 0;
    for (int l = 0; l < loads.size(); ++l) {
      const double u = loads(l) / caps(l);
      if (u > energy) {
        energy = u;
        arg_max = l;
      }
    }
  }
};

// Energy of the state after moving demand i to action a, without mutating
// anything. `delta` is scratch storage for the touched links.
double trial_energy(const SaState& st, const std::vector<int>& old_path,
                    const std::vector<int>& new_path, double volume,
                    std::vector<std::pair<int, double>>& delta) {
  delta.clear();
  auto add = [&delta](int id, double v) {
    for (auto& [l, dv] : delta)
      if (l == id) {
        dv += v;
        return;
      }
    delta.emplace_back(id, v);
  };
  for (int id : old_path) add(id, -volume);
  for (int id : new_path) add(id, volume);

  double touched_max = 0.0;
  bool argmax_touched = false;
  for (const auto& [l, dv] : delta) {
    touched_max = std::max(touched_max, (st.loads(l) + dv) / st.caps(l));
    if (l == st.arg_max) argmax_touched = true;
  }
  double untouched_max = st.energy;
  if (argmax_touched) {
    untouched_max = 0.0;
    for (int l = 0; l < st.loads.size(); ++l) {
      bool touched = false;
      for (const auto& [tl, dv] : delta)
        if (tl == l) {
          touched = true;
          break;
        }
      if (!touched) untouched_max = std::max(untouched_max, st.loads(l) / st.caps(l));
    }
  }
  return std::max(touched_max, untouched_max);
}

}  // namespace

AnnealSchedule AnnealSchedule::calibrate(const Topology& topo, const PathTable& table,
                                         const TrafficMatrix& tm, std::int64_t steps, Rng& rng) {
  Env env(topo, table, tm);
  const MoveTable moves(env);
  SaState st{env.loads(), env.capacities(), 0.0, 0};
  st.refresh_max();
  std::vector<int> assignment;
  for (const Demand& d : moves.demands) assignment.push_back(d.dst);

  std::vector<double> magnitudes;
  std::vector<std::pair<int, double>> delta;
  const int probe_moves = 1000;
  for (int k = 0; k < probe_moves; ++k) {
    const int i = rng.uniform_int(static_cast<int>(moves.demands.size()));
    const int a = rng.uniform_int(static_cast<int>(moves.actions[static_cast<std::size_t>(i)].size()));
    const auto& old_path =
        moves.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(
            std::find(moves.actions[static_cast<std::size_t>(i)].begin(),
                      moves.actions[static_cast<std::size_t>(i)].end(),
                      assignment[static_cast<std::size_t>(i)]) -
            moves.actions[static_cast<std::size_t>(i)].begin())];
    const auto& new_path = moves.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    const double new_energy = trial_energy(st, old_path, new_path,
                                           moves.demands[static_cast<std::size_t>(i)].volume, delta);
    magnitudes.push_back(std::abs(new_energy - st.energy));
    // Random walk: always take the move.
    for (const auto& [l, dv] : delta) st.loads(l) += dv;
    assignment[static_cast<std::size_t>(i)] = moves.actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    st.refresh_max();
  }
  std::sort(magnitudes.begin(), magnitudes.end());
  double t0 = magnitudes[static_cast<std::size_t>(0.9 * (magnitudes.size() - 1))];
  if (!(t0 > 1e-8)) t0 = 1e-3;
  return derive(t0, 1e-5, steps);
}

Assignment simulated_annealing(const Topology& topo, const PathTable& table,
                               const TrafficMatrix& tm, const AnnealSchedule& schedule, Rng& rng) {
  if (!(schedule.decay > 0.0 && schedule.decay < 1.0))
    throw ValidationError("simulated_annealing: schedule not derived (decay unset)");
  const auto start = Clock::now();
  Env env(topo, table, tm);
  const MoveTable moves(env);
  const int demand_count = static_cast<int>(moves.demands.size());
  const int n = topo.nodes();

  SaState st{env.loads(), env.capacities(), 0.0, 0};
  st.refresh_max();
  std::vector<int> assignment, action_index;
  for (const Demand& d : moves.demands) {
    assignment.push_back(d.dst);
    // Position of dst in the ascending action set (skip src).
    action_index.push_back(d.dst < d.src ? d.dst : d.dst - 1);
  }

  std::vector<int> best_assignment = assignment;
  double best_energy = st.energy;

  double temperature = schedule.t0;
  std::int64_t accepted = 0;
  std::vector<std::pair<int, double>> delta;
  for (std::int64_t step = 0; step < schedule.steps; ++step, temperature *= schedule.decay) {
    const int i = rng.uniform_int(demand_count);
    const int a = rng.uniform_int(n - 1);
    const int old_a = action_index[static_cast<std::size_t>(i)];
    if (a == old_a) continue;  // no-op proposal
    const auto& old_path = moves.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(old_a)];
    const auto& new_path = moves.paths[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    const double volume = moves.demands[static_cast<std::size_t>(i)].volume;
    const double new_energy = trial_energy(st, old_path, new_path, volume, delta);
    const double de = new_energy - st.energy;
    bool accept = de <= 0.0;
    if (!accept) accept = rng.uniform01() < std::exp(-de / temperature);
    if (!accept) continue;

    for (const auto& [l, dv] : delta) st.loads(l) += dv;
    action_index[static_cast<std::size_t>(i)] = a;
    assignment[static_cast<std::size_t>(i)] = moves.actions[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
    st.refresh_max();
    ++accepted;
    if (accepted % 10'000 == 0) {
      // Incremental-vs-fresh audit.
      Vector fresh = Vector::Zero(st.loads.size());
      for (std::size_t j = 0; j < moves.demands.size(); ++j) {
        const auto& links = moves.paths[j][static_cast<std::size_t>(action_index[j])];
        for (int id : links) fresh(id) += moves.demands[j].volume;
      }
      if ((fresh - st.loads).cwiseAbs().maxCoeff() > 1e-9)
        throw NumericError("simulated_annealing: incremental loads drifted");
    }
    if (st.energy < best_energy) {
      best_energy = st.energy;
      best_assignment = assignment;
    }
  }

  Assignment out;
  out.middlepoints = std::move(best_assignment);
  out.max_utilization = replay_assignment(topo, table, tm, out.middlepoints);
  out.steps = schedule.steps;
  out.wall_clock_s = elapsed_s(start);
  return out;
}

// ---- Brute force -------------------------------------------------------------

namespace {

struct BruteSearch {
  const MoveTable* moves;
  Vector loads, caps;
  std::vector<int> current, best;
  double best_energy = std::numeric_limits<double>::infinity();

  void dfs(std::size_t depth) {
    if (depth == moves->demands.size()) {
      const double e = (loads.array() / caps.array()).maxCoeff();
      if (e < best_energy) {
        best_energy = e;
        best = current;
      }
      return;
    }
    const double volume = moves->demands[depth].volume;
    for (std::size_t a = 0; a < moves->actions[depth].size(); ++a) {
      const auto& links = moves->paths[depth][a];
      for (int id : links) loads(id) += volume;
      current.push_back(moves->actions[depth][a]);
      dfs(depth + 1);
      current.pop_back();
      for (int id : links) loads(id) -= volume;
    }
  }
};

}  // namespace

Assignment brute_force(const Topology& topo, const PathTable& table, const TrafficMatrix& tm) {
  if (topo.nodes() > 4)
    throw ValidationError("brute_force: only instances with at most 4 nodes are enumerable");
  const auto start = Clock::now();
  Env env(topo, table, tm);
  const MoveTable moves(env);
  BruteSearch search;
  search.moves = &moves;
  search.loads = Vector::Zero(topo.num_links());
  search.caps = env.capacities();
  search.dfs(0);

  Assignment out;
  out.middlepoints = std::move(search.best);
  out.max_utilization = replay_assignment(topo, table, tm, out.middlepoints);
  std::int64_t leaves = 1;
  for (std::size_t i = 0; i < moves.demands.size(); ++i)
    leaves *= static_cast<std::int64_t>(topo.nodes() - 1);
  out.steps = leaves;
  out.wall_clock_s = elapsed_s(start);
  return out;
}

}  // namespace mrte
