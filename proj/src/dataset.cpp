#include "mrte/dataset.hpp"

#include <filesystem>
#include <fstream>

#include "mrte/checkpoint.hpp"
#include "mrte/error.hpp"

namespace mrte {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct InstanceFiles {
  std::string topology, tm;
  std::uint64_t seed = 0;
  double scale = 1.0;
};

std::shared_ptr<const Instance> build_instance(const DatasetSpec& spec, std::uint64_t inst_seed) {
  Rng rng(inst_seed);
  const TrafficMatrix raw = gravity_tm(spec.base_topology, spec.total_volume, rng);
  CalibratedInstance cal = assign_capacities(spec.base_topology, raw, spec.profile);
  return make_instance(std::move(cal.topology), std::move(cal.tm), inst_seed, cal.scale);
}

std::uint64_t instance_seed(const DatasetSpec& spec, const std::string& split, int index) {
  const std::uint64_t tag = split == "train" ? 0x7472u : 0x6576u;
  return splitmix64(splitmix64(spec.seed) ^ splitmix64(tag * 1000003ULL + static_cast<std::uint64_t>(index)));
}

}  // namespace

Dataset generate_dataset_in_memory(const DatasetSpec& spec) {
  spec.profile.validate();
  require(spec.total_volume > 0.0, "dataset: total volume must be positive");
  Dataset ds;
  ds.name = spec.name;
  for (int i = 0; i < spec.train_count; ++i)
    ds.train.push_back(build_instance(spec, instance_seed(spec, "train", i)));
  for (int i = 0; i < spec.eval_count; ++i)
    ds.eval.push_back(build_instance(spec, instance_seed(spec, "eval", i)));
  return ds;
}

Dataset generate_dataset(const DatasetSpec& spec, const std::string& out_dir) {
  Dataset ds = generate_dataset_in_memory(spec);
  fs::create_directories(out_dir);

  json manifest;
  manifest["format"] = "mrte-dataset";
  manifest["version"] = 1;
  manifest["name"] = spec.name;
  manifest["seed"] = spec.seed;
  manifest["total_volume"] = spec.total_volume;
  manifest["profile"] = {{"candidates", spec.profile.candidates},
                         {"band_lo", spec.profile.band_lo},
                         {"band_hi", spec.profile.band_hi}};
  for (const std::string split : {"train", "eval"}) {
    const InstancePool& pool = split == std::string("train") ? ds.train : ds.eval;
    json list = json::array();
    for (std::size_t i = 0; i < pool.size(); ++i) {
      char suffix[32];
      std::snprintf(suffix, sizeof suffix, "%s_%03zu.json", split.c_str(), i);
      const std::string topo_file = std::string("topology_") + suffix;
      const std::string tm_file = std::string("tm_") + suffix;
      pool[i]->topology.save(out_dir + "/" + topo_file);
      save_tm(out_dir + "/" + tm_file, pool[i]->tm);
      list.push_back({{"topology", topo_file},
                      {"tm", tm_file},
                      {"seed", pool[i]->seed},
                      {"scale", pool[i]->scale}});
    }
    manifest[split] = std::move(list);
  }
  write_json_file(out_dir + "/manifest.json", manifest);
  return ds;
}

Dataset load_dataset(const std::string& dir) {
  const json manifest = read_json_file(dir + "/manifest.json");
  if (manifest.value("format", "") != "mrte-dataset")
    throw ValidationError(dir + "/manifest.json: not a dataset manifest");
  Dataset ds;
  ds.name = manifest.value("name", "dataset");
  for (const std::string split : {"train", "eval"}) {
    if (!manifest.contains(split)) continue;
    InstancePool& pool = split == std::string("train") ? ds.train : ds.eval;
    for (const auto& entry : manifest.at(split)) {
      Topology topo = Topology::load(dir + "/" + entry.at("topology").get<std::string>());
      TrafficMatrix tm = load_tm(dir + "/" + entry.at("tm").get<std::string>());
      pool.push_back(make_instance(std::move(topo), std::move(tm),
                                   entry.value("seed", std::uint64_t{0}),
                                   entry.value("scale", 1.0)));
    }
  }
  return ds;
}

std::string bundled_topology_path(const std::string& name) {
  const std::string candidate = std::string(MRTE_DATA_DIR) + "/topologies/" + name + ".json";
  if (fs::exists(candidate)) return candidate;
  if (fs::exists(name)) return name;
  throw ValidationError("unknown topology '" + name + "' (no bundled file, not a path)");
}

Topology load_topology_by_name(const std::string& name) {
  return Topology::load(bundled_topology_path(name));
}

CapacityProfile default_profile(const std::string& topology_name) {
  if (topology_name == "nsfnet") return CapacityProfile::narrow();
  return CapacityProfile::wide();
}

double default_total_volume(const std::string& topology_name) {
  if (topology_name == "nsfnet") return 150000.0;
  return 600000.0;
}

}  // namespace mrte
