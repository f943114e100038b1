#include "mrte/checkpoint.hpp"

#include <fstream>

#include "mrte/error.hpp"

namespace mrte {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json j;
  j["shape"] = {m.rows(), m.cols()};
  std::vector<double> flat(static_cast<std::size_t>(m.size()));
  // Column-major, matching Eigen's storage.
  Eigen::Map<Matrix>(flat.data(), m.rows(), m.cols()) = m;
  j["values"] = flat;
  return j;
}

Matrix matrix_from_json(const json& j) {
  const auto shape = j.at("shape").get<std::vector<Index>>();
  if (shape.size() != 2) throw ValidationError("matrix_from_json: shape must have 2 entries");
  const auto flat = j.at("values").get<std::vector<double>>();
  if (static_cast<Index>(flat.size()) != shape[0] * shape[1])
    throw ValidationError("matrix_from_json: value count does not match shape");
  return Eigen::Map<const Matrix>(flat.data(), shape[0], shape[1]);
}

json tensors_to_json(const std::vector<ParamTensor*>& params) {
  json j = json::object();
  for (const ParamTensor* p : params) j[p->name] = matrix_to_json(p->values);
  return j;
}

void tensors_from_json(const json& j, const std::vector<ParamTensor*>& params) {
  for (ParamTensor* p : params) {
    if (!j.contains(p->name))
      throw ValidationError("checkpoint: missing tensor '" + p->name + "'");
    Matrix m = matrix_from_json(j.at(p->name));
    if (m.rows() != p->rows() || m.cols() != p->cols())
      throw ValidationError("checkpoint: shape mismatch for tensor '" + p->name + "'");
    p->values = std::move(m);
    p->zero_grad();
  }
}

json adam_state_to_json(const AdamOptimizer& opt) {
  const AdamOptimizer::State s = opt.state();
  json j;
  j["steps"] = s.steps;
  j["updates"] = s.updates;
  j["learning_rate"] = s.lr;
  json m = json::array(), v = json::array();
  for (const Matrix& x : s.m) m.push_back(matrix_to_json(x));
  for (const Matrix& x : s.v) v.push_back(matrix_to_json(x));
  j["m"] = std::move(m);
  j["v"] = std::move(v);
  return j;
}

void adam_state_from_json(const json& j, AdamOptimizer& opt) {
  AdamOptimizer::State s;
  s.steps = j.at("steps").get<std::int64_t>();
  s.updates = j.at("updates").get<std::int64_t>();
  s.lr = j.at("learning_rate").get<double>();
  for (const auto& x : j.at("m")) s.m.push_back(matrix_from_json(x));
  for (const auto& x : j.at("v")) s.v.push_back(matrix_from_json(x));
  opt.restore(s);
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open for writing: " + path);
  out << j.dump(1) << '\n';
  if (!out) throw ValidationError("write failed: " + path);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open: " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("JSON parse error in " + path + ": " + e.what());
  }
}

}  // namespace mrte
