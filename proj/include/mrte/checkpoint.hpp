#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "mrte/adam.hpp"
#include "mrte/tensor.hpp"

namespace mrte {

// JSON (de)serialization for named weight blocks and optimizer state.
// nlohmann/json emits shortest round-trip decimal for doubles, so values
// survive save/load bit-exactly.

nlohmann::json tensors_to_json(const std::vector<ParamTensor*>& params);
void tensors_from_json(const nlohmann::json& j, const std::vector<ParamTensor*>& params);

nlohmann::json adam_state_to_json(const AdamOptimizer& opt);
void adam_state_from_json(const nlohmann::json& j, AdamOptimizer& opt);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

void write_json_file(const std::string& path, const nlohmann::json& j);
nlohmann::json read_json_file(const std::string& path);

}  // namespace mrte
