#pragma once

#include "baryflow/gaussian.hpp"

#include <json.hpp>

#include <string>

namespace baryflow {

inline constexpr int kGmmSchemaVersion = 1;

/// {"schema_version", "weights": [n], "means": [n][d], "cholesky_rows": [n][d][d], "labels": [n][C] | null}
nlohmann::json gmm_to_json(const LabeledGMM<double>& gmm);
LabeledGMM<double> gmm_from_json(const nlohmann::json& j);

void save_gmm(const std::string& path, const LabeledGMM<double>& gmm);
LabeledGMM<double> load_gmm(const std::string& path);

} // namespace baryflow
