#pragma once

#include "baryflow/flow_empirical.hpp"
#include "baryflow/flow_gmm.hpp"
#include "baryflow/pipeline.hpp"

#include <json.hpp>

#include <optional>
#include <set>
#include <string>
#include <vector>

namespace baryflow::cli {

using nlohmann::json;

/// Typed access to a JSON object; finish() rejects keys that were never read.
class ConfigReader {
public:
    ConfigReader(const json& j, std::string path);

    bool has(const std::string& key) const;
    const json& raw(const std::string& key);
    void skip(const std::string& key) { used_.insert(key); }
    ConfigReader child(const std::string& key);
    std::vector<ConfigReader> children(const std::string& key);

    double number(const std::string& key, std::optional<double> fallback = std::nullopt);
    long long integer(const std::string& key, std::optional<long long> fallback = std::nullopt);
    std::uint64_t seed(const std::string& key, std::uint64_t fallback);
    bool boolean(const std::string& key, std::optional<bool> fallback = std::nullopt);
    std::string string(const std::string& key, std::optional<std::string> fallback = std::nullopt);
    std::vector<double> numbers(const std::string& key);
    std::vector<std::string> strings(const std::string& key);
    Matrix<double> matrix(const std::string& key);

    void finish() const;
    std::string where(const std::string& key) const;
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

private:
    const json* j_;
    std::string path_;
    std::set<std::string> used_;
};

json load_json(const std::string& path);

struct InputSpec {
    std::string type; // gaussian, gmm, csv, swiss_roll
    Vector<double> mean;
    Matrix<double> cov;
    std::string path;
    std::optional<std::string> label_column;
    Index n = 0;
    double noise_std = 0;
    int n_classes = 4;
    std::uint64_t seed = 0;
};

InputSpec read_input(ConfigReader r);
SolverChoice read_solver(ConfigReader r);
void read_flow(ConfigReader r, EmpiricalFlowConfig& cfg);
void read_gmm_flow(ConfigReader r, GmmFlowConfig& cfg);
void read_functional(ConfigReader r, FunctionalSpec<double>& f, std::optional<InputSpec>& target);
MsdaTaskOptions read_task_options(ConfigReader& r);

} // namespace baryflow::cli
