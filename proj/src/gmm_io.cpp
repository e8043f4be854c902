#include "baryflow/gmm_io.hpp"

#include <fstream>

namespace baryflow {

using nlohmann::json;

json gmm_to_json(const LabeledGMM<double>& gmm)
{
    json j;
    j["schema_version"] = kGmmSchemaVersion;
    j["weights"] = std::vector<double>(gmm.weights().data(), gmm.weights().data() + gmm.size());
    json means = json::array(), chols = json::array();
    for (const auto& c : gmm.components()) {
        means.push_back(std::vector<double>(c.mean().data(), c.mean().data() + c.dim()));
        json rows = json::array();
        for (Index r = 0; r < c.dim(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(c.dim()));
            for (Index k = 0; k < c.dim(); ++k) row[static_cast<std::size_t>(k)] = c.chol()(r, k);
            rows.push_back(row);
        }
        chols.push_back(rows);
    }
    j["means"] = means;
    j["cholesky_rows"] = chols;
    if (gmm.labels()) {
        json labels = json::array();
        for (Index i = 0; i < gmm.size(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(gmm.n_classes()));
            for (int c = 0; c < gmm.n_classes(); ++c) row[static_cast<std::size_t>(c)] = (*gmm.labels())(i, c);
            labels.push_back(row);
        }
        j["labels"] = labels;
    } else {
        j["labels"] = nullptr;
    }
    return j;
}

namespace {

std::vector<double> number_row(const json& v, const std::string& what)
{
    if (!v.is_array()) throw ValidationError("gmm json: '" + what + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) throw ValidationError("gmm json: '" + what + "' must contain numbers only");
        out.push_back(x.get<double>());
    }
    return out;
}

} // namespace

LabeledGMM<double> gmm_from_json(const json& j)
{
    if (!j.is_object()) throw ValidationError("gmm json: document must be an object");
    for (const auto& [key, _] : j.items())
        if (key != "schema_version" && key != "weights" && key != "means" && key != "cholesky_rows" && key != "labels")
            throw ValidationError("gmm json: unknown key '" + key + "'");
    for (const char* key : {"weights", "means", "cholesky_rows"})
        if (!j.contains(key)) throw ValidationError(std::string("gmm json: missing key '") + key + "'");
    if (j.contains("schema_version") && j["schema_version"] != kGmmSchemaVersion)
        throw ValidationError("gmm json: unsupported schema_version");

    const auto w = number_row(j["weights"], "weights");
    const auto& means = j["means"];
    const auto& chols = j["cholesky_rows"];
    const std::size_t n = w.size();
    if (!means.is_array() || means.size() != n) throw ValidationError("gmm json: 'means' needs one row per weight");
    if (!chols.is_array() || chols.size() != n) throw ValidationError("gmm json: 'cholesky_rows' needs one matrix per weight");
    std::vector<GaussianComponent<double>> comps;
    for (std::size_t i = 0; i < n; ++i) {
        const auto mu = number_row(means[i], "means");
        const Index d = static_cast<Index>(mu.size());
        if (!chols[i].is_array() || chols[i].size() != mu.size())
            throw ValidationError("gmm json: 'cholesky_rows' entries must be d x d");
        Matrix<double> l(d, d);
        for (Index r = 0; r < d; ++r) {
            const auto row = number_row(chols[i][static_cast<std::size_t>(r)], "cholesky_rows");
            if (static_cast<Index>(row.size()) != d) throw ValidationError("gmm json: 'cholesky_rows' entries must be d x d");
            for (Index c = 0; c < d; ++c) l(r, c) = row[static_cast<std::size_t>(c)];
        }
        comps.emplace_back(Eigen::Map<const Vector<double>>(mu.data(), d), std::move(l));
    }
    std::optional<Matrix<double>> nu;
    if (j.contains("labels") && !j["labels"].is_null()) {
        const auto& lab = j["labels"];
        if (!lab.is_array() || lab.size() != n) throw ValidationError("gmm json: 'labels' needs one row per component");
        Index c = -1;
        Matrix<double> m;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = number_row(lab[i], "labels");
            if (c < 0) {
                c = static_cast<Index>(row.size());
                m.resize(static_cast<Index>(n), c);
            }
            if (static_cast<Index>(row.size()) != c) throw ValidationError("gmm json: 'labels' rows differ in length");
            for (Index k = 0; k < c; ++k) m(static_cast<Index>(i), k) = row[static_cast<std::size_t>(k)];
        }
        nu = std::move(m);
    }
    return LabeledGMM<double>(Eigen::Map<const Vector<double>>(w.data(), static_cast<Index>(n)), std::move(comps),
                              std::move(nu));
}

void save_gmm(const std::string& path, const LabeledGMM<double>& gmm)
{
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << gmm_to_json(gmm).dump(2) << '\n';
}

LabeledGMM<double> load_gmm(const std::string& path)
{
    std::ifstream is(path);
    if (!is) throw ValidationError("cannot open mixture file '" + path + "'");
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ValidationError("mixture file '" + path + "': " + e.what());
    }
    return gmm_from_json(j);
}

} // namespace baryflow
