#include "support.hpp"

#include "baryflow/cli.hpp"
#include "baryflow/datasets.hpp"
#include "baryflow/gmm_io.hpp"

#include <json.hpp>

using namespace baryflow;
using nlohmann::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
};

using Command = int (*)(const std::string&, std::ostream&, std::ostream&);

Run run_config(Command cmd, const bft::TempDir& dir, const std::string& name, const json& config)
{
    const std::string path = dir / name;
    bft::write_file(path, config.dump(2));
    std::ostringstream out, err;
    const int code = cmd(path, out, err);
    return {code, out.str(), err.str()};
}

json empirical_config(const std::string& out_dir)
{
    return {{"command", "barycenter"},
            {"kind", "empirical"},
            {"inputs", json::array({{{"type", "gaussian"}, {"mean", {0.0}}, {"cov", {{1.0}}}},
                                    {{"type", "gaussian"}, {"mean", {4.0}}}})},
            {"flow", {{"n_particles", 64}, {"batch_size", 64}, {"n_iter", 20}}},
            {"seed", 3},
            {"output_dir", out_dir}};
}

std::vector<std::string> lines(const std::string& s)
{
    std::vector<std::string> out;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) out.push_back(l);
    return out;
}

} // namespace

TEST_CASE("barycenter command writes its artifacts")
{
    bft::TempDir dir("cli_bary");
    const auto r = run_config(cli::cmd_barycenter, dir, "c.json", empirical_config(dir / "out"));
    REQUIRE(r.code == cli::kOk);
    CHECK(r.err.empty());
    CHECK(std::filesystem::exists(dir / "out/barycenter.csv"));
    CHECK(std::filesystem::exists(dir / "out/trace.csv"));
    REQUIRE(std::filesystem::exists(dir / "out/report.json"));

    const auto report = json::parse(bft::read_file(dir / "out/report.json"));
    CHECK(report.at("schema_version") == 1);
    CHECK(report.at("command") == "barycenter");
    CHECK(report.at("config").at("seed") == 3);
    CHECK(report.at("git_describe").is_string());
    CHECK(report.contains("wall_ms"));

    const auto trace = lines(bft::read_file(dir / "out/trace.csv"));
    CHECK(trace.front() == "iter,B_hat,V,U,F,wall_ms");
    CHECK(trace.size() == 22);
    const auto table = load_csv(dir / "out/barycenter.csv");
    CHECK(table.features.rows() == 64);
}

TEST_CASE("barycenter command is deterministic")
{
    bft::TempDir dir("cli_det");
    REQUIRE(run_config(cli::cmd_barycenter, dir, "a.json", empirical_config(dir / "a")).code == 0);
    REQUIRE(run_config(cli::cmd_barycenter, dir, "b.json", empirical_config(dir / "b")).code == 0);
    CHECK(bft::read_file(dir / "a/trace.csv") == bft::read_file(dir / "b/trace.csv"));
    CHECK(bft::read_file(dir / "a/barycenter.csv") == bft::read_file(dir / "b/barycenter.csv"));
}

TEST_CASE("gmm barycenter command writes a mixture")
{
    bft::TempDir dir("cli_gmm");
    json c = {{"command", "barycenter"},
              {"kind", "gmm"},
              {"inputs", json::array({{{"type", "gaussian"}, {"mean", {0.0, 0.0}}},
                                      {{"type", "gaussian"}, {"mean", {2.0, 0.0}}, {"cov", {{2.0, 0.0}, {0.0, 0.5}}}}})},
              {"gmm_flow", {{"n_components", 1}, {"n_iter", 50}}},
              {"output_dir", dir / "out"}};
    REQUIRE(run_config(cli::cmd_barycenter, dir, "c.json", c).code == 0);
    const auto g = load_gmm(dir / "out/barycenter.json");
    CHECK(g.component(0).mean()(0) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(lines(bft::read_file(dir / "out/trace.csv")).front() == "iter,B_hat,V,U,F,wall_ms,mean_norm,chol_norm");
}

TEST_CASE("config errors exit with code 1 and name the key")
{
    bft::TempDir dir("cli_err");
    auto c = empirical_config(dir / "out");
    c["flow"]["n_partcles"] = 10;
    auto r = run_config(cli::cmd_barycenter, dir, "typo.json", c);
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.rfind("error[config]: ", 0) == 0);
    CHECK(r.err.find("flow.n_partcles") != std::string::npos);

    c = empirical_config(dir / "out");
    c["flow"]["n_iter"] = "many";
    r = run_config(cli::cmd_barycenter, dir, "type.json", c);
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("flow.n_iter") != std::string::npos);

    c = empirical_config(dir / "out");
    c["inputs"][0]["cov"] = {{-1.0}};
    CHECK(run_config(cli::cmd_barycenter, dir, "cov.json", c).code == cli::kConfigError);

    c = empirical_config(dir / "out");
    c["command"] = "toy";
    CHECK(run_config(cli::cmd_barycenter, dir, "cmd.json", c).code == cli::kConfigError);

    bft::write_file(dir / "broken.json", "{\"command\": ");
    std::ostringstream out, err;
    CHECK(cli::cmd_barycenter(dir / "broken.json", out, err) == cli::kConfigError);
    CHECK(cli::cmd_barycenter(dir / "absent.json", out, err) == cli::kConfigError);
    CHECK(!std::filesystem::exists(dir / "out"));
}

TEST_CASE("validate only parses")
{
    bft::TempDir dir("cli_validate");
    auto r = run_config(cli::cmd_validate, dir, "ok.json", empirical_config(dir / "out"));
    CHECK(r.code == 0);
    CHECK(!std::filesystem::exists(dir / "out"));
    auto bad = empirical_config(dir / "out");
    bad["extra"] = true;
    r = run_config(cli::cmd_validate, dir, "bad.json", bad);
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("extra") != std::string::npos);
    r = run_config(cli::cmd_validate, dir, "none.json", json{{"command", "fly"}});
    CHECK(r.code == cli::kConfigError);
}

TEST_CASE("gen writes datasets")
{
    bft::TempDir dir("cli_gen");
    auto r = run_config(cli::cmd_gen, dir, "s.json",
                        {{"command", "gen"}, {"dataset", "swiss_roll"}, {"n", 100}, {"output_dir", dir / "roll"}});
    REQUIRE(r.code == 0);
    CHECK(load_csv(dir / "roll/swiss_roll.csv", std::string("label")).features.rows() == 100);

    r = run_config(cli::cmd_gen, dir, "f.json",
                   {{"command", "gen"}, {"dataset", "family"}, {"n", 50}, {"k", 3}, {"output_dir", dir / "fam"}});
    REQUIRE(r.code == 0);
    for (int k = 0; k < 3; ++k) CHECK(std::filesystem::exists(dir / ("fam/family_" + std::to_string(k) + ".csv")));
    CHECK(std::filesystem::exists(dir / "fam/reference.csv"));

    r = run_config(cli::cmd_gen, dir, "m.json",
                   {{"command", "gen"}, {"dataset", "msda"}, {"samples_per_domain", 60}, {"output_dir", dir / "msda"}});
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "msda/source_2.csv"));
    CHECK(load_csv(dir / "msda/target.csv", std::string("label")).features.rows() == 60);

    r = run_config(cli::cmd_gen, dir, "x.json", {{"command", "gen"}, {"dataset", "mnist"}, {"output_dir", dir / "x"}});
    CHECK(r.code == cli::kConfigError);
}

TEST_CASE("discrete baseline from generated csv inputs")
{
    bft::TempDir dir("cli_base");
    REQUIRE(run_config(cli::cmd_gen, dir, "g.json",
                       {{"command", "gen"}, {"dataset", "family"}, {"n", 80}, {"k", 2}, {"output_dir", dir / "fam"}})
                .code == 0);
    json c = {{"command", "barycenter"},
              {"kind", "discrete_baseline"},
              {"inputs", json::array({{{"type", "csv"}, {"path", dir / "fam/family_0.csv"}, {"label_column", "label"}},
                                      {{"type", "csv"}, {"path", dir / "fam/family_1.csv"}, {"label_column", "label"}}})},
              {"flow", {{"n_particles", 80}, {"batch_size", 80}, {"n_iter", 10}}},
              {"output_dir", dir / "out"}};
    const auto r = run_config(cli::cmd_barycenter, dir, "b.json", c);
    REQUIRE(r.code == 0);
    const auto t = load_csv(dir / "out/barycenter.csv", std::string("label"));
    CHECK(t.features.rows() == 80);
    CHECK(t.labels.has_value());

    c["inputs"][0] = {{"type", "gaussian"}, {"mean", {0.0, 0.0}}};
    CHECK(run_config(cli::cmd_barycenter, dir, "g2.json", c).code == cli::kConfigError);
}

TEST_CASE("toy command writes the solver table")
{
    bft::TempDir dir("cli_toy");
    const json c = {{"command", "toy"},
                    {"n_samples", 120},
                    {"solvers", {"wgf", "fixed-point"}},
                    {"flow", {{"n_particles", 64}, {"batch_size", 64}, {"n_iter", 30}}},
                    {"output_dir", dir / "out"}};
    const auto r = run_config(cli::cmd_toy, dir, "t.json", c);
    REQUIRE(r.code == 0);
    const auto table = lines(bft::read_file(dir / "out/table.csv"));
    REQUIRE(table.size() == 4);
    CHECK(table[0] == "solver,w2_to_ref,wall_ms");
    CHECK(table[1].rfind("init,", 0) == 0);
    CHECK(table[2].rfind("wgf,", 0) == 0);
    CHECK(table[3].rfind("fixed-point,", 0) == 0);
    CHECK(std::filesystem::exists(dir / "out/reference.csv"));

    json bad = c;
    bad["solvers"] = {"sgd"};
    CHECK(run_config(cli::cmd_toy, dir, "bad.json", bad).code == cli::kConfigError);
}

TEST_CASE("msda command writes the ablation table")
{
    bft::TempDir dir("cli_msda");
    const json c = {{"command", "msda"},
                    {"task", {{"type", "synthetic"}, {"samples_per_domain", 90}}},
                    {"flow", {{"n_particles", 90}, {"batch_size", 64}, {"n_iter", 20}}},
                    {"seeds", {0}},
                    {"combos", {"B", "B+V+U"}},
                    {"output_dir", dir / "out"}};
    const auto r = run_config(cli::cmd_msda, dir, "m.json", c);
    REQUIRE(r.code == 0);
    const auto table = lines(bft::read_file(dir / "out/ablation.csv"));
    REQUIRE(table.size() == 3);
    CHECK(table[0] == "combo,accuracy_source_only,accuracy_adapted,n_seeds");
    CHECK(table[1].rfind("B,", 0) == 0);
    CHECK(table[2].rfind("B+V+U,", 0) == 0);
    const auto report = json::parse(bft::read_file(dir / "out/report.json"));
    CHECK(report.at("command") == "msda");

    json bad = c;
    bad["combos"] = {"B+W"};
    CHECK(run_config(cli::cmd_msda, dir, "bad.json", bad).code == cli::kConfigError);
}

TEST_CASE("msda with a missing target file exits with code 1")
{
    bft::TempDir dir("cli_msda_csv");
    REQUIRE(run_config(cli::cmd_gen, dir, "g.json",
                       {{"command", "gen"}, {"dataset", "msda"}, {"samples_per_domain", 60}, {"output_dir", dir / "d"}})
                .code == 0);
    json c = {{"command", "msda"},
              {"task",
               {{"type", "csv"},
                {"sources", {dir / "d/source_0.csv", dir / "d/source_1.csv"}},
                {"target", dir / "d/missing.csv"}}},
              {"flow", {{"n_particles", 60}, {"batch_size", 60}, {"n_iter", 10}}},
              {"seeds", {0}},
              {"combos", {"B"}},
              {"output_dir", dir / "out"}};
    auto r = run_config(cli::cmd_msda, dir, "m.json", c);
    CHECK(r.code == cli::kConfigError);
    CHECK(r.err.find("missing.csv") != std::string::npos);

    c["task"]["target"] = dir / "d/target.csv";
    r = run_config(cli::cmd_msda, dir, "ok.json", c);
    CHECK(r.code == 0);
}

TEST_CASE("run dispatches subcommands")
{
    bft::TempDir dir("cli_run");
    bft::write_file(dir / "c.json", empirical_config(dir / "out").dump());
    std::string a0 = "baryflow", a1 = "--threads", a2 = "1", a3 = "validate", a4 = dir / "c.json";
    char* ok[] = {a0.data(), a1.data(), a2.data(), a3.data(), a4.data()};
    CHECK(cli::run(5, ok) == 0);
    std::string bogus = "fly";
    char* bad[] = {a0.data(), bogus.data()};
    CHECK(cli::run(2, bad) == cli::kConfigError);
    char* none[] = {a0.data()};
    CHECK(cli::run(1, none) == cli::kConfigError);
    CHECK(!cli::git_describe().empty());
}
