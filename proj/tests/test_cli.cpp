#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include <gtest/gtest.h>
#include <json.hpp>

#include "dnlspde/cli/config.hpp"
#include "dnlspde/cli/run.hpp"

using namespace dnlspde;
using namespace dnlspde::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("dnlspde_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

int tool(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + " " + DNLSPDE_TOOL_PATH + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "run.toml";
    std::ofstream(p) << text;
    return p;
}

const char* kSmall = R"(
[grid]
n_interior = 8
[time]
T = 0.5
N = 8
[montecarlo]
paths = 6
eps_list = [0.1, 0.01]
[validate]
samples = 2000
)";

} // namespace

TEST(Config, EmptyDocumentGivesDefaults) {
    const auto c = parse_config_string("");
    EXPECT_FALSE(c.experiment.has_value());
    EXPECT_EQ(c.grid.n_interior, 32u);
    EXPECT_EQ(c.coefficients.p, 4.0);
    EXPECT_EQ(c.coefficients.b, "wave");
    EXPECT_EQ(c.montecarlo.paths, 64u);
    EXPECT_EQ(c.output.directory, "out");
}

TEST(Config, ReadsValuesAndExperiment) {
    const auto c = parse_config_string("experiment = \"ldp\"\n[grid]\nn_interior = 5\nlength = 2.0\n"
                                       "[coefficients]\nb = \"linear\"\n[montecarlo]\neps_list = [0.5, 0.25]\n");
    ASSERT_TRUE(c.experiment.has_value());
    EXPECT_EQ(*c.experiment, Experiment::ldp);
    EXPECT_EQ(c.grid.n_interior, 5u);
    EXPECT_EQ(c.grid.length, 2.0);
    EXPECT_EQ(c.coefficients.beta, 1.0);
    EXPECT_EQ(c.coefficients.gamma, 0.0);
    EXPECT_EQ(c.montecarlo.eps_list, (std::vector<double>{0.5, 0.25}));
}

TEST(Config, RangeErrorNamesTheKey) {
    try {
        parse_config_string("[time]\nN = 0\n");
        FAIL();
    } catch (const ConfigError& e) {
        ASSERT_EQ(e.errors().size(), 1u);
        EXPECT_EQ(e.errors()[0].rfind("time.N", 0), 0u) << e.errors()[0];
    }
}

TEST(Config, UnknownKeySuggestsNearest) {
    try {
        parse_config_string("[grid]\nn_interor = 4\n");
        FAIL();
    } catch (const ConfigError& e) {
        ASSERT_FALSE(e.errors().empty());
        EXPECT_NE(e.errors()[0].find("grid.n_interior"), std::string::npos) << e.errors()[0];
    }
    EXPECT_THROW(parse_config_string("[gird]\nn_interior = 4\n"), ConfigError);
}

TEST(Config, AllErrorsAreReported) {
    try {
        parse_config_string("[time]\nT = -1.0\nN = 0\n[grid]\nlength = 0.0\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.errors().size(), 3u);
    }
}

TEST(Config, SyntaxErrorCarriesPosition) {
    try {
        parse_config_string("[grid\nn = 1\n", "bad.toml");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.errors()[0].rfind("bad.toml:1:", 0), 0u) << e.errors()[0];
    }
}

TEST(Config, WrongTypeIsAnError) {
    EXPECT_THROW(parse_config_string("[grid]\nn_interior = \"many\"\n"), ConfigError);
    EXPECT_THROW(parse_config_string("[coefficients]\nflux = \"cubic\"\n"), ConfigError);
}

TEST(Config, EditDistance) {
    EXPECT_EQ(edit_distance("kitten", "sitting"), 3u);
    EXPECT_EQ(edit_distance("", "abc"), 3u);
    EXPECT_EQ(nearest("n_interor", {"length", "n_interior"}), "n_interior");
}

TEST(Config, HashIgnoresWorkers) {
    auto a = parse_config_string("[montecarlo]\nworkers = 2\n");
    auto b = parse_config_string("[montecarlo]\nworkers = 7\n");
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(Run, ValidateDefaultsSucceeds) {
    const auto dir = scratch("validate");
    auto cfg = parse_config_string(kSmall);
    RunOptions opt;
    opt.experiment = Experiment::validate;
    opt.out_dir = dir.string();
    const auto res = run(cfg, opt);
    EXPECT_EQ(res.exit_code, kSuccess);
    EXPECT_TRUE(fs::exists(dir / "validation.json"));
    const auto m = manifest(dir);
    EXPECT_EQ(m["experiment"], "validate");
    EXPECT_EQ(m["exit_code"], 0);
    EXPECT_EQ(m["files"][0]["sha256"], sha256_hex(slurp(dir / "validation.json")));
}

TEST(Run, SkeletonFromZeroStaysZero) {
    const auto dir = scratch("skeleton_zero");
    auto cfg = parse_config_string(std::string(kSmall) + "[initial]\nkind = \"zero\"\n");
    RunOptions opt;
    opt.experiment = Experiment::skeleton;
    opt.out_dir = dir.string();
    ASSERT_EQ(run(cfg, opt).exit_code, kSuccess);
    std::istringstream in(slurp(dir / "trajectory.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,t,norm_B_l2,seminorm_w1p,residual,newton_iters");
    int rows = 0;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string step, t, nb, sw;
        std::getline(ls, step, ',');
        std::getline(ls, t, ',');
        std::getline(ls, nb, ',');
        std::getline(ls, sw, ',');
        EXPECT_EQ(std::stod(nb), 0.0);
        EXPECT_EQ(std::stod(sw), 0.0);
        ++rows;
    }
    EXPECT_EQ(rows, 9);
}

TEST(Run, IdenticalRerunsGiveIdenticalDigests) {
    const auto cfg = parse_config_string(kSmall);
    std::vector<std::vector<std::string>> digests;
    for (int i = 0; i < 2; ++i) {
        const auto dir = scratch("rerun" + std::to_string(i));
        RunOptions opt;
        opt.experiment = Experiment::simulate;
        opt.out_dir = dir.string();
        opt.workers = i == 0 ? 1 : 3;
        const auto res = run(cfg, opt);
        ASSERT_EQ(res.exit_code, kSuccess);
        std::vector<std::string> d;
        for (const auto& f : res.manifest.files) d.push_back(f.name + ":" + f.sha256);
        digests.push_back(d);
    }
    EXPECT_FALSE(digests[0].empty());
    EXPECT_EQ(digests[0], digests[1]);
}

TEST(Run, NoExperimentIsAConfigError) {
    const auto dir = scratch("noexp");
    RunOptions opt;
    opt.out_dir = dir.string();
    EXPECT_EQ(run(RunConfig{}, opt).exit_code, kConfigError);
    EXPECT_EQ(manifest(dir)["exit_code"], 2);
}

TEST(Run, SolverFailureStillWritesManifest) {
    const auto dir = scratch("fail");
    auto cfg = parse_config_string(std::string(kSmall) + "[initial]\namplitude = 80.0\n[solver]\nmax_iter = 1\n"
                                                        "regularize_initial = false\n");
    RunOptions opt;
    opt.experiment = Experiment::skeleton;
    opt.out_dir = dir.string();
    const auto res = run(cfg, opt);
    EXPECT_EQ(res.exit_code, kExperimentFailure);
    const auto m = manifest(dir);
    EXPECT_EQ(m["exit_code"], 1);
    EXPECT_FALSE(m["errors"].empty());
}

TEST(Tool, HelpAndVersionExitZero) {
    EXPECT_EQ(tool("--help"), 0);
    EXPECT_EQ(tool("--version"), 0);
}

TEST(Tool, UsageErrorsExitTwo) {
    EXPECT_EQ(tool(""), 2);
    EXPECT_EQ(tool("frobnicate"), 2);
    EXPECT_EQ(tool("--workers 0 validate"), 2);
}

TEST(Tool, BadConfigExitsTwoWithManifest) {
    const auto dir = scratch("tool_bad");
    const auto cfg = write_config(dir, "[time]\nN = 0\n");
    const auto out = dir / "out";
    EXPECT_EQ(tool("--config " + cfg.string() + " --out " + out.string() + " skeleton"), 2);
    const auto m = manifest(out);
    EXPECT_EQ(m["exit_code"], 2);
    EXPECT_EQ(m["experiment"], "skeleton");
    ASSERT_FALSE(m["errors"].empty());
    EXPECT_EQ(m["errors"][0].get<std::string>().rfind("time.N", 0), 0u);
    EXPECT_EQ(tool("--config " + (dir / "missing.toml").string() + " --out " + out.string() + " skeleton"), 2);
}

TEST(Tool, WorkerAndSeedPrecedence) {
    const auto dir = scratch("tool_workers");
    const auto cfg2 = dir / "workers.toml";
    std::ofstream(cfg2) << "[grid]\nn_interior = 4\n[time]\nN = 4\n[validate]\nsamples = 500\n"
                           "[montecarlo]\nworkers = 5\nbase_seed = 3\n";
    const auto a = dir / "a", b = dir / "b", c = dir / "c";
    ASSERT_EQ(tool("--config " + cfg2.string() + " --out " + a.string() + " validate"), 0);
    EXPECT_EQ(manifest(a)["workers"], 5);
    EXPECT_EQ(manifest(a)["seeds"]["base_seed"], 3);
    ASSERT_EQ(tool("--config " + cfg2.string() + " --out " + b.string() + " validate", "DNLSPDE_WORKERS=4"), 0);
    EXPECT_EQ(manifest(b)["workers"], 4);
    ASSERT_EQ(tool("--config " + cfg2.string() + " --out " + c.string() + " --workers 2 --seed 11 validate",
                   "DNLSPDE_WORKERS=4"),
              0);
    EXPECT_EQ(manifest(c)["workers"], 2);
    EXPECT_EQ(manifest(c)["seeds"]["base_seed"], 11);
    EXPECT_EQ(manifest(a)["config_hash"], manifest(b)["config_hash"]);
}

TEST(Tool, EveryExperimentRunsOnASmallConfig) {
    const auto dir = scratch("tool_all");
    const auto cfg = write_config(dir, R"(
[grid]
n_interior = 6
[time]
T = 0.5
N = 8
[montecarlo]
paths = 8
eps_list = [0.5]
[optimizer]
max_iter = 40
[event]
target = "skeleton"
radius = 0.2
[ergodic]
horizon = 2.0
window = 0.5
tau = 0.05
dissipativity_samples = 200
moment_paths = 4
semigroup_paths = 4
[coefficients]
b = "linear"
sigma = "saturating"
[validate]
samples = 500
[convergence]
levels = 2
frequencies = [1, 2]
)");
    for (const char* e : {"validate", "skeleton", "simulate", "ldp", "invariant", "convergence"}) {
        const auto out = dir / e;
        const int rc = tool("--config " + cfg.string() + " --out " + out.string() + " " + e);
        EXPECT_EQ(rc, 0) << e;
        const auto m = manifest(out);
        EXPECT_EQ(m["experiment"], e);
        for (const auto& f : m["files"])
            EXPECT_EQ(f["sha256"], sha256_hex(slurp(out / f["name"].get<std::string>()))) << e;
    }
}
