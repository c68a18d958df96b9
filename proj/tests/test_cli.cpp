#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "rotdeg_cli_test";

struct Run {
    int code = -1;
    std::string out;
};

Run rotdeg(const std::string& args, const std::string& env = "")
{
    const fs::path log = kRoot / "stdout.txt";
    const std::string cmd = env + (env.empty() ? "" : " ") + ROTDEG_CLI_PATH + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string read(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes a config whose output_dir is a fresh directory `name`.
fs::path config(const std::string& name, Json body)
{
    fs::create_directories(kRoot);
    const fs::path dir = kRoot / name;
    fs::remove_all(dir);
    body["output_dir"] = dir.string();
    const fs::path path = kRoot / (name + ".json");
    std::ofstream(path) << body.dump(2);
    return path;
}

fs::path out_dir(const std::string& name) { return kRoot / name; }

}  // namespace

TEST_CASE("print-schema emits the JSON schema")
{
    fs::create_directories(kRoot);
    const auto r = rotdeg("--print-schema");
    CHECK(r.code == 0);
    const auto schema = Json::parse(r.out);
    CHECK(schema["type"] == "object");
    CHECK(schema["additionalProperties"] == false);
    CHECK(schema["properties"].contains("system"));
}

TEST_CASE("integrate writes trajectory and summary")
{
    const auto cfg = config("integrate_lc", {{"system", {{"name", "linear_clockwise"}}}, {"integrate", {{"z0", {1.0, 0.0}}}}});
    const auto r = rotdeg("integrate " + cfg.string());
    REQUIRE(r.code == 0);
    const auto csv = read(out_dir("integrate_lc") / "trajectory.csv");
    CHECK(csv.rfind("t,x,y,theta_lift,rho,rot\n", 0) == 0);
    const auto summary = Json::parse(read(out_dir("integrate_lc") / "summary.json"));
    CHECK(summary["classification"]["outcome"] == "Complete");
    CHECK(std::abs(summary["final_rot"].get<double>() - 1.0) < 1e-8);
}

TEST_CASE("integrate reports blow-up of the example family")
{
    const auto cfg = config("integrate_ex", {{"system", {{"name", "example_family"}}},
                                             {"integrate", {{"z0", {1.4142135623730951, 0.0}}, {"t_end", 1.0}}}});
    // The special initial point has theta*(0) = 0, so it is (sqrt 2, 0).
    const auto r = rotdeg("integrate " + cfg.string());
    REQUIRE(r.code == 0);
    const auto summary = Json::parse(read(out_dir("integrate_ex") / "summary.json"));
    CHECK(summary["classification"]["outcome"] == "BlowUp");
    CHECK(std::abs(summary["classification"]["t_f_est"].get<double>() - 1.0) < 5e-3);
}

TEST_CASE("configuration errors exit 2 and write nothing")
{
    const auto missing = config("missing_name", {{"system", Json::object()}, {"integrate", {{"z0", {1.0, 0.0}}}}});
    CHECK(rotdeg("integrate " + missing.string()).code == 2);
    CHECK_FALSE(fs::exists(out_dir("missing_name")));

    const auto unknown = config("unknown_key", {{"system", {{"name", "duffing"}}}, {"integrate", {{"z0", {1.0, 0.0}}}}, {"bogus", 1}});
    const auto r = rotdeg("integrate " + unknown.string());
    CHECK(r.code == 2);
    CHECK(r.out.find("bogus") != std::string::npos);
    CHECK_FALSE(fs::exists(out_dir("unknown_key")));

    const auto param = config("unknown_param", {{"system", {{"name", "duffing"}, {"params", {{"alpha", 2}}}}},
                                                {"integrate", {{"z0", {1.0, 0.0}}}}});
    CHECK(rotdeg("integrate " + param.string()).code == 2);

    const auto invalid = config("invalid_param", {{"system", {{"name", "example_family"}, {"params", {{"alpha", 0.5}}}}},
                                                  {"integrate", {{"z0", {1.0, 0.0}}}}});
    CHECK(rotdeg("integrate " + invalid.string()).code == 2);

    CHECK(rotdeg("integrate " + (kRoot / "does_not_exist.json").string()).code == 2);
    CHECK(rotdeg("integrate").code == 2);
    CHECK(rotdeg("frobnicate x.json").code == 2);
    CHECK(rotdeg("").code == 2);
}

TEST_CASE("sweep with an empty grid is a configuration error")
{
    const auto cfg = config("sweep_empty", {{"system", {{"name", "example_family"}}},
                                            {"sweep", {{"alpha", Json::array()}, {"beta", {1.0}}}}});
    CHECK(rotdeg("sweep " + cfg.string()).code == 2);
    CHECK_FALSE(fs::exists(out_dir("sweep_empty")));
}

TEST_CASE("sweep of a single cell")
{
    const auto cfg = config("sweep_one", {{"system", {{"name", "example_family"}}},
                                          {"sweep", {{"alpha", {4.0}}, {"beta", {1.0}}}}});
    REQUIRE(rotdeg("sweep " + cfg.string()).code == 0);
    const auto csv = read(out_dir("sweep_one") / "sweep.csv");
    CHECK(csv == "alpha,beta,h1_predicate,a4_predicate,h1_empirical,a4_empirical,rot_limit\n"
                 "4,1,true,true,true,true,inf\n");
}

TEST_CASE("the full sweep grid matches the predicates")
{
    const auto cfg = config("sweep_grid", {{"system", {{"name", "example_family"}}},
                                           {"sweep", {{"alpha", {1.5, 2, 3, 4}}, {"beta", {0.5, 1, 2}}}}});
    REQUIRE(rotdeg("sweep " + cfg.string()).code == 0);
    std::istringstream in(read(out_dir("sweep_grid") / "sweep.csv"));
    std::string line;
    std::getline(in, line);
    int rows = 0;
    while (std::getline(in, line)) {
        std::vector<std::string> c;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');) {
            c.push_back(cell);
        }
        REQUIRE(c.size() == 7);
        CHECK(c[2] == c[4]);
        CHECK(c[3] == c[5]);
        ++rows;
    }
    CHECK(rows == 12);
}

TEST_CASE("find-periodic on a resonant boundary is inconclusive")
{
    const auto cfg = config("fp_resonant", {{"system", {{"name", "linear_clockwise"}}},
                                            {"find_periodic", {{"loop", {{"circle", {{"radius", 1.0}}}}}}}});
    const auto r = rotdeg("find-periodic " + cfg.string());
    CHECK(r.code == 4);
    const auto rep = Json::parse(read(out_dir("fp_resonant") / "degree_report.json"));
    CHECK(rep["admissible"] == false);
    CHECK(rep["winding"].is_null());
}

TEST_CASE("find-periodic finds the origin for a rotation by angle 3")
{
    const auto cfg = config("fp_lc3", {{"system", {{"name", "linear_clockwise"}, {"params", {{"period", 3.0}}}}},
                                       {"find_periodic", {{"loop", {{"circle", {{"radius", 1.0}}}}}}}});
    REQUIRE(rotdeg("find-periodic " + cfg.string()).code == 0);
    const auto rep = Json::parse(read(out_dir("fp_lc3") / "degree_report.json"));
    CHECK(rep["winding"] == 1);
    REQUIRE(rep["fixed_points"].size() == 1);
    CHECK(std::abs(rep["fixed_points"][0]["x"].get<double>()) < 1e-8);
    CHECK(std::abs(rep["fixed_points"][0]["y"].get<double>()) < 1e-8);
}

TEST_CASE("find-periodic on Duffing emits fixed points and a portrait")
{
    const auto cfg = config("fp_duffing", {{"system", {{"name", "duffing"}}},
                                           {"find_periodic", {{"loop", {{"circle", {{"radius", 2.0}}}}}}}});
    REQUIRE(rotdeg("find-periodic " + cfg.string()).code == 0);
    const auto rep = Json::parse(read(out_dir("fp_duffing") / "degree_report.json"));
    CHECK(rep["admissible"] == true);
    REQUIRE(rep["fixed_points"].size() >= 1);
    CHECK(rep["fixed_points"][0]["residual"].get<double>() < 1e-7);
    CHECK(rep["fixed_points"][0]["return_error"].get<double>() < 1e-5);
    const auto svg = read(out_dir("fp_duffing") / "portrait.svg");
    CHECK(svg.rfind("<svg", 0) == 0);
    CHECK(svg.find("<circle") != std::string::npos);
    CHECK(read(out_dir("fp_duffing") / "fixed_points.csv").rfind("x,y,residual,return_error\n", 0) == 0);
}

TEST_CASE("verify bundles")
{
    const auto good = config("verify_a4", {{"system", {{"name", "example_family"}, {"params", {{"alpha", 4.0}}}}},
                                           {"verify", {{"checks", {"H1", "H2", "A4"}}}}});
    REQUIRE(rotdeg("verify " + good.string()).code == 0);
    const auto v = Json::parse(read(out_dir("verify_a4") / "verdicts.json"));
    REQUIRE(v["verdicts"].size() == 3);
    for (const auto& x : v["verdicts"]) {
        CHECK(x["holds_at_resolution"] == true);
    }

    const auto weak = config("verify_a15", {{"system", {{"name", "example_family"}, {"params", {{"alpha", 1.5}}}}},
                                            {"verify", {{"checks", {"A4"}}}}});
    REQUIRE(rotdeg("verify " + weak.string()).code == 0);
    const auto w = Json::parse(read(out_dir("verify_a15") / "verdicts.json"))["verdicts"][0];
    CHECK(w["holds_at_resolution"] == false);
    CHECK(std::abs(w["certificate"]["rot_plateau"].get<double>() - 0.4775) < 2e-3);
    CHECK(w["witness"].is_object());

    const auto duff = config("verify_duffing", {{"system", {{"name", "duffing"}}}, {"verify", {{"checks", {"A6", "star"}}}}});
    REQUIRE(rotdeg("verify " + duff.string()).code == 0);
    const auto d = Json::parse(read(out_dir("verify_duffing") / "verdicts.json"))["verdicts"];
    CHECK(d[0]["certificate"]["ell_hat"].get<double>() >= 0.0);
}

TEST_CASE("profile and d-delta outputs")
{
    const auto prof = config("profile_rp", {{"system", {{"name", "radial_power"}}},
                                            {"profile", {{"loop", {{"circle", {{"radius", 1.5811388300841898}}}}}}}});
    REQUIRE(rotdeg("profile " + prof.string()).code == 0);
    std::istringstream in(read(out_dir("profile_rp") / "profile.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "s,x,y,grot");
    while (std::getline(in, line)) {
        CHECK(std::abs(std::stod(line.substr(line.rfind(',') + 1)) - 1.25) < 1e-8);
    }

    const auto dd = config("dd_lc", {{"system", {{"name", "linear_clockwise"}}}, {"d_delta", {{"deltas", {0.05, 0.1}}}}});
    REQUIRE(rotdeg("d-delta " + dd.string()).code == 0);
    const auto j = Json::parse(read(out_dir("dd_lc") / "d_delta.json"));
    CHECK(std::abs(j["estimates"][1]["bounding_radius"].get<double>() - 0.11) < 1e-6);
    CHECK(read(out_dir("dd_lc") / "d_delta.csv").rfind("delta,x,y\n", 0) == 0);
}

TEST_CASE("identical configs give byte-identical outputs, regardless of threads")
{
    const Json body{{"system", {{"name", "duffing"}}},
                    {"seed", 5},
                    {"find_periodic", {{"loop", {{"circle", {{"radius", 2.0}}}}}}}};
    const auto a = config("det_a", body);
    const auto b = config("det_b", body);
    REQUIRE(rotdeg("find-periodic " + a.string(), "ROTDEG_THREADS=1").code == 0);
    REQUIRE(rotdeg("find-periodic " + b.string(), "ROTDEG_THREADS=3").code == 0);
    for (const char* f : {"degree_report.json", "fixed_points.csv", "portrait.svg"}) {
        CHECK(read(out_dir("det_a") / f) == read(out_dir("det_b") / f));
    }
    const Json vbody{{"system", {{"name", "example_family"}}}, {"seed", 3}, {"verify", {{"checks", {"star", "H1", "A5"}}}}};
    const auto c = config("det_c", vbody);
    const auto d = config("det_d", vbody);
    REQUIRE(rotdeg("verify " + c.string()).code == 0);
    REQUIRE(rotdeg("verify " + d.string(), "ROTDEG_THREADS=2").code == 0);
    CHECK(read(out_dir("det_c") / "verdicts.json") == read(out_dir("det_d") / "verdicts.json"));
}

TEST_CASE("the output directory can be overridden from the environment")
{
    const auto cfg = config("env_cfg", {{"system", {{"name", "linear_clockwise"}}}, {"integrate", {{"z0", {1.0, 0.0}}}}});
    const fs::path over = kRoot / "env_override";
    fs::remove_all(over);
    REQUIRE(rotdeg("integrate " + cfg.string(), "ROTDEG_OUTPUT_DIR=" + over.string()).code == 0);
    CHECK(fs::exists(over / "trajectory.csv"));
    CHECK_FALSE(fs::exists(out_dir("env_cfg")));
    for (const auto& e : fs::directory_iterator(over)) {
        CHECK(e.path().extension() != ".tmp");
    }
}
