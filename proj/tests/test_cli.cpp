#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "groupop/cli.hpp"

using namespace groupop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("groupop_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_json(const std::string& json, const fs::path& out, std::string* err_text = nullptr)
{
    cli::ExperimentConfig base;
    base.out = out;
    std::ostringstream o, e;
    int code;
    try {
        code = cli::run(cli::parse_config(json, base), o, e);
    } catch (const cli::ConfigError& ex) {
        e << ex.what();
        code = 1;
    }
    if (err_text)
        *err_text = e.str();
    return code;
}

}  // namespace

TEST_CASE("heatmap rows round-trip")
{
    ModelParams p;
    p.n_groups = 2;
    p.group_size = 1;
    const GroupLayout layout(p);
    OpinionMatrix a(layout.agents());
    a(0, 0) = 0.1;
    a(0, 1) = -1.0 / 3.0;
    a(1, 0) = 0.7;
    a(1, 1) = 1e-17;
    const auto dir = scratch("heat");
    fs::create_directories(dir);
    cli::emit_matrix_heatmap_data(a, layout, dir / "m.csv");
    const auto t = cli::read_csv(dir / "m.csv");
    REQUIRE(t.rows.size() == 4);
    for (const auto& r : t.rows) {
        REQUIRE(r.size() == 5);
        const int i = static_cast<int>(r[0]), j = static_cast<int>(r[1]);
        CHECK(r[2] == a(i, j));  // exact
        CHECK(r[3] == i);
        CHECK(r[4] == j);
    }
    fs::remove_all(dir);
}

TEST_CASE("format_number reads back exactly")
{
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, i % 40 - 20);
        CHECK(std::stod(cli::format_number(v)) == v);
    }
}

TEST_CASE("malformed configs fail with status 1 and leave no files")
{
    const auto dir = scratch("bad");
    const char* bad[] = {
        R"({"kind": "moments", "sigma": 0})",
        R"({"kind": "moments", "n_groupz": 2})",
        R"({"kind": "moments", "steps": "many"})",
        R"({"kind": "teleport"})",
        R"({"kind": "moments", "n_groups": 2, "init": [0.1, 0.2, 0.3]})",
        R"({"kind": "moments", "delta": -0.1})",
        R"(not json)",
    };
    for (const char* j : bad) {
        CAPTURE(j);
        std::string err;
        CHECK(run_json(j, dir, &err) == 1);
        CHECK_FALSE(err.empty());
        CHECK_FALSE(fs::exists(dir));
    }
}

TEST_CASE("moments output has one column per first moment")
{
    for (int ng : {1, 2, 3}) {
        const auto dir = scratch("mom" + std::to_string(ng));
        const std::string j = R"({"kind": "moments", "n_groups": )" + std::to_string(ng) +
                              R"(, "group_size": 4, "steps": 20})";
        REQUIRE(run_json(j, dir) == 0);
        const auto t = cli::read_csv(dir / "moments.csv");
        CHECK(t.header.size() == static_cast<std::size_t>(1 + ng + ng * ng));
        CHECK(t.rows.size() == 21);
        fs::remove_all(dir);
    }
}

TEST_CASE("identical configs give identical bytes")
{
    const std::string j =
        R"({"kind": "ensemble", "n_groups": 2, "group_size": 3, "steps": 200, "runs": 64,
            "seed": 9, "sample_every": 20, "gossip": 2, "init": [0.2, -0.1, 0.2, -0.1]})";
    const auto d1 = scratch("det1"), d2 = scratch("det2");
    REQUIRE(run_json(j, d1) == 0);
    REQUIRE(run_json(j, d2) == 0);
    CHECK(slurp(d1 / "ensemble.csv") == slurp(d2 / "ensemble.csv"));
    CHECK_FALSE(slurp(d1 / "ensemble.csv").empty());

    const std::string s =
        R"({"kind": "simulate", "n_groups": 2, "group_size": 3, "steps": 300, "seed": 4})";
    const auto d3 = scratch("det3"), d4 = scratch("det4");
    REQUIRE(run_json(s, d3) == 0);
    REQUIRE(run_json(s, d4) == 0);
    CHECK(slurp(d3 / "trajectory.csv") == slurp(d4 / "trajectory.csv"));
    CHECK(slurp(d3 / "matrix.csv") == slurp(d4 / "matrix.csv"));
    for (const auto& d : {d1, d2, d3, d4})
        fs::remove_all(d);
}

TEST_CASE("emergence matrix is block structured")
{
    const auto dir = scratch("emg");
    const std::string j =
        R"({"kind": "emergence", "n_groups": 2, "group_size": 5, "steps": 20000, "seeds": 1,
            "gossip": 2, "seed": 3})";
    REQUIRE(run_json(j, dir) == 0);
    const auto t = cli::read_csv(dir / "matrix_k2.csv");
    REQUIRE(t.rows.size() == 100);
    // variance within (holder group, target group, self or not) cells vs overall
    double sum = 0, sq = 0;
    std::map<int, std::pair<double, double>> cell;
    std::map<int, int> count;
    for (const auto& r : t.rows) {
        const int c = static_cast<int>(r[3]) * 2 + static_cast<int>(r[4]) +
                      (r[0] == r[1] ? 4 : 0);
        cell[c].first += r[2];
        cell[c].second += r[2] * r[2];
        ++count[c];
        sum += r[2];
        sq += r[2] * r[2];
    }
    const double total_var = sq / 100 - (sum / 100) * (sum / 100);
    double within = 0;
    for (const auto& [c, s] : cell) {
        const double m = s.first / count[c];
        within += s.second - count[c] * m * m;
    }
    within /= 100;
    CHECK(within < 0.1 * total_var);
    fs::remove_all(dir);
}
