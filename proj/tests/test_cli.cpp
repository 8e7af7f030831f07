#include <catch_amalgamated.hpp>

#include "commands.hpp"

#include <sstream>

using namespace pnflat;
using namespace pnflat::cli;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / "pnflat_test_cli" / name;
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), {});
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

// Parses the first data row of a CSV into named columns.
std::map<std::string, std::string> first_row(const fs::path& p) {
    std::istringstream in(slurp(p));
    std::string h, r;
    std::getline(in, h);
    std::getline(in, r);
    std::map<std::string, std::string> out;
    std::istringstream hs(h), rs(r);
    std::string a, b;
    while (std::getline(hs, a, ',') && std::getline(rs, b, ',')) out[a] = b;
    return out;
}

int run_cmd(const std::string& cmd, const json& overrides, const fs::path& dir, std::string* err = nullptr) {
    std::ostringstream e;
    const int rc = run(cmd, effective_config(cmd, json(), overrides), dir, e);
    if (err) *err = e.str();
    return rc;
}

}  // namespace

TEST_CASE("number parsing and hashing") {
    CHECK(parse_number(json(0.5), "x") == 0.5);
    CHECK(parse_number(json("4/3"), "x") == 4.0 / 3);
    CHECK(parse_number(json("1e-3"), "x") == 1e-3);
    CHECK_THROWS_AS(parse_number(json("4/0"), "x"), ConfigurationError);
    CHECK_THROWS_AS(parse_number(json("abc"), "x"), ConfigurationError);
    CHECK_THROWS_AS(parse_number(json("1/3x"), "x"), ConfigurationError);
    CHECK_THROWS_AS(parse_number(json(true), "x"), ConfigurationError);
    // published FNV-1a 64 test vectors
    CHECK(fnv1a("") == 0xcbf29ce484222325ull);
    CHECK(fnv1a("a") == 0xaf63dc4c8601ec8cull);
    CHECK(fnv1a("foobar") == 0x85944171f73967e8ull);
    CHECK(num(0.1) == "0.10000000000000001");
}

TEST_CASE("config merging and validation") {
    const json file = {{"schema_version", 1}, {"beta_tilde", 2.0}, {"n", 512}};
    const json cfg = effective_config("profile", file, {{"beta_tilde", "4/3"}});
    CHECK(cfg["beta_tilde"] == "4/3");
    CHECK(cfg["n"] == 512);
    CHECK(cfg["potential"] == "sinusoidal");
    CHECK_THROWS_AS(effective_config("profile", {{"schema_version", 2}}, json()), ConfigurationError);
    CHECK_THROWS_AS(effective_config("profile", {{"n", 512}}, json()), ConfigurationError);
    CHECK_THROWS_AS(effective_config("profile", {{"schema_version", 1}, {"bogus", 1}}, json()), ConfigurationError);
    CHECK_THROWS_AS(effective_config("nope", json(), json()), ConfigurationError);
    for (const auto& c : subcommands()) CHECK(defaults(c)["schema_version"] == schema_version);
}

TEST_CASE("kernel subcommand") {
    const auto d1 = scratch("k1");
    REQUIRE(run_cmd("kernel", {{"beta", {1.0}}}, d1) == ok);
    {
        std::istringstream in(slurp(d1 / "kernel_0.csv"));
        std::string line;
        std::getline(in, line);
        CHECK(line == "theta,v");
        double worst = 0;
        int rows = 0;
        while (std::getline(in, line)) {
            worst = std::max(worst, std::abs(std::stod(line.substr(line.find(',') + 1)) - 1.0 / 9));
            ++rows;
        }
        CHECK(rows == 512);
        CHECK(worst <= 1e-10);
    }

    const auto d2 = scratch("k43");
    REQUIRE(run_cmd("kernel", {{"beta", {"4/3"}}}, d2) == ok);
    auto row = first_row(d2 / "summary.csv");
    // (3 - 2b)/(9 b^1.5), (3b - 2)/(9 b^2) at b = 4/3
    CHECK(std::stod(row["v0"]) == Catch::Approx(1.0 / (27 * std::pow(4.0 / 3, 1.5))).epsilon(1e-8));
    CHECK(std::stod(row["v0"]) == Catch::Approx(0.0240563).margin(1e-7));
    CHECK(std::stod(row["v_half_pi"]) == Catch::Approx(0.125).margin(1e-8));

    const auto d3 = scratch("k06");
    REQUIRE(run_cmd("kernel", {{"beta", {0.6}}}, d3) == ok);
    CHECK(first_row(d3 / "summary.csv")["kernel_positive"] == "false");

    std::string err;
    CHECK(run_cmd("kernel", {{"beta", {3.0}}}, scratch("kbad"), &err) == config_error);
    CHECK(err.find("beta") != std::string::npos);
}

TEST_CASE("outputs are deterministic and the manifest is complete") {
    const auto a = scratch("da"), b = scratch("db");
    REQUIRE(run_cmd("solve2d", {{"seed", 4}, {"n1", 256}, {"n2", 16}}, a) == ok);
    REQUIRE(run_cmd("solve2d", {{"seed", 4}, {"n1", 256}, {"n2", 16}}, b) == ok);
    CHECK(slurp(a / "field.f64") == slurp(b / "field.f64"));
    CHECK(slurp(a / "residual_history.csv") == slurp(b / "residual_history.csv"));
    CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
    CHECK(slurp(a / "field.f64").size() == 256u * 16 * sizeof(double));

    const json m = read_json(a / "manifest.json");
    CHECK(m["pass"] == true);
    CHECK(m["suites"]["rigidity"] == true);
    CHECK(m["module_versions"].size() == 9);
    const json cfg = m["config"];
    CHECK(m["config_hash"] == "fnv1a64:" + hex64(fnv1a(cfg.dump())));
    CHECK(read_json(a / "field.json")["config"] == cfg);
    CHECK(read_json(a / "field.json")["shape"] == json::array({256, 16}));

    const auto c = scratch("dc");
    REQUIRE(run_cmd("solve2d", {{"seed", 5}, {"n1", 256}, {"n2", 16}}, c) == ok);
    CHECK(slurp(a / "field.f64") != slurp(c / "field.f64"));
    CHECK(read_json(c / "manifest.json")["config_hash"] != m["config_hash"]);
}

TEST_CASE("profile subcommand") {
    for (const char* bt : {"1", "4/3"}) {
        const auto d = scratch(std::string("p") + (bt[0] == '1' ? "1" : "43"));
        REQUIRE(run_cmd("profile", {{"beta_tilde", bt}}, d) == ok);
        const json meta = read_json(d / "metadata.json");
        CHECK(meta["oracle_distance"].get<double>() <= 1e-4);
        CHECK(meta["tail_relative_error"].get<double>() <= 0.02);
    }
    const auto dw = scratch("pdw");
    CHECK(run_cmd("profile", {{"potential", "double_well"}, {"tol", 1e-7}}, dw) == ok);
    CHECK_FALSE(read_json(dw / "metadata.json").contains("oracle_distance"));

    const auto fail = scratch("pfail");
    std::string err;
    CHECK(run_cmd("profile", {{"tol", 1e-30}, {"n", 256}}, fail, &err) == module_error);
    CHECK(fs::exists(fail / "residual_history.csv"));
    CHECK(read_json(fail / "manifest.json")["pass"] == false);
    CHECK(run_cmd("profile", {{"potential", "quartic"}}, scratch("pq")) == config_error);
    CHECK(run_cmd("profile", {{"L", 20.0}}, scratch("pL")) == config_error);
}

TEST_CASE("solve2d, stability and extend subcommands") {
    std::string err;
    CHECK(run_cmd("solve2d", json::object(), scratch("s0"), &err) == config_error);
    CHECK(err.find("seed") != std::string::npos);
    CHECK(run_cmd("solve2d", {{"seed", 1}, {"beta", 0.6}}, scratch("s06")) == config_error);

    const auto s = scratch("s1");
    REQUIRE(run_cmd("solve2d", {{"seed", 1}, {"beta", 0.8}}, s) == ok);
    const json sum = read_json(s / "summary.json");
    CHECK(sum["flatness"].get<double>() <= 1e-3);
    CHECK(sum["distance_to_translate"].get<double>() <= 1e-3);

    const auto st = scratch("st");
    REQUIRE(run_cmd("stability", {{"seed", 1}}, st) == ok);
    CHECK(std::abs(read_json(st / "summary.json")["min_eigenvalue"].get<double>()) <= 1e-2);
    const auto sd = scratch("sd");
    REQUIRE(run_cmd("stability", {{"seed", 1}, {"profile", "saddle"}}, sd) == ok);
    CHECK(read_json(sd / "summary.json")["min_eigenvalue"].get<double>() < -1e-2);
    CHECK(run_cmd("stability", {{"seed", 1}, {"profile", "wavy"}}, scratch("sw")) == config_error);

    const auto e = scratch("e");
    REQUIRE(run_cmd("extend", {{"seed", 2}, {"nu", 0.2}}, e) == ok);
    const json es = read_json(e / "summary.json");
    CHECK(es["d2n_defect"].get<double>() <= 1e-10);
    CHECK(es["lame_residual"].get<double>() <= 1e-10);
    CHECK(es["sigma33_jump"].get<double>() <= 1e-10);
    const auto er = scratch("er");
    REQUIRE(run_cmd("extend", {{"seed", 2}, {"nu", -0.8}, {"source", "random"}}, er) == ok);
    CHECK_FALSE(read_json(er / "summary.json").contains("boundary_residual"));
    CHECK(run_cmd("extend", {{"seed", 2}, {"nu", -0.8}}, scratch("eb")) == config_error);
    CHECK(run_cmd("extend", {{"seed", 2}, {"nu", 0.5}}, scratch("eh")) == config_error);
}

TEST_CASE("validate subcommand") {
    const auto v = scratch("v");
    REQUIRE(run_cmd("validate", {{"seed", 7}, {"samples", 1000}}, v) == ok);
    const json m = read_json(v / "manifest.json");
    for (const char* s : {"kernel", "symbols", "profile1d", "elastic3d"}) CHECK(m["suites"][s] == true);
    CHECK(slurp(v / "checks.csv").find("false") == std::string::npos);
}
