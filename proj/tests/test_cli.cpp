#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <doctest.h>
#include <json.hpp>

#include "condbm/analytic.hpp"
#include "condbm/domain.hpp"
#include "condbm/io.hpp"

using namespace condbm;
using nlohmann::json;

namespace {

struct CliResult {
    int status = -1;
    std::string out;
};

// Runs the installed binary with a scrubbed CONDBM_SEED; stderr is dropped
// (the validate subcommand logs there in json mode).
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
    const std::string cmd = "env -u CONDBM_SEED " + env_prefix + " " + CONDBM_BIN +
                            " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CliResult r;
    char buf[4096];
    while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe))
        r.out.append(buf, got);
    const int rc = pclose(pipe);
    r.status = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
    return r;
}

std::vector<std::string> lines_of(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) out.push_back(line);
    return out;
}

double value_after(const std::string& text, const std::string& key) {
    const auto pos = text.find(key);
    REQUIRE(pos != std::string::npos);
    return std::stod(text.substr(pos + key.size()));
}

} // namespace

TEST_CASE("gamma: half line, wedge reduction, bad input") {
    const auto half = run_cli("gamma --domain halfline --t 1 --y 1");
    CHECK(half.status == 0);
    CHECK(half.out.find("0.682689492137085") != std::string::npos);
    CHECK(half.out.find("grad_log_gamma") != std::string::npos);

    const auto wedge =
        run_cli("gamma --domain wedge2 --t 1 --y 0,1.4142135623730951");
    CHECK(wedge.status == 0);
    CHECK(wedge.out.find("0.682689492137085") != std::string::npos);

    CHECK(run_cli("gamma --domain halfline --t 1 --y -1").status == 2);
    CHECK(run_cli("gamma --domain halfline --y 1").status == 2); // missing --t
    CHECK(run_cli("gamma --domain nowhere --t 1 --y 1").status == 2);
}

TEST_CASE("gamma: box factors multiply") {
    const auto box = run_cli(
        "gamma --domain box --factors halfline,interval:0:1 --t 1 --y 0.8,0.45");
    CHECK(box.status == 0);
    const double got = value_after(box.out, "gamma = ");
    const double want = exit_prob(DomainSpec{HalfLine{}}, 1.0, 0.8) *
                        exit_prob(DomainSpec{Interval{0.0, 1.0}}, 1.0, 0.45);
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("meander runs are reproducible and seedable from the environment") {
    const std::string args = "meander --method bessel --n 50 --seed 7";
    const auto a = run_cli(args);
    const auto b = run_cli(args);
    REQUIRE(a.status == 0);
    CHECK(a.out == b.out);
    CHECK(lines_of(a.out).front() == kPathCsvHeader);

    const auto via_env =
        run_cli("meander --method bessel --n 50", "CONDBM_SEED=7");
    CHECK(via_env.out == a.out);

    const auto other = run_cli("meander --method bessel --n 50 --seed 8");
    CHECK(other.out != a.out);
}

TEST_CASE("meander rejection summary in json") {
    const auto r = run_cli(
        "meander --method rejection --y0 0.25 --n 500 --format json --seed 5");
    REQUIRE(r.status == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("version").get<std::string>() == kVersion);
    CHECK(doc.contains("config"));
    const auto& res = doc.at("results");
    CHECK(res.at("sampler").get<std::string>() == "rejection");
    CHECK(res.at("n").get<int>() == 500);
    const double rate = res.at("acceptance_rate").get<double>();
    CHECK(rate > 0.17); // gamma(1, 0.25) ~ 0.197, discrete monitoring adds a little
    CHECK(rate < 0.24);
}

TEST_CASE("config file replaces flags; unknown keys are rejected") {
    {
        std::ofstream cfg("cli_test_cfg.ini");
        cfg << "seed=9\n"
            << "meander.method=bessel\n"
            << "meander.n=20\n";
    }
    const auto from_cfg = run_cli("--config cli_test_cfg.ini meander");
    const auto from_flags = run_cli("meander --method bessel --n 20 --seed 9");
    REQUIRE(from_cfg.status == 0);
    CHECK(from_cfg.out == from_flags.out);

    {
        std::ofstream cfg("cli_test_bad.ini");
        cfg << "bogus=1\n";
    }
    CHECK(run_cli("--config cli_test_bad.ini meander").status == 2);
    std::remove("cli_test_cfg.ini");
    std::remove("cli_test_bad.ini");
}

TEST_CASE("csv output round-trips through read_csv") {
    const auto r = run_cli(
        "meander --method bessel --n 3 --seed 11 --out cli_test_out.csv");
    REQUIRE(r.status == 0);

    std::ifstream in("cli_test_out.csv");
    REQUIRE(in.good());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string original = buf.str();

    std::istringstream parse_in(original);
    const CsvTable table = read_csv(parse_in);
    REQUIRE(table.header.size() == 4);
    CHECK(table.header[0] == "path_id");
    REQUIRE(!table.rows.empty());

    std::ostringstream rebuilt;
    rebuilt << table.header[0];
    for (std::size_t j = 1; j < table.header.size(); ++j)
        rebuilt << ',' << table.header[j];
    rebuilt << '\n';
    for (const auto& row : table.rows) {
        rebuilt << fmt17(row[0]);
        for (std::size_t j = 1; j < row.size(); ++j) rebuilt << ',' << fmt17(row[j]);
        rebuilt << '\n';
    }
    CHECK(rebuilt.str() == original);
    std::remove("cli_test_out.csv");
}

TEST_CASE("validate: analytic suite passes, determinism suite emits json") {
    const auto text = run_cli("validate --suite analytic");
    CHECK(text.status == 0);
    const auto ls = lines_of(text.out);
    std::size_t pass = 0, fail = 0;
    for (const auto& l : ls) {
        if (l.rfind("PASS", 0) == 0) ++pass;
        if (l.rfind("FAIL", 0) == 0) ++fail;
    }
    CHECK(pass == 3);
    CHECK(fail == 0);

    const auto js = run_cli("validate --suite determinism --format json");
    CHECK(js.status == 0);
    const json doc = json::parse(js.out);
    CHECK(doc.at("version").get<std::string>() == kVersion);
    CHECK(doc.contains("config"));
    const auto& res = doc.at("results");
    REQUIRE(res.is_array());
    REQUIRE(res.size() == 1);
    CHECK(res[0].at("name").get<std::string>() == "determinism");
    CHECK(res[0].at("verdict").get<std::string>() == "PASS");
}

TEST_CASE("flow census in json") {
    const auto r = run_cli(
        "flow --points 0:1:0.5 --T 0.25 --dt 0.005 --format json --seed 3");
    REQUIRE(r.status == 0);
    const json doc = json::parse(r.out);
    const auto& res = doc.at("results");
    CHECK(res.at("n_particles").get<int>() == 3);
    const auto sizes = res.at("cluster_sizes").get<std::vector<int>>();
    int total = 0;
    for (const int s : sizes) total += s;
    CHECK(total == 3);
    CHECK(res.at("vertices").size() == res.at("n_clusters").get<std::size_t>());
    CHECK(res.at("census").at("count").get<std::size_t>() <= sizes.size());
}

TEST_CASE("drifted stationary mode summarizes the fixed point") {
    const auto r = run_cli(
        "drifted --a=-x --mode stationary --runs 50 --particles 50 "
        "--span 5 --lookback 10 --format json --seed 13");
    REQUIRE(r.status == 0);
    const json doc = json::parse(r.out);
    const auto& res = doc.at("results");
    CHECK(res.at("rate").get<double>() >= 0.9);
    const double var = res.at("variance").get<double>();
    CHECK(var > 0.2); // OU fixed point has variance 1/2
    CHECK(var < 0.9);
    CHECK(res.at("lambda").get<double>() > 0.5);

    // a drift without a contraction constant is a usage error
    CHECK(run_cli("drifted --a=x*x --mode stationary --runs 2").status == 2);
}

TEST_CASE("drifted infinite mode reports positive gaps") {
    const auto r = run_cli(
        "drifted --a=-x --mode infinite --n 25 --T 1 --format json --seed 13");
    REQUIRE(r.status == 0);
    const json doc = json::parse(r.out);
    CHECK(doc.at("config").at("mode").get<std::string>() == "infinite");
    const auto& gap = doc.at("results").at("gap");
    CHECK(gap.at("n").get<std::size_t>() == 25);
    CHECK(gap.at("min").get<double>() > 0.0);
    // OU dual pair at t=1: gap is order a few, never tiny, never huge
    CHECK(gap.at("mean").get<double>() > 1.0);
    CHECK(gap.at("max").get<double>() < 20.0);
}

TEST_CASE("drifted stationary surfaces coalescence failure as exit 3") {
    const auto r = run_cli(
        "drifted --a=-x --mode stationary --runs 2 --particles 5 "
        "--span 50 --lookback 0.001 --dt 0.0002");
    CHECK(r.status == 3);
}

TEST_CASE("cluster oracle smoke") {
    const auto r = run_cli(
        "cluster --mode oracle --x 0 --T 0.5 --n 5 --epsilon 0.1 --dt 0.005 "
        "--seed 17");
    REQUIRE(r.status == 0);
    CHECK(lines_of(r.out).front() == kPairCsvHeader);
}

TEST_CASE("help and usage errors") {
    CHECK(run_cli("--help").status == 0);
    CHECK(run_cli("meander --help").status == 0);
    CHECK(run_cli("").status == 2);          // a subcommand is required
    CHECK(run_cli("frobnicate").status == 2);
    CHECK(run_cli("meander --format yaml").status == 2);
}
