#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "bcmarket/scenario_io.hpp"
#include "cli.hpp"

namespace fs = std::filesystem;
using namespace bcmarket;

namespace {

const std::string kDir = BCMARKET_SCENARIO_DIR;

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "bcmarket");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("bcmarket_cli_" + std::to_string(::getpid()));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }

    std::string file(const std::string& name) const { return (path_ / name).string(); }

    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(file(name)) << text;
        return file(name);
    }

private:
    fs::path path_;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<double> numbers_on_line(const std::string& text, const std::string& prefix) {
    std::istringstream lines(text);
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind(prefix, 0) != 0) continue;
        std::istringstream cells(line.substr(prefix.size()));
        std::vector<double> v;
        for (double d; cells >> d;) v.push_back(d);
        return v;
    }
    FAIL("no line starting with " << prefix);
    return {};
}

const std::string kTwo = kDir + "/two_quadratic.json";

}  // namespace

TEST_CASE("compare prints the constrained vs unconstrained table") {
    const Run r = run_cli({"compare", kTwo});
    REQUIRE(r.code == cli::kOk);
    const auto u1 = numbers_on_line(r.out, "user1");
    const auto u2 = numbers_on_line(r.out, "user2");
    const auto lam = numbers_on_line(r.out, "lambda");
    REQUIRE(u1.size() == 5);
    REQUIRE(u2.size() == 5);
    REQUIRE(lam.size() == 2);
    const std::vector<double> e1{0.714, 2.041, 1.285, 3.524, 5.0};
    const std::vector<double> e2{2.142, 6.122, 1.458, 4.0, 4.0};
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(std::abs(u1[i] - e1[i]) <= 1e-3 + 1e-9);
        CHECK(std::abs(u2[i] - e2[i]) <= 1e-3 + 1e-9);
    }
    CHECK(std::abs(lam[0] - 2.857) <= 1e-3);
    CHECK(std::abs(lam[1] - 2.743) <= 1e-3);
}

TEST_CASE("solve with each method") {
    for (const char* m : {"dual", "bisect", "primal"}) {
        const Run r = run_cli({"solve", kTwo, "--method", m});
        REQUIRE(r.code == cli::kOk);
        const auto lam = numbers_on_line(r.out, "lambda*");
        REQUIRE(lam.size() == 1);
        CHECK(std::abs(lam[0] - 2.743) < 1e-3);
        CHECK(r.out.find(std::string("method             ") + m) != std::string::npos);
    }
    CHECK(run_cli({"solve", kTwo}).out == run_cli({"solve", kTwo}).out);
}

TEST_CASE("verify") {
    const Run five = run_cli({"verify", kDir + "/five_mixed.json"});
    CHECK(five.code == cli::kOk);
    CHECK(five.out.find("verify: PASS") != std::string::npos);
    CHECK(run_cli({"verify", kTwo, "--method", "primal"}).code == cli::kOk);

    const Run loose = run_cli({"verify", kTwo, "--tol", "0.1"});
    CHECK(loose.code == cli::kVerificationMismatch);
    CHECK(loose.out.find("FAIL") != std::string::npos);
    CHECK(loose.out.find("residual") != std::string::npos);
}

TEST_CASE("exit codes") {
    TempDir tmp;
    CHECK(run_cli({}).code == cli::kUsage);
    CHECK(run_cli({"solve", kTwo, "--method", "newton"}).code == cli::kUsage);
    CHECK(run_cli({"solve", tmp.file("missing.json")}).code == cli::kUsage);
    CHECK(run_cli({"sweep", kTwo, "--lam-min", "2", "--lam-max", "1"}).code == cli::kUsage);
    CHECK(run_cli({"modified", kTwo, "--user", "nobody", "--x-min", "1", "--x-max", "2"}).code == cli::kUsage);
    CHECK(run_cli({"--help"}).code == cli::kOk);

    std::string text = read_file(kTwo);
    const std::string negative = tmp.write("negative.json", text.replace(text.find("\"budget\": 4.0"), 13, "\"budget\": -1"));
    const Run bad = run_cli({"solve", negative});
    CHECK(bad.code == cli::kInvalidScenario);
    CHECK(bad.err.find("user2") != std::string::npos);

    CHECK(run_cli({"solve", tmp.write("broken.json", "{\"schema_version\": 1,")}).code == cli::kInvalidScenario);

    const Run slow = run_cli({"solve", kTwo, "--method", "dual", "--max-iters", "2"});
    CHECK(slow.code == cli::kNonConvergence);
    CHECK(slow.err.find("non") != std::string::npos);

    Scenario trivial = load_scenario(kTwo);
    trivial.cost.c0 = 10.0;
    const Run triv = run_cli({"solve", tmp.write("trivial.json", serialize_scenario(trivial))});
    CHECK(triv.code == cli::kTrivialEquilibrium);

    Scenario broke = load_scenario(kTwo);
    broke.users[0].budget = 0.0;
    CHECK(run_cli({"solve", tmp.write("broke.json", serialize_scenario(broke)), "--method", "primal"}).code ==
          cli::kInvalidScenario);
}

TEST_CASE("csv outputs") {
    TempDir tmp;
    SUBCASE("sweep") {
        const Run r = run_cli({"sweep", kTwo, "--lam-min", "0.5", "--lam-max", "5", "--points", "10", "--out",
                               tmp.file("curves.csv")});
        REQUIRE(r.code == cli::kOk);
        const Table t = parse_csv(read_file(tmp.file("curves.csv")));
        CHECK(t.rows.size() == 10);
        CHECK(t.header.back() == "excess");
        CHECK(t.rows.front()[0] == 0.5);
        CHECK(t.rows.back()[0] == 5.0);
        const Run stdout_run = run_cli({"sweep", kTwo, "--lam-min", "0.5", "--lam-max", "5", "--points", "10"});
        CHECK(stdout_run.out == read_file(tmp.file("curves.csv")));
    }
    SUBCASE("trace") {
        for (const char* m : {"dual", "bisect"}) {
            const Run r = run_cli({"trace", kTwo, "--method", m, "--out", tmp.file("trace.csv")});
            REQUIRE(r.code == cli::kOk);
            const Table t = parse_csv(read_file(tmp.file("trace.csv")));
            CHECK(t.header.back() == "lyapunov");
            CHECK(std::abs(t.rows.back()[1] - 2.743) < 1e-3);
            CHECK(std::abs(t.rows.back().back()) < 1e-6);
        }
    }
    SUBCASE("modified") {
        const Run r = run_cli({"modified", kTwo, "--user", "user1", "--x-min", "0.1", "--x-max", "20", "--points",
                               "200", "--out", tmp.file("mod.csv")});
        REQUIRE(r.code == cli::kOk);
        const Table t = parse_csv(read_file(tmp.file("mod.csv")));
        CHECK(t.header == std::vector<std::string>{"x", "u", "u_hat", "binding"});
        for (const auto& row : t.rows) CHECK((row[3] == 1.0) == (row[0] > 1.9098 && row[0] < 13.0902));
    }
}
