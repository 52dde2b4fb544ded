#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "icins/config.hpp"
#include "icins/error.hpp"
#include "icins/parallel.hpp"
#include "icins/runner.hpp"

namespace icins {
namespace {

namespace fs = std::filesystem;

/// The small scenario with one jump atom whose stock jump is -2 (a price would turn negative).
std::string with_bad_stock_jump(std::string text) {
    text.replace(text.find("sigma = 0.2\n"), 12, "sigma = 0.2\ngamma.0 = -2\n");
    return text + "\n[jumps]\natom.0 = 1, 0.1\n";
}

const char* kSmallPower = R"(# small power scenario
[objective]
horizon = 2
discount = 0.03
x0 = 1

[market]
bond_maturity = 4

[real_curve]
initial_forward = 0.03
sigma = 0 ; 0, 2, 4 ; 0, -0.02, 0

[nominal_curve]
initial_forward = 0.05

[inflation]
mu = 0.02
sigma = 0.01

[risky]
mu = 0.08
sigma = 0.2

[mortality]
hazard = 0.01

[insurance]
premium_ratio = 0.02

[utility]
kind = power
kappa = 0.5

[solver]
steps = 20
paths = 400
seed = 3
dump_paths = 2

[boxes]
consumption = 0.001, 5
premium = -0.0199, 1
portfolio1 = -3, 3
portfolio2 = -3, 3
portfolio3 = -3, 3

[verify]
perturbations = 3
drift_samples = 10
)";

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = fs::temp_directory_path() /
                ("icins_test_" + tag + "_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                 "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    std::string str(const std::string& leaf = "") const { return (leaf.empty() ? path_ : path_ / leaf).string(); }

private:
    fs::path path_;
};

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

RunOutputs run_text(const std::string& text, Command cmd, const std::string& dir) {
    RunOptions o;
    o.command = cmd;
    o.output_dir = dir;
    std::ostringstream out, err;
    return run(parse_config(text), o, out, err);
}

TEST(Config, SerializeRoundTrip) {
    const ScenarioConfig c = parse_config(kSmallPower);
    EXPECT_EQ(parse_config(serialize_config(c)), c);
    EXPECT_EQ(serialize_config(parse_config(serialize_config(c))), serialize_config(c));
    EXPECT_EQ(c.solver.steps, 20u);
    EXPECT_DOUBLE_EQ(c.model.market.risky.sigma(0.0), 0.2);
}

TEST(Config, HashIsStableAndSensitive) {
    const ScenarioConfig c = parse_config(kSmallPower);
    EXPECT_EQ(config_hash(c).size(), 16u);
    EXPECT_EQ(config_hash(c), config_hash(parse_config(serialize_config(c))));
    ScenarioConfig d = c;
    d.solver.seed = 4;
    EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Config, UnknownKeyReportsItsLine) {
    const std::string text = std::string(kSmallPower) + "colour = blue\n";
    try {
        parse_config(text);
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_EQ(e.line(), 51);
        EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
    }
}

TEST(Config, UnknownSectionIsRejected) {
    EXPECT_THROW(parse_config("[weather]\nrain = 1\n"), ConfigError);
}

TEST(Config, MalformedNumberIsRejected) {
    std::string text = kSmallPower;
    text.replace(text.find("kappa = 0.5"), 11, "kappa = half");
    EXPECT_THROW(parse_config(text), ConfigError);
}

TEST(Config, StockJumpBelowMinusOneFailsTheCheck) {
    const auto c = parse_config(with_bad_stock_jump(kSmallPower));
    const std::string problems = check_config(c);
    EXPECT_NE(problems.find("gamma"), std::string::npos) << problems;
}

TEST(Runner, InvalidScenarioExitsWithCode2) {
    const TempDir dir("invalid");
    write_file(dir.str("bad.ini"), with_bad_stock_jump(kSmallPower));
    RunOptions o;
    o.command = Command::simulate;
    o.config_path = dir.str("bad.ini");
    o.output_dir = dir.str("out");
    std::ostringstream out, err;
    EXPECT_EQ(run(o, out, err).exit_code, kExitInvalid);
    EXPECT_FALSE(err.str().empty());
}

TEST(Runner, SyntaxErrorExitsWithCode2) {
    const TempDir dir("syntax");
    write_file(dir.str("bad.ini"), "[solver]\nsteps = ten\n");
    RunOptions o;
    o.config_path = dir.str("bad.ini");
    o.output_dir = dir.str("out");
    std::ostringstream out, err;
    EXPECT_EQ(run(o, out, err).exit_code, kExitInvalid);
    EXPECT_NE(err.str().find("line 2"), std::string::npos) << err.str();
}

TEST(Runner, MissingConfigFileIsAnError) {
    RunOptions o;
    o.config_path = "/nonexistent/icins.ini";
    std::ostringstream out, err;
    EXPECT_NE(run(o, out, err).exit_code, kExitOk);
}

TEST(Runner, OverridesApply) {
    const TempDir dir("override");
    write_file(dir.str("c.ini"), kSmallPower);
    RunOptions o;
    o.config_path = dir.str("c.ini");
    o.seed = 11;
    o.paths = 123;
    o.steps = 7;
    const auto c = effective_config(o);
    EXPECT_EQ(c.solver.seed, 11u);
    EXPECT_EQ(c.solver.paths, 123u);
    EXPECT_EQ(c.solver.steps, 7u);
}

TEST(Runner, SameSeedGivesByteIdenticalOutputs) {
    const TempDir a("same_a"), b("same_b");
    const auto ra = run_text(kSmallPower, Command::simulate, a.str());
    const auto rb = run_text(kSmallPower, Command::simulate, b.str());
    ASSERT_EQ(ra.exit_code, kExitOk);
    ASSERT_EQ(ra.files.size(), rb.files.size());
    ASSERT_FALSE(ra.files.empty());
    for (std::size_t i = 0; i < ra.files.size(); ++i) {
        EXPECT_EQ(fs::path(ra.files[i]).filename(), fs::path(rb.files[i]).filename());
        EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i])) << ra.files[i];
    }
}

TEST(Runner, ThreadCountDoesNotChangeOutputs) {
    const TempDir a("thr_a"), b("thr_b");
    set_thread_count(1);
    const auto ra = run_text(kSmallPower, Command::value, a.str());
    set_thread_count(4);
    const auto rb = run_text(kSmallPower, Command::value, b.str());
    set_thread_count(0);
    ASSERT_EQ(ra.exit_code, kExitOk);
    ASSERT_EQ(ra.files.size(), rb.files.size());
    for (std::size_t i = 0; i < ra.files.size(); ++i) EXPECT_EQ(slurp(ra.files[i]), slurp(rb.files[i]));
}

TEST(Runner, ManifestReproducesTheRun) {
    const TempDir a("manifest_a"), b("manifest_b");
    const auto ra = run_text(kSmallPower, Command::solve, a.str());
    ASSERT_EQ(ra.exit_code, kExitOk);
    const std::string manifest = a.str("run_manifest.ini");
    const std::string text = slurp(manifest);
    EXPECT_EQ(text.rfind("# Re-run with: icins solve --config run_manifest.ini\n", 0), 0u);
    EXPECT_NE(text.find("command = solve"), std::string::npos);
    EXPECT_NE(text.find("config_hash = " + ra.config_hash), std::string::npos);

    RunOptions o;
    o.command = Command::solve;
    o.config_path = manifest;
    o.output_dir = b.str();
    std::ostringstream out, err;
    const auto rb = run(o, out, err);
    ASSERT_EQ(rb.exit_code, kExitOk) << err.str();
    EXPECT_EQ(rb.config_hash, ra.config_hash);
    EXPECT_EQ(slurp(a.str("solution.csv")), slurp(b.str("solution.csv")));
}

TEST(Runner, VerifyPrintsOneLinePerCheck) {
    const TempDir dir("verify");
    RunOptions o;
    o.command = Command::verify;
    o.output_dir = dir.str();
    std::ostringstream out, err;
    const auto r = run(parse_config(kSmallPower), o, out, err);
    EXPECT_TRUE(r.exit_code == kExitOk || r.exit_code == kExitFailure) << err.str();
    std::istringstream lines(out.str());
    std::string line;
    int checks = 0;
    while (std::getline(lines, line))
        if (line.rfind("PASS", 0) == 0 || line.rfind("FAIL", 0) == 0) ++checks;
    EXPECT_GE(checks, 8);
    EXPECT_TRUE(fs::exists(dir.str("verification.csv")));
    EXPECT_EQ(r.exit_code == kExitOk, out.str().find("FAIL") == std::string::npos);
}

TEST(Runner, CommandNamesRoundTrip) {
    for (Command c : {Command::simulate, Command::solve, Command::value, Command::verify})
        EXPECT_EQ(parse_command(command_name(c)), c);
    EXPECT_THROW(parse_command("fly"), std::exception);
}

}  // namespace
}  // namespace icins
