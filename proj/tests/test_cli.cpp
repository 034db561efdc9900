#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Out {
    int code = -1;
    std::string text;
};

std::string quote(const std::string &s)
{
    std::string q = "'";
    for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
    return q + "'";
}

Out cli(const std::vector<std::string> &args, const std::string &env = "")
{
    std::string cmd = env + " " + quote(SINGSUSP_CLI);
    for (const auto &a : args) cmd += " " + quote(a);
    cmd += " 2>/dev/null";
    Out o;
    FILE *p = popen(cmd.c_str(), "r");
    if (!p) return o;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) o.text.append(buf.data(), n);
    const int st = pclose(p);
    o.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return o;
}

json read(const fs::path &p)
{
    std::ifstream in(p);
    return json::parse(in);
}

class TempDir {
public:
    TempDir()
    {
        path_ = fs::temp_directory_path() / ("singsusp-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path &path() const { return path_; }

private:
    fs::path path_;
    static inline int counter_ = 0;
};

const std::string kCat = R"({"kind":"CatMap"})";

} // namespace

TEST(Cli, HelpAndUsageErrors)
{
    EXPECT_EQ(cli({"--help"}).code, 0);
    EXPECT_EQ(cli({}).code, 2);
    EXPECT_EQ(cli({"--bogus"}).code, 2);
    EXPECT_EQ(cli({"run", "no-such-scenario"}).code, 2);
    EXPECT_EQ(cli({"metric", "--system", kCat, "--p", "not json", "--q", "{}"}).code, 2);
    // height outside [0,1)
    EXPECT_EQ(cli({"metric", "--system", kCat, "--p", R"({"base":{"x":[0.1,0.2]},"height":1.0})", "--q",
                   R"({"base":{"x":[0.1,0.2]},"height":0.5})"})
                  .code,
              2);
}

TEST(Cli, SuiteListAndExport)
{
    auto l = cli({"suite", "list"});
    EXPECT_EQ(l.code, 0);
    EXPECT_NE(l.text.find("fiber-kill"), std::string::npos);
    EXPECT_NE(l.text.find("expansive-shift"), std::string::npos);

    TempDir d;
    EXPECT_EQ(cli({"suite", "export", d.path().string()}).code, 0);
    int files = 0;
    for (const auto &e : fs::directory_iterator(SINGSUSP_SCENARIOS)) {
        if (e.path().filename() == "scenario.schema.json") continue;
        ++files;
        const auto exported = d.path() / e.path().filename();
        ASSERT_TRUE(fs::exists(exported)) << exported;
        EXPECT_EQ(read(exported), read(e.path())) << e.path();
    }
    EXPECT_GE(files, 9);
}

TEST(Cli, RunBundledAndFile)
{
    TempDir d;
    const auto out = d.path() / "r.json";
    EXPECT_EQ(cli({"run", "gamma-finite-catmap", "--out", out.string()}).code, 0);
    auto r = read(out);
    EXPECT_TRUE(r["pass"].get<bool>());
    EXPECT_EQ(r["scenario"], "gamma-finite-catmap");

    auto f = cli({"run", std::string(SINGSUSP_SCENARIOS) + "/gamma-finite-catmap.json"});
    EXPECT_EQ(f.code, 0);
    EXPECT_EQ(json::parse(f.text), r);

    auto s = cli({"--seed", "5", "run", "gamma-finite-catmap"});
    EXPECT_EQ(json::parse(s.text)["seed"], 5);
}

TEST(Cli, FailingVerdictExitsOne)
{
    // alpha = 1 gives gamma = 1, so a divergence claim must fail
    TempDir d;
    const auto sc = d.path() / "bad.json";
    std::ofstream(sc) << json{{"name", "bad"},
                              {"citation", "regular suspension has bounded traversal time"},
                              {"system", json::parse(kCat)},
                              {"brake", nullptr},
                              {"analyses", {{"expected_gamma", {{"samples", 64}}}}},
                              {"expected", {"GammaDiverges"}}}
                             .dump();
    auto o = cli({"run", sc.string()});
    EXPECT_EQ(o.code, 1);
    EXPECT_FALSE(json::parse(o.text)["pass"].get<bool>());
}

TEST(Cli, WorkerCountDoesNotChangeReports)
{
    auto a = cli({"--workers", "1", "run", "circle-nonexpansive"});
    auto b = cli({"run", "circle-nonexpansive"}, "SINGSUSP_WORKERS=3");
    EXPECT_EQ(a.code, 0);
    EXPECT_EQ(b.code, 0);
    EXPECT_EQ(a.text, b.text);
}

TEST(Cli, MetricAndGamma)
{
    auto m = cli({"metric", "--system", kCat, "--p", R"({"base":{"x":[0.1,0.2]},"height":0.2})", "--q",
                  R"({"base":{"x":[0.1,0.2]},"height":0.5})"});
    ASSERT_EQ(m.code, 0);
    auto j = json::parse(m.text);
    EXPECT_NEAR(j["chain_metric"].get<double>(), 0.3, 1e-12);
    // f(0.1,0.2) = (0.4,0.3), so the fiber term adds 0.3 * 0.3
    EXPECT_NEAR(j["bar_metric"].get<double>(), 0.39, 1e-12);

    auto g = cli({"gamma", "--system", kCat, "--brake", "null", "--x", R"({"x":[0.1,0.2]})"});
    ASSERT_EQ(g.code, 0);
    EXPECT_EQ(json::parse(g.text)["value"].get<double>(), 1.0);
}

TEST(Cli, SubshiftBuildAndCertify)
{
    TempDir d;
    const auto env = d.path() / "sh.json";
    ASSERT_EQ(cli({"subshift", "build", "--target", "0.2", "--levels", "3", "--tol", "0.02", "--out", env.string()}).code, 0);
    auto c = cli({"subshift", "certify", env.string()});
    ASSERT_EQ(c.code, 0);
    auto j = json::parse(c.text);
    EXPECT_EQ(j["result"], "Certified");
    EXPECT_NEAR(j["measured_entropy"].get<double>(), 0.2, 0.02);

    auto tight = cli({"subshift", "certify", env.string(), "--window", "8"});
    ASSERT_EQ(tight.code, 0);
    EXPECT_EQ(json::parse(tight.text)["result"], "Refuted");

    EXPECT_EQ(cli({"subshift", "build", "--target", "0", "--levels", "3", "--tol", "0.02"}).code, 2);
}
