#include <gtest/gtest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "gluscope/activation_dump.hpp"
#include "gluscope/cli.hpp"
#include "gluscope/fixtures.hpp"
#include "gluscope/io_util.hpp"
#include "gluscope/server.hpp"
#include "test_util.hpp"

namespace gluscope {
namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new testing::TempDir();
        ASSERT_EQ(run({"make-fixture", "--seed", "4", "--out", fixture()}).code, 0);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::string fixture() { return (*dir_ / "fx").string(); }
    static std::string weights() { return fixture() + "/again.safetensors"; }
    static std::string corpus() { return fixture() + "/corpus"; }
    static std::string path(const std::string& name) { return (*dir_ / name).string(); }

    static testing::TempDir* dir_;
};

testing::TempDir* CliTest::dir_ = nullptr;

TEST_F(CliTest, HelpAndVersion) {
    EXPECT_EQ(run({"--help"}).code, 0);
    const auto v = run({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_NE(v.out.find(cli::kVersion), std::string::npos);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
}

TEST_F(CliTest, SampleHappyPath) {
    write_file(path("src.jsonl"), "{\"text\": \"hello world\"}\n{\"text\": \"second doc\"}\n{\"text\": \"x\"}\n");
    const auto r = run({"sample", "--source", path("src.jsonl"), "--budget", "16", "--max-doc-tokens", "8", "--seed",
                        "2", "--out", path("sampled")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto m = nlohmann::json::parse(read_file(path("sampled") + "/run_manifest.json"));
    EXPECT_EQ(m["subcommand"], "sample");
    EXPECT_EQ(m["config"]["seed"], 2);
    EXPECT_TRUE(m.contains("duration_seconds"));
    EXPECT_GE(nlohmann::json::parse(read_file(path("sampled") + "/manifest.json"))["total_tokens"].get<int>(), 16);
}

TEST_F(CliTest, SampleUsageErrors) {
    EXPECT_EQ(run({"sample", "--budget", "10", "--out", path("x")}).code, 2);
    write_file(path("one.jsonl"), "{\"text\": \"a\"}\n");
    const auto r = run({"sample", "--source", path("one.jsonl"), "--budget", "10", "--max-doc-tokens", "1024",
                        "--out", path("y")});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("max_doc_tokens"), std::string::npos) << r.err;
    EXPECT_EQ(run({"sample", "--source", path("nope.jsonl"), "--budget", "10", "--max-doc-tokens", "4", "--out",
                   path("z")})
                  .code,
              1);
}

TEST_F(CliTest, ActivationsRowsAndShardDeterminism) {
    const auto a = run({"activations", "--weights", weights(), "--corpus", corpus(), "--shards", "1", "--out", path("s1")});
    ASSERT_EQ(a.code, 0) << a.err;
    const auto b = run({"activations", "--weights", weights(), "--corpus", corpus(), "--shards", "4", "--out", path("s4")});
    ASSERT_EQ(b.code, 0) << b.err;
    const auto rows = read_file(path("s1") + "/dataset.jsonl");
    EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 4);
    EXPECT_EQ(rows, read_file(path("s4") + "/dataset.jsonl"));
    EXPECT_EQ(read_file(path("s1") + "/manifest.json"), read_file(path("s4") + "/manifest.json"));
    const auto m = nlohmann::json::parse(read_file(path("s1") + "/manifest.json"));
    EXPECT_EQ(m["model_id"], "again");
}

TEST_F(CliTest, ActivationsFromDumpMatchesWeights) {
    ASSERT_EQ(run({"dump", "--weights", weights(), "--corpus", corpus(), "--out", path("acts.glua")}).code, 0);
    ASSERT_EQ(run({"activations", "--dump", path("acts.glua"), "--corpus", corpus(), "--shards", "3", "--out",
                   path("fromdump")})
                  .code,
              0);
    ASSERT_EQ(run({"activations", "--weights", weights(), "--corpus", corpus(), "--out", path("fromweights")}).code, 0);
    EXPECT_EQ(read_file(path("fromdump") + "/dataset.jsonl"), read_file(path("fromweights") + "/dataset.jsonl"));
}

TEST_F(CliTest, ActivationsSourceErrors) {
    EXPECT_EQ(run({"activations", "--corpus", corpus(), "--out", path("n")}).code, 2);
    EXPECT_EQ(run({"activations", "--weights", weights(), "--dump", "x", "--corpus", corpus(), "--out", path("n")}).code,
              2);
}

TEST_F(CliTest, DumpDisagreeingWithCorpusIsStreamError) {
    std::ostringstream bytes;
    {
        DumpHeader h;
        h.n_layers = 1;
        h.d_mlp = 3;
        DumpWriter w(bytes, h);
        w.write(DocActivations(0, 40, 1, 3));
    }
    write_file(path("bad.glua"), bytes.str());
    const auto r = run({"activations", "--dump", path("bad.glua"), "--corpus", corpus(), "--out", path("bad")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("doc 0"), std::string::npos) << r.err;
}

TEST_F(CliTest, AnalyzeAndPage) {
    ASSERT_EQ(run({"activations", "--weights", weights(), "--corpus", corpus(), "--out", path("ds")}).code, 0);
    const auto a = run({"analyze", "--dataset", path("ds"), "--weights", weights(), "--layer", "0"});
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_NE(a.out.find("layer"), std::string::npos);
    EXPECT_NE(nlohmann::json::parse(a.err)["outputs"]["results"][0]["r"].get<double>(), 0.0);
    EXPECT_EQ(run({"analyze", "--dataset", path("ds"), "--weights", weights(), "--all-layers"}).code, 0);
    const auto bad = run({"analyze", "--dataset", path("ds"), "--weights", weights(), "--layer", "3"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("out of range"), std::string::npos);

    const auto p = run({"page", "--dataset", path("ds"), "--corpus", corpus(), "--weights", weights(), "--neuron",
                        "0.2", "--out", path("bundle")});
    ASSERT_EQ(p.code, 0) << p.err;
    const auto first = read_file(path("bundle") + "/pages/L0_N2.json");
    ASSERT_EQ(run({"page", "--dataset", path("ds"), "--corpus", corpus(), "--weights", weights(), "--neuron", "0.2",
                   "--neuron", "0.1", "--out", path("bundle")})
                  .code,
              0);
    EXPECT_EQ(read_file(path("bundle") + "/pages/L0_N2.json"), first);
    EXPECT_EQ(nlohmann::json::parse(read_file(path("bundle") + "/index.json"))["pages"].size(), 2u);

    const auto unknown = run({"page", "--dataset", path("ds"), "--corpus", corpus(), "--weights", weights(),
                              "--neuron", "0.9", "--out", path("bundle")});
    EXPECT_EQ(unknown.code, 2);
    EXPECT_NE(unknown.err.find("0.9"), std::string::npos) << unknown.err;
}

TEST(WorkerCount, HonoursEnvironment) {
    ::setenv("GLUSCOPE_THREADS", "3", 1);
    EXPECT_EQ(cli::worker_count(8), 3u);
    EXPECT_EQ(cli::worker_count(2), 2u);
    ::unsetenv("GLUSCOPE_THREADS");
    EXPECT_GE(cli::worker_count(1), 1u);
    EXPECT_EQ(cli::worker_count(0), 1u);
}

class ServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        std::filesystem::create_directories(dir_.path() / "pages");
        write_file(dir_ / "index.json", R"({"pages":[{"id":"L31_N9634","layer":31,"neuron":9634,"model_id":"m"}]})");
        write_file(dir_.path() / "pages" / "L31_N9634.json", R"({"id":"L31_N9634"})");
        write_file(dir_ / "app.js", "console.log(1);");
        configure_server(server_, dir_.path());
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    void TearDown() override {
        server_.stop();
        thread_.join();
    }

    testing::TempDir dir_;
    httplib::Server server_;
    std::thread thread_;
    int port_ = 0;
};

TEST_F(ServerTest, Routes) {
    httplib::Client client("127.0.0.1", port_);
    auto index = client.Get("/index");
    ASSERT_TRUE(index);
    EXPECT_EQ(index->status, 200);
    EXPECT_EQ(nlohmann::json::parse(index->body)["pages"][0]["id"], "L31_N9634");
    EXPECT_NE(index->get_header_value("Content-Type").find("application/json"), std::string::npos);

    auto page = client.Get("/pages/L31_N9634");
    ASSERT_TRUE(page);
    EXPECT_EQ(page->status, 200);
    EXPECT_EQ(page->body, R"({"id":"L31_N9634"})");

    auto missing = client.Get("/pages/L0_N1");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);

    auto asset = client.Get("/app.js");
    ASSERT_TRUE(asset);
    EXPECT_EQ(asset->status, 200);
}

} // namespace
} // namespace gluscope
