#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "fiver/config.hpp"
#include "fiver/net.hpp"
#include "support.hpp"

using namespace fiver;
namespace ft = fiver::testing;

namespace {

struct Result {
    int code = -1;
    std::string out;
};

Result sh(const std::string& args) {
    const std::string cmd = std::string(FIVER_CLI_PATH) + " " + args + " 2>/dev/null";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) r.out.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::uint16_t free_port() {
    net::Listener l({"127.0.0.1", 0});
    return l.port();
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

}  // namespace

TEST(Cli, InvalidCombinationIsUsageError) {
    EXPECT_EQ(sh("send --strategy sequential --chunk-size 1M").code, 1);
    EXPECT_EQ(sh("send --strategy hybrid").code, 1);
}

TEST(Cli, UnknownInputIsUsageError) {
    EXPECT_EQ(sh("").code, 1);
    EXPECT_EQ(sh("warp").code, 1);
    EXPECT_EQ(sh("send --warp 9").code, 1);
    EXPECT_EQ(sh("send --hash crc32").code, 1);
    EXPECT_EQ(sh("gen --spec 1x0 --out /tmp/never-written").code, 1);
}

TEST(Cli, PrintConfigRoundTrips) {
    const auto r = sh("send --print-config --strategy hybrid --hybrid-threshold 1G --net-rate 100M --audit");
    ASSERT_EQ(r.code, 0);
    const cli::Config c = cli::resolve(cli::parse_config_text(r.out));
    EXPECT_EQ(c.strategy, Strategy::FiverHybrid);
    EXPECT_EQ(c.hybrid_threshold, "1G");
    EXPECT_EQ(c.net_rate, 100 * MiB);
    EXPECT_TRUE(c.audit);
    EXPECT_EQ(cli::print_config(c), r.out);
}

TEST(Cli, EnvironmentAndConfigFileLayers) {
    ft::TempDir dir;
    std::ofstream(dir / "f.conf") << "strategy=file-ppl\nhash=sha1\nfaults=2\n";
    const auto r = sh("send --print-config --config " + q(dir / "f.conf"));
    EXPECT_NE(r.out.find("strategy=file-ppl"), std::string::npos);
    const auto e = sh("send --print-config --config " + q(dir / "f.conf") + " --faults 7").out;
    EXPECT_NE(e.find("faults=7"), std::string::npos);
    const std::string env = "env FIVER_HASH=sha256 " + std::string(FIVER_CLI_PATH) + " send --print-config --config " +
                            q(dir / "f.conf") + " 2>/dev/null";
    FILE* p = popen(env.c_str(), "r");
    char buf[8192];
    std::string out;
    while (std::size_t n = fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    pclose(p);
    EXPECT_NE(out.find("hash=sha256"), std::string::npos);
    EXPECT_NE(out.find("strategy=file-ppl"), std::string::npos);
}

TEST(Cli, FaultFreeSendExitsZero) {
    ft::TempDir dir;
    ASSERT_EQ(sh("gen --spec 3x64K,1x1M --order shuffled --seed 3 --out " + q(dir / "data")).code, 0);
    ASSERT_TRUE(std::filesystem::exists(dir / "data" / "manifest.tsv"));
    ft::Loopback rx(dir / "dst");
    const auto a = rx.address();
    const auto r = sh("send --strategy fiver --hash sha256 --root " + q(dir / "data") + " --address 127.0.0.1:" +
                      std::to_string(a.port) + " --report " + q(dir / "r.csv"));
    EXPECT_EQ(r.code, 0);
    for (const auto& e : std::filesystem::directory_iterator(dir / "data")) {
        if (e.path().filename() != "manifest.tsv") {
            EXPECT_TRUE(ft::files_equal(e.path(), dir / "dst" / e.path().filename()));
        }
    }
    std::ifstream rep(dir / "r.csv");
    std::string header;
    std::getline(rep, header);
    EXPECT_EQ(header.rfind("file_id,path,size", 0), 0u);
}

TEST(Cli, PostWriteFaultsUnderFiverAreOnlySeenByAudit) {
    ft::TempDir dir;
    ASSERT_EQ(sh("gen --spec 4x1M --seed 5 --out " + q(dir / "data")).code, 0);
    ft::Loopback rx(dir / "dst");
    const auto r = sh("send --strategy fiver --faults 8 --fault-mode post-write --audit --root " + q(dir / "data") +
                      " --address 127.0.0.1:" + std::to_string(rx.address().port) + " --report-format jsonl --report " +
                      q(dir / "r.jsonl"));
    EXPECT_EQ(r.code, 0);
    std::ifstream rep(dir / "r.jsonl");
    std::stringstream all;
    all << rep.rdbuf();
    EXPECT_NE(all.str().find("\"audit_match\":false"), std::string::npos) << all.str();
}

TEST(Cli, PersistentFaultsExitTwo) {
    ft::TempDir dir;
    ASSERT_EQ(sh("gen --spec 2x256K --out " + q(dir / "data")).code, 0);
    ft::Loopback rx(dir / "dst");
    const auto r = sh("send --strategy sequential --faults 1 --faults-persistent --root " + q(dir / "data") +
                      " --address 127.0.0.1:" + std::to_string(rx.address().port));
    EXPECT_EQ(r.code, 2);
}

TEST(Cli, ClosedPortExitsThree) {
    ft::TempDir dir;
    ASSERT_EQ(sh("gen --spec 1x1K --out " + q(dir / "data")).code, 0);
    EXPECT_EQ(sh("send --root " + q(dir / "data") + " --address 127.0.0.1:" + std::to_string(free_port())).code, 3);
}

TEST(Cli, RecvAndSendEndToEnd) {
    ft::TempDir dir;
    ASSERT_EQ(sh("gen --spec 2x300K,1x2M --out " + q(dir / "data")).code, 0);
    const std::uint16_t port = free_port();
    Result recv;
    std::thread rx([&] {
        recv = sh("recv --once --address 127.0.0.1:" + std::to_string(port) + " --root " + q(dir / "dst"));
    });
    int code = -1;
    for (int attempt = 0; attempt < 50; ++attempt) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
        code = sh("send --strategy block-ppl --block-size 1M --root " + q(dir / "data") + " --address 127.0.0.1:" +
                  std::to_string(port))
                   .code;
        if (code != 3) break;
    }
    rx.join();
    EXPECT_EQ(code, 0);
    EXPECT_EQ(recv.code, 0);
    for (const auto& e : std::filesystem::directory_iterator(dir / "data")) {
        if (e.path().filename() != "manifest.tsv") {
            EXPECT_TRUE(ft::files_equal(e.path(), dir / "dst" / e.path().filename()));
        }
    }
}

TEST(Cli, BenchRunsAMatrix) {
    ft::TempDir dir;
    std::ofstream(dir / "m.txt") << "dataset=2x256K strategy=fiver|sequential reps=2 net_rate=8M checksum_rate=8M\n";
    const auto r = sh("bench --matrix " + q(dir / "m.txt") + " --work-dir " + q(dir / "work"));
    EXPECT_EQ(r.code, 0);
    std::istringstream lines(r.out);
    std::string header;
    std::getline(lines, header);
    EXPECT_EQ(header.rfind("dataset,strategy,hash", 0), 0u);
    int rows = 0;
    for (std::string l; std::getline(lines, l);) rows += !l.empty();
    EXPECT_EQ(rows, 10);
}
