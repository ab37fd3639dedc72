#include <gtest/gtest.h>

#include <random>

#include "fiver/endpoint.hpp"
#include "fiver/error.hpp"
#include "fiver/wire.hpp"
#include "support.hpp"

using namespace fiver;
using namespace fiver::endpoint;
namespace ft = fiver::testing;

namespace {

// Speaks the sender side of the protocol by hand.
struct RawClient {
    explicit RawClient(const ft::Loopback& rx) : channel(net::Socket::connect(rx.address())) {
        wire::handshake(channel, wire::Role::Sender, wire::HelloMsg{});
    }

    void send_window(const FileMeta& m, std::span<const std::byte> bytes, bool retransfer,
                     wire::VerifyMode verify = wire::VerifyMode::None) {
        if (retransfer) channel.send(wire::FrameType::Retransfer, wire::RetransferMsg{m.file_id, m.offset, m.length});
        channel.send(wire::FrameType::FileBegin, wire::FileBeginMsg{m, verify, retransfer, {}});
        for (std::size_t pos = 0; pos < bytes.size(); pos += MiB)
            channel.send_data(bytes.subspan(pos, std::min<std::size_t>(MiB, bytes.size() - pos)));
    }

    // Reads until the receiver ends or errors the session; returns the last frame.
    wire::Frame drain() {
        for (;;) {
            auto f = channel.recv();
            if (!f) return {};
            if (f->type == wire::FrameType::SessionEnd || f->type == wire::FrameType::Error) return *f;
        }
    }

    wire::Channel channel;
};

}  // namespace

TEST(Receiver, StoresFileByteEqual) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {3 * MiB + 5}, 1);
    ft::Loopback rx(dir / "dst");
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    const auto report = ft::run(rx, ft::plan_for(ds, Strategy::Fiver), opts);
    ASSERT_TRUE(report.all_verified()) << report.error;
    EXPECT_TRUE(ft::files_equal(dir / "src" / ds[0].path, dir / "dst" / ds[0].path));
}

TEST(Receiver, PathTraversalGetsErrorFrame) {
    ft::TempDir dir;
    ft::Loopback rx(dir / "dst");
    RawClient client(rx);
    FileMeta m = FileMeta::whole(1, "../evil.bin", 3);
    client.channel.send(wire::FrameType::FileBegin, wire::FileBeginMsg{m, wire::VerifyMode::None, false, {}});
    const auto f = client.drain();
    EXPECT_EQ(f.type, wire::FrameType::Error);
    EXPECT_FALSE(std::filesystem::exists(dir / "evil.bin"));
    for (const char* bad : {"/etc/passwd", "a/../../x", ""}) {
        RawClient c(rx);
        c.channel.send(wire::FrameType::FileBegin,
                       wire::FileBeginMsg{FileMeta::whole(1, bad, 3), wire::VerifyMode::None, false, {}});
        EXPECT_EQ(c.drain().type, wire::FrameType::Error) << bad;
    }
}

TEST(Receiver, RetransferWindowOverwritesExactlyThatRange) {
    ft::TempDir dir;
    ft::Loopback rx(dir / "dst");
    std::mt19937_64 rng(5);
    const auto original = ft::random_bytes(rng, 4 * MiB);
    const auto patch = ft::random_bytes(rng, 1 * MiB);

    RawClient client(rx);
    const FileMeta whole = FileMeta::whole(1, "sub/f.bin", original.size());
    client.send_window(whole, original, false);
    FileMeta w = whole;
    w.offset = 2 * MiB;
    w.length = 1 * MiB;
    client.send_window(w, patch, true);
    client.channel.send(wire::FrameType::SessionEnd, wire::SessionEndMsg{1, original.size(), false});
    ASSERT_EQ(client.drain().type, wire::FrameType::SessionEnd);

    auto expected = original;
    std::copy(patch.begin(), patch.end(), expected.begin() + 2 * MiB);
    EXPECT_EQ(ft::read_file(dir / "dst" / "sub/f.bin"), expected);
    EXPECT_EQ(rx.sessions().back().retransfers, 1u);
}

TEST(Receiver, DataBeyondWindowIsProtocolViolation) {
    ft::TempDir dir;
    ft::Loopback rx(dir / "dst");
    RawClient client(rx);
    const auto bytes = ft::bytes_of("abcd");
    client.send_window(FileMeta::whole(1, "x", 3), std::span(bytes), false);
    EXPECT_EQ(client.drain().type, wire::FrameType::Error);
}

TEST(Receiver, DigestsComeBackForSharedWindows) {
    ft::TempDir dir;
    ft::Loopback rx(dir / "dst");
    std::mt19937_64 rng(6);
    const auto data = ft::random_bytes(rng, 2 * MiB + 1);
    RawClient client(rx);
    client.send_window(FileMeta::whole(4, "d.bin", data.size()), data, false, wire::VerifyMode::Shared);
    auto f = client.channel.recv();
    ASSERT_TRUE(f);
    ASSERT_EQ(f->type, wire::FrameType::FileDigest);
    const auto msg = wire::decode_file_digest(f->payload);
    EXPECT_EQ(msg.file_id, 4u);
    EXPECT_EQ(msg.length, data.size());
    EXPECT_EQ(msg.digest_hex, ft::oracle_hex(HashAlg::MD5, data));
}

TEST(Transfer, ThreeFilesVerify) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {1 * MiB, 2 * MiB, 123}, 2);
    ft::Loopback rx(dir / "dst");
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    const auto report = ft::run(rx, ft::plan_for(ds, Strategy::Fiver), opts);
    ASSERT_EQ(report.files.size(), 3u);
    for (const auto& f : report.files) EXPECT_EQ(f.outcome, VerifyOutcome::Verified);
    EXPECT_TRUE(ft::trees_equal(ds, dir / "src", dir / "dst"));
}

TEST(Transfer, UnreachableHostReportsEveryFile) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {10, 20}, 3);
    net::Address nowhere;
    {
        net::Listener l({"127.0.0.1", 0});
        nowhere = {"127.0.0.1", l.port()};
    }
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    const auto report = endpoint::transfer(nowhere, ft::plan_for(ds, Strategy::Fiver), opts);
    EXPECT_TRUE(report.transport_error);
    EXPECT_FALSE(report.error.empty());
    ASSERT_EQ(report.files.size(), 2u);
    for (const auto& f : report.files) EXPECT_EQ(f.outcome, VerifyOutcome::Failed);
}

TEST(Transfer, DisconnectAfterFirstOfThree) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {256 * KiB, 4 * MiB, 4 * MiB}, 4);
    ReceiverConfig rc;
    rc.drop_after_windows = 1;
    ft::Loopback rx(dir / "dst", rc);
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    opts.throttle.net_rate = 8 * MiB;
    const auto report = ft::run(rx, ft::plan_for(ds, Strategy::Sequential), opts);
    ASSERT_EQ(report.files.size(), 3u);
    EXPECT_EQ(report.files[0].outcome, VerifyOutcome::Verified);
    EXPECT_EQ(report.files[1].outcome, VerifyOutcome::Failed);
    EXPECT_EQ(report.files[2].outcome, VerifyOutcome::Failed);
    EXPECT_TRUE(report.transport_error);
}

TEST(Transfer, HashMismatchBetweenPlanAndFilesIsRejected) {
    ft::TempDir dir;
    auto ds = ft::make_dataset(dir / "src", {10}, 5);
    ds[0].hash_alg = HashAlg::SHA1;
    TransferPlan plan;
    plan.dataset = ds;
    ft::Loopback rx(dir / "dst");
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    EXPECT_ANY_THROW({
        const auto r = ft::run(rx, plan, opts);
        if (!r.all_verified()) throw std::runtime_error(r.error);
    });
}

TEST(Transfer, AuditExposesPostWriteDivergence) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {2 * MiB, 1 * MiB}, 6);
    ft::Loopback rx(dir / "dst");
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    opts.audit = true;
    opts.faults = {{faults::FaultMode::PostWrite, 0, 12345, 3}};
    const auto report = ft::run(rx, ft::plan_for(ds, Strategy::Fiver), opts);
    ASSERT_EQ(report.files.size(), 2u);
    EXPECT_EQ(report.files[0].outcome, VerifyOutcome::Verified);
    EXPECT_EQ(report.files[0].audit_match, false);
    EXPECT_EQ(report.files[1].audit_match, true);
    EXPECT_EQ(report.totals().audit_mismatches, 1u);
}

TEST(Transfer, ReceiverKeepsServingAfterAFailedSession) {
    ft::TempDir dir;
    const auto ds = ft::make_dataset(dir / "src", {1000}, 7);
    ft::Loopback rx(dir / "dst");
    {
        RawClient bad(rx);
        bad.channel.send_raw(wire::FrameType::Data, ft::bytes_of("x"));
        EXPECT_EQ(bad.drain().type, wire::FrameType::Error);
    }
    endpoint::SenderOptions opts;
    opts.source_root = dir / "src";
    EXPECT_TRUE(ft::run(rx, ft::plan_for(ds, Strategy::Fiver), opts).all_verified());
}
