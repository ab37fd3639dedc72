#include <gtest/gtest.h>

#include "fiver/endpoint.hpp"
#include "fiver/strategies.hpp"
#include "support.hpp"

using namespace fiver;
namespace ft = fiver::testing;

namespace {

struct Rig {
    ft::TempDir dir;
    std::vector<FileMeta> dataset;
    std::unique_ptr<ft::Loopback> rx;
    endpoint::SenderOptions opts;

    explicit Rig(const std::vector<std::uint64_t>& sizes, std::uint64_t seed = 1) {
        dataset = ft::make_dataset(dir / "src", sizes, seed);
        rx = std::make_unique<ft::Loopback>(dir / "dst");
        opts.source_root = dir / "src";
    }

    TransferReport go(const TransferPlan& plan) { return ft::run(*rx, plan, opts); }
    bool equal() const { return ft::trees_equal(dataset, dir / "src", dir / "dst"); }
};

}  // namespace

TEST(SelectHybrid, SmallFilesShareLargeFilesReread) {
    EXPECT_EQ(strategies::select_hybrid(FileMeta::whole(1, "a", 10 * MiB), 16 * GiB), StrategyChoice::ConcurrentShared);
    EXPECT_EQ(strategies::select_hybrid(FileMeta::whole(1, "a", 20 * GiB), 16 * GiB), StrategyChoice::SequentialReread);
    EXPECT_EQ(strategies::select_hybrid(FileMeta::whole(1, "a", 16 * GiB), 16 * GiB), StrategyChoice::SequentialReread);
    EXPECT_THROW(strategies::select_hybrid(FileMeta::whole(1, "a", 1), 0), DomainError);
}

TEST(SelectHybrid, AutoThresholdIsPositive) { EXPECT_GT(strategies::auto_hybrid_threshold(), 0u); }

TEST(Sequential, TimesAddUp) {
    Rig r({6 * MiB});
    r.opts.throttle = {3 * MiB, 2 * MiB};
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Sequential));
    ASSERT_TRUE(rep.all_verified()) << rep.error;
    EXPECT_NEAR(rep.wall_clock, 5.0, 0.5);
    EXPECT_EQ(rep.files[0].route, StrategyChoice::SequentialReread);
    EXPECT_EQ(rep.files[0].reread_bytes, 6 * MiB);
    EXPECT_EQ(rep.files[0].shared_bytes, 0u);
}

TEST(Sequential, EmptyDatasetIsEmptyReport) {
    Rig r({});
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Sequential));
    EXPECT_TRUE(rep.files.empty());
    EXPECT_TRUE(rep.error.empty());
    EXPECT_LT(rep.wall_clock, 0.5);
}

TEST(Sequential, InFlightFaultRetransfersWholeFile) {
    Rig r({3 * MiB, MiB});
    r.opts.faults = {{faults::FaultMode::InFlight, 0, 2 * MiB + 7, 4}};
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Sequential));
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::RetriedThenVerified);
    EXPECT_EQ(rep.files[0].retransferred_bytes, 3 * MiB);
    EXPECT_EQ(rep.files[0].mismatches, 1u);
    EXPECT_EQ(rep.files[1].outcome, VerifyOutcome::Verified);
    EXPECT_TRUE(r.equal());
}

TEST(Sequential, PersistentFaultFailsAfterRetryBudget) {
    Rig r({MiB});
    r.opts.faults = {{faults::FaultMode::InFlight, 0, 5, 0}};
    r.opts.faults_persistent = true;
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Sequential));
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::Failed);
    EXPECT_EQ(rep.files[0].mismatches, 4u);
    EXPECT_EQ(rep.files[0].retransferred_bytes, 3 * MiB);
}

TEST(FilePipeline, TwoFilesOverlap) {
    Rig r({4 * MiB, 4 * MiB});
    r.opts.throttle = {2 * MiB, 2 * MiB};
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::FilePipeline));
    ASSERT_TRUE(rep.all_verified()) << rep.error;
    EXPECT_NEAR(rep.wall_clock, 6.0, 0.6);
}

TEST(FilePipeline, SingleFileGainsNothing) {
    Rig r({4 * MiB});
    r.opts.throttle = {4 * MiB, 4 * MiB};
    const auto pipe = r.go(ft::plan_for(r.dataset, Strategy::FilePipeline));
    const auto seq = r.go(ft::plan_for(r.dataset, Strategy::Sequential));
    EXPECT_NEAR(pipe.wall_clock, seq.wall_clock, 0.2 * seq.wall_clock);
    EXPECT_NEAR(pipe.wall_clock, 2.0, 0.2);
}

TEST(BlockPipeline, FourBlocksFillAndDrain) {
    Rig r({4 * MiB});
    r.opts.throttle = {1 * MiB, 1 * MiB};
    auto plan = ft::plan_for(r.dataset, Strategy::BlockPipeline);
    plan.block_size = MiB;
    const auto rep = r.go(plan);
    ASSERT_TRUE(rep.all_verified()) << rep.error;
    EXPECT_NEAR(rep.wall_clock, 5.0, 0.5);
}

TEST(BlockPipeline, FaultInSecondBlockResendsOneBlock) {
    Rig r({4 * MiB});
    r.opts.faults = {{faults::FaultMode::InFlight, 0, MiB + 100, 1}};
    auto plan = ft::plan_for(r.dataset, Strategy::BlockPipeline);
    plan.block_size = MiB;
    const auto rep = r.go(plan);
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::RetriedThenVerified);
    EXPECT_EQ(rep.files[0].retransferred_bytes, MiB);
    EXPECT_TRUE(r.equal());
}

TEST(BlockPipeline, FileSmallerThanBlockIsOneUnit) {
    Rig r({300 * KiB, 0, 2 * MiB + 1});
    auto plan = ft::plan_for(r.dataset, Strategy::BlockPipeline);
    plan.block_size = MiB;
    const auto rep = r.go(plan);
    ASSERT_TRUE(rep.all_verified()) << rep.error;
    EXPECT_TRUE(r.equal());
}

TEST(Fiver, FinishesAroundTheSlowerPhase) {
    Rig r({6 * MiB});
    r.opts.throttle = {6 * MiB, 2 * MiB};
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Fiver));
    ASSERT_TRUE(rep.all_verified()) << rep.error;
    EXPECT_GE(rep.wall_clock, 2.9);
    EXPECT_LE(rep.wall_clock, 3.45);
    EXPECT_EQ(rep.files[0].shared_bytes, 6 * MiB);
    EXPECT_EQ(rep.files[0].reread_bytes, 0u);
}

TEST(Fiver, ZeroByteFileVerifies) {
    Rig r({0});
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Fiver));
    ASSERT_EQ(rep.files.size(), 1u);
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::Verified);
    EXPECT_TRUE(std::filesystem::exists(r.dir / "dst" / r.dataset[0].path));
    EXPECT_EQ(std::filesystem::file_size(r.dir / "dst" / r.dataset[0].path), 0u);
}

TEST(Fiver, InFlightFaultRetransfersWholeFile) {
    Rig r({2 * MiB + 3});
    r.opts.faults = {{faults::FaultMode::InFlight, 0, 17, 6}};
    const auto rep = r.go(ft::plan_for(r.dataset, Strategy::Fiver));
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::RetriedThenVerified);
    EXPECT_EQ(rep.files[0].retransferred_bytes, 2 * MiB + 3);
    EXPECT_TRUE(r.equal());
}

TEST(FiverChunked, FaultInLastPartialChunkResendsTail) {
    Rig r({3 * MiB + 1000});
    r.opts.faults = {{faults::FaultMode::InFlight, 0, 3 * MiB + 999, 0}};
    auto plan = ft::plan_for(r.dataset, Strategy::FiverChunked);
    plan.chunk_size = MiB;
    const auto rep = r.go(plan);
    EXPECT_EQ(rep.files[0].outcome, VerifyOutcome::RetriedThenVerified);
    EXPECT_EQ(rep.files[0].retransferred_bytes, 1000u);
    EXPECT_TRUE(r.equal());
}

TEST(FiverChunked, FaultsBoundedByChunkCount) {
    Rig r({4 * MiB, 4 * MiB, 5 * MiB});
    r.opts.faults = faults::schedule_faults(5, r.dataset, 3, faults::FaultMode::InFlight);
    auto plan = ft::plan_for(r.dataset, Strategy::FiverChunked);
    plan.chunk_size = MiB;
    const auto rep = r.go(plan);
    EXPECT_LE(rep.totals().retransferred_bytes, 5 * MiB);
    EXPECT_GT(rep.totals().retransferred_bytes, 0u);
    EXPECT_EQ(rep.totals().failed, 0u);
    EXPECT_TRUE(r.equal());
}

TEST(Hybrid, AllSmallBehavesAsFiver) {
    Rig r({MiB, MiB});
    auto plan = ft::plan_for(r.dataset, Strategy::FiverHybrid);
    plan.hybrid_threshold = 64 * MiB;
    const auto rep = r.go(plan);
    for (const auto& f : rep.files) {
        EXPECT_EQ(f.route, StrategyChoice::ConcurrentShared);
        EXPECT_EQ(f.shared_bytes, f.size);
        EXPECT_EQ(f.reread_bytes, 0u);
    }
}

TEST(Hybrid, AllLargeBehavesAsSequential) {
    Rig r({2 * MiB, 3 * MiB});
    auto plan = ft::plan_for(r.dataset, Strategy::FiverHybrid);
    plan.hybrid_threshold = MiB;
    const auto rep = r.go(plan);
    for (const auto& f : rep.files) {
        EXPECT_EQ(f.route, StrategyChoice::SequentialReread);
        EXPECT_EQ(f.shared_bytes, 0u);
        EXPECT_EQ(f.reread_bytes, f.size);
    }
}

TEST(AllStrategies, SixFileMixEndsByteEqualWithFaults) {
    for (auto s : {Strategy::Sequential, Strategy::FilePipeline, Strategy::BlockPipeline, Strategy::Fiver,
                   Strategy::FiverChunked, Strategy::FiverHybrid}) {
        Rig r({0, 100, MiB, 3 * MiB + 5, 64 * KiB, 2 * MiB}, 9);
        r.opts.faults = faults::schedule_faults(3, r.dataset, 11, faults::FaultMode::InFlight);
        const auto rep = r.go(ft::plan_for(r.dataset, s));
        EXPECT_EQ(rep.totals().failed, 0u) << to_string(s) << ": " << rep.error;
        EXPECT_GE(rep.totals().retried, 1u) << to_string(s);
        EXPECT_TRUE(r.equal()) << to_string(s);
    }
}

TEST(Baseline, VerifyOffSkipsDigests) {
    Rig r({2 * MiB});
    auto plan = ft::plan_for(r.dataset, Strategy::Fiver);
    plan.verify = false;
    const auto rep = r.go(plan);
    ASSERT_EQ(rep.files.size(), 1u);
    EXPECT_EQ(rep.files[0].shared_bytes, 0u);
    EXPECT_EQ(rep.files[0].reread_bytes, 0u);
    EXPECT_TRUE(r.equal());
}
