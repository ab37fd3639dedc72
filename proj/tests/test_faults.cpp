#include <gtest/gtest.h>

#include <set>

#include "fiver/error.hpp"
#include "fiver/faults.hpp"
#include "support.hpp"

using namespace fiver;
using namespace fiver::faults;

namespace {

std::vector<FileMeta> fifteen_files() {
    std::vector<FileMeta> d;
    for (std::uint64_t i = 0; i < 10; ++i) d.push_back(FileMeta::whole(i + 1, "a", 64 * MiB));
    for (std::uint64_t i = 0; i < 5; ++i) d.push_back(FileMeta::whole(i + 11, "b", 256 * MiB));
    return d;
}

}  // namespace

TEST(Schedule, ZeroCountIsEmpty) {
    EXPECT_TRUE(schedule_faults(0, fifteen_files(), 1, FaultMode::InFlight).empty());
}

TEST(Schedule, FixedSeedIsDeterministic) {
    const auto a = schedule_faults(8, fifteen_files(), 77, FaultMode::InFlight);
    const auto b = schedule_faults(8, fifteen_files(), 77, FaultMode::InFlight);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 8u);
    EXPECT_NE(a, schedule_faults(8, fifteen_files(), 78, FaultMode::InFlight));
}

TEST(Schedule, TwentyFourFaultsStayInsideFiles) {
    const auto d = fifteen_files();
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto s = schedule_faults(24, d, seed, FaultMode::PostWrite);
        ASSERT_EQ(s.size(), 24u);
        std::set<FaultSpec> distinct(s.begin(), s.end());
        EXPECT_EQ(distinct.size(), 24u);
        for (const auto& f : s) {
            ASSERT_LT(f.file_index, d.size());
            EXPECT_LT(f.byte_offset, d[f.file_index].size);
            EXPECT_LT(f.bit, 8);
            EXPECT_EQ(f.mode, FaultMode::PostWrite);
        }
    }
}

TEST(Schedule, EmptyFilesNeverReceiveFaults) {
    std::vector<FileMeta> d{FileMeta::whole(1, "a", 0), FileMeta::whole(2, "b", 3), FileMeta::whole(3, "c", 0)};
    const auto s = schedule_faults(24, d, 5, FaultMode::InFlight);
    for (const auto& f : s) EXPECT_EQ(f.file_index, 1u);
}

TEST(Schedule, TooManyFaultsIsDomainError) {
    std::vector<FileMeta> d{FileMeta::whole(1, "a", 2)};
    EXPECT_NO_THROW(schedule_faults(16, d, 1, FaultMode::InFlight));
    EXPECT_THROW(schedule_faults(17, d, 1, FaultMode::InFlight), DomainError);
    std::vector<FileMeta> empty{FileMeta::whole(1, "a", 0)};
    EXPECT_THROW(schedule_faults(1, empty, 1, FaultMode::InFlight), DomainError);
}

TEST(Schedule, RoughlyUniformOverBytes) {
    std::vector<FileMeta> d{FileMeta::whole(1, "small", 1000), FileMeta::whole(2, "big", 3000)};
    std::size_t in_big = 0;
    for (std::uint64_t seed = 0; seed < 400; ++seed)
        in_big += schedule_faults(1, d, seed, FaultMode::InFlight)[0].file_index == 1;
    EXPECT_NEAR(static_cast<double>(in_big) / 400, 0.75, 0.08);
}

TEST(Apply, FlipsBitZeroOfLetterA) {
    auto bytes = fiver::testing::bytes_of("a");
    EXPECT_TRUE(apply_fault({FaultMode::InFlight, 0, 0, 0}, bytes, 0));
    EXPECT_EQ(std::to_integer<int>(bytes[0]), 0x60);
}

TEST(Apply, OnlyInsideWindow) {
    auto bytes = fiver::testing::bytes_of("abcd");
    EXPECT_FALSE(apply_fault({FaultMode::InFlight, 0, 99, 1}, bytes, 100));
    EXPECT_FALSE(apply_fault({FaultMode::InFlight, 0, 104, 1}, bytes, 100));
    EXPECT_TRUE(apply_fault({FaultMode::InFlight, 0, 103, 7}, bytes, 100));
    EXPECT_EQ(std::to_integer<int>(bytes[3]), 'd' ^ 0x80);
}

TEST(Injector, FiresOnceAndLeavesCleanBufferAlone) {
    FaultInjector inj({{FaultMode::InFlight, 1, 10, 2}});
    const auto clean = hashio::make_buffer(hashio::Bytes(16, std::byte{0}));
    EXPECT_EQ(inj.corrupt_in_flight(0, 0, clean), clean);
    const auto dirty = inj.corrupt_in_flight(1, 0, clean);
    ASSERT_NE(dirty, clean);
    EXPECT_EQ(std::to_integer<int>((*dirty)[10]), 4);
    EXPECT_EQ(std::to_integer<int>((*clean)[10]), 0);
    EXPECT_EQ(inj.corrupt_in_flight(1, 0, clean), clean);
    EXPECT_TRUE(inj.unused().empty());
}

TEST(Injector, PersistentFaultsKeepFiring) {
    FaultInjector inj({{FaultMode::InFlight, 0, 3, 0}}, true);
    const auto clean = hashio::make_buffer(hashio::Bytes(8, std::byte{0}));
    EXPECT_NE(inj.corrupt_in_flight(0, 0, clean), clean);
    EXPECT_NE(inj.corrupt_in_flight(0, 0, clean), clean);
}

TEST(Injector, PostWriteFaultsAreTakenOncePerWindow) {
    FaultInjector inj({{FaultMode::PostWrite, 0, 5, 1}, {FaultMode::PostWrite, 0, 50, 1},
                       {FaultMode::InFlight, 0, 6, 1}});
    EXPECT_TRUE(inj.take_post_write(0, 10, 20).empty());
    const auto taken = inj.take_post_write(0, 0, 10);
    ASSERT_EQ(taken.size(), 1u);
    EXPECT_EQ(taken[0].byte_offset, 5u);
    EXPECT_TRUE(inj.take_post_write(0, 0, 10).empty());
    EXPECT_EQ(inj.unused().size(), 2u);
}

TEST(FaultMode, Spellings) {
    EXPECT_EQ(parse_fault_mode(to_string(FaultMode::InFlight)), FaultMode::InFlight);
    EXPECT_EQ(parse_fault_mode("post-write"), FaultMode::PostWrite);
    EXPECT_THROW(parse_fault_mode("sideways"), ParseError);
}
