#pragma once

#include <cstdint>

#include "fiver/endpoint.hpp"
#include "fiver/model.hpp"

namespace fiver::strategies {

using endpoint::SenderSession;

/// Files strictly smaller than `threshold` share the transfer buffers;
/// the rest are read back after the transfer.
StrategyChoice select_hybrid(const FileMeta& file, std::uint64_t threshold);

// Hybrid threshold from MemAvailable in /proc/meminfo. Throws IoError when
// it cannot be read.
std::uint64_t auto_hybrid_threshold();

// Transfer a file, read it back, wait for its verdict, then move on.
void run_sequential(SenderSession& session);
// Read back file i while file i+1 is transferred.
void run_file_pipeline(SenderSession& session);
// As file pipelining, with the session's block size as the unit.
void run_block_pipeline(SenderSession& session);
// Digest the bytes in flight, one digest per file.
void run_fiver(SenderSession& session);
// As fiver, with one digest per chunk.
void run_fiver_chunked(SenderSession& session);
// Per file: shared buffers below the threshold, read-back otherwise.
void run_fiver_hybrid(SenderSession& session);

// Dispatches on session.plan().strategy. Returns with every digest compared
// and no retransfer outstanding.
void drive(SenderSession& session);

}  // namespace fiver::strategies
