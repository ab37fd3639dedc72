#include "fiver/strategies.hpp"

#include <fstream>
#include <sstream>
#include <string>

#include "fiver/error.hpp"

namespace fiver::strategies {

namespace {

using endpoint::Window;

// Retransfers already known, serviced before the next new unit.
void service_pending(SenderSession& s) {
    while (auto r = s.next_retransfer()) s.retransfer(*r);
}

// Blocks until nothing is left to compare or resend.
void drain(SenderSession& s) {
    for (;;) {
        s.wait_resolved();
        auto r = s.next_retransfer();
        if (!r) return;
        s.retransfer(*r);
    }
}

// One unit of a read-back pipeline: the previous unit's read-back has to
// finish before this one's is queued.
void pipelined_unit(SenderSession& s, const Window& w) {
    service_pending(s);
    s.send_window(w);
    s.wait_digester_idle();
    s.submit_reread(w);
}

void set_all(SenderSession& s, StrategyChoice route) {
    for (std::uint32_t i = 0; i < s.file_count(); ++i) s.set_route(i, route);
}

}  // namespace

StrategyChoice select_hybrid(const FileMeta& file, std::uint64_t threshold) {
    if (threshold == 0) throw DomainError("hybrid threshold must be positive");
    return file.size < threshold ? StrategyChoice::ConcurrentShared
                                 : StrategyChoice::SequentialReread;
}

std::uint64_t auto_hybrid_threshold() {
    std::ifstream in("/proc/meminfo");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("MemAvailable:", 0) != 0) continue;
        std::istringstream fields(line.substr(13));
        std::uint64_t kib = 0;
        if (fields >> kib && kib > 0) return kib * KiB;
    }
    throw IoError("cannot read MemAvailable from /proc/meminfo");
}

void run_sequential(SenderSession& s) {
    set_all(s, StrategyChoice::SequentialReread);
    for (std::uint32_t i = 0; i < s.file_count(); ++i) {
        const Window w = s.whole(i);
        s.send_window(w);
        s.submit_reread(w);
        drain(s);
    }
}

void run_file_pipeline(SenderSession& s) {
    set_all(s, StrategyChoice::SequentialReread);
    for (std::uint32_t i = 0; i < s.file_count(); ++i) pipelined_unit(s, s.whole(i));
    drain(s);
}

void run_block_pipeline(SenderSession& s) {
    set_all(s, StrategyChoice::SequentialReread);
    const std::uint64_t block = s.plan().block_size;
    for (std::uint32_t i = 0; i < s.file_count(); ++i) {
        const auto blocks = chunk_layout(s.file(i).size, block);
        if (blocks.empty()) pipelined_unit(s, s.whole(i));
        for (const auto& b : blocks) pipelined_unit(s, {i, b.offset, b.length, false});
    }
    drain(s);
}

void run_fiver(SenderSession& s) {
    set_all(s, StrategyChoice::ConcurrentShared);
    for (std::uint32_t i = 0; i < s.file_count(); ++i) {
        service_pending(s);
        s.send_window(s.whole(i));
    }
    drain(s);
}

void run_fiver_chunked(SenderSession& s) {
    if (s.plan().chunk_size == 0) throw DomainError("fiver-chunked requires a chunk size");
    run_fiver(s);
}

void run_fiver_hybrid(SenderSession& s) {
    const std::uint64_t threshold = s.plan().hybrid_threshold;
    for (std::uint32_t i = 0; i < s.file_count(); ++i) {
        const StrategyChoice route = select_hybrid(s.file(i), threshold);
        s.set_route(i, route);
        const Window w = s.whole(i);
        if (route == StrategyChoice::ConcurrentShared) {
            service_pending(s);
            s.send_window(w);
        } else {
            drain(s);
            s.send_window(w);
            s.submit_reread(w);
            drain(s);
        }
    }
    drain(s);
}

void drive(SenderSession& s) {
    switch (s.plan().strategy) {
        case Strategy::Sequential: run_sequential(s); break;
        case Strategy::FilePipeline: run_file_pipeline(s); break;
        case Strategy::BlockPipeline: run_block_pipeline(s); break;
        case Strategy::Fiver: run_fiver(s); break;
        case Strategy::FiverChunked: run_fiver_chunked(s); break;
        case Strategy::FiverHybrid: run_fiver_hybrid(s); break;
    }
}

}  // namespace fiver::strategies
