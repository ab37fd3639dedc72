#pragma once

#include <ostream>
#include <span>
#include <string>

#include "fiver/faults.hpp"
#include "fiver/model.hpp"

namespace fiver::report {

enum class Format : std::uint8_t { Csv, JsonLines };

Format parse_format(std::string_view text);

// One row per file, then nothing else: header is
// file_id,path,size,route,t_transfer,t_checksum,t_total,outcome,
// retransferred_bytes,shared_bytes,reread_bytes,mismatches,audit_match
void write_csv(std::ostream& out, const TransferReport& report);

// {"type":"file",...} per file, {"type":"fault",...} per scheduled fault,
// then one {"type":"session",...} line with totals.
void write_jsonl(std::ostream& out, const TransferReport& report,
                 std::span<const faults::FaultSpec> schedule = {});

void write(std::ostream& out, Format format, const TransferReport& report,
           std::span<const faults::FaultSpec> schedule = {});

// Human summary for the terminal.
std::string summary(const TransferReport& report);

// RFC 4180 quoting when the field needs it.
std::string csv_field(std::string_view text);
// Fixed three decimals, the precision times are reported at.
std::string format_seconds(double seconds);

}  // namespace fiver::report
