#include "fiver/report.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "fiver/error.hpp"

namespace fiver::report {

namespace {

std::string audit_text(const FileRecord& f) {
    if (!f.audit_match) return "";
    return *f.audit_match ? "match" : "mismatch";
}

}  // namespace

Format parse_format(std::string_view text) {
    if (text == "csv") return Format::Csv;
    if (text == "jsonl") return Format::JsonLines;
    throw ParseError("unknown report format '" + std::string(text) + "' (csv, jsonl)");
}

std::string csv_field(std::string_view text) {
    if (text.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(text);
    std::string out = "\"";
    for (char c : text) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string format_seconds(double seconds) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", seconds);
    return buf;
}

void write_csv(std::ostream& out, const TransferReport& report) {
    out << "file_id,path,size,route,t_transfer,t_checksum,t_total,outcome,"
           "retransferred_bytes,shared_bytes,reread_bytes,mismatches,audit_match\n";
    for (const auto& f : report.files) {
        out << f.file_id << ',' << csv_field(f.path) << ',' << f.size << ',' << to_string(f.route) << ','
            << format_seconds(f.t_transfer) << ',' << format_seconds(f.t_checksum) << ','
            << format_seconds(f.t_total) << ',' << to_string(f.outcome) << ',' << f.retransferred_bytes
            << ',' << f.shared_bytes << ',' << f.reread_bytes << ',' << f.mismatches << ','
            << audit_text(f) << '\n';
    }
}

void write_jsonl(std::ostream& out, const TransferReport& report,
                 std::span<const faults::FaultSpec> schedule) {
    using nlohmann::json;
    for (const auto& f : report.files) {
        json j = {{"type", "file"},
                  {"file_id", f.file_id},
                  {"path", f.path},
                  {"size", f.size},
                  {"route", to_string(f.route)},
                  {"t_transfer", f.t_transfer},
                  {"t_checksum", f.t_checksum},
                  {"t_total", f.t_total},
                  {"outcome", to_string(f.outcome)},
                  {"retransferred_bytes", f.retransferred_bytes},
                  {"shared_bytes", f.shared_bytes},
                  {"reread_bytes", f.reread_bytes},
                  {"mismatches", f.mismatches}};
        if (f.audit_match) j["audit_match"] = *f.audit_match;
        out << j.dump() << '\n';
    }
    for (const auto& s : schedule) {
        out << json{{"type", "fault"},
                    {"mode", faults::to_string(s.mode)},
                    {"file_index", s.file_index},
                    {"byte_offset", s.byte_offset},
                    {"bit", s.bit}}
                   .dump()
            << '\n';
    }
    const ReportTotals t = report.totals();
    json session = {{"type", "session"},
                    {"strategy", to_string(report.strategy)},
                    {"hash", to_string(report.hash_alg)},
                    {"files", report.files.size()},
                    {"bytes", t.bytes},
                    {"wall_clock", report.wall_clock},
                    {"t_transfer", t.t_transfer},
                    {"t_checksum", t.t_checksum},
                    {"t_total", t.t_total},
                    {"retransferred_bytes", t.retransferred_bytes},
                    {"shared_bytes", t.shared_bytes},
                    {"reread_bytes", t.reread_bytes},
                    {"verified", t.verified},
                    {"retried", t.retried},
                    {"failed", t.failed},
                    {"audit_mismatches", t.audit_mismatches},
                    {"transport_error", report.transport_error},
                    {"error", report.error},
                    {"warnings", report.warnings}};
    out << session.dump() << '\n';
}

void write(std::ostream& out, Format format, const TransferReport& report,
           std::span<const faults::FaultSpec> schedule) {
    if (format == Format::Csv)
        write_csv(out, report);
    else
        write_jsonl(out, report, schedule);
}

std::string summary(const TransferReport& report) {
    const ReportTotals t = report.totals();
    std::ostringstream s;
    s << to_string(report.strategy) << '/' << to_string(report.hash_alg) << ": " << report.files.size()
      << " files, " << format_size(t.bytes) << " in " << format_seconds(report.wall_clock) << " s; "
      << t.verified << " verified, " << t.retried << " retried, " << t.failed << " failed";
    if (t.retransferred_bytes) s << "; retransferred " << t.retransferred_bytes << " bytes";
    if (t.audit_mismatches) s << "; audit: " << t.audit_mismatches << " stored files differ from source";
    if (report.transport_error) s << "\ntransport error: " << report.error;
    else if (!report.error.empty()) s << "\nerror: " << report.error;
    for (const auto& w : report.warnings) s << "\nwarning: " << w;
    return s.str();
}

}  // namespace fiver::report
