#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "fiver/bench.hpp"
#include "fiver/config.hpp"
#include "fiver/endpoint.hpp"
#include "fiver/error.hpp"
#include "fiver/faults.hpp"
#include "fiver/report.hpp"

namespace {

using namespace fiver;

enum Exit : int { kOk = 0, kUsage = 1, kFailed = 2, kTransport = 3 };

const std::set<std::string> kBoolKeys = {"faults_persistent", "audit", "once"};

struct Command {
    CLI::App* app = nullptr;
    std::vector<std::string> keys;
    std::map<std::string, std::string> values;
    std::map<std::string, bool> flags;
    std::string config_file;
    bool print_config = false;
};

void bind(Command& cmd) {
    for (const auto& key : cmd.keys) {
        const auto& info = *std::find_if(cli::keys().begin(), cli::keys().end(),
                                         [&](const cli::KeyInfo& k) { return k.key == key; });
        std::string help = info.help + " [env " + cli::env_name(key) + "]";
        if (kBoolKeys.count(key))
            cmd.app->add_flag(cli::flag_name(key), cmd.flags[key], help);
        else
            cmd.app->add_option(cli::flag_name(key), cmd.values[key], help);
    }
    cmd.app->add_option("--config", cmd.config_file, "key=value file; flags > FIVER_* env > file > defaults");
    cmd.app->add_flag("--print-config", cmd.print_config, "print the effective configuration and exit");
}

cli::Settings explicit_settings(const Command& cmd) {
    cli::Settings s;
    for (const auto& key : cmd.keys) {
        if (cmd.app->get_option(cli::flag_name(key))->count() == 0) continue;
        s[key] = kBoolKeys.count(key) ? (cmd.flags.at(key) ? "true" : "false") : cmd.values.at(key);
    }
    return s;
}

cli::Config load(const Command& cmd) {
    const cli::Settings file = cmd.config_file.empty() ? cli::Settings{} : cli::read_config_file(cmd.config_file);
    const cli::Settings env = cli::from_env();
    const cli::Settings flags = explicit_settings(cmd);
    return cli::resolve(cli::merge({&file, &env, &flags}));
}

std::vector<FileMeta> dataset_of(const cli::Config& c, std::filesystem::path& source_root) {
    std::filesystem::path manifest = c.manifest;
    if (manifest.empty() && std::filesystem::exists(std::filesystem::path(c.root) / bench::kManifestName))
        manifest = std::filesystem::path(c.root) / bench::kManifestName;
    if (!manifest.empty()) {
        const auto m = bench::read_manifest(manifest);
        source_root = m.root;
        return m.dataset(c.hash);
    }
    source_root = c.root;
    if (!std::filesystem::is_directory(source_root))
        throw ParseError("dataset directory " + source_root.string() + " does not exist");
    std::vector<std::string> paths;
    for (const auto& e : std::filesystem::recursive_directory_iterator(source_root))
        if (e.is_regular_file()) paths.push_back(std::filesystem::relative(e.path(), source_root).generic_string());
    std::sort(paths.begin(), paths.end());
    std::vector<FileMeta> out;
    for (std::size_t i = 0; i < paths.size(); ++i)
        out.push_back(FileMeta::whole(i + 1, paths[i], std::filesystem::file_size(source_root / paths[i]), c.hash));
    return out;
}

int cmd_recv(const cli::Config& c) {
    endpoint::ReceiverConfig rc;
    rc.root = c.root;
    rc.checksum_rate = c.checksum_rate;
    rc.queue_capacity = c.queue_capacity;
    rc.on_session = [](const endpoint::SessionSummary& s) {
        std::cerr << "session: " << s.files << " files, " << s.bytes << " bytes, " << s.retransfers
                  << " retransfers" << (s.completed ? "" : "; aborted: " + s.error) << '\n';
    };
    std::filesystem::create_directories(rc.root);
    endpoint::Server server(net::Address::parse(c.address), rc);
    std::cerr << "listening on port " << server.port() << ", storing under " << rc.root.string() << '\n';
    server.serve(c.once ? std::optional<std::size_t>(1) : std::nullopt);
    const auto sessions = server.sessions();
    const bool ok = std::all_of(sessions.begin(), sessions.end(), [](const auto& s) { return s.completed; });
    return ok ? kOk : kTransport;
}

int cmd_send(const cli::Config& c) {
    std::filesystem::path source_root;
    TransferPlan plan;
    plan.dataset = dataset_of(c, source_root);
    plan.strategy = c.strategy;
    plan.hash_alg = c.hash;
    plan.block_size = c.block_size;
    plan.chunk_size = c.chunk_size;
    plan.hybrid_threshold = cli::hybrid_threshold_bytes(c);
    plan.queue_capacity = c.queue_capacity;
    plan.buffer_size = c.buffer_size;
    plan.retry_limit = c.retry_limit;

    endpoint::SenderOptions opts;
    opts.source_root = source_root;
    opts.throttle = {c.net_rate, c.checksum_rate};
    opts.faults = faults::schedule_faults(c.faults, plan.dataset, c.fault_seed, c.fault_mode);
    opts.faults_persistent = c.faults_persistent;
    opts.audit = c.audit;

    const TransferReport report = endpoint::transfer(net::Address::parse(c.address), plan, opts);
    std::cout << report::summary(report) << '\n';
    if (!c.report.empty()) {
        std::ofstream out(c.report);
        if (!out) throw IoError("cannot write report " + c.report);
        report::write(out, c.report_format, report, opts.faults);
    }
    if (report.transport_error) return kTransport;
    if (report.totals().failed > 0 || !report.error.empty()) return kFailed;
    return kOk;
}

int cmd_gen(const cli::Config& c) {
    if (c.spec.empty()) throw ParseError("gen needs --spec");
    const auto m = bench::generate_dataset(c.spec, c.order, c.seed, c.out, c.hash);
    std::cout << m.entries.size() << " files, " << m.total_bytes() << " bytes; manifest "
              << (std::filesystem::path(c.out) / bench::kManifestName).string() << '\n';
    return kOk;
}

int cmd_bench(const cli::Config& c) {
    if (c.matrix.empty()) throw ParseError("bench needs --matrix");
    std::ifstream in(c.matrix);
    if (!in) throw ParseError("cannot read matrix " + c.matrix);
    const auto cells = bench::parse_matrix(in);
    bench::ExperimentOptions opts;
    opts.work_dir = c.work_dir;
    if (!c.remote.empty()) opts.remote = net::Address::parse(c.remote);
    const auto rows = bench::run_experiment(cells, opts, [](const bench::Row& r) {
        std::cerr << bench::csv_row(r) << '\n';
    });
    if (c.report.empty()) {
        bench::emit_report(rows, std::cout, c.bench_format);
    } else {
        std::ofstream out(c.report);
        if (!out) throw IoError("cannot write report " + c.report);
        bench::emit_report(rows, out, c.bench_format);
    }
    const bool failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.outcome == "failed"; });
    return failed ? kFailed : kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fiver: file transfer with end-to-end integrity verification.\n"
                 "Sizes take binary suffixes: K = KiB, M = MiB, G = GiB."};
    app.require_subcommand(1);

    Command recv{app.add_subcommand("recv", "receive files into --root"),
                 {"address", "root", "checksum_rate", "queue_capacity", "once"}};
    Command send{app.add_subcommand("send", "send the dataset under --root to --address"),
                 {"address", "root", "manifest", "strategy", "hash", "block_size", "chunk_size",
                  "hybrid_threshold", "queue_capacity", "buffer_size", "retry_limit", "net_rate",
                  "checksum_rate", "faults", "fault_mode", "fault_seed", "faults_persistent", "audit",
                  "report", "report_format"}};
    Command gen{app.add_subcommand("gen", "generate a pseudo-random dataset"),
                {"spec", "order", "seed", "out", "hash"}};
    Command bench{app.add_subcommand("bench", "run an experiment matrix"),
                  {"matrix", "work_dir", "remote", "bench_format", "report"}};
    for (Command* cmd : {&recv, &send, &gen, &bench}) bind(*cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    Command* active = nullptr;
    for (Command* cmd : {&recv, &send, &gen, &bench})
        if (cmd->app->parsed()) active = cmd;

    cli::Config config;
    try {
        config = load(*active);
    } catch (const Error& e) {
        std::cerr << "fiver: " << e.what() << '\n';
        return kUsage;
    }
    if (active->print_config) {
        std::cout << cli::print_config(config);
        return kOk;
    }
    try {
        if (active == &recv) return cmd_recv(config);
        if (active == &send) return cmd_send(config);
        if (active == &gen) return cmd_gen(config);
        return cmd_bench(config);
    } catch (const ParseError& e) {
        std::cerr << "fiver: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "fiver: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "fiver: " << e.what() << '\n';
        return kTransport;
    }
}
