// ewallet: run the service and inspect its journal.
#include <csignal>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "ewallet/gateway/api.hpp"
#include "ewallet/gateway/config.hpp"
#include "ewallet/gateway/server.hpp"
#include "ewallet/ledger/journal_file.hpp"
#include "ewallet/text.hpp"
#include "scenario.hpp"

using namespace ewallet;

namespace {

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::BadRequest, "cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::BadRequest, path + ": " + e.what());
    }
}

std::unique_ptr<Random> make_random(const ServiceConfig& cfg) {
    if (cfg.random_seed) return std::make_unique<SeededRandom>(*cfg.random_seed);
    return std::make_unique<SecureRandom>();
}

PlatformOptions offline_options(const std::string& journal) {
    ServiceConfig cfg;
    cfg.journal = journal;
    return platform_options(cfg);
}

int serve(ServiceConfig cfg) {
    validate(cfg);
    // Handled by a dedicated thread so shutdown runs outside signal context.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SystemClock clock;
    auto random = make_random(cfg);
    Platform platform(clock, *random, platform_options(cfg));
    if (cfg.seed) platform.seed(read_json_file(cfg.seed->string()));
    UssdMenu ussd(platform, ussd_options(cfg));
    Api api(platform, ussd, cfg.admin_token);
    HttpServer server(api, platform, ussd);

    const int port = server.bind(cfg.listen_host, cfg.listen_port);
    if (port <= 0) {
        std::cerr << "cannot listen on " << cfg.listen_host << ":" << cfg.listen_port << "\n";
        return 1;
    }
    const auto& startup = platform.startup();
    std::cout << "replayed " << startup.journal_entries << " journal entries, " << startup.provider_events
              << " provider events";
    if (startup.compensated_efts) std::cout << ", reversed " << startup.compensated_efts << " unjournalled EFTs";
    std::cout << "\nlistening on http://" << cfg.listen_host << ":" << port << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
    });
    server.serve();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    platform.write_snapshot();
    return 0;
}

int replay(const std::string& journal, bool show_balances) {
    const auto entries = read_journal(journal);
    const auto report = fold_journal(entries);
    if (report.violation) {
        std::cout << entries.size() << " entries, invariant violated: " << *report.violation << "\n";
        return 1;
    }
    std::cout << entries.size() << " entries, all invariants hold\n";
    if (show_balances) {
        for (const auto& [account, balance] : report.balances) {
            std::cout << account.str() << " " << format_money(balance, "ZAR") << "\n";
        }
    }
    return 0;
}

int statement(const std::string& journal, const std::string& raw) {
    SecureRandom random;
    SystemClock clock;
    Platform platform(clock, random, offline_options(journal));
    const auto msisdn = normalize_msisdn(raw).value_or(raw);
    const auto id = AccountId::wallet(msisdn);
    if (!platform.ledger().is_open(id)) {
        std::cerr << "no wallet for " << msisdn << "\n";
        return 1;
    }
    std::int64_t running = 0;
    for (const auto& e : platform.ledger().statement(id, 1, platform.ledger().last_seq())) {
        std::int64_t delta = 0;
        for (const auto& p : e.postings) {
            if (p.account == id) delta += p.delta_minor;
        }
        running += delta;
        std::cout << e.seq << "  " << format_timestamp(e.ts) << "  " << to_string(e.type) << "  "
                  << (delta < 0 ? "-" : "+") << format_money(delta < 0 ? -delta : delta, "ZAR") << "  "
                  << format_money(running, "ZAR") << "\n";
    }
    return 0;
}

int unlock(const std::string& journal, const std::string& raw) {
    SecureRandom random;
    SystemClock clock;
    Platform platform(clock, random, offline_options(journal));
    const auto msisdn = normalize_msisdn(raw).value_or(raw);
    auto guard = platform.lock();
    if (!platform.registry().unlock(msisdn)) {
        std::cout << msisdn << " was not locked\n";
        return 1;
    }
    std::cout << msisdn << " unlocked\n";
    return 0;
}

int seed(const std::string& journal, const std::string& fixture) {
    SecureRandom random;
    SystemClock clock;
    Platform platform(clock, random, offline_options(journal));
    const auto report = platform.seed(read_json_file(fixture));
    std::cout << "added " << report.msisdns_added << " numbers, " << report.accounts_added << " bank accounts\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"eWallet mobile money service"};
    app.require_subcommand(1);

    ServiceConfig cfg;
    std::string config_file, listen, journal, seed_file, fee_preset;
    bool no_fsync = false;
    auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
    serve_cmd->add_option("--config", config_file, "JSON config file");
    serve_cmd->add_option("--listen", listen, "host:port (port 0 picks a free port)");
    serve_cmd->add_option("--journal", journal, "Journal file (in-memory if omitted)");
    serve_cmd->add_option("--seed", seed_file, "Seed fixture applied at startup");
    serve_cmd->add_option("--fee-preset", fee_preset, "default | none | agency-comparison");
    serve_cmd->add_flag("--no-fsync", no_fsync, "Skip fsync after each journal append");

    std::string fixture;
    auto* seed_cmd = app.add_subcommand("seed", "Add fixture numbers and bank accounts to a stopped service");
    seed_cmd->add_option("--journal", journal, "Journal file")->required();
    seed_cmd->add_option("fixture", fixture, "Seed fixture")->required();

    bool balances = false;
    auto* replay_cmd = app.add_subcommand("replay", "Re-fold a journal and check every invariant");
    replay_cmd->add_option("--journal", journal, "Journal file")->required();
    replay_cmd->add_flag("--balances", balances, "Print every account balance");

    std::string msisdn;
    auto* statement_cmd = app.add_subcommand("statement", "Print a wallet statement from a journal");
    statement_cmd->add_option("--journal", journal, "Journal file")->required();
    statement_cmd->add_option("msisdn", msisdn, "Wallet number")->required();

    auto* unlock_cmd = app.add_subcommand("unlock", "Clear a login lock on a stopped service");
    unlock_cmd->add_option("--journal", journal, "Journal file")->required();
    unlock_cmd->add_option("msisdn", msisdn, "Subscriber number")->required();

    std::string url = "http://127.0.0.1:8080";
    std::string scenario_fixture = "fixtures/kayembe.json";
    auto* scenario_cmd = app.add_subcommand("scenario", "Run the Kayembe walkthrough against a fresh service");
    scenario_cmd->add_option("--url", url, "Service base URL");
    scenario_cmd->add_option("--fixture", scenario_fixture, "Seed fixture");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*serve_cmd) {
            if (!config_file.empty()) apply_config_file(cfg, config_file);
            apply_config_env(cfg, process_env());
            if (!listen.empty()) set_listen(cfg, listen);
            if (!journal.empty()) cfg.journal = journal;
            if (!seed_file.empty()) cfg.seed = seed_file;
            if (!fee_preset.empty()) cfg.fee_preset = fee_preset;
            if (no_fsync) cfg.fsync = false;
            return serve(cfg);
        }
        if (*seed_cmd) return seed(journal, fixture);
        if (*replay_cmd) return replay(journal, balances);
        if (*statement_cmd) return statement(journal, msisdn);
        if (*unlock_cmd) return unlock(journal, msisdn);
        if (*scenario_cmd) return tools::run_scenario(url, scenario_fixture, std::cout);
    } catch (const Error& e) {
        std::cerr << to_string(e.code()) << ": " << e.what() << "\n";
        return 2;
    }
    return 0;
}
