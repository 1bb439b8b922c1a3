#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ewallet/engine/engine.hpp"
#include "ewallet/identity/registry.hpp"
#include "ewallet/ledger/journal_file.hpp"
#include "ewallet/ledger/ledger.hpp"
#include "ewallet/providers/providers.hpp"

namespace ewallet {

struct PlatformOptions {
    std::string currency = "ZAR";
    RegistryOptions registry;
    EngineOptions engine;
    // Without a journal the platform runs purely in memory.
    std::optional<std::filesystem::path> journal_path;
    bool fsync = true;
};

struct DeregistrationResult {
    bool closed = false;
    std::int64_t cancelled_codes_minor = 0;
    std::optional<Transaction> sweep;
};

// A bank account whose simulated balance movement disagrees with its mirror.
struct ReconciliationIssue {
    std::string account;
    std::int64_t bank_delta = 0;
    std::int64_t mirror_balance = 0;
};

struct StartupReport {
    std::size_t journal_entries = 0;
    std::size_t provider_events = 0;
    std::size_t compensated_efts = 0;
};

// Derived artefact paths next to the journal.
std::filesystem::path provider_log_path(const std::filesystem::path& journal);
std::filesystem::path registry_snapshot_path(const std::filesystem::path& journal);

// The whole service state behind one lock. The journal is the authority for
// ledger, registry and engine; simulated provider state has its own
// append-only event log. Both are replayed on construction.
//
// Every public method locks; callers that reach into ledger()/engine()/...
// directly hold lock() for the duration.
class Platform {
public:
    Platform(const Clock& clock, Random& random, PlatformOptions options = {});
    ~Platform();
    Platform(const Platform&) = delete;
    Platform& operator=(const Platform&) = delete;

    using Lock = std::unique_lock<std::recursive_mutex>;
    Lock lock() const { return Lock(mu_); }

    Ledger& ledger() { return *ledger_; }
    Registry& registry() { return *registry_; }
    TransactionEngine& engine() { return *engine_; }
    SimulatedTelco& telco() { return telco_; }
    SimulatedBank& bank() { return bank_; }
    SimulatedSmsGateway& sms() { return sms_; }
    const Clock& clock() const { return clock_; }
    const PlatformOptions& options() const { return options_; }

    // Registers and, when enabled, moves parked transfers into the new wallet.
    RegistrationResult register_subscriber(const Application& application);

    // confirm=false only sends the confirmation prompt. confirm=true refunds
    // the subscriber's codes, sweeps the wallet to the linked bank account and
    // closes it; RESIDUAL_BALANCE_NO_BANK leaves everything untouched.
    DeregistrationResult deregister(std::string_view msisdn, bool confirm);

    // Registry update plus the cross-module rule that a number with live
    // codes cannot move.
    std::string update_details(Channel channel, std::string_view msisdn, const DetailChanges& changes);

    SeedReport seed(const nlohmann::json& fixture);
    std::size_t expire_due();

    std::vector<ReconciliationIssue> reconcile();
    const StartupReport& startup() const { return startup_; }
    void write_snapshot();

private:
    std::vector<JournalEntry> replay_storage();
    std::size_t compensate_orphan_efts();

    const Clock& clock_;
    Random& random_;
    PlatformOptions options_;
    mutable std::recursive_mutex mu_;

    SimulatedTelco telco_;
    SimulatedBank bank_;
    SimulatedSmsGateway sms_;
    std::unique_ptr<JournalWriter> journal_;
    std::unique_ptr<JournalWriter> provider_log_;
    std::unique_ptr<Ledger> ledger_;
    std::unique_ptr<Registry> registry_;
    std::unique_ptr<TransactionEngine> engine_;
    StartupReport startup_;
};

}  // namespace ewallet
