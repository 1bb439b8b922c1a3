#include "ewallet/platform.hpp"

#include <fstream>
#include <set>
#include <tuple>
#include <unordered_set>

#include "ewallet/text.hpp"

namespace ewallet {

namespace {

constexpr std::string_view kReversalSuffix = ":reversal";

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

// Reads the provider event log. A torn final line (crash mid-write) is
// dropped; damage anywhere else is corruption.
std::vector<nlohmann::json> read_provider_log(const std::filesystem::path& path) {
    std::vector<nlohmann::json> events;
    std::ifstream in(path);
    if (!in) return events;
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) {
        if (!trim(line).empty()) lines.push_back(line);
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        try {
            events.push_back(nlohmann::json::parse(lines[i]));
        } catch (const nlohmann::json::exception&) {
            if (i + 1 == lines.size()) break;
            throw Error(ErrorCode::CorruptJournal, path.string() + ": line " + std::to_string(i + 1) + " unreadable");
        }
    }
    return events;
}

}  // namespace

std::filesystem::path provider_log_path(const std::filesystem::path& journal) {
    auto p = journal;
    p += ".providers";
    return p;
}

std::filesystem::path registry_snapshot_path(const std::filesystem::path& journal) {
    auto p = journal;
    p += ".registry.json";
    return p;
}

Platform::Platform(const Clock& clock, Random& random, PlatformOptions options)
    : clock_(clock), random_(random), options_(std::move(options)), sms_(telco_, clock_) {
    JournalSink sink;
    std::vector<JournalEntry> entries;
    if (options_.journal_path) {
        entries = replay_storage();
        journal_ = std::make_unique<JournalWriter>(*options_.journal_path, options_.fsync);
        provider_log_ = std::make_unique<JournalWriter>(provider_log_path(*options_.journal_path), options_.fsync);
        sink = [this](const JournalEntry& e) { journal_->append(e); };
        auto provider_sink = [this](const nlohmann::json& event) { provider_log_->append_line(event.dump()); };
        telco_.set_event_sink(provider_sink);
        bank_.set_event_sink(provider_sink);
    }
    ledger_ = std::make_unique<Ledger>(options_.currency, clock_, sink);
    registry_ = std::make_unique<Registry>(*ledger_, telco_, bank_, sms_, clock_, random_, options_.registry);
    engine_ = std::make_unique<TransactionEngine>(*ledger_, *registry_, telco_, bank_, sms_, clock_, random_,
                                                  options_.engine);
    for (const auto& e : entries) {
        ledger_->restore(e);
        registry_->restore(e);
        engine_->restore(e);
    }
    if (options_.journal_path) {
        startup_.compensated_efts = compensate_orphan_efts();
        write_snapshot();
    }
}

Platform::~Platform() {
    try {
        if (options_.journal_path) write_snapshot();
    } catch (...) {
    }
}

std::vector<JournalEntry> Platform::replay_storage() {
    const auto& path = *options_.journal_path;
    for (const auto& event : read_provider_log(provider_log_path(path))) {
        try {
            if (event.at("kind") == "msisdn") {
                telco_.apply_event(event);
            } else {
                bank_.apply_event(event);
            }
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::CorruptJournal, std::string("provider log: ") + e.what());
        }
        ++startup_.provider_events;
    }
    auto entries = read_journal(path);
    startup_.journal_entries = entries.size();
    return entries;
}

std::size_t Platform::compensate_orphan_efts() {
    std::unordered_set<std::string> journalled;
    for (const auto& e : ledger_->entries()) journalled.insert(e.txn_id);
    using Key = std::tuple<std::string, std::string, EftDirection>;
    std::set<Key> reversed;
    const auto log = bank_.eft_log();
    for (const auto& eft : log) {
        if (!ends_with(eft.ref, kReversalSuffix)) continue;
        const auto original = eft.ref.substr(0, eft.ref.size() - kReversalSuffix.size());
        const auto direction = eft.direction == EftDirection::Debit ? EftDirection::Credit : EftDirection::Debit;
        reversed.emplace(original, eft.account, direction);
    }
    std::size_t count = 0;
    for (const auto& eft : log) {
        if (ends_with(eft.ref, kReversalSuffix) || journalled.count(eft.ref)) continue;
        if (reversed.count({eft.ref, eft.account, eft.direction})) continue;
        const auto reverse = eft.direction == EftDirection::Debit ? EftDirection::Credit : EftDirection::Debit;
        bank_.eft(reverse, eft.account, eft.amount_minor, eft.ref + std::string(kReversalSuffix));
        ++count;
    }
    return count;
}

RegistrationResult Platform::register_subscriber(const Application& application) {
    auto guard = lock();
    auto result = registry_->register_subscriber(application);
    if (options_.engine.auto_credit_parked) engine_->claim_parked(result.msisdn);
    return result;
}

DeregistrationResult Platform::deregister(std::string_view msisdn, bool confirm) {
    auto guard = lock();
    const auto& s = registry_->require_active(msisdn);
    const auto number = s.msisdn;
    DeregistrationResult result;
    if (!confirm) {
        registry_->request_deregistration(number);
        return result;
    }
    const auto residual = ledger_->balance(AccountId::wallet(number)).amount_minor + engine_->owned_code_total(number);
    if (residual > 0 && !s.bank_account) throw Error(ErrorCode::ResidualBalanceNoBank);
    result.cancelled_codes_minor = engine_->cancel_owned_codes(number);
    result.sweep = engine_->sweep_to_bank(number);
    registry_->close(number);
    result.closed = true;
    return result;
}

std::string Platform::update_details(Channel channel, std::string_view msisdn, const DetailChanges& changes) {
    auto guard = lock();
    if (changes.msisdn) {
        const auto& s = registry_->require_active(msisdn);
        const auto target = normalize_msisdn(*changes.msisdn, options_.registry.country_code);
        if (target != s.msisdn && engine_->codes_touching(s.msisdn) > 0) {
            throw Error(ErrorCode::ValidationFailed, "msisdn: temporary PINs are still outstanding");
        }
    }
    return registry_->update_details(channel, msisdn, changes);
}

SeedReport Platform::seed(const nlohmann::json& fixture) {
    auto guard = lock();
    return apply_seed(fixture, telco_, bank_);
}

std::size_t Platform::expire_due() {
    auto guard = lock();
    return engine_->expire_codes(clock_.now());
}

std::vector<ReconciliationIssue> Platform::reconcile() {
    auto guard = lock();
    std::vector<ReconciliationIssue> issues;
    for (const auto& number : bank_.account_numbers()) {
        const auto delta = bank_.balance(number) - bank_.opening_balance(number);
        const auto id = AccountId::bank_mirror(number);
        const auto mirror = ledger_->is_open(id) ? ledger_->balance(id).amount_minor : 0;
        if (delta != mirror) issues.push_back({number, delta, mirror});
    }
    return issues;
}

void Platform::write_snapshot() {
    if (!options_.journal_path) return;
    auto guard = lock();
    const auto path = registry_snapshot_path(*options_.journal_path);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        out << registry_->snapshot().dump(2) << '\n';
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
}

}  // namespace ewallet
