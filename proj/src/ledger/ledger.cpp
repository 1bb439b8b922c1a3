#include "ewallet/ledger/ledger.hpp"

#include <limits>

#include "ewallet/error.hpp"

namespace ewallet {

namespace {

bool add_overflows(std::int64_t a, std::int64_t b) {
    return (b > 0 && a > std::numeric_limits<std::int64_t>::max() - b) ||
           (b < 0 && a < std::numeric_limits<std::int64_t>::min() - b);
}

}  // namespace

Ledger::Ledger(std::string currency, const Clock& clock, JournalSink sink)
    : currency_(std::move(currency)), clock_(clock), sink_(std::move(sink)) {
    balances_.emplace(AccountId::suspense(), 0);
    balances_.emplace(AccountId::fee_income(), 0);
}

void Ledger::open_account(const AccountId& id) {
    if (id.kind == AccountKind::Suspense || id.kind == AccountKind::FeeIncome || balances_.count(id)) {
        throw Error(ErrorCode::DuplicateAccount, "account " + id.str() + " is already open");
    }
    if (id.key.empty()) throw Error(ErrorCode::BadRequest, "account key must not be empty");
    balances_.emplace(id, 0);
}

bool Ledger::is_open(const AccountId& id) const { return balances_.count(id) != 0; }

void Ledger::validate_postings(EntryType type, const std::vector<LedgerPosting>& postings) const {
    if (type == EntryType::RegistrationMarker) {
        if (!postings.empty()) {
            throw Error(ErrorCode::UnbalancedEntry, "registration markers carry no postings");
        }
        return;
    }
    if (postings.size() < 2) {
        throw Error(ErrorCode::UnbalancedEntry, "an entry needs at least two postings");
    }
    std::int64_t sum = 0;
    for (const auto& p : postings) {
        if (p.delta_minor == 0) throw Error(ErrorCode::UnbalancedEntry, "zero posting to " + p.account.str());
        if (p.currency != currency_) throw Error(ErrorCode::CurrencyMismatch);
        if (add_overflows(sum, p.delta_minor)) throw Error(ErrorCode::UnbalancedEntry, "posting overflow");
        sum += p.delta_minor;
    }
    if (sum != 0) {
        throw Error(ErrorCode::UnbalancedEntry, "postings sum to " + std::to_string(sum));
    }
}

JournalEntry Ledger::append_entry(EntryType type, std::string txn_id, std::vector<LedgerPosting> postings,
                                  Meta meta, const std::string& idempotency_key) {
    if (!idempotency_key.empty()) {
        meta[std::string(kIdempotencyMetaKey)] = idempotency_key;
        if (auto it = by_key_.find(idempotency_key); it != by_key_.end()) {
            const auto& prior = entries_[it->second];
            if (prior.type != type || prior.postings != postings || prior.meta != meta) {
                throw Error(ErrorCode::IdempotencyConflict);
            }
            return prior;
        }
    }
    validate_postings(type, postings);

    std::map<AccountId, std::int64_t> net;
    for (const auto& p : postings) {
        if (!is_open(p.account)) throw Error(ErrorCode::UnknownAccount, "account " + p.account.str() + " is not open");
        net[p.account] += p.delta_minor;
    }
    for (const auto& [id, delta] : net) {
        const auto current = balances_.at(id);
        if (add_overflows(current, delta)) throw Error(ErrorCode::AmountInvalid, "balance overflow");
        if (id.is_protected() && current + delta < 0) throw Error(ErrorCode::NotSufficientFunds);
    }

    JournalEntry entry;
    entry.seq = entries_.size() + 1;
    entry.ts = clock_.now();
    entry.txn_id = std::move(txn_id);
    entry.type = type;
    entry.postings = std::move(postings);
    entry.meta = std::move(meta);
    if (sink_) sink_(entry);
    apply(entry);
    return entry;
}

void Ledger::apply(JournalEntry entry) {
    const std::size_t index = entries_.size();
    for (const auto& p : entry.postings) {
        balances_[p.account] += p.delta_minor;
        auto& touched = touching_[p.account];
        if (touched.empty() || touched.back() != index) touched.push_back(index);
    }
    if (auto it = entry.meta.find(std::string(kIdempotencyMetaKey)); it != entry.meta.end()) {
        by_key_.emplace(it->second, index);
    }
    entries_.push_back(std::move(entry));
}

void Ledger::restore(const JournalEntry& entry) {
    const auto corrupt = [&](const std::string& why) {
        return Error(ErrorCode::CorruptJournal, "seq " + std::to_string(entry.seq) + ": " + why);
    };
    if (entry.seq != entries_.size() + 1) throw corrupt("expected seq " + std::to_string(entries_.size() + 1));
    try {
        validate_postings(entry.type, entry.postings);
    } catch (const Error& e) {
        throw corrupt(e.what());
    }
    if (auto it = entry.meta.find("open_account"); it != entry.meta.end()) {
        const auto id = AccountId::parse(it->second);
        if (!id) throw corrupt("bad open_account " + it->second);
        balances_.try_emplace(*id, 0);
    }
    std::map<AccountId, std::int64_t> net;
    for (const auto& p : entry.postings) {
        balances_.try_emplace(p.account, 0);
        net[p.account] += p.delta_minor;
    }
    for (const auto& [id, delta] : net) {
        if (id.is_protected() && balances_.at(id) + delta < 0) throw corrupt("overdraft on " + id.str());
    }
    apply(entry);
}

Money Ledger::balance(const AccountId& id) const {
    auto it = balances_.find(id);
    if (it == balances_.end()) throw Error(ErrorCode::UnknownAccount, "account " + id.str() + " is not open");
    return Money{it->second, currency_};
}

std::vector<JournalEntry> Ledger::statement(const AccountId& id, std::uint64_t from_seq,
                                            std::uint64_t to_seq) const {
    if (!is_open(id)) throw Error(ErrorCode::UnknownAccount, "account " + id.str() + " is not open");
    if (from_seq > to_seq) throw Error(ErrorCode::BadRequest, "from_seq must not exceed to_seq");
    std::vector<JournalEntry> out;
    auto it = touching_.find(id);
    if (it == touching_.end()) return out;
    for (std::size_t index : it->second) {
        const auto& e = entries_[index];
        if (e.seq < from_seq) continue;
        if (e.seq > to_seq) break;
        out.push_back(e);
    }
    return out;
}

std::optional<JournalEntry> Ledger::find_by_idempotency_key(const std::string& key) const {
    if (auto it = by_key_.find(key); it != by_key_.end()) return entries_[it->second];
    return std::nullopt;
}

std::vector<AccountId> Ledger::accounts() const {
    std::vector<AccountId> out;
    out.reserve(balances_.size());
    for (const auto& [id, _] : balances_) out.push_back(id);
    return out;
}

FoldReport fold_journal(const std::vector<JournalEntry>& entries) {
    FoldReport report;
    std::uint64_t expected_seq = 1;
    for (const auto& e : entries) {
        const auto where = "seq " + std::to_string(e.seq) + ": ";
        if (e.seq != expected_seq) {
            report.violation = where + "gap, expected " + std::to_string(expected_seq);
            return report;
        }
        ++expected_seq;
        std::int64_t sum = 0;
        for (const auto& p : e.postings) {
            sum += p.delta_minor;
            report.balances[p.account] += p.delta_minor;
        }
        if (sum != 0) {
            report.violation = where + "postings sum to " + std::to_string(sum);
            return report;
        }
        if (e.type != EntryType::RegistrationMarker && e.postings.size() < 2) {
            report.violation = where + "fewer than two postings";
            return report;
        }
        for (const auto& p : e.postings) {
            if (p.account.is_protected() && report.balances[p.account] < 0) {
                report.violation = where + "overdraft on " + p.account.str();
                return report;
            }
        }
    }
    return report;
}

}  // namespace ewallet
