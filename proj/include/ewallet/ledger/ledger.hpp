#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ewallet/clock.hpp"
#include "ewallet/ledger/types.hpp"
#include "ewallet/money.hpp"

namespace ewallet {

// Durable write hook. Called with the fully formed entry before the ledger
// applies it in memory; throwing aborts the append with no state change.
using JournalSink = std::function<void(const JournalEntry&)>;

// Append-only double-entry journal and account registry.
//
// Balances are a cache over the journal: balance(id) is always the sum of
// every posting to id. Not internally synchronised; callers serialise
// mutations (single-writer contract).
class Ledger {
public:
    Ledger(std::string currency, const Clock& clock, JournalSink sink = {});

    const std::string& currency() const { return currency_; }

    void open_account(const AccountId& id);
    bool is_open(const AccountId& id) const;

    // Appends a balanced entry. A non-empty idempotency_key makes the call
    // replay-safe: the same key with the same (type, postings, meta) returns
    // the original entry, a different payload is IDEMPOTENCY_CONFLICT.
    //
    // REGISTRATION_MARKER entries are audit records and carry no postings;
    // every other type needs at least two.
    JournalEntry append_entry(EntryType type, std::string txn_id, std::vector<LedgerPosting> postings,
                              Meta meta, const std::string& idempotency_key = {});

    Money balance(const AccountId& id) const;

    // Entries with from_seq <= seq <= to_seq that post to id, in seq order.
    std::vector<JournalEntry> statement(const AccountId& id, std::uint64_t from_seq,
                                        std::uint64_t to_seq) const;

    std::optional<JournalEntry> find_by_idempotency_key(const std::string& key) const;

    const std::vector<JournalEntry>& entries() const { return entries_; }
    std::uint64_t last_seq() const { return entries_.size(); }
    std::vector<AccountId> accounts() const;

    // Rebuild path: applies an entry read back from the journal file. Accounts
    // referenced by postings (or by meta "open_account") are opened on demand.
    // Throws CORRUPT_JOURNAL on a seq gap, imbalance or protected overdraft.
    void restore(const JournalEntry& entry);

private:
    void validate_postings(EntryType type, const std::vector<LedgerPosting>& postings) const;
    void apply(JournalEntry entry);

    std::string currency_;
    const Clock& clock_;
    JournalSink sink_;
    std::vector<JournalEntry> entries_;
    std::map<AccountId, std::int64_t> balances_;
    std::map<AccountId, std::vector<std::size_t>> touching_;
    std::unordered_map<std::string, std::size_t> by_key_;
};

// Independent check used by tests, the replay tool and startup: folds every
// posting and reports the first violated invariant, if any.
struct FoldReport {
    std::map<AccountId, std::int64_t> balances;
    std::optional<std::string> violation;
};
FoldReport fold_journal(const std::vector<JournalEntry>& entries);

}  // namespace ewallet
