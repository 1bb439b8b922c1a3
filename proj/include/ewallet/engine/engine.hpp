#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ewallet/clock.hpp"
#include "ewallet/engine/fees.hpp"
#include "ewallet/error.hpp"
#include "ewallet/identity/registry.hpp"
#include "ewallet/ledger/ledger.hpp"
#include "ewallet/money.hpp"
#include "ewallet/providers/providers.hpp"
#include "ewallet/random.hpp"

namespace ewallet {

enum class TxnState { Initiated, Validated, Posted, Notified, Failed };
std::string_view to_string(TxnState s);

// Legal lifecycle edges: INITIATED->VALIDATED->POSTED->NOTIFIED, plus
// INITIATED|VALIDATED->FAILED.
bool is_legal_transition(TxnState from, TxnState to);

enum class FundingSource { Auto, Wallet, Bank, Code };
std::string_view to_string(FundingSource s);
std::optional<FundingSource> parse_funding_source(std::string_view text);

struct Transaction {
    std::string txn_id;
    TxnKind kind = TxnKind::P2P;
    std::string sender;
    std::string recipient;
    Money amount;
    Money fee;
    TxnState state = TxnState::Initiated;
    std::optional<ErrorCode> failure_reason;
    std::string idempotency_key;
    FundingSource source = FundingSource::Wallet;
    std::uint64_t seq = 0;
    Timestamp posted_at{};
    // Set when the transaction issued an access code (withdrawal, or a
    // transfer parked for an unregistered recipient).
    std::optional<std::string> code_id;
    std::optional<Timestamp> code_expires_at;
    bool parked = false;
};

enum class CodeState { Issued, PartiallyRedeemed, Redeemed, Expired, Cancelled };
std::string_view to_string(CodeState s);

enum class CodeOrigin { Withdrawal, ParkedTransfer };

struct AccessCode {
    std::string code_id;      // public handle, safe to log
    std::string code_digest;  // the 8-digit code itself is only ever sent by SMS
    std::string holder;
    std::string funder;       // wallet that receives expiry refunds
    CodeOrigin origin = CodeOrigin::Withdrawal;
    Money issued_amount;
    Money remaining;
    std::int64_t redeemed_minor = 0;
    std::int64_t refunded_minor = 0;
    Timestamp issued_at{};
    Timestamp expires_at{};
    CodeState state = CodeState::Issued;
    std::uint64_t hold_entry = 0;

    bool live() const { return state == CodeState::Issued || state == CodeState::PartiallyRedeemed; }
};

struct RedemptionReceipt {
    std::string txn_id;
    std::string code_id;
    std::string msisdn;
    Money amount;
    Money remaining;
    CodeState code_state = CodeState::Issued;
    std::uint64_t seq = 0;
    Timestamp ts{};
};

struct EngineOptions {
    FeeSchedule fees;
    std::chrono::seconds access_code_ttl{72 * 3600};
    std::string service_code = "#555*";
    // Credit parked transfers to a new wallet as soon as its owner registers.
    bool auto_credit_parked = true;
};

// Called on every lifecycle transition; used by tests to audit the state machine.
using TransitionObserver = std::function<void(const Transaction&, TxnState from, TxnState to)>;

// Money-movement processes over the ledger. Each posted transaction is
// exactly one journal entry carrying its request fingerprint, so the engine's
// state (transactions, access codes, idempotency table) is rebuilt from the
// journal alone. Not internally synchronised; the platform core serialises
// calls.
class TransactionEngine {
public:
    TransactionEngine(Ledger& ledger, Registry& registry, const TelcoDirectory& telco, BankGateway& bank,
                      SmsGateway& sms, const Clock& clock, Random& random, EngineOptions options = {});

    Transaction transfer_wallet_to_wallet(std::string_view sender, std::string_view recipient_msisdn,
                                          std::int64_t amount_minor, std::string idempotency_key,
                                          FundingSource source = FundingSource::Wallet);
    // With a code, the holder spends parked/withheld funds into any valid bank account.
    Transaction transfer_wallet_to_bank(std::string_view sender, std::string_view bank_account,
                                        std::int64_t amount_minor, std::string idempotency_key,
                                        std::optional<std::string> code = std::nullopt);
    Transaction transfer_bank_to_bank(std::string_view sender, std::string_view recipient_bank_account,
                                      std::int64_t amount_minor, std::string idempotency_key);
    Transaction recharge(std::string_view sender, std::int64_t amount_minor, std::string idempotency_key);

    AccessCode request_withdrawal(std::string_view holder, std::int64_t amount_minor, std::string idempotency_key);
    RedemptionReceipt redeem_at_atm(std::string_view code, std::string_view msisdn, std::int64_t amount_minor,
                                    std::string idempotency_key);
    // Without a code the buyer's wallet is debited directly.
    Transaction pay_merchant(std::string_view buyer, std::string_view seller_msisdn, std::int64_t amount_minor,
                             std::optional<std::string> code, std::string idempotency_key);

    Money check_balance(std::string_view holder) const;
    std::size_t expire_codes(Timestamp now);

    // Moves every live parked code held by msisdn into its wallet.
    std::int64_t claim_parked(std::string_view msisdn);
    // De-registration: refunds msisdn's own withdrawal codes and the parked
    // transfers it funded that nobody has claimed yet.
    std::int64_t cancel_owned_codes(std::string_view msisdn);
    // Fee-free transfer of the whole wallet to the linked bank account.
    std::optional<Transaction> sweep_to_bank(std::string_view msisdn);

    std::int64_t parked_total(std::string_view msisdn) const;
    std::int64_t live_code_total() const;
    // Value still reserved on codes that cancel_owned_codes would refund.
    std::int64_t owned_code_total(std::string_view msisdn) const;
    // Value on any live code msisdn holds or funded.
    std::int64_t codes_touching(std::string_view msisdn) const;

    const Transaction* find_transaction(std::string_view txn_id) const;
    const AccessCode* find_code(std::string_view code_id) const;
    std::vector<AccessCode> codes() const;
    std::vector<Transaction> transactions() const;
    const std::optional<RedemptionReceipt> find_receipt(std::string_view idempotency_key) const;

    void set_transition_observer(TransitionObserver observer) { observer_ = std::move(observer); }

    // Rebuild path, fed every journal entry in order after the ledger restored it.
    void restore(const JournalEntry& entry);

    const EngineOptions& options() const { return options_; }
    const FeeSchedule& fees() const { return options_.fees; }

private:
    struct IdempotencyRecord {
        std::string fingerprint;
        std::string txn_id;
    };

    // Returns the prior result if key was already used for this request.
    const Transaction* replayed(const std::string& key, const std::string& fingerprint) const;
    std::string ensure_key(std::string key);
    Transaction& begin(TxnKind kind, std::string sender, std::string recipient, std::int64_t amount,
                       const std::string& key, FundingSource source);
    void advance(Transaction& txn, TxnState to);
    [[noreturn]] void fail(Transaction& txn, const Error& error);
    void fail_if_thrown(Transaction& txn, const std::function<void()>& step);

    JournalEntry post(Transaction& txn, EntryType type, std::vector<LedgerPosting> postings, Meta meta,
                      const std::string& fingerprint);
    Meta transaction_meta(const Transaction& txn, const std::string& fingerprint) const;
    LedgerPosting posting(const AccountId& account, std::int64_t delta) const;
    void push_posting(std::vector<LedgerPosting>& postings, const AccountId& account, std::int64_t delta) const;
    AccountId mirror(const std::string& bank_account);
    void compensate(const EftReceipt& receipt);
    void notify(Transaction& txn, const std::vector<std::pair<std::string, std::string>>& messages);
    void send(std::string_view to, std::string_view body, std::string_view ref);

    std::string normalize_recipient(std::string_view raw) const;
    std::pair<std::string, std::string> new_code();
    AccessCode& lookup_code(std::string_view code, std::string_view msisdn);
    void refund_code(AccessCode& code, CodeState final_state, const std::string& reason);
    void consume_code(AccessCode& code, std::int64_t debit);
    void apply_code_meta(const JournalEntry& entry);

    Ledger& ledger_;
    Registry& registry_;
    const TelcoDirectory& telco_;
    BankGateway& bank_;
    SmsGateway& sms_;
    const Clock& clock_;
    Random& random_;
    EngineOptions options_;
    TransitionObserver observer_;

    std::map<std::string, Transaction, std::less<>> txns_;
    std::unordered_map<std::string, IdempotencyRecord> idempotency_;
    std::map<std::string, AccessCode, std::less<>> codes_;
    std::unordered_map<std::string, std::string> code_by_digest_;
    std::unordered_map<std::string, RedemptionReceipt> receipts_;
    std::unordered_map<std::string, std::string> receipt_fingerprints_;
};

}  // namespace ewallet
