#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ewallet/clock.hpp"

namespace ewallet {

enum class AccountKind { Wallet, BankMirror, Suspense, FeeIncome };

std::string_view to_string(AccountKind kind);

struct AccountId {
    AccountKind kind = AccountKind::Wallet;
    std::string key;

    static AccountId wallet(std::string msisdn) { return {AccountKind::Wallet, std::move(msisdn)}; }
    static AccountId bank_mirror(std::string number) { return {AccountKind::BankMirror, std::move(number)}; }
    static AccountId suspense() { return {AccountKind::Suspense, "POOL"}; }
    static AccountId fee_income() { return {AccountKind::FeeIncome, "FEES"}; }

    // "WALLET:27820000001", "BANK_MIRROR:1001", "SUSPENSE:POOL", "FEE_INCOME:FEES"
    std::string str() const;
    static std::optional<AccountId> parse(std::string_view text);

    // WALLET and SUSPENSE may never go negative.
    bool is_protected() const { return kind == AccountKind::Wallet || kind == AccountKind::Suspense; }

    friend auto operator<=>(const AccountId&, const AccountId&) = default;
};

struct LedgerPosting {
    AccountId account;
    std::int64_t delta_minor = 0;
    std::string currency;

    friend bool operator==(const LedgerPosting&, const LedgerPosting&) = default;
};

enum class EntryType {
    P2P,
    WalletToBank,
    BankToBank,
    Recharge,
    WithdrawalHold,
    Redemption,
    MerchantPayment,
    Fee,
    Reversal,
    RegistrationMarker,
};

std::string_view to_string(EntryType type);
std::optional<EntryType> parse_entry_type(std::string_view text);

using Meta = std::map<std::string, std::string>;

struct JournalEntry {
    std::uint64_t seq = 0;
    Timestamp ts{};
    std::string txn_id;
    EntryType type = EntryType::P2P;
    std::vector<LedgerPosting> postings;
    Meta meta;

    friend bool operator==(const JournalEntry&, const JournalEntry&) = default;
};

// Meta key under which the ledger records the idempotency key of an entry.
inline constexpr std::string_view kIdempotencyMetaKey = "idempotency_key";

}  // namespace ewallet
