#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string_view>

namespace ewallet {

enum class TxnKind { P2P, WalletToBank, BankToBank, Recharge, Withdrawal, MerchantPayment };

std::string_view to_string(TxnKind kind);
std::optional<TxnKind> parse_txn_kind(std::string_view text);

struct FeeRule {
    std::int64_t percent_bp = 0;
    std::int64_t flat_minor = 0;
};

// fee = flat + round_half_up(amount * percent_bp / 10000), per transaction kind.
// Kinds without a rule are free.
struct FeeSchedule {
    std::map<TxnKind, FeeRule> applies_to;

    std::int64_t fee(TxnKind kind, std::int64_t amount_minor) const;

    static FeeSchedule free_of_charge() { return {}; }
    // 10% on every kind: what the incumbent transfer agencies charge.
    static FeeSchedule agency_comparison();
    static std::optional<FeeSchedule> preset(std::string_view name);
};

}  // namespace ewallet
