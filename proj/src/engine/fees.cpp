#include "ewallet/engine/fees.hpp"

#include <array>
#include <utility>

#include "ewallet/error.hpp"

namespace ewallet {

namespace {

constexpr std::array<std::pair<TxnKind, std::string_view>, 6> kKinds{{
    {TxnKind::P2P, "P2P"},
    {TxnKind::WalletToBank, "WALLET_TO_BANK"},
    {TxnKind::BankToBank, "BANK_TO_BANK"},
    {TxnKind::Recharge, "RECHARGE"},
    {TxnKind::Withdrawal, "WITHDRAWAL"},
    {TxnKind::MerchantPayment, "MERCHANT_PAYMENT"},
}};

}  // namespace

std::string_view to_string(TxnKind kind) {
    for (const auto& [k, name] : kKinds) {
        if (k == kind) return name;
    }
    return "P2P";
}

std::optional<TxnKind> parse_txn_kind(std::string_view text) {
    for (const auto& [k, name] : kKinds) {
        if (name == text) return k;
    }
    return std::nullopt;
}

std::int64_t FeeSchedule::fee(TxnKind kind, std::int64_t amount_minor) const {
    auto it = applies_to.find(kind);
    if (it == applies_to.end() || amount_minor <= 0) return 0;
    const auto& rule = it->second;
    const __int128 scaled = static_cast<__int128>(amount_minor) * rule.percent_bp;
    const __int128 proportional = (scaled + 5000) / 10000;
    const __int128 total = proportional + rule.flat_minor;
    if (total < 0 || total > INT64_MAX) throw Error(ErrorCode::AmountInvalid, "fee out of range");
    return static_cast<std::int64_t>(total);
}

FeeSchedule FeeSchedule::agency_comparison() {
    FeeSchedule s;
    for (const auto& [kind, _] : kKinds) s.applies_to[kind] = FeeRule{1000, 0};
    return s;
}

std::optional<FeeSchedule> FeeSchedule::preset(std::string_view name) {
    if (name == "default" || name == "none") return free_of_charge();
    if (name == "agency-comparison") return agency_comparison();
    return std::nullopt;
}

}  // namespace ewallet
