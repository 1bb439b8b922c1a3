#include "ewallet/ledger/types.hpp"

#include <array>
#include <utility>

namespace ewallet {

namespace {

constexpr std::array<std::pair<AccountKind, std::string_view>, 4> kAccountKinds{{
    {AccountKind::Wallet, "WALLET"},
    {AccountKind::BankMirror, "BANK_MIRROR"},
    {AccountKind::Suspense, "SUSPENSE"},
    {AccountKind::FeeIncome, "FEE_INCOME"},
}};

constexpr std::array<std::pair<EntryType, std::string_view>, 10> kEntryTypes{{
    {EntryType::P2P, "P2P"},
    {EntryType::WalletToBank, "WALLET_TO_BANK"},
    {EntryType::BankToBank, "BANK_TO_BANK"},
    {EntryType::Recharge, "RECHARGE"},
    {EntryType::WithdrawalHold, "WITHDRAWAL_HOLD"},
    {EntryType::Redemption, "REDEMPTION"},
    {EntryType::MerchantPayment, "MERCHANT_PAYMENT"},
    {EntryType::Fee, "FEE"},
    {EntryType::Reversal, "REVERSAL"},
    {EntryType::RegistrationMarker, "REGISTRATION_MARKER"},
}};

}  // namespace

std::string_view to_string(AccountKind kind) {
    for (const auto& [k, name] : kAccountKinds) {
        if (k == kind) return name;
    }
    return "WALLET";
}

std::string AccountId::str() const {
    std::string out(to_string(kind));
    out += ':';
    out += key;
    return out;
}

std::optional<AccountId> AccountId::parse(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos || colon + 1 == text.size()) return std::nullopt;
    const auto kind_name = text.substr(0, colon);
    for (const auto& [k, name] : kAccountKinds) {
        if (name == kind_name) return AccountId{k, std::string(text.substr(colon + 1))};
    }
    return std::nullopt;
}

std::string_view to_string(EntryType type) {
    for (const auto& [t, name] : kEntryTypes) {
        if (t == type) return name;
    }
    return "P2P";
}

std::optional<EntryType> parse_entry_type(std::string_view text) {
    for (const auto& [t, name] : kEntryTypes) {
        if (name == text) return t;
    }
    return std::nullopt;
}

}  // namespace ewallet
