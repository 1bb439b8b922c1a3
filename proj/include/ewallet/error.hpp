#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ewallet {

// Every failure the platform can report. The HTTP edge maps each one to a
// status code (see http_status), so adding a code means extending that table.
enum class ErrorCode {
    // ledger-core
    DuplicateAccount,
    UnknownAccount,
    UnbalancedEntry,
    NotSufficientFunds,
    IdempotencyConflict,
    CurrencyMismatch,
    CorruptJournal,
    // identity-registry
    UnknownMsisdn,
    UnknownBankAccount,
    DuplicateRegistration,
    InvalidLogin,
    AccountLocked,
    AccountClosed,
    InvalidAnswer,
    ValidationFailed,
    ForbiddenFieldForChannel,
    ResidualBalanceNoBank,
    PasswordChangeRequired,
    Unauthorized,
    // transaction-engine
    AmountInvalid,
    NoLinkedBankAccount,
    ProviderUnavailable,
    CodeExpired,
    CodeAlreadyRedeemed,
    CodeUnknown,
    HolderMismatch,
    AmountExceedsRemaining,
    // ussd-menu-engine
    SessionExpired,
    InvalidSelection,
    WrongServiceCode,
    // service-gateway
    BadRequest,
    NotFound,
    Internal,
};

std::string_view to_string(ErrorCode code);

// Default user-facing text. Where the service design fixes the wording
// ("Invalid login details", "Not sufficient funds", "Invalid Answer") it is
// reproduced exactly.
std::string_view default_message(ErrorCode code);

int http_status(ErrorCode code);

class Error : public std::runtime_error {
public:
    explicit Error(ErrorCode code);
    Error(ErrorCode code, std::string message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace ewallet
