#include "ewallet/error.hpp"

namespace ewallet {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::DuplicateAccount: return "DUPLICATE_ACCOUNT";
        case ErrorCode::UnknownAccount: return "UNKNOWN_ACCOUNT";
        case ErrorCode::UnbalancedEntry: return "UNBALANCED_ENTRY";
        case ErrorCode::NotSufficientFunds: return "NOT_SUFFICIENT_FUNDS";
        case ErrorCode::IdempotencyConflict: return "IDEMPOTENCY_CONFLICT";
        case ErrorCode::CurrencyMismatch: return "CURRENCY_MISMATCH";
        case ErrorCode::CorruptJournal: return "CORRUPT_JOURNAL";
        case ErrorCode::UnknownMsisdn: return "UNKNOWN_MSISDN";
        case ErrorCode::UnknownBankAccount: return "UNKNOWN_BANK_ACCOUNT";
        case ErrorCode::DuplicateRegistration: return "DUPLICATE_REGISTRATION";
        case ErrorCode::InvalidLogin: return "INVALID_LOGIN";
        case ErrorCode::AccountLocked: return "ACCOUNT_LOCKED";
        case ErrorCode::AccountClosed: return "ACCOUNT_CLOSED";
        case ErrorCode::InvalidAnswer: return "INVALID_ANSWER";
        case ErrorCode::ValidationFailed: return "VALIDATION_FAILED";
        case ErrorCode::ForbiddenFieldForChannel: return "FORBIDDEN_FIELD_FOR_CHANNEL";
        case ErrorCode::ResidualBalanceNoBank: return "RESIDUAL_BALANCE_NO_BANK";
        case ErrorCode::PasswordChangeRequired: return "PASSWORD_CHANGE_REQUIRED";
        case ErrorCode::Unauthorized: return "UNAUTHORIZED";
        case ErrorCode::AmountInvalid: return "AMOUNT_INVALID";
        case ErrorCode::NoLinkedBankAccount: return "NO_LINKED_BANK_ACCOUNT";
        case ErrorCode::ProviderUnavailable: return "PROVIDER_UNAVAILABLE";
        case ErrorCode::CodeExpired: return "CODE_EXPIRED";
        case ErrorCode::CodeAlreadyRedeemed: return "CODE_ALREADY_REDEEMED";
        case ErrorCode::CodeUnknown: return "CODE_UNKNOWN";
        case ErrorCode::HolderMismatch: return "HOLDER_MISMATCH";
        case ErrorCode::AmountExceedsRemaining: return "AMOUNT_EXCEEDS_REMAINING";
        case ErrorCode::SessionExpired: return "SESSION_EXPIRED";
        case ErrorCode::InvalidSelection: return "INVALID_SELECTION";
        case ErrorCode::WrongServiceCode: return "WRONG_SERVICE_CODE";
        case ErrorCode::BadRequest: return "BAD_REQUEST";
        case ErrorCode::NotFound: return "NOT_FOUND";
        case ErrorCode::Internal: return "INTERNAL";
    }
    return "INTERNAL";
}

std::string_view default_message(ErrorCode code) {
    switch (code) {
        case ErrorCode::DuplicateAccount: return "Account already exists";
        case ErrorCode::UnknownAccount: return "Unknown account";
        case ErrorCode::UnbalancedEntry: return "Journal entry does not balance";
        case ErrorCode::NotSufficientFunds: return "Not sufficient funds";
        case ErrorCode::IdempotencyConflict:
            return "Idempotency key was already used for a different request";
        case ErrorCode::CurrencyMismatch: return "Currency does not match this deployment";
        case ErrorCode::CorruptJournal: return "Journal is corrupt";
        case ErrorCode::UnknownMsisdn: return "Unknown cellphone number";
        case ErrorCode::UnknownBankAccount: return "Unknown bank account";
        case ErrorCode::DuplicateRegistration: return "Cellphone number is already registered";
        case ErrorCode::InvalidLogin: return "Invalid login details";
        case ErrorCode::AccountLocked: return "Account locked";
        case ErrorCode::AccountClosed: return "Account closed";
        case ErrorCode::InvalidAnswer: return "Invalid Answer";
        case ErrorCode::ValidationFailed: return "Validation failed";
        case ErrorCode::ForbiddenFieldForChannel:
            return "Only cellphone number and PIN can be changed from a cellphone";
        case ErrorCode::ResidualBalanceNoBank:
            return "Wallet has a balance and no linked bank account to receive it";
        case ErrorCode::PasswordChangeRequired: return "Temporary password must be changed";
        case ErrorCode::Unauthorized: return "Not logged in";
        case ErrorCode::AmountInvalid: return "Invalid amount";
        case ErrorCode::NoLinkedBankAccount: return "No linked bank account";
        case ErrorCode::ProviderUnavailable: return "Service provider unavailable";
        case ErrorCode::CodeExpired: return "Access code expired";
        case ErrorCode::CodeAlreadyRedeemed: return "Access code already redeemed";
        case ErrorCode::CodeUnknown: return "Invalid access code";
        case ErrorCode::HolderMismatch: return "Access code does not belong to this cellphone number";
        case ErrorCode::AmountExceedsRemaining: return "Amount exceeds the remaining value of the access code";
        case ErrorCode::SessionExpired: return "Session expired";
        case ErrorCode::InvalidSelection: return "Invalid selection";
        case ErrorCode::WrongServiceCode: return "Unknown service code";
        case ErrorCode::BadRequest: return "Bad request";
        case ErrorCode::NotFound: return "Not found";
        case ErrorCode::Internal: return "Internal error";
    }
    return "Internal error";
}

int http_status(ErrorCode code) {
    switch (code) {
        case ErrorCode::UnbalancedEntry:
        case ErrorCode::CurrencyMismatch:
        case ErrorCode::ValidationFailed:
        case ErrorCode::AmountInvalid:
        case ErrorCode::InvalidSelection:
        case ErrorCode::WrongServiceCode:
        case ErrorCode::BadRequest:
            return 400;
        case ErrorCode::InvalidLogin:
        case ErrorCode::InvalidAnswer:
        case ErrorCode::Unauthorized:
            return 401;
        case ErrorCode::AccountLocked:
        case ErrorCode::ForbiddenFieldForChannel:
        case ErrorCode::PasswordChangeRequired:
        case ErrorCode::HolderMismatch:
            return 403;
        case ErrorCode::UnknownAccount:
        case ErrorCode::UnknownMsisdn:
        case ErrorCode::UnknownBankAccount:
        case ErrorCode::CodeUnknown:
        case ErrorCode::NotFound:
            return 404;
        case ErrorCode::DuplicateAccount:
        case ErrorCode::DuplicateRegistration:
        case ErrorCode::IdempotencyConflict:
        case ErrorCode::CodeAlreadyRedeemed:
            return 409;
        case ErrorCode::AccountClosed:
        case ErrorCode::CodeExpired:
        case ErrorCode::SessionExpired:
            return 410;
        case ErrorCode::NotSufficientFunds:
        case ErrorCode::ResidualBalanceNoBank:
        case ErrorCode::NoLinkedBankAccount:
        case ErrorCode::AmountExceedsRemaining:
            return 422;
        case ErrorCode::ProviderUnavailable:
            return 503;
        case ErrorCode::CorruptJournal:
        case ErrorCode::Internal:
            return 500;
    }
    return 500;
}

Error::Error(ErrorCode code) : Error(code, std::string(default_message(code))) {}

Error::Error(ErrorCode code, std::string message)
    : std::runtime_error(std::move(message)), code_(code) {}

}  // namespace ewallet
