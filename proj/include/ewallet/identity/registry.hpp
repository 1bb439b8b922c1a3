#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ewallet/clock.hpp"
#include "ewallet/ledger/ledger.hpp"
#include "ewallet/providers/providers.hpp"
#include "ewallet/random.hpp"

namespace ewallet {

enum class SubscriberStatus { Pending, Active, Locked, Closed };
std::string_view to_string(SubscriberStatus s);

enum class Channel { Ussd, Web };
std::string_view to_string(Channel c);

struct Subscriber {
    std::string msisdn;
    std::string full_name;
    std::string pin_digest;
    std::string login_id;
    std::string password_digest;
    bool password_temporary = true;
    std::string secret_question;
    std::string secret_answer_digest;
    std::optional<std::string> bank_account;
    SubscriberStatus status = SubscriberStatus::Pending;
    int failed_attempts = 0;
};

struct Application {
    std::string msisdn;
    std::string full_name;
    std::string pin;
    std::string secret_question;
    std::string secret_answer;
    std::optional<std::string> bank_account;
};

struct RegistrationResult {
    std::string msisdn;
    std::string login_id;
    std::string temporary_password;
};

struct SessionToken {
    std::string token;
    std::string msisdn;
    Channel channel = Channel::Web;
    Timestamp expires_at{};
    bool must_change_password = false;
};

// Fields a subscriber may change. Unset fields are left alone; an empty
// bank_account unlinks the account.
struct DetailChanges {
    std::optional<std::string> msisdn;
    std::optional<std::string> pin;
    std::optional<std::string> full_name;
    std::optional<std::string> secret_question;
    std::optional<std::string> secret_answer;
    std::optional<std::string> bank_account;
};

struct RegistryOptions {
    int lock_threshold = 3;
    std::chrono::seconds web_session_ttl{15 * 60};
    std::string country_code = "27";
};

// Subscriber lifecycle and credential storage. Every mutation is recorded as
// a REGISTRATION_MARKER audit entry in the journal (digests only, never clear
// secrets), which is also how the registry is rebuilt on startup.
class Registry {
public:
    Registry(Ledger& ledger, const TelcoDirectory& telco, BankGateway& bank, SmsGateway& sms, const Clock& clock,
             Random& random, RegistryOptions options = {});

    RegistrationResult register_subscriber(const Application& application);

    // USSD authenticates msisdn + PIN, WEB authenticates login_id + password.
    SessionToken login(Channel channel, std::string_view principal, std::string_view secret);
    // Resolves a live token to its msisdn. WEB tokens issued against a
    // temporary password only work for change_password.
    const SessionToken& authenticate(std::string_view token, bool allow_password_change_only = false);
    void logout(std::string_view token);

    void change_password(std::string_view token, std::string_view current, std::string_view replacement);

    const std::string& secret_question(std::string_view msisdn) const;
    void retrieve_pin(std::string_view msisdn, std::string_view answer);

    // Validates and applies changes. USSD may only change msisdn and PIN.
    // Changing msisdn requires an empty wallet. Returns the (possibly new) msisdn.
    std::string update_details(Channel channel, std::string_view msisdn, const DetailChanges& changes);

    // Sends the de-registration confirmation prompt; changes nothing.
    void request_deregistration(std::string_view msisdn);
    // Marks the subscriber CLOSED and sends the farewell message. Callers
    // settle the wallet first.
    void close(std::string_view msisdn);
    // Clears a lock. Returns false when the subscriber was not locked.
    bool unlock(std::string_view msisdn);

    // Checks a USSD PIN without issuing a token (used inside a live session).
    bool verify_pin(std::string_view msisdn, std::string_view pin);

    const Subscriber* find(std::string_view msisdn) const;
    // Throws UNKNOWN_MSISDN / ACCOUNT_LOCKED / ACCOUNT_CLOSED unless ACTIVE.
    const Subscriber& require_active(std::string_view msisdn) const;
    bool is_registered(std::string_view msisdn) const { return find(msisdn) != nullptr; }
    std::vector<Subscriber> subscribers() const;
    const std::vector<Subscriber>& closed() const { return closed_; }

    void restore(const JournalEntry& entry);
    nlohmann::json snapshot() const;

    const RegistryOptions& options() const { return options_; }

private:
    Subscriber* find_mut(std::string_view msisdn);
    void record(Meta meta);
    void apply(const Meta& meta);
    std::string digest(std::string_view secret);
    void notify(std::string_view msisdn, std::string_view body);
    void record_failure(Subscriber& s, Channel channel);

    Ledger& ledger_;
    const TelcoDirectory& telco_;
    BankGateway& bank_;
    SmsGateway& sms_;
    const Clock& clock_;
    Random& random_;
    RegistryOptions options_;
    std::map<std::string, Subscriber, std::less<>> active_;
    std::map<std::string, std::string, std::less<>> login_index_;
    std::vector<Subscriber> closed_;
    std::unordered_map<std::string, SessionToken> tokens_;
};

bool is_valid_pin(std::string_view pin);

}  // namespace ewallet
