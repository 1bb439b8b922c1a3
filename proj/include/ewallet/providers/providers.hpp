#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ewallet/clock.hpp"

namespace ewallet {

// ---------------------------------------------------------------------------
// Provider interfaces. The engine only sees these; the simulated
// implementations below stand in for the telco, bank and SMS aggregator.
// ---------------------------------------------------------------------------

struct MsisdnCheck {
    bool valid = false;
    std::optional<std::string> carrier;
};

class TelcoDirectory {
public:
    virtual ~TelcoDirectory() = default;
    virtual MsisdnCheck validate_msisdn(std::string_view msisdn) const = 0;
    virtual bool healthy() const { return true; }
};

struct BankAccountCheck {
    bool valid = false;
    std::optional<std::string> holder;
};

enum class EftDirection { Debit, Credit };
std::string_view to_string(EftDirection d);

struct EftReceipt {
    std::uint64_t id = 0;
    EftDirection direction = EftDirection::Debit;
    std::string account;
    std::int64_t amount_minor = 0;
    std::string ref;
    std::int64_t balance_after = 0;
};

class BankGateway {
public:
    virtual ~BankGateway() = default;
    virtual BankAccountCheck validate_bank_account(std::string_view account_number) = 0;
    virtual std::int64_t available_balance(std::string_view account_number) = 0;
    virtual EftReceipt eft(EftDirection direction, std::string_view account_number, std::int64_t amount_minor,
                           std::string_view ref) = 0;
    // Cellphone number the bank has on file for notifications, if any.
    virtual std::optional<std::string> contact_msisdn(std::string_view account_number) const = 0;
    virtual bool healthy() const { return true; }
};

enum class DeliveryState { Queued, Delivered };
std::string_view to_string(DeliveryState s);

struct SmsMessage {
    std::uint64_t id = 0;
    std::string to;
    std::string body;
    Timestamp queued_at{};
    DeliveryState delivery_state = DeliveryState::Queued;
    // Correlates the message with the transaction that caused it.
    std::string ref;
};

class SmsGateway {
public:
    virtual ~SmsGateway() = default;
    virtual SmsMessage send_sms(std::string_view to, std::string_view body, std::string_view ref = {}) = 0;
    virtual bool healthy() const { return true; }
};

// ---------------------------------------------------------------------------
// Simulated providers
// ---------------------------------------------------------------------------

// Fail-next-N and fixed latency, armed per provider.
class FaultInjector {
public:
    void fail_next(int n) { fail_next_ = n; }
    void set_latency_ms(int ms) { latency_ms_ = ms; }
    int pending_failures() const { return fail_next_; }
    // Sleeps for the configured latency, then throws PROVIDER_UNAVAILABLE if a
    // failure is pending.
    void check(std::string_view provider);

private:
    std::atomic<int> fail_next_{0};
    std::atomic<int> latency_ms_{0};
};

// Receives every state change so it can be persisted and replayed.
using ProviderEventSink = std::function<void(const nlohmann::json&)>;

class SimulatedTelco final : public TelcoDirectory {
public:
    MsisdnCheck validate_msisdn(std::string_view msisdn) const override;

    // Adds (or re-homes) a number. Returns false for malformed numbers.
    bool add_msisdn(std::string_view msisdn, std::string_view carrier);
    std::map<std::string, std::string> snapshot() const;

    void set_event_sink(ProviderEventSink sink) { sink_ = std::move(sink); }
    void apply_event(const nlohmann::json& event);

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string, std::less<>> carriers_;
    ProviderEventSink sink_;
};

// In-process bank. Its balances are authoritative for bank accounts; the
// ledger's BANK_MIRROR accounts shadow the eWallet-attributable deltas.
class SimulatedBank final : public BankGateway {
public:
    static constexpr std::string_view kAtmCashPool = "ATM-CASH-POOL";

    SimulatedBank();

    BankAccountCheck validate_bank_account(std::string_view account_number) override;
    std::int64_t available_balance(std::string_view account_number) override;
    EftReceipt eft(EftDirection direction, std::string_view account_number, std::int64_t amount_minor,
                   std::string_view ref) override;
    std::optional<std::string> contact_msisdn(std::string_view account_number) const override;
    bool healthy() const override { return faults.pending_failures() == 0; }

    // Returns false if the account already exists (the existing balance is kept).
    bool add_account(std::string_view number, std::string_view holder, std::int64_t balance_minor,
                     std::optional<std::string> msisdn = std::nullopt);
    std::int64_t balance(std::string_view account_number) const;
    std::int64_t opening_balance(std::string_view account_number) const;
    std::vector<EftReceipt> eft_log() const;
    std::vector<std::string> account_numbers() const;

    void set_event_sink(ProviderEventSink sink) { sink_ = std::move(sink); }
    void apply_event(const nlohmann::json& event);

    FaultInjector faults;

private:
    struct Account {
        std::string holder;
        std::int64_t opening = 0;
        std::int64_t balance = 0;
        std::optional<std::string> msisdn;
    };

    EftReceipt post_eft(EftDirection direction, const std::string& account, std::int64_t amount,
                        std::string ref);

    mutable std::mutex mu_;
    std::map<std::string, Account, std::less<>> accounts_;
    std::vector<EftReceipt> eft_log_;
    ProviderEventSink sink_;
};

// Per-msisdn FIFO outbox. Polling never consumes; ack marks DELIVERED.
class SimulatedSmsGateway final : public SmsGateway {
public:
    SimulatedSmsGateway(const TelcoDirectory& telco, const Clock& clock) : telco_(telco), clock_(clock) {}

    SmsMessage send_sms(std::string_view to, std::string_view body, std::string_view ref = {}) override;
    bool healthy() const override { return faults.pending_failures() == 0; }

    std::vector<SmsMessage> outbox(std::string_view msisdn) const;
    std::vector<SmsMessage> all_messages() const;
    // Marks every message up to and including up_to_id as delivered; returns how many changed.
    std::size_t ack(std::string_view msisdn, std::uint64_t up_to_id);
    std::size_t total_sent() const;

    FaultInjector faults;

private:
    const TelcoDirectory& telco_;
    const Clock& clock_;
    mutable std::mutex mu_;
    std::uint64_t next_id_ = 1;
    std::map<std::string, std::vector<SmsMessage>, std::less<>> outboxes_;
};

// Seed fixture: {"msisdns":[{"msisdn","carrier"}],
//                "bank_accounts":[{"number","holder","balance_minor"[,"msisdn"]}]}
struct SeedReport {
    std::size_t msisdns_added = 0;
    std::size_t accounts_added = 0;
};
SeedReport apply_seed(const nlohmann::json& fixture, SimulatedTelco& telco, SimulatedBank& bank);

}  // namespace ewallet
