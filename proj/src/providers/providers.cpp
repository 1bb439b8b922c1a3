#include "ewallet/providers/providers.hpp"

#include <thread>

#include "ewallet/error.hpp"
#include "ewallet/text.hpp"

namespace ewallet {

using nlohmann::json;

std::string_view to_string(EftDirection d) { return d == EftDirection::Debit ? "DEBIT" : "CREDIT"; }

std::string_view to_string(DeliveryState s) { return s == DeliveryState::Queued ? "QUEUED" : "DELIVERED"; }

void FaultInjector::check(std::string_view provider) {
    if (const int ms = latency_ms_.load(); ms > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
    }
    int pending = fail_next_.load();
    while (pending > 0) {
        if (fail_next_.compare_exchange_weak(pending, pending - 1)) {
            throw Error(ErrorCode::ProviderUnavailable, std::string(provider) + " is unavailable");
        }
    }
}

// -- telco ------------------------------------------------------------------

MsisdnCheck SimulatedTelco::validate_msisdn(std::string_view msisdn) const {
    if (!is_digits(msisdn)) return {};
    std::lock_guard lock(mu_);
    auto it = carriers_.find(msisdn);
    if (it == carriers_.end()) return {};
    return {true, it->second};
}

bool SimulatedTelco::add_msisdn(std::string_view msisdn, std::string_view carrier) {
    const auto normalized = normalize_msisdn(msisdn);
    if (!normalized || carrier.empty()) return false;
    {
        std::lock_guard lock(mu_);
        auto [it, inserted] = carriers_.try_emplace(*normalized, carrier);
        if (!inserted) {
            if (it->second == carrier) return true;
            it->second = std::string(carrier);
        }
    }
    if (sink_) sink_(json{{"kind", "msisdn"}, {"msisdn", *normalized}, {"carrier", carrier}});
    return true;
}

std::map<std::string, std::string> SimulatedTelco::snapshot() const {
    std::lock_guard lock(mu_);
    return {carriers_.begin(), carriers_.end()};
}

void SimulatedTelco::apply_event(const json& event) {
    std::lock_guard lock(mu_);
    carriers_[event.at("msisdn").get<std::string>()] = event.at("carrier").get<std::string>();
}

// -- bank -------------------------------------------------------------------

SimulatedBank::SimulatedBank() {
    accounts_.emplace(std::string(kAtmCashPool), Account{"ATM cash pool", 0, 0, std::nullopt});
}

BankAccountCheck SimulatedBank::validate_bank_account(std::string_view account_number) {
    faults.check("bank");
    std::lock_guard lock(mu_);
    auto it = accounts_.find(account_number);
    if (it == accounts_.end()) return {};
    return {true, it->second.holder};
}

std::int64_t SimulatedBank::available_balance(std::string_view account_number) {
    faults.check("bank");
    std::lock_guard lock(mu_);
    auto it = accounts_.find(account_number);
    if (it == accounts_.end()) throw Error(ErrorCode::UnknownBankAccount);
    return it->second.balance;
}

EftReceipt SimulatedBank::eft(EftDirection direction, std::string_view account_number, std::int64_t amount_minor,
                              std::string_view ref) {
    faults.check("bank");
    if (amount_minor <= 0) throw Error(ErrorCode::AmountInvalid);
    EftReceipt receipt;
    {
        std::lock_guard lock(mu_);
        auto it = accounts_.find(account_number);
        if (it == accounts_.end()) throw Error(ErrorCode::UnknownBankAccount);
        if (direction == EftDirection::Debit && it->second.balance < amount_minor) {
            throw Error(ErrorCode::NotSufficientFunds);
        }
        receipt = post_eft(direction, it->first, amount_minor, std::string(ref));
    }
    if (sink_) {
        sink_(json{{"kind", "eft"},
                   {"id", receipt.id},
                   {"direction", to_string(direction)},
                   {"account", receipt.account},
                   {"amount_minor", receipt.amount_minor},
                   {"ref", receipt.ref}});
    }
    return receipt;
}

EftReceipt SimulatedBank::post_eft(EftDirection direction, const std::string& account, std::int64_t amount,
                                   std::string ref) {
    auto& acct = accounts_.at(account);
    acct.balance += direction == EftDirection::Debit ? -amount : amount;
    EftReceipt receipt{eft_log_.size() + 1, direction, account, amount, std::move(ref), acct.balance};
    eft_log_.push_back(receipt);
    return receipt;
}

std::optional<std::string> SimulatedBank::contact_msisdn(std::string_view account_number) const {
    std::lock_guard lock(mu_);
    auto it = accounts_.find(account_number);
    if (it == accounts_.end()) return std::nullopt;
    return it->second.msisdn;
}

bool SimulatedBank::add_account(std::string_view number, std::string_view holder, std::int64_t balance_minor,
                                std::optional<std::string> msisdn) {
    if (number.empty() || balance_minor < 0) throw Error(ErrorCode::BadRequest, "invalid bank account fixture");
    {
        std::lock_guard lock(mu_);
        if (accounts_.count(number)) return false;
        accounts_.emplace(std::string(number), Account{std::string(holder), balance_minor, balance_minor, msisdn});
    }
    if (sink_) {
        json event{{"kind", "bank_account"}, {"number", number}, {"holder", holder}, {"balance_minor", balance_minor}};
        if (msisdn) event["msisdn"] = *msisdn;
        sink_(event);
    }
    return true;
}

std::int64_t SimulatedBank::balance(std::string_view account_number) const {
    std::lock_guard lock(mu_);
    auto it = accounts_.find(account_number);
    if (it == accounts_.end()) throw Error(ErrorCode::UnknownBankAccount);
    return it->second.balance;
}

std::int64_t SimulatedBank::opening_balance(std::string_view account_number) const {
    std::lock_guard lock(mu_);
    auto it = accounts_.find(account_number);
    if (it == accounts_.end()) throw Error(ErrorCode::UnknownBankAccount);
    return it->second.opening;
}

std::vector<EftReceipt> SimulatedBank::eft_log() const {
    std::lock_guard lock(mu_);
    return eft_log_;
}

std::vector<std::string> SimulatedBank::account_numbers() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [number, _] : accounts_) out.push_back(number);
    return out;
}

void SimulatedBank::apply_event(const json& event) {
    std::lock_guard lock(mu_);
    const auto kind = event.at("kind").get<std::string>();
    if (kind == "bank_account") {
        const auto number = event.at("number").get<std::string>();
        const auto balance = event.at("balance_minor").get<std::int64_t>();
        std::optional<std::string> msisdn;
        if (event.contains("msisdn")) msisdn = event["msisdn"].get<std::string>();
        accounts_.try_emplace(number, Account{event.at("holder").get<std::string>(), balance, balance, msisdn});
    } else if (kind == "eft") {
        const auto direction = event.at("direction").get<std::string>() == "DEBIT" ? EftDirection::Debit
                                                                                   : EftDirection::Credit;
        const auto account = event.at("account").get<std::string>();
        if (!accounts_.count(account)) throw Error(ErrorCode::CorruptJournal, "eft to unknown account " + account);
        post_eft(direction, account, event.at("amount_minor").get<std::int64_t>(), event.at("ref").get<std::string>());
    }
}

// -- sms --------------------------------------------------------------------

SmsMessage SimulatedSmsGateway::send_sms(std::string_view to, std::string_view body, std::string_view ref) {
    faults.check("sms");
    if (!telco_.validate_msisdn(to).valid) throw Error(ErrorCode::UnknownMsisdn);
    std::lock_guard lock(mu_);
    SmsMessage msg{next_id_++, std::string(to), std::string(body), clock_.now(), DeliveryState::Queued,
                   std::string(ref)};
    outboxes_[msg.to].push_back(msg);
    return msg;
}

std::vector<SmsMessage> SimulatedSmsGateway::outbox(std::string_view msisdn) const {
    std::lock_guard lock(mu_);
    auto it = outboxes_.find(msisdn);
    if (it == outboxes_.end()) return {};
    return it->second;
}

std::vector<SmsMessage> SimulatedSmsGateway::all_messages() const {
    std::lock_guard lock(mu_);
    std::vector<SmsMessage> out;
    for (const auto& [_, box] : outboxes_) out.insert(out.end(), box.begin(), box.end());
    return out;
}

std::size_t SimulatedSmsGateway::ack(std::string_view msisdn, std::uint64_t up_to_id) {
    std::lock_guard lock(mu_);
    auto it = outboxes_.find(msisdn);
    if (it == outboxes_.end()) return 0;
    std::size_t changed = 0;
    for (auto& m : it->second) {
        if (m.id <= up_to_id && m.delivery_state == DeliveryState::Queued) {
            m.delivery_state = DeliveryState::Delivered;
            ++changed;
        }
    }
    return changed;
}

std::size_t SimulatedSmsGateway::total_sent() const {
    std::lock_guard lock(mu_);
    return next_id_ - 1;
}

// -- seed -------------------------------------------------------------------

SeedReport apply_seed(const json& fixture, SimulatedTelco& telco, SimulatedBank& bank) {
    if (!fixture.is_object()) throw Error(ErrorCode::BadRequest, "seed fixture must be a JSON object");
    SeedReport report;
    try {
        for (const auto& m : fixture.value("msisdns", json::array())) {
            const auto raw = m.at("msisdn").get<std::string>();
            if (telco.validate_msisdn(normalize_msisdn(raw).value_or("")).valid &&
                telco.validate_msisdn(*normalize_msisdn(raw)).carrier == m.at("carrier").get<std::string>()) {
                continue;
            }
            if (!telco.add_msisdn(raw, m.at("carrier").get<std::string>())) {
                throw Error(ErrorCode::BadRequest, "invalid msisdn in fixture: " + raw);
            }
            ++report.msisdns_added;
        }
        for (const auto& a : fixture.value("bank_accounts", json::array())) {
            std::optional<std::string> msisdn;
            if (a.contains("msisdn")) {
                msisdn = normalize_msisdn(a["msisdn"].get<std::string>());
                if (!msisdn) throw Error(ErrorCode::BadRequest, "invalid msisdn on bank account");
            }
            if (bank.add_account(a.at("number").get<std::string>(), a.at("holder").get<std::string>(),
                                 a.at("balance_minor").get<std::int64_t>(), msisdn)) {
                ++report.accounts_added;
            }
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BadRequest, std::string("malformed seed fixture: ") + e.what());
    }
    return report;
}

}  // namespace ewallet
