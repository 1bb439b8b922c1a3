#include "ewallet/identity/registry.hpp"

#include "ewallet/error.hpp"
#include "ewallet/money.hpp"
#include "ewallet/text.hpp"

namespace ewallet {

namespace {

constexpr std::size_t kTemporaryPasswordLength = 10;
constexpr std::size_t kGeneratedPinLength = 4;
constexpr std::size_t kMinPasswordLength = 8;

std::string normalize_answer(std::string_view answer) { return fold_case(trim(answer)); }

const std::string& meta_at(const Meta& meta, const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw Error(ErrorCode::CorruptJournal, std::string("identity event missing ") + key);
    return it->second;
}

}  // namespace

std::string_view to_string(SubscriberStatus s) {
    switch (s) {
        case SubscriberStatus::Pending: return "PENDING";
        case SubscriberStatus::Active: return "ACTIVE";
        case SubscriberStatus::Locked: return "LOCKED";
        case SubscriberStatus::Closed: return "CLOSED";
    }
    return "PENDING";
}

std::string_view to_string(Channel c) { return c == Channel::Ussd ? "USSD" : "WEB"; }

bool is_valid_pin(std::string_view pin) { return pin.size() >= 4 && pin.size() <= 6 && is_digits(pin); }

Registry::Registry(Ledger& ledger, const TelcoDirectory& telco, BankGateway& bank, SmsGateway& sms,
                   const Clock& clock, Random& random, RegistryOptions options)
    : ledger_(ledger), telco_(telco), bank_(bank), sms_(sms), clock_(clock), random_(random),
      options_(std::move(options)) {}

std::string Registry::digest(std::string_view secret) { return make_digest(secret, random_.hex(16)); }

void Registry::notify(std::string_view msisdn, std::string_view body) {
    // Feedback messages are best effort; the state change already happened.
    try {
        sms_.send_sms(msisdn, body);
    } catch (const Error&) {
    }
}

void Registry::record(Meta meta) {
    ledger_.append_entry(EntryType::RegistrationMarker, "ID-" + random_.hex(16), {}, meta);
    apply(meta);
}

Subscriber* Registry::find_mut(std::string_view msisdn) {
    auto it = active_.find(msisdn);
    return it == active_.end() ? nullptr : &it->second;
}

const Subscriber* Registry::find(std::string_view msisdn) const {
    auto it = active_.find(msisdn);
    return it == active_.end() ? nullptr : &it->second;
}

const Subscriber& Registry::require_active(std::string_view msisdn) const {
    const auto* s = find(msisdn);
    if (!s) {
        for (const auto& c : closed_) {
            if (c.msisdn == msisdn) throw Error(ErrorCode::AccountClosed);
        }
        throw Error(ErrorCode::UnknownMsisdn);
    }
    if (s->status == SubscriberStatus::Locked) throw Error(ErrorCode::AccountLocked);
    if (s->status != SubscriberStatus::Active) throw Error(ErrorCode::AccountClosed);
    return *s;
}

std::vector<Subscriber> Registry::subscribers() const {
    std::vector<Subscriber> out;
    for (const auto& [_, s] : active_) out.push_back(s);
    return out;
}

RegistrationResult Registry::register_subscriber(const Application& application) {
    const auto msisdn = normalize_msisdn(application.msisdn, options_.country_code);
    if (!msisdn || !telco_.validate_msisdn(*msisdn).valid) throw Error(ErrorCode::UnknownMsisdn);
    if (find(*msisdn)) throw Error(ErrorCode::DuplicateRegistration);
    if (login_index_.count(*msisdn)) throw Error(ErrorCode::DuplicateRegistration);

    std::string reasons;
    const auto full_name = trim(application.full_name);
    if (full_name.empty()) reasons += "full_name: required; ";
    if (!is_valid_pin(application.pin)) reasons += "pin: must be 4 to 6 digits; ";
    if (trim(application.secret_question).empty()) reasons += "secret_question: required; ";
    if (normalize_answer(application.secret_answer).empty()) reasons += "secret_answer: required; ";
    if (!reasons.empty()) {
        reasons.resize(reasons.size() - 2);
        throw Error(ErrorCode::ValidationFailed, reasons);
    }
    std::optional<std::string> bank_account;
    if (application.bank_account && !trim(*application.bank_account).empty()) {
        bank_account = trim(*application.bank_account);
        if (!bank_.validate_bank_account(*bank_account).valid) throw Error(ErrorCode::UnknownBankAccount);
    }

    const auto password = random_.alphanumeric(kTemporaryPasswordLength);
    Meta meta{
        {"event", "register"},
        {"msisdn", *msisdn},
        {"login_id", *msisdn},
        {"full_name", full_name},
        {"pin_digest", digest(application.pin)},
        {"password_digest", digest(password)},
        {"secret_question", trim(application.secret_question)},
        {"answer_digest", digest(normalize_answer(application.secret_answer))},
    };
    if (bank_account) meta["bank_account"] = *bank_account;
    const auto wallet = AccountId::wallet(*msisdn);
    if (!ledger_.is_open(wallet)) meta["open_account"] = wallet.str();
    record(std::move(meta));
    if (!ledger_.is_open(wallet)) ledger_.open_account(wallet);

    notify(*msisdn, "Welcome to eWallet. Your Login ID is " + *msisdn + " and your temporary password is " +
                        password + ". Dial #555* to use your wallet.");
    return {*msisdn, *msisdn, password};
}

void Registry::record_failure(Subscriber& s, Channel channel) {
    const int attempts = s.failed_attempts + 1;
    const bool lock = attempts >= options_.lock_threshold;
    record({{"event", "login_failed"},
            {"msisdn", s.msisdn},
            {"channel", std::string(to_string(channel))},
            {"failed_attempts", std::to_string(attempts)},
            {"locked", lock ? "1" : "0"}});
    if (lock) {
        notify(s.msisdn, "Your eWallet account has been locked after repeated failed logins.");
        throw Error(ErrorCode::AccountLocked);
    }
    throw Error(ErrorCode::InvalidLogin);
}

bool Registry::verify_pin(std::string_view msisdn, std::string_view pin) {
    auto* s = find_mut(msisdn);
    if (!s) throw Error(ErrorCode::InvalidLogin);
    if (s->status == SubscriberStatus::Locked) throw Error(ErrorCode::AccountLocked);
    if (!verify_digest(pin, s->pin_digest)) record_failure(*s, Channel::Ussd);
    // Only a pending failure count is state worth journalling.
    if (s->failed_attempts > 0) record({{"event", "login_ok"}, {"msisdn", s->msisdn}, {"channel", "USSD"}});
    return true;
}

SessionToken Registry::login(Channel channel, std::string_view principal, std::string_view secret) {
    Subscriber* s = nullptr;
    if (channel == Channel::Ussd) {
        s = find_mut(normalize_msisdn(principal, options_.country_code).value_or(""));
    } else {
        auto it = login_index_.find(principal);
        if (it != login_index_.end()) s = find_mut(it->second);
        if (!s) s = find_mut(normalize_msisdn(principal, options_.country_code).value_or(""));
    }
    if (!s) {
        for (const auto& c : closed_) {
            if (c.msisdn == principal || c.login_id == principal) throw Error(ErrorCode::AccountClosed);
        }
        throw Error(ErrorCode::InvalidLogin);
    }
    if (s->status == SubscriberStatus::Locked) throw Error(ErrorCode::AccountLocked);
    if (s->status != SubscriberStatus::Active) throw Error(ErrorCode::AccountClosed);

    const auto& stored = channel == Channel::Ussd ? s->pin_digest : s->password_digest;
    if (!verify_digest(secret, stored)) record_failure(*s, channel);
    if (s->failed_attempts > 0) {
        record({{"event", "login_ok"}, {"msisdn", s->msisdn}, {"channel", std::string(to_string(channel))}});
    }

    SessionToken token;
    token.token = random_.hex(32);
    token.msisdn = s->msisdn;
    token.channel = channel;
    token.expires_at = clock_.now() + options_.web_session_ttl;
    token.must_change_password = channel == Channel::Web && s->password_temporary;
    tokens_[token.token] = token;
    return token;
}

const SessionToken& Registry::authenticate(std::string_view token, bool allow_password_change_only) {
    auto it = tokens_.find(std::string(token));
    if (it == tokens_.end()) throw Error(ErrorCode::Unauthorized);
    if (clock_.now() > it->second.expires_at) {
        tokens_.erase(it);
        throw Error(ErrorCode::Unauthorized, "Session expired, please log in again");
    }
    require_active(it->second.msisdn);
    if (it->second.must_change_password && !allow_password_change_only) {
        throw Error(ErrorCode::PasswordChangeRequired);
    }
    return it->second;
}

void Registry::logout(std::string_view token) { tokens_.erase(std::string(token)); }

void Registry::change_password(std::string_view token, std::string_view current, std::string_view replacement) {
    const auto& session = authenticate(token, true);
    auto* s = find_mut(session.msisdn);
    if (!verify_digest(current, s->password_digest)) throw Error(ErrorCode::InvalidLogin);
    if (replacement.size() < kMinPasswordLength) {
        throw Error(ErrorCode::ValidationFailed, "password: must be at least 8 characters");
    }
    record({{"event", "password_change"}, {"msisdn", s->msisdn}, {"password_digest", digest(replacement)}});
    for (auto& [_, t] : tokens_) {
        if (t.msisdn == s->msisdn) t.must_change_password = false;
    }
}

const std::string& Registry::secret_question(std::string_view msisdn) const {
    const auto normalized = normalize_msisdn(msisdn, options_.country_code);
    const auto* s = normalized ? find(*normalized) : nullptr;
    if (!s) throw Error(ErrorCode::UnknownMsisdn);
    return s->secret_question;
}

void Registry::retrieve_pin(std::string_view raw_msisdn, std::string_view answer) {
    const auto msisdn = normalize_msisdn(raw_msisdn, options_.country_code);
    auto* s = msisdn ? find_mut(*msisdn) : nullptr;
    if (!s) throw Error(ErrorCode::UnknownMsisdn);
    if (s->status != SubscriberStatus::Active && s->status != SubscriberStatus::Locked) {
        throw Error(ErrorCode::AccountClosed);
    }
    if (!verify_digest(normalize_answer(answer), s->secret_answer_digest)) {
        record({{"event", "pin_retrieval_failed"}, {"msisdn", s->msisdn}});
        throw Error(ErrorCode::InvalidAnswer);
    }
    const auto pin = random_.digits(kGeneratedPinLength);
    record({{"event", "pin_reset"}, {"msisdn", s->msisdn}, {"pin_digest", digest(pin)}});
    notify(s->msisdn, "Your new eWallet PIN is " + pin + ". Keep it secret.");
}

std::string Registry::update_details(Channel channel, std::string_view raw_msisdn, const DetailChanges& changes) {
    const auto& current = require_active(raw_msisdn);
    const std::string msisdn = current.msisdn;

    if (channel == Channel::Ussd &&
        (changes.full_name || changes.secret_question || changes.secret_answer || changes.bank_account)) {
        throw Error(ErrorCode::ForbiddenFieldForChannel);
    }

    std::string reasons;
    Meta meta{{"event", "update"}, {"msisdn", msisdn}, {"channel", std::string(to_string(channel))}};
    std::optional<std::string> new_msisdn;
    if (changes.msisdn) {
        const auto normalized = normalize_msisdn(*changes.msisdn, options_.country_code);
        if (!normalized || !telco_.validate_msisdn(*normalized).valid) {
            reasons += "msisdn: unknown to the network provider; ";
        } else if (*normalized != msisdn) {
            if (find(*normalized) || login_index_.count(*normalized)) {
                reasons += "msisdn: already registered; ";
            } else if (ledger_.balance(AccountId::wallet(msisdn)).amount_minor != 0) {
                reasons += "msisdn: wallet must be empty before changing cellphone number; ";
            } else {
                new_msisdn = *normalized;
                meta["new_msisdn"] = *normalized;
                if (!ledger_.is_open(AccountId::wallet(*normalized))) {
                    meta["open_account"] = AccountId::wallet(*normalized).str();
                }
            }
        }
    }
    if (changes.pin) {
        if (!is_valid_pin(*changes.pin)) reasons += "pin: must be 4 to 6 digits; ";
        else meta["pin_digest"] = digest(*changes.pin);
    }
    if (changes.full_name) {
        if (trim(*changes.full_name).empty()) reasons += "full_name: required; ";
        else meta["full_name"] = trim(*changes.full_name);
    }
    if (changes.secret_question) {
        if (trim(*changes.secret_question).empty()) reasons += "secret_question: required; ";
        else meta["secret_question"] = trim(*changes.secret_question);
    }
    if (changes.secret_answer) {
        if (normalize_answer(*changes.secret_answer).empty()) reasons += "secret_answer: required; ";
        else meta["answer_digest"] = digest(normalize_answer(*changes.secret_answer));
    }
    if (changes.bank_account) {
        const auto account = trim(*changes.bank_account);
        if (account.empty()) {
            meta["bank_account"] = "";
        } else if (!bank_.validate_bank_account(account).valid) {
            reasons += "bank_account: unknown to the bank; ";
        } else {
            meta["bank_account"] = account;
        }
    }
    if (!reasons.empty()) {
        reasons.resize(reasons.size() - 2);
        if (channel == Channel::Ussd) notify(msisdn, "Your eWallet details were not updated: " + reasons);
        throw Error(ErrorCode::ValidationFailed, reasons);
    }
    record(meta);
    const std::string result = new_msisdn.value_or(msisdn);
    if (new_msisdn) {
        if (!ledger_.is_open(AccountId::wallet(*new_msisdn))) ledger_.open_account(AccountId::wallet(*new_msisdn));
        for (auto& [_, t] : tokens_) {
            if (t.msisdn == msisdn) t.msisdn = *new_msisdn;
        }
    }
    if (channel == Channel::Ussd) notify(result, "Your eWallet details were updated successfully.");
    return result;
}

void Registry::request_deregistration(std::string_view msisdn) {
    const auto& s = require_active(msisdn);
    notify(s.msisdn, "You asked to close your eWallet account. Confirm the request to complete de-registration.");
}

void Registry::close(std::string_view msisdn) {
    const auto& s = require_active(msisdn);
    const std::string number = s.msisdn;
    record({{"event", "close"}, {"msisdn", number}});
    for (auto it = tokens_.begin(); it != tokens_.end();) {
        it = it->second.msisdn == number ? tokens_.erase(it) : std::next(it);
    }
    notify(number, "Your eWallet account has been closed. Thank you for using eWallet.");
}

bool Registry::unlock(std::string_view raw_msisdn) {
    const auto msisdn = normalize_msisdn(raw_msisdn, options_.country_code);
    const auto* s = msisdn ? find(*msisdn) : nullptr;
    if (!s) throw Error(ErrorCode::UnknownMsisdn);
    if (s->status != SubscriberStatus::Locked) return false;
    record({{"event", "unlock"}, {"msisdn", s->msisdn}});
    return true;
}

void Registry::restore(const JournalEntry& entry) {
    if (entry.type != EntryType::RegistrationMarker || !entry.meta.count("event")) return;
    apply(entry.meta);
}

void Registry::apply(const Meta& meta) {
    const auto& event = meta_at(meta, "event");
    const auto& msisdn = meta_at(meta, "msisdn");
    if (event == "register") {
        Subscriber s;
        s.msisdn = msisdn;
        s.login_id = meta_at(meta, "login_id");
        s.full_name = meta_at(meta, "full_name");
        s.pin_digest = meta_at(meta, "pin_digest");
        s.password_digest = meta_at(meta, "password_digest");
        s.password_temporary = true;
        s.secret_question = meta_at(meta, "secret_question");
        s.secret_answer_digest = meta_at(meta, "answer_digest");
        if (auto it = meta.find("bank_account"); it != meta.end()) s.bank_account = it->second;
        s.status = SubscriberStatus::Active;
        login_index_[s.login_id] = msisdn;
        active_[msisdn] = std::move(s);
        return;
    }
    auto* s = find_mut(msisdn);
    if (!s) throw Error(ErrorCode::CorruptJournal, "identity event " + event + " for unknown subscriber " + msisdn);
    if (event == "login_ok") {
        s->failed_attempts = 0;
    } else if (event == "login_failed") {
        s->failed_attempts = std::stoi(meta_at(meta, "failed_attempts"));
        if (meta_at(meta, "locked") == "1") s->status = SubscriberStatus::Locked;
    } else if (event == "unlock") {
        s->status = SubscriberStatus::Active;
        s->failed_attempts = 0;
    } else if (event == "pin_reset") {
        // The secret answer is proof enough to lift a login lock.
        s->pin_digest = meta_at(meta, "pin_digest");
        s->status = SubscriberStatus::Active;
        s->failed_attempts = 0;
    } else if (event == "password_change") {
        s->password_digest = meta_at(meta, "password_digest");
        s->password_temporary = false;
    } else if (event == "update") {
        if (auto it = meta.find("pin_digest"); it != meta.end()) s->pin_digest = it->second;
        if (auto it = meta.find("full_name"); it != meta.end()) s->full_name = it->second;
        if (auto it = meta.find("secret_question"); it != meta.end()) s->secret_question = it->second;
        if (auto it = meta.find("answer_digest"); it != meta.end()) s->secret_answer_digest = it->second;
        if (auto it = meta.find("bank_account"); it != meta.end()) {
            if (it->second.empty()) s->bank_account.reset();
            else s->bank_account = it->second;
        }
        if (auto it = meta.find("new_msisdn"); it != meta.end()) {
            Subscriber moved = *s;
            active_.erase(msisdn);
            moved.msisdn = it->second;
            // A login ID that was just the old number follows the number.
            if (moved.login_id == msisdn) {
                login_index_.erase(moved.login_id);
                moved.login_id = moved.msisdn;
            }
            login_index_[moved.login_id] = moved.msisdn;
            active_[moved.msisdn] = std::move(moved);
        }
    } else if (event == "close") {
        Subscriber closed = *s;
        closed.status = SubscriberStatus::Closed;
        login_index_.erase(closed.login_id);
        active_.erase(msisdn);
        closed_.push_back(std::move(closed));
    }
    // pin_retrieval_failed is audit only.
}

nlohmann::json Registry::snapshot() const {
    auto to_json = [](const Subscriber& s) {
        nlohmann::json j{{"msisdn", s.msisdn},
                         {"full_name", s.full_name},
                         {"login_id", s.login_id},
                         {"pin_digest", s.pin_digest},
                         {"password_digest", s.password_digest},
                         {"password_temporary", s.password_temporary},
                         {"secret_question", s.secret_question},
                         {"secret_answer_digest", s.secret_answer_digest},
                         {"status", to_string(s.status)},
                         {"failed_attempts", s.failed_attempts}};
        j["bank_account"] = s.bank_account ? nlohmann::json(*s.bank_account) : nlohmann::json(nullptr);
        return j;
    };
    nlohmann::json out{{"subscribers", nlohmann::json::array()}};
    for (const auto& [_, s] : active_) out["subscribers"].push_back(to_json(s));
    for (const auto& s : closed_) out["subscribers"].push_back(to_json(s));
    out["journal_seq"] = ledger_.last_seq();
    return out;
}

}  // namespace ewallet
