#include "ewallet/gateway/api.hpp"

#include <cctype>
#include <vector>

#include "ewallet/ledger/journal_file.hpp"
#include "ewallet/text.hpp"

namespace ewallet {

namespace {

using json = nlohmann::json;

std::vector<std::string> split_path(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '/') {
            if (!cur.empty()) parts.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) parts.push_back(std::move(cur));
    return parts;
}

json parse_body(const ApiRequest& req) {
    if (trim(req.body).empty()) return json::object();
    json j;
    try {
        j = json::parse(req.body);
    } catch (const json::exception&) {
        throw Error(ErrorCode::BadRequest, "request body is not valid JSON");
    }
    if (!j.is_object()) throw Error(ErrorCode::BadRequest, "request body must be a JSON object");
    return j;
}

std::optional<std::string> opt_str(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw Error(ErrorCode::BadRequest, std::string(key) + " must be a string");
    return it->get<std::string>();
}

std::string req_str(const json& j, const char* key) {
    auto v = opt_str(j, key);
    if (!v) throw Error(ErrorCode::BadRequest, std::string(key) + " is required");
    return *v;
}

std::int64_t req_amount(const json& j, const char* key = "amount_minor") {
    auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorCode::BadRequest, std::string(key) + " is required");
    if (!it->is_number_integer()) throw Error(ErrorCode::AmountInvalid, std::string(key) + " must be an integer");
    return it->get<std::int64_t>();
}

std::uint64_t query_seq(const ApiRequest& req, const char* key, std::uint64_t fallback) {
    auto it = req.query.find(key);
    if (it == req.query.end() || it->second.empty()) return fallback;
    if (!is_digits(it->second)) throw Error(ErrorCode::BadRequest, std::string(key) + " must be a sequence number");
    return std::stoull(it->second);
}

json error_body(const Error& e) {
    return json{{"error", to_string(e.code())}, {"message", e.what()}};
}

json entry_json(const JournalEntry& e) { return json::parse(encode_entry(e)); }

}  // namespace

std::optional<std::string> ApiRequest::header(const std::string& lower_name) const {
    auto it = headers.find(lower_name);
    if (it == headers.end()) return std::nullopt;
    return it->second;
}

json to_json(const Transaction& t) {
    json j{{"txn_id", t.txn_id},
           {"kind", to_string(t.kind)},
           {"sender", t.sender},
           {"recipient", t.recipient},
           {"amount_minor", t.amount.amount_minor},
           {"fee_minor", t.fee.amount_minor},
           {"currency", t.amount.currency},
           {"state", to_string(t.state)},
           {"source", to_string(t.source)},
           {"seq", t.seq},
           {"posted_at", format_timestamp(t.posted_at)},
           {"parked", t.parked}};
    if (t.code_id) j["code_id"] = *t.code_id;
    if (t.code_expires_at) j["code_expires_at"] = format_timestamp(*t.code_expires_at);
    return j;
}

json to_json(const AccessCode& c) {
    return json{{"code_id", c.code_id},
                {"holder", c.holder},
                {"amount_minor", c.issued_amount.amount_minor},
                {"remaining_minor", c.remaining.amount_minor},
                {"currency", c.issued_amount.currency},
                {"state", to_string(c.state)},
                {"issued_at", format_timestamp(c.issued_at)},
                {"expires_at", format_timestamp(c.expires_at)}};
}

json to_json(const RedemptionReceipt& r) {
    return json{{"txn_id", r.txn_id},
                {"code_id", r.code_id},
                {"msisdn", r.msisdn},
                {"amount_minor", r.amount.amount_minor},
                {"remaining_minor", r.remaining.amount_minor},
                {"currency", r.amount.currency},
                {"code_state", to_string(r.code_state)},
                {"seq", r.seq}};
}

json to_json(const SmsMessage& m) {
    return json{{"id", m.id},
                {"to", m.to},
                {"body", m.body},
                {"queued_at", format_timestamp(m.queued_at)},
                {"delivery_state", to_string(m.delivery_state)},
                {"ref", m.ref}};
}

Api::Api(Platform& platform, UssdMenu& ussd, std::optional<std::string> admin_token)
    : platform_(platform), ussd_(ussd), admin_token_(std::move(admin_token)) {}

ApiResponse Api::handle(const ApiRequest& request) {
    try {
        return route(request);
    } catch (const Error& e) {
        return {http_status(e.code()), error_body(e)};
    } catch (const std::exception& e) {
        return {500, json{{"error", "INTERNAL"}, {"message", e.what()}}};
    }
}

ApiResponse Api::route(const ApiRequest& req) {
    const auto parts = split_path(req.path);
    const bool get = req.method == "GET";
    const bool post = req.method == "POST";
    const auto n = parts.size();
    auto is = [&](std::initializer_list<const char*> want) {
        if (want.size() != n) return false;
        std::size_t i = 0;
        for (const char* w : want) {
            if (*w != '*' && parts[i] != w) return false;
            ++i;
        }
        return true;
    };

    // The menu engine takes its own lock before the platform lock.
    if (post && is({"ussd"})) {
        const auto body = parse_body(req);
        try {
            const auto reply = ussd_.handle(req_str(body, "session_id"), req_str(body, "msisdn"), req_str(body, "input"));
            return {200, json{{"text", reply.text}, {"end_session", reply.end_session}}};
        } catch (const Error& e) {
            auto j = error_body(e);
            j["text"] = e.what();
            j["end_session"] = true;
            return {http_status(e.code()), j};
        }
    }

    auto guard = platform_.lock();
    auto& registry = platform_.registry();
    auto& engine = platform_.engine();
    auto& ledger = platform_.ledger();
    const auto key = req.header("idempotency-key").value_or("");
    const auto& cc = platform_.options().registry.country_code;

    auto bearer = [&](bool allow_password_change = false) -> const SessionToken& {
        auto h = req.header("authorization");
        if (!h || h->rfind("Bearer ", 0) != 0) throw Error(ErrorCode::Unauthorized, "Bearer token required");
        return registry.authenticate(trim(h->substr(7)), allow_password_change);
    };
    auto own_wallet = [&](const std::string& raw) {
        const auto& token = bearer();
        if (normalize_msisdn(raw, cc).value_or("") != token.msisdn) {
            throw Error(ErrorCode::Unauthorized, "token does not belong to this wallet");
        }
        return token.msisdn;
    };
    auto admin = [&] {
        if (!admin_token_) return;
        if (req.header("x-admin-token") != admin_token_) throw Error(ErrorCode::Unauthorized, "admin token required");
    };

    if (get && is({"health"})) {
        const bool telco = platform_.telco().healthy();
        const bool bank = platform_.bank().healthy();
        const bool sms = platform_.sms().healthy();
        const bool reconciled = platform_.reconcile().empty();
        return {200, json{{"status", telco && bank && sms && reconciled ? "ok" : "degraded"},
                          {"journal_seq", ledger.last_seq()},
                          {"subscribers", registry.subscribers().size()},
                          {"active_ussd_sessions", ussd_.active_sessions()},
                          {"reconciled", reconciled},
                          {"providers", json{{"telco", telco}, {"bank", bank}, {"sms", sms}}}}};
    }

    if (post && is({"register"})) {
        const auto body = parse_body(req);
        Application app;
        app.msisdn = req_str(body, "msisdn");
        app.full_name = opt_str(body, "full_name").value_or("");
        app.pin = opt_str(body, "pin").value_or("");
        app.secret_question = opt_str(body, "secret_question").value_or("");
        app.secret_answer = opt_str(body, "secret_answer").value_or("");
        app.bank_account = opt_str(body, "bank_account");
        const auto result = platform_.register_subscriber(app);
        const auto balance = ledger.balance(AccountId::wallet(result.msisdn));
        return {201, json{{"msisdn", result.msisdn},
                          {"login_id", result.login_id},
                          {"status", "ACTIVE"},
                          {"balance_minor", balance.amount_minor},
                          {"credentials", "sent by SMS"}}};
    }

    if (post && is({"login"})) {
        const auto body = parse_body(req);
        auto principal = opt_str(body, "login_id");
        if (!principal) principal = opt_str(body, "msisdn");
        if (!principal) throw Error(ErrorCode::BadRequest, "login_id is required");
        const auto token = registry.login(Channel::Web, *principal, req_str(body, "password"));
        return {200, json{{"token", token.token},
                          {"msisdn", token.msisdn},
                          {"expires_at", format_timestamp(token.expires_at)},
                          {"must_change_password", token.must_change_password}}};
    }

    if (post && is({"logout"})) {
        auto h = req.header("authorization").value_or("");
        registry.logout(trim(h.substr(std::min<std::size_t>(7, h.size()))));
        return {200, json{{"logged_out", true}}};
    }

    if (post && is({"password"})) {
        const auto body = parse_body(req);
        const auto h = req.header("authorization").value_or("");
        bearer(true);
        registry.change_password(trim(h.substr(7)), req_str(body, "current_password"), req_str(body, "new_password"));
        return {200, json{{"password_changed", true}}};
    }

    if (get && is({"pin", "question"})) {
        auto it = req.query.find("msisdn");
        if (it == req.query.end()) throw Error(ErrorCode::BadRequest, "msisdn is required");
        const auto msisdn = normalize_msisdn(it->second, cc).value_or(it->second);
        return {200, json{{"msisdn", msisdn}, {"secret_question", registry.secret_question(msisdn)}}};
    }

    if (post && is({"pin", "retrieve"})) {
        const auto body = parse_body(req);
        const auto msisdn = normalize_msisdn(req_str(body, "msisdn"), cc).value_or("");
        registry.retrieve_pin(msisdn, req_str(body, "answer"));
        return {200, json{{"pin", "sent by SMS"}}};
    }

    if (get && is({"details"})) {
        const auto msisdn = bearer().msisdn;
        const auto* s = registry.find(msisdn);
        return {200, json{{"msisdn", s->msisdn},
                          {"login_id", s->login_id},
                          {"full_name", s->full_name},
                          {"secret_question", s->secret_question},
                          {"bank_account", s->bank_account ? json(*s->bank_account) : json(nullptr)},
                          {"status", to_string(s->status)}}};
    }

    if (post && is({"details"})) {
        const auto body = parse_body(req);
        const auto current = bearer().msisdn;
        DetailChanges changes;
        changes.msisdn = opt_str(body, "msisdn");
        changes.pin = opt_str(body, "pin");
        changes.full_name = opt_str(body, "full_name");
        changes.secret_question = opt_str(body, "secret_question");
        changes.secret_answer = opt_str(body, "secret_answer");
        if (body.contains("bank_account")) changes.bank_account = opt_str(body, "bank_account").value_or("");
        const auto msisdn = platform_.update_details(Channel::Web, current, changes);
        return {200, json{{"msisdn", msisdn}, {"updated", true}}};
    }

    if (post && is({"deregister"})) {
        const auto body = parse_body(req);
        const auto msisdn = bearer().msisdn;
        const bool confirm = body.value("confirm", false);
        const auto result = platform_.deregister(msisdn, confirm);
        json j{{"msisdn", msisdn}, {"closed", result.closed}};
        if (!confirm) j["confirmation_sent"] = true;
        j["cancelled_codes_minor"] = result.cancelled_codes_minor;
        j["swept_minor"] = result.sweep ? result.sweep->amount.amount_minor : 0;
        if (result.sweep) j["sweep_txn_id"] = result.sweep->txn_id;
        return {200, j};
    }

    if (get && is({"wallets", "*", "balance"})) {
        const auto msisdn = own_wallet(parts[1]);
        const auto balance = engine.check_balance(msisdn);
        auto it = req.query.find("deliver");
        const bool sms = it != req.query.end() && it->second == "sms";
        if (sms) {
            platform_.sms().send_sms(msisdn, "Your eWallet balance is " + format_money(balance) + ".");
        }
        return {200, json{{"msisdn", msisdn},
                          {"balance_minor", balance.amount_minor},
                          {"currency", balance.currency},
                          {"formatted", format_money(balance)},
                          {"delivered_by_sms", sms}}};
    }

    if (get && is({"wallets", "*", "statement"})) {
        const auto msisdn = own_wallet(parts[1]);
        const auto id = AccountId::wallet(msisdn);
        const auto from = query_seq(req, "from", 1);
        const auto to = query_seq(req, "to", ledger.last_seq());
        std::int64_t running = 0;
        if (from > 1) {
            for (const auto& e : ledger.statement(id, 1, from - 1)) {
                for (const auto& p : e.postings) {
                    if (p.account == id) running += p.delta_minor;
                }
            }
        }
        json lines = json::array();
        for (const auto& e : ledger.statement(id, from, to)) {
            std::int64_t delta = 0;
            for (const auto& p : e.postings) {
                if (p.account == id) delta += p.delta_minor;
            }
            running += delta;
            json line{{"seq", e.seq},
                      {"ts", format_timestamp(e.ts)},
                      {"txn_id", e.txn_id},
                      {"type", to_string(e.type)},
                      {"delta_minor", delta},
                      {"balance_after_minor", running}};
            if (auto k = e.meta.find("txn_kind"); k != e.meta.end()) line["kind"] = k->second;
            lines.push_back(line);
        }
        return {200, json{{"msisdn", msisdn}, {"currency", ledger.currency()}, {"entries", lines}}};
    }

    if (post && is({"transfers", "wallet"})) {
        const auto body = parse_body(req);
        const auto& token = bearer();
        auto source = FundingSource::Wallet;
        if (auto s = opt_str(body, "source")) {
            std::string upper;
            for (char c : *s) upper += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
            const auto parsed = parse_funding_source(upper);
            if (!parsed || *parsed == FundingSource::Code) throw Error(ErrorCode::BadRequest, "unknown source " + *s);
            source = *parsed;
        }
        const auto txn = engine.transfer_wallet_to_wallet(token.msisdn, req_str(body, "recipient_msisdn"),
                                                          req_amount(body), key, source);
        return {200, to_json(txn)};
    }

    if (post && is({"transfers", "bank"})) {
        const auto body = parse_body(req);
        const auto code = opt_str(body, "access_code");
        std::string sender;
        if (code) {
            sender = normalize_msisdn(req_str(body, "msisdn"), cc).value_or("");
            if (sender.empty()) throw Error(ErrorCode::UnknownMsisdn);
        } else {
            sender = bearer().msisdn;
        }
        const auto txn = engine.transfer_wallet_to_bank(sender, req_str(body, "account_number"), req_amount(body),
                                                        key, code);
        return {200, to_json(txn)};
    }

    if (post && is({"transfers", "bank-to-bank"})) {
        const auto body = parse_body(req);
        const auto txn =
            engine.transfer_bank_to_bank(bearer().msisdn, req_str(body, "account_number"), req_amount(body), key);
        return {200, to_json(txn)};
    }

    if (post && is({"recharge"})) {
        const auto body = parse_body(req);
        return {200, to_json(engine.recharge(bearer().msisdn, req_amount(body), key))};
    }

    if (post && is({"withdrawals"})) {
        const auto body = parse_body(req);
        const auto code = engine.request_withdrawal(bearer().msisdn, req_amount(body), key);
        auto j = to_json(code);
        j["delivery"] = "temporary PIN sent by SMS";
        return {200, j};
    }

    if (post && is({"atm", "redeem"})) {
        const auto body = parse_body(req);
        const auto receipt =
            engine.redeem_at_atm(req_str(body, "code"), req_str(body, "msisdn"), req_amount(body), key);
        return {200, to_json(receipt)};
    }

    if (post && is({"pos", "charge"})) {
        const auto body = parse_body(req);
        const auto& seller = bearer();
        const auto buyer = normalize_msisdn(req_str(body, "buyer_msisdn"), cc).value_or("");
        if (buyer.empty()) throw Error(ErrorCode::UnknownMsisdn);
        const auto code = opt_str(body, "code");
        if (!code) {
            // Paying straight from the buyer's wallet needs the buyer's PIN.
            const auto pin = opt_str(body, "buyer_pin");
            if (!pin) throw Error(ErrorCode::BadRequest, "code or buyer_pin is required");
            if (!registry.find(buyer)) throw Error(ErrorCode::InvalidLogin);
            registry.verify_pin(buyer, *pin);
        }
        const auto txn = engine.pay_merchant(buyer, seller.msisdn, req_amount(body), code, key);
        return {200, to_json(txn)};
    }

    if (get && is({"sms", "outbox", "*"})) {
        const auto msisdn = normalize_msisdn(parts[2], cc).value_or(parts[2]);
        json messages = json::array();
        for (const auto& m : platform_.sms().outbox(msisdn)) messages.push_back(to_json(m));
        return {200, json{{"msisdn", msisdn}, {"messages", messages}}};
    }

    if (post && is({"sms", "outbox", "*", "ack"})) {
        const auto body = parse_body(req);
        const auto msisdn = normalize_msisdn(parts[2], cc).value_or(parts[2]);
        auto it = body.find("up_to_id");
        if (it == body.end() || !it->is_number_unsigned()) throw Error(ErrorCode::BadRequest, "up_to_id is required");
        return {200, json{{"acknowledged", platform_.sms().ack(msisdn, it->get<std::uint64_t>())}}};
    }

    if (post && is({"admin", "seed"})) {
        admin();
        const auto report = platform_.seed(parse_body(req));
        return {200, json{{"msisdns_added", report.msisdns_added}, {"accounts_added", report.accounts_added}}};
    }

    if (get && is({"admin", "journal"})) {
        admin();
        const auto from = query_seq(req, "from", 1);
        const auto to = query_seq(req, "to", ledger.last_seq());
        json entries = json::array();
        for (const auto& e : ledger.entries()) {
            if (e.seq >= from && e.seq <= to) entries.push_back(entry_json(e));
        }
        return {200, json{{"last_seq", ledger.last_seq()}, {"entries", entries}}};
    }

    if (post && is({"admin", "unlock"})) {
        admin();
        const auto body = parse_body(req);
        const auto msisdn = normalize_msisdn(req_str(body, "msisdn"), cc).value_or("");
        return {200, json{{"msisdn", msisdn}, {"unlocked", registry.unlock(msisdn)}}};
    }

    if (post && is({"admin", "faults"})) {
        admin();
        const auto body = parse_body(req);
        const auto provider = req_str(body, "provider");
        FaultInjector* faults = nullptr;
        if (provider == "bank") faults = &platform_.bank().faults;
        if (provider == "sms") faults = &platform_.sms().faults;
        if (!faults) throw Error(ErrorCode::BadRequest, "provider must be bank or sms");
        faults->fail_next(body.value("fail_next", 0));
        faults->set_latency_ms(body.value("latency_ms", 0));
        return {200, json{{"provider", provider}, {"armed", faults->pending_failures()}}};
    }

    if (post && is({"admin", "expire"})) {
        admin();
        return {200, json{{"expired", platform_.expire_due()}, {"ussd_sessions_expired", ussd_.expire_sessions()}}};
    }

    if (get && is({"admin", "reconcile"})) {
        admin();
        json issues = json::array();
        for (const auto& i : platform_.reconcile()) {
            issues.push_back({{"account", i.account}, {"bank_delta_minor", i.bank_delta},
                              {"mirror_balance_minor", i.mirror_balance}});
        }
        return {200, json{{"reconciled", issues.empty()}, {"issues", issues}}};
    }

    throw Error(ErrorCode::NotFound, "no route for " + req.method + " " + req.path);
}

}  // namespace ewallet
