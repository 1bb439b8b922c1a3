#include "ewallet/engine/engine.hpp"

#include <array>
#include <utility>

#include "ewallet/text.hpp"

namespace ewallet {

namespace {

constexpr std::size_t kAccessCodeDigits = 8;

std::string code_digest_of(std::string_view code) { return sha256_hex("access-code:" + std::string(code)); }

std::int64_t meta_int(const Meta& meta, const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw Error(ErrorCode::CorruptJournal, std::string("entry missing ") + key);
    try {
        return std::stoll(it->second);
    } catch (const std::exception&) {
        throw Error(ErrorCode::CorruptJournal, std::string("bad integer in ") + key);
    }
}

const std::string& meta_str(const Meta& meta, const char* key) {
    auto it = meta.find(key);
    if (it == meta.end()) throw Error(ErrorCode::CorruptJournal, std::string("entry missing ") + key);
    return it->second;
}

Timestamp meta_time(const Meta& meta, const char* key) {
    const auto t = parse_timestamp(meta_str(meta, key));
    if (!t) throw Error(ErrorCode::CorruptJournal, std::string("bad timestamp in ") + key);
    return *t;
}

std::optional<CodeState> parse_code_state(std::string_view s) {
    constexpr std::array<CodeState, 5> all{CodeState::Issued, CodeState::PartiallyRedeemed, CodeState::Redeemed,
                                           CodeState::Expired, CodeState::Cancelled};
    for (auto c : all) {
        if (to_string(c) == s) return c;
    }
    return std::nullopt;
}

std::string fingerprint_of(std::initializer_list<std::string_view> parts) {
    std::string out;
    for (auto p : parts) {
        if (!out.empty()) out += '|';
        out += p;
    }
    return out;
}

}  // namespace

std::string_view to_string(TxnState s) {
    switch (s) {
        case TxnState::Initiated: return "INITIATED";
        case TxnState::Validated: return "VALIDATED";
        case TxnState::Posted: return "POSTED";
        case TxnState::Notified: return "NOTIFIED";
        case TxnState::Failed: return "FAILED";
    }
    return "INITIATED";
}

bool is_legal_transition(TxnState from, TxnState to) {
    switch (to) {
        case TxnState::Validated: return from == TxnState::Initiated;
        case TxnState::Posted: return from == TxnState::Validated;
        case TxnState::Notified: return from == TxnState::Posted;
        case TxnState::Failed: return from == TxnState::Initiated || from == TxnState::Validated;
        case TxnState::Initiated: return false;
    }
    return false;
}

std::string_view to_string(FundingSource s) {
    switch (s) {
        case FundingSource::Auto: return "AUTO";
        case FundingSource::Wallet: return "WALLET";
        case FundingSource::Bank: return "BANK";
        case FundingSource::Code: return "CODE";
    }
    return "WALLET";
}

std::optional<FundingSource> parse_funding_source(std::string_view text) {
    for (auto s : {FundingSource::Auto, FundingSource::Wallet, FundingSource::Bank, FundingSource::Code}) {
        if (to_string(s) == text) return s;
    }
    return std::nullopt;
}

std::string_view to_string(CodeState s) {
    switch (s) {
        case CodeState::Issued: return "ISSUED";
        case CodeState::PartiallyRedeemed: return "PARTIALLY_REDEEMED";
        case CodeState::Redeemed: return "REDEEMED";
        case CodeState::Expired: return "EXPIRED";
        case CodeState::Cancelled: return "CANCELLED";
    }
    return "ISSUED";
}

TransactionEngine::TransactionEngine(Ledger& ledger, Registry& registry, const TelcoDirectory& telco,
                                     BankGateway& bank, SmsGateway& sms, const Clock& clock, Random& random,
                                     EngineOptions options)
    : ledger_(ledger), registry_(registry), telco_(telco), bank_(bank), sms_(sms), clock_(clock), random_(random),
      options_(std::move(options)) {
    const auto pool = AccountId::bank_mirror(std::string(SimulatedBank::kAtmCashPool));
    if (!ledger_.is_open(pool)) ledger_.open_account(pool);
}

// -- lifecycle plumbing -------------------------------------------------------

std::string TransactionEngine::ensure_key(std::string key) {
    return key.empty() ? "auto-" + random_.hex(24) : key;
}

const Transaction* TransactionEngine::replayed(const std::string& key, const std::string& fingerprint) const {
    auto it = idempotency_.find(key);
    if (it == idempotency_.end()) return nullptr;
    if (it->second.fingerprint != fingerprint) throw Error(ErrorCode::IdempotencyConflict);
    return &txns_.at(it->second.txn_id);
}

Transaction& TransactionEngine::begin(TxnKind kind, std::string sender, std::string recipient,
                                      std::int64_t amount, const std::string& key, FundingSource source) {
    Transaction txn;
    txn.txn_id = "TX-" + random_.hex(20);
    txn.kind = kind;
    txn.sender = std::move(sender);
    txn.recipient = std::move(recipient);
    txn.amount = Money{amount, ledger_.currency()};
    txn.fee = Money{0, ledger_.currency()};
    txn.idempotency_key = key;
    txn.source = source;
    auto [it, _] = txns_.emplace(txn.txn_id, std::move(txn));
    return it->second;
}

void TransactionEngine::advance(Transaction& txn, TxnState to) {
    const auto from = txn.state;
    if (!is_legal_transition(from, to)) {
        throw Error(ErrorCode::Internal, "illegal transaction transition " + std::string(to_string(from)) + " -> " +
                                             std::string(to_string(to)));
    }
    txn.state = to;
    if (observer_) observer_(txn, from, to);
}

void TransactionEngine::fail(Transaction& txn, const Error& error) {
    txn.failure_reason = error.code();
    advance(txn, TxnState::Failed);
    throw error;
}

void TransactionEngine::fail_if_thrown(Transaction& txn, const std::function<void()>& step) {
    try {
        step();
    } catch (const Error& e) {
        fail(txn, e);
    }
}

LedgerPosting TransactionEngine::posting(const AccountId& account, std::int64_t delta) const {
    return LedgerPosting{account, delta, ledger_.currency()};
}

void TransactionEngine::push_posting(std::vector<LedgerPosting>& postings, const AccountId& account,
                                     std::int64_t delta) const {
    if (delta != 0) postings.push_back(posting(account, delta));
}

AccountId TransactionEngine::mirror(const std::string& bank_account) {
    auto id = AccountId::bank_mirror(bank_account);
    if (!ledger_.is_open(id)) ledger_.open_account(id);
    return id;
}

Meta TransactionEngine::transaction_meta(const Transaction& txn, const std::string& fingerprint) const {
    return Meta{
        {"txn_kind", std::string(to_string(txn.kind))},
        {"sender", txn.sender},
        {"recipient", txn.recipient},
        {"amount_minor", std::to_string(txn.amount.amount_minor)},
        {"fee_minor", std::to_string(txn.fee.amount_minor)},
        {"source", std::string(to_string(txn.source))},
        {"request", fingerprint},
    };
}

JournalEntry TransactionEngine::post(Transaction& txn, EntryType type, std::vector<LedgerPosting> postings,
                                     Meta meta, const std::string& fingerprint) {
    auto base = transaction_meta(txn, fingerprint);
    meta.insert(base.begin(), base.end());
    auto entry = ledger_.append_entry(type, txn.txn_id, std::move(postings), std::move(meta), txn.idempotency_key);
    apply_code_meta(entry);
    txn.seq = entry.seq;
    txn.posted_at = entry.ts;
    idempotency_[txn.idempotency_key] = {fingerprint, txn.txn_id};
    advance(txn, TxnState::Posted);
    return entry;
}

void TransactionEngine::compensate(const EftReceipt& receipt) {
    const auto reverse = receipt.direction == EftDirection::Debit ? EftDirection::Credit : EftDirection::Debit;
    try {
        bank_.eft(reverse, receipt.account, receipt.amount_minor, receipt.ref + ":reversal");
    } catch (const Error&) {
        // Left for startup reconciliation, which reverses any EFT whose
        // reference never reached the journal.
    }
}

void TransactionEngine::send(std::string_view to, std::string_view body, std::string_view ref) {
    sms_.send_sms(to, body, ref);
}

void TransactionEngine::notify(Transaction& txn, const std::vector<std::pair<std::string, std::string>>& messages) {
    bool all_sent = true;
    for (const auto& [to, body] : messages) {
        try {
            send(to, body, txn.txn_id);
        } catch (const Error&) {
            all_sent = false;
        }
    }
    if (all_sent) advance(txn, TxnState::Notified);
}

std::string TransactionEngine::normalize_recipient(std::string_view raw) const {
    const auto msisdn = normalize_msisdn(raw, registry_.options().country_code);
    if (!msisdn || !telco_.validate_msisdn(*msisdn).valid) throw Error(ErrorCode::UnknownMsisdn);
    return *msisdn;
}

// -- access codes -------------------------------------------------------------

std::pair<std::string, std::string> TransactionEngine::new_code() {
    for (;;) {
        auto code = random_.digits(kAccessCodeDigits);
        auto digest = code_digest_of(code);
        auto it = code_by_digest_.find(digest);
        if (it == code_by_digest_.end() || !codes_.at(it->second).live()) return {std::move(code), std::move(digest)};
    }
}

AccessCode& TransactionEngine::lookup_code(std::string_view code, std::string_view msisdn) {
    auto it = code_by_digest_.find(code_digest_of(trim(code)));
    if (it == code_by_digest_.end()) throw Error(ErrorCode::CodeUnknown);
    auto& ac = codes_.at(it->second);
    if (ac.holder != msisdn) throw Error(ErrorCode::HolderMismatch);
    switch (ac.state) {
        case CodeState::Redeemed: throw Error(ErrorCode::CodeAlreadyRedeemed);
        case CodeState::Expired: throw Error(ErrorCode::CodeExpired);
        case CodeState::Cancelled: throw Error(ErrorCode::CodeUnknown);
        default: break;
    }
    if (clock_.now() > ac.expires_at) {
        refund_code(ac, CodeState::Expired, "expired");
        throw Error(ErrorCode::CodeExpired);
    }
    return ac;
}

void TransactionEngine::consume_code(AccessCode& code, std::int64_t debit) {
    code.remaining.amount_minor -= debit;
    code.redeemed_minor += debit;
    code.state = code.remaining.amount_minor == 0 ? CodeState::Redeemed : CodeState::PartiallyRedeemed;
}

void TransactionEngine::refund_code(AccessCode& code, CodeState final_state, const std::string& reason) {
    const auto amount = code.remaining.amount_minor;
    const auto key = reason + ":" + code.code_id;
    Meta meta{{"refund_code_id", code.code_id},
              {"refund_minor", std::to_string(amount)},
              {"refund_to", code.funder},
              {"code_final_state", std::string(to_string(final_state))},
              {"reason", reason}};
    if (amount == 0) {
        // Nothing held any more; only the state changes. Cannot happen for a
        // live code, kept for completeness.
        code.state = final_state;
        return;
    }
    auto entry = ledger_.append_entry(
        EntryType::Reversal, "RV-" + random_.hex(20),
        {posting(AccountId::suspense(), -amount), posting(AccountId::wallet(code.funder), amount)}, std::move(meta),
        key);
    apply_code_meta(entry);
    const auto text = "Your temporary PIN " + code.code_id + " for " + format_money(code.issued_amount) + " has " +
                      (final_state == CodeState::Expired ? "expired" : "been cancelled") + ". " +
                      format_money(amount, ledger_.currency()) + " was refunded to eWallet " + code.funder + ".";
    try {
        send(code.funder, text, entry.txn_id);
        if (code.holder != code.funder) {
            send(code.holder, "Your temporary PIN " + code.code_id + " has " +
                                  (final_state == CodeState::Expired ? "expired." : "been cancelled."),
                 entry.txn_id);
        }
    } catch (const Error&) {
    }
}

void TransactionEngine::apply_code_meta(const JournalEntry& entry) {
    const auto& meta = entry.meta;
    if (meta.count("issued_code_id")) {
        AccessCode code;
        code.code_id = meta_str(meta, "issued_code_id");
        code.code_digest = meta_str(meta, "code_digest");
        code.holder = meta_str(meta, "code_holder");
        code.funder = meta_str(meta, "code_funder");
        code.origin = meta_str(meta, "code_origin") == "PARKED" ? CodeOrigin::ParkedTransfer : CodeOrigin::Withdrawal;
        code.issued_amount = Money{meta_int(meta, "code_amount_minor"), ledger_.currency()};
        code.remaining = code.issued_amount;
        code.issued_at = entry.ts;
        code.expires_at = meta_time(meta, "code_expires_at");
        code.hold_entry = entry.seq;
        code_by_digest_[code.code_digest] = code.code_id;
        codes_[code.code_id] = std::move(code);
    }
    if (meta.count("code_debit_minor")) {
        auto it = codes_.find(meta_str(meta, "code_id"));
        if (it == codes_.end()) throw Error(ErrorCode::CorruptJournal, "debit of unknown access code");
        consume_code(it->second, meta_int(meta, "code_debit_minor"));
    }
    if (meta.count("refund_code_id")) {
        auto it = codes_.find(meta_str(meta, "refund_code_id"));
        if (it == codes_.end()) throw Error(ErrorCode::CorruptJournal, "refund of unknown access code");
        const auto refund = meta_int(meta, "refund_minor");
        auto& code = it->second;
        code.refunded_minor += refund;
        code.remaining.amount_minor -= refund;
        code.state = parse_code_state(meta_str(meta, "code_final_state")).value_or(CodeState::Expired);
    }
}

// -- money movement -----------------------------------------------------------

Transaction TransactionEngine::transfer_wallet_to_wallet(std::string_view sender, std::string_view recipient_msisdn,
                                                         std::int64_t amount, std::string key,
                                                         FundingSource source) {
    key = ensure_key(std::move(key));
    const auto fingerprint = fingerprint_of({"P2P", sender, recipient_msisdn, std::to_string(amount),
                                             to_string(source)});
    if (const auto* prior = replayed(key, fingerprint)) return *prior;

    auto& txn = begin(TxnKind::P2P, std::string(sender), std::string(recipient_msisdn), amount, key, source);
    std::optional<std::string> sender_bank;
    bool parked = false;
    fail_if_thrown(txn, [&] {
        const auto& s = registry_.require_active(sender);
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        txn.recipient = normalize_recipient(recipient_msisdn);
        if (txn.recipient == s.msisdn) throw Error(ErrorCode::ValidationFailed, "cannot transfer to yourself");
        txn.fee.amount_minor = options_.fees.fee(TxnKind::P2P, amount);
        const auto total = amount + txn.fee.amount_minor;
        const bool wallet_covers = ledger_.balance(AccountId::wallet(s.msisdn)).amount_minor >= total;
        if (source == FundingSource::Code) throw Error(ErrorCode::BadRequest, "use a code-funded payment instead");
        if (source == FundingSource::Wallet || (source == FundingSource::Auto && wallet_covers)) {
            if (!wallet_covers) throw Error(ErrorCode::NotSufficientFunds);
            txn.source = FundingSource::Wallet;
        } else {
            if (!s.bank_account) {
                throw Error(source == FundingSource::Bank ? ErrorCode::NoLinkedBankAccount
                                                          : ErrorCode::NotSufficientFunds);
            }
            if (bank_.available_balance(*s.bank_account) < total) throw Error(ErrorCode::NotSufficientFunds);
            sender_bank = s.bank_account;
            txn.source = FundingSource::Bank;
        }
        const auto* r = registry_.find(txn.recipient);
        parked = r == nullptr;
    });
    advance(txn, TxnState::Validated);

    const auto total = amount + txn.fee.amount_minor;
    std::optional<EftReceipt> debit;
    if (sender_bank) fail_if_thrown(txn, [&] { debit = bank_.eft(EftDirection::Debit, *sender_bank, total, txn.txn_id); });

    std::vector<LedgerPosting> postings;
    Meta meta;
    std::string code;
    if (sender_bank) {
        push_posting(postings, mirror(*sender_bank), -total);
    } else {
        push_posting(postings, AccountId::wallet(txn.sender), -total);
    }
    if (parked) {
        auto [clear, digest] = new_code();
        code = std::move(clear);
        const auto expires = clock_.now() + options_.access_code_ttl;
        meta = Meta{{"issued_code_id", "AC-" + random_.hex(12)},
                    {"code_digest", digest},
                    {"code_holder", txn.recipient},
                    {"code_funder", txn.sender},
                    {"code_origin", "PARKED"},
                    {"code_amount_minor", std::to_string(amount)},
                    {"code_expires_at", format_timestamp(expires)},
                    {"parked_for", txn.recipient}};
        txn.code_id = meta["issued_code_id"];
        txn.code_expires_at = expires;
        txn.parked = true;
        push_posting(postings, AccountId::suspense(), amount);
    } else {
        push_posting(postings, AccountId::wallet(txn.recipient), amount);
    }
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    try {
        post(txn, EntryType::P2P, std::move(postings), std::move(meta), fingerprint);
    } catch (const Error& e) {
        if (debit) compensate(*debit);
        fail(txn, e);
    }

    const auto amount_text = format_money(txn.amount);
    std::vector<std::pair<std::string, std::string>> messages;
    messages.emplace_back(txn.sender, "transaction successful. You sent " + amount_text + " to " + txn.recipient +
                                          ". Fee " + format_money(txn.fee) + ". Ref " + txn.txn_id);
    if (parked) {
        messages.emplace_back(txn.recipient,
                              "You have an incoming " + amount_text + " from " + txn.sender + ". Your temporary PIN is " +
                                  code + ", valid until " + format_timestamp(*txn.code_expires_at) + ". Dial " +
                                  options_.service_code + " to retrieve the money, or withdraw it at any ATM.");
    } else {
        messages.emplace_back(txn.recipient, "You have an incoming " + amount_text + " from " + txn.sender +
                                                 ". It has been saved into your eWallet account. Ref " + txn.txn_id);
    }
    notify(txn, messages);
    return txn;
}

Transaction TransactionEngine::transfer_wallet_to_bank(std::string_view sender, std::string_view bank_account,
                                                       std::int64_t amount, std::string key,
                                                       std::optional<std::string> code) {
    key = ensure_key(std::move(key));
    const auto fingerprint = fingerprint_of({"WALLET_TO_BANK", sender, bank_account, std::to_string(amount),
                                             code ? code_digest_of(trim(*code)) : std::string("wallet")});
    if (const auto* prior = replayed(key, fingerprint)) return *prior;

    auto& txn = begin(TxnKind::WalletToBank, std::string(sender), trim(bank_account), amount, key,
                      code ? FundingSource::Code : FundingSource::Wallet);
    AccessCode* funding = nullptr;
    fail_if_thrown(txn, [&] {
        if (code) {
            txn.sender = normalize_msisdn(sender, registry_.options().country_code).value_or(std::string(sender));
        } else {
            txn.sender = registry_.require_active(sender).msisdn;
        }
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        if (!bank_.validate_bank_account(txn.recipient).valid) throw Error(ErrorCode::UnknownBankAccount);
        txn.fee.amount_minor = options_.fees.fee(TxnKind::WalletToBank, amount);
        const auto total = amount + txn.fee.amount_minor;
        if (code) {
            funding = &lookup_code(*code, txn.sender);
            if (funding->remaining.amount_minor < total) throw Error(ErrorCode::AmountExceedsRemaining);
            txn.code_id = funding->code_id;
        } else if (ledger_.balance(AccountId::wallet(txn.sender)).amount_minor < total) {
            throw Error(ErrorCode::NotSufficientFunds);
        }
    });
    advance(txn, TxnState::Validated);

    const auto total = amount + txn.fee.amount_minor;
    std::optional<EftReceipt> credit;
    fail_if_thrown(txn, [&] { credit = bank_.eft(EftDirection::Credit, txn.recipient, amount, txn.txn_id); });

    std::vector<LedgerPosting> postings;
    Meta meta;
    if (funding) {
        push_posting(postings, AccountId::suspense(), -total);
        meta = Meta{{"code_id", funding->code_id},
                    {"code_debit_minor", std::to_string(total)},
                    {"code_remaining_after", std::to_string(funding->remaining.amount_minor - total)}};
    } else {
        push_posting(postings, AccountId::wallet(txn.sender), -total);
    }
    push_posting(postings, mirror(txn.recipient), amount);
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    try {
        post(txn, EntryType::WalletToBank, std::move(postings), std::move(meta), fingerprint);
    } catch (const Error& e) {
        compensate(*credit);
        fail(txn, e);
    }

    std::vector<std::pair<std::string, std::string>> messages;
    messages.emplace_back(txn.sender, "transaction successful. You sent " + format_money(txn.amount) +
                                          " to bank account " + txn.recipient + ". Fee " + format_money(txn.fee) +
                                          ". Ref " + txn.txn_id);
    if (const auto contact = bank_.contact_msisdn(txn.recipient); contact && telco_.validate_msisdn(*contact).valid) {
        messages.emplace_back(*contact, "Your bank account " + txn.recipient + " received " +
                                            format_money(txn.amount) + " from eWallet " + txn.sender + ".");
    }
    notify(txn, messages);
    return txn;
}

Transaction TransactionEngine::transfer_bank_to_bank(std::string_view sender, std::string_view recipient_account,
                                                     std::int64_t amount, std::string key) {
    key = ensure_key(std::move(key));
    const auto fingerprint = fingerprint_of({"BANK_TO_BANK", sender, recipient_account, std::to_string(amount)});
    if (const auto* prior = replayed(key, fingerprint)) return *prior;

    auto& txn = begin(TxnKind::BankToBank, std::string(sender), trim(recipient_account), amount, key,
                      FundingSource::Bank);
    std::string sender_account;
    fail_if_thrown(txn, [&] {
        const auto& s = registry_.require_active(sender);
        txn.sender = s.msisdn;
        if (!s.bank_account) throw Error(ErrorCode::NoLinkedBankAccount);
        sender_account = *s.bank_account;
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        if (!bank_.validate_bank_account(txn.recipient).valid) throw Error(ErrorCode::UnknownBankAccount);
        if (txn.recipient == sender_account) {
            throw Error(ErrorCode::ValidationFailed, "recipient account is the sender's own account");
        }
        txn.fee.amount_minor = options_.fees.fee(TxnKind::BankToBank, amount);
        if (bank_.available_balance(sender_account) < amount + txn.fee.amount_minor) {
            throw Error(ErrorCode::NotSufficientFunds);
        }
    });
    advance(txn, TxnState::Validated);

    const auto total = amount + txn.fee.amount_minor;
    std::optional<EftReceipt> debit;
    std::optional<EftReceipt> credit;
    fail_if_thrown(txn, [&] { debit = bank_.eft(EftDirection::Debit, sender_account, total, txn.txn_id); });
    try {
        credit = bank_.eft(EftDirection::Credit, txn.recipient, amount, txn.txn_id);
    } catch (const Error& e) {
        compensate(*debit);
        fail(txn, e);
    }

    std::vector<LedgerPosting> postings;
    push_posting(postings, mirror(sender_account), -total);
    push_posting(postings, mirror(txn.recipient), amount);
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    try {
        post(txn, EntryType::BankToBank, std::move(postings), Meta{{"sender_bank_account", sender_account}},
             fingerprint);
    } catch (const Error& e) {
        compensate(*credit);
        compensate(*debit);
        fail(txn, e);
    }

    std::vector<std::pair<std::string, std::string>> messages;
    messages.emplace_back(txn.sender, "transaction successful. " + format_money(txn.amount) + " sent from bank account " +
                                          sender_account + " to bank account " + txn.recipient + ". Fee " +
                                          format_money(txn.fee) + ". Ref " + txn.txn_id);
    if (const auto contact = bank_.contact_msisdn(txn.recipient); contact && telco_.validate_msisdn(*contact).valid) {
        messages.emplace_back(*contact, "Your bank account " + txn.recipient + " received " +
                                            format_money(txn.amount) + " from bank account " + sender_account + ".");
    }
    notify(txn, messages);
    return txn;
}

Transaction TransactionEngine::recharge(std::string_view sender, std::int64_t amount, std::string key) {
    key = ensure_key(std::move(key));
    const auto fingerprint = fingerprint_of({"RECHARGE", sender, std::to_string(amount)});
    if (const auto* prior = replayed(key, fingerprint)) return *prior;

    auto& txn = begin(TxnKind::Recharge, std::string(sender), std::string(sender), amount, key, FundingSource::Bank);
    std::string account;
    fail_if_thrown(txn, [&] {
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        const auto& s = registry_.require_active(sender);
        txn.sender = s.msisdn;
        txn.recipient = s.msisdn;
        if (!s.bank_account) throw Error(ErrorCode::NoLinkedBankAccount);
        account = *s.bank_account;
        txn.fee.amount_minor = options_.fees.fee(TxnKind::Recharge, amount);
        if (txn.fee.amount_minor >= amount) throw Error(ErrorCode::AmountInvalid, "amount does not cover the fee");
        if (bank_.available_balance(account) < amount) throw Error(ErrorCode::NotSufficientFunds);
    });
    advance(txn, TxnState::Validated);

    std::optional<EftReceipt> debit;
    fail_if_thrown(txn, [&] { debit = bank_.eft(EftDirection::Debit, account, amount, txn.txn_id); });

    std::vector<LedgerPosting> postings;
    push_posting(postings, mirror(account), -amount);
    push_posting(postings, AccountId::wallet(txn.sender), amount - txn.fee.amount_minor);
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    try {
        post(txn, EntryType::Recharge, std::move(postings), Meta{{"sender_bank_account", account}}, fingerprint);
    } catch (const Error& e) {
        compensate(*debit);
        fail(txn, e);
    }
    notify(txn, {{txn.sender, "transaction successful. " +
                                  format_money(amount - txn.fee.amount_minor, ledger_.currency()) +
                                  " added to your eWallet from bank account " + account + ". Fee " +
                                  format_money(txn.fee) + ". Ref " + txn.txn_id}});
    return txn;
}

AccessCode TransactionEngine::request_withdrawal(std::string_view holder, std::int64_t amount, std::string key) {
    key = ensure_key(std::move(key));
    const auto fingerprint = fingerprint_of({"WITHDRAWAL", holder, std::to_string(amount)});
    if (const auto* prior = replayed(key, fingerprint)) return codes_.at(*prior->code_id);

    auto& txn = begin(TxnKind::Withdrawal, std::string(holder), std::string(holder), amount, key,
                      FundingSource::Wallet);
    fail_if_thrown(txn, [&] {
        const auto& s = registry_.require_active(holder);
        txn.sender = s.msisdn;
        txn.recipient = s.msisdn;
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        txn.fee.amount_minor = options_.fees.fee(TxnKind::Withdrawal, amount);
        if (ledger_.balance(AccountId::wallet(s.msisdn)).amount_minor < amount + txn.fee.amount_minor) {
            throw Error(ErrorCode::NotSufficientFunds);
        }
    });
    advance(txn, TxnState::Validated);

    auto [code, digest] = new_code();
    const auto expires = clock_.now() + options_.access_code_ttl;
    const auto code_id = "AC-" + random_.hex(12);
    txn.code_id = code_id;
    txn.code_expires_at = expires;
    std::vector<LedgerPosting> postings;
    push_posting(postings, AccountId::wallet(txn.sender), -(amount + txn.fee.amount_minor));
    push_posting(postings, AccountId::suspense(), amount);
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    Meta meta{{"issued_code_id", code_id},
              {"code_digest", digest},
              {"code_holder", txn.sender},
              {"code_funder", txn.sender},
              {"code_origin", "WITHDRAWAL"},
              {"code_amount_minor", std::to_string(amount)},
              {"code_expires_at", format_timestamp(expires)}};
    try {
        post(txn, EntryType::WithdrawalHold, std::move(postings), std::move(meta), fingerprint);
    } catch (const Error& e) {
        fail(txn, e);
    }
    notify(txn, {{txn.sender, "Your temporary PIN is " + code + " for " + format_money(txn.amount) +
                                  ". Use it with your cellphone number at any ATM or participating seller before " +
                                  format_timestamp(expires) + ". Fee " + format_money(txn.fee) + ". Ref " +
                                  txn.txn_id}});
    return codes_.at(code_id);
}

RedemptionReceipt TransactionEngine::redeem_at_atm(std::string_view code, std::string_view raw_msisdn,
                                                   std::int64_t amount, std::string key) {
    key = ensure_key(std::move(key));
    const auto msisdn = normalize_msisdn(raw_msisdn, registry_.options().country_code).value_or(std::string(raw_msisdn));
    const auto fingerprint = fingerprint_of({"ATM", msisdn, code_digest_of(trim(code)), std::to_string(amount)});
    if (auto it = receipts_.find(key); it != receipts_.end()) {
        if (receipt_fingerprints_.at(key) != fingerprint) throw Error(ErrorCode::IdempotencyConflict);
        return it->second;
    }

    auto& ac = lookup_code(code, msisdn);
    if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
    if (amount > ac.remaining.amount_minor) throw Error(ErrorCode::AmountExceedsRemaining);

    const auto txn_id = "RD-" + random_.hex(20);
    const auto pool = std::string(SimulatedBank::kAtmCashPool);
    const auto credit = bank_.eft(EftDirection::Credit, pool, amount, txn_id);
    const auto remaining_after = ac.remaining.amount_minor - amount;
    Meta meta{{"redemption", "atm"},
              {"sender", msisdn},
              {"amount_minor", std::to_string(amount)},
              {"code_id", ac.code_id},
              {"code_debit_minor", std::to_string(amount)},
              {"code_remaining_after", std::to_string(remaining_after)},
              {"code_state_after", std::string(to_string(remaining_after == 0 ? CodeState::Redeemed
                                                                              : CodeState::PartiallyRedeemed))},
              {"request", fingerprint}};
    JournalEntry entry;
    try {
        entry = ledger_.append_entry(EntryType::Redemption, txn_id,
                                     {posting(AccountId::suspense(), -amount), posting(mirror(pool), amount)},
                                     std::move(meta), key);
    } catch (const Error&) {
        compensate(credit);
        throw;
    }
    apply_code_meta(entry);
    RedemptionReceipt receipt{txn_id, ac.code_id, msisdn, Money{amount, ledger_.currency()}, ac.remaining,
                              ac.state, entry.seq, entry.ts};
    receipts_[key] = receipt;
    receipt_fingerprints_[key] = fingerprint;
    try {
        send(msisdn, "ATM withdrawal of " + format_money(receipt.amount) + " successful. Remaining on your temporary PIN: " +
                         format_money(receipt.remaining) + ". Ref " + txn_id, txn_id);
    } catch (const Error&) {
    }
    return receipt;
}

Transaction TransactionEngine::pay_merchant(std::string_view buyer, std::string_view seller_msisdn,
                                            std::int64_t amount, std::optional<std::string> code, std::string key) {
    key = ensure_key(std::move(key));
    const auto buyer_msisdn = normalize_msisdn(buyer, registry_.options().country_code).value_or(std::string(buyer));
    const auto fingerprint = fingerprint_of({"MERCHANT_PAYMENT", buyer_msisdn, seller_msisdn, std::to_string(amount),
                                             code ? code_digest_of(trim(*code)) : std::string("wallet")});
    if (const auto* prior = replayed(key, fingerprint)) return *prior;

    auto& txn = begin(TxnKind::MerchantPayment, buyer_msisdn, std::string(seller_msisdn), amount, key,
                      code ? FundingSource::Code : FundingSource::Wallet);
    AccessCode* funding = nullptr;
    fail_if_thrown(txn, [&] {
        const auto seller = normalize_msisdn(seller_msisdn, registry_.options().country_code);
        if (!seller) throw Error(ErrorCode::UnknownMsisdn);
        txn.recipient = registry_.require_active(*seller).msisdn;
        if (amount <= 0) throw Error(ErrorCode::AmountInvalid);
        txn.fee.amount_minor = options_.fees.fee(TxnKind::MerchantPayment, amount);
        const auto total = amount + txn.fee.amount_minor;
        if (code) {
            funding = &lookup_code(*code, buyer_msisdn);
            if (funding->remaining.amount_minor < total) throw Error(ErrorCode::AmountExceedsRemaining);
            txn.code_id = funding->code_id;
        } else {
            registry_.require_active(buyer_msisdn);
            if (ledger_.balance(AccountId::wallet(buyer_msisdn)).amount_minor < total) {
                throw Error(ErrorCode::NotSufficientFunds);
            }
        }
        if (txn.recipient == buyer_msisdn) throw Error(ErrorCode::ValidationFailed, "buyer and seller are the same");
    });
    advance(txn, TxnState::Validated);

    const auto total = amount + txn.fee.amount_minor;
    std::vector<LedgerPosting> postings;
    Meta meta;
    if (funding) {
        push_posting(postings, AccountId::suspense(), -total);
        meta = Meta{{"code_id", funding->code_id},
                    {"code_debit_minor", std::to_string(total)},
                    {"code_remaining_after", std::to_string(funding->remaining.amount_minor - total)}};
    } else {
        push_posting(postings, AccountId::wallet(txn.sender), -total);
    }
    push_posting(postings, AccountId::wallet(txn.recipient), amount);
    push_posting(postings, AccountId::fee_income(), txn.fee.amount_minor);
    try {
        post(txn, EntryType::MerchantPayment, std::move(postings), std::move(meta), fingerprint);
    } catch (const Error& e) {
        fail(txn, e);
    }
    notify(txn, {{txn.sender, "transaction successful. You paid " + format_money(txn.amount) + " to " +
                                  txn.recipient + ". Fee " + format_money(txn.fee) + ". Ref " + txn.txn_id},
                 {txn.recipient, "You have an incoming " + format_money(txn.amount) + " from " + txn.sender +
                                     " (payment verified). It has been saved into your eWallet account. Ref " +
                                     txn.txn_id}});
    return txn;
}

Money TransactionEngine::check_balance(std::string_view holder) const {
    const auto& s = registry_.require_active(holder);
    return ledger_.balance(AccountId::wallet(s.msisdn));
}

std::size_t TransactionEngine::expire_codes(Timestamp now) {
    std::size_t count = 0;
    for (auto& [_, code] : codes_) {
        if (code.live() && now > code.expires_at) {
            refund_code(code, CodeState::Expired, "expired");
            ++count;
        }
    }
    return count;
}

std::int64_t TransactionEngine::claim_parked(std::string_view msisdn) {
    std::int64_t total = 0;
    for (auto& [_, code] : codes_) {
        if (!code.live() || code.origin != CodeOrigin::ParkedTransfer || code.holder != msisdn) continue;
        if (clock_.now() > code.expires_at) {
            refund_code(code, CodeState::Expired, "expired");
            continue;
        }
        const auto amount = code.remaining.amount_minor;
        Meta meta{{"redemption", "claim"},
                  {"sender", code.holder},
                  {"amount_minor", std::to_string(amount)},
                  {"code_id", code.code_id},
                  {"code_debit_minor", std::to_string(amount)},
                  {"code_remaining_after", "0"}};
        auto entry = ledger_.append_entry(
            EntryType::Redemption, "CL-" + random_.hex(20),
            {posting(AccountId::suspense(), -amount), posting(AccountId::wallet(code.holder), amount)},
            std::move(meta), "claim:" + code.code_id);
        apply_code_meta(entry);
        total += amount;
        try {
            send(code.holder, format_money(amount, ledger_.currency()) + " from " + code.funder +
                                  " has been saved into your eWallet account.", entry.txn_id);
        } catch (const Error&) {
        }
    }
    return total;
}

namespace {

bool owned_by(const AccessCode& code, std::string_view msisdn) {
    if (code.origin == CodeOrigin::Withdrawal) return code.holder == msisdn;
    return code.funder == msisdn;
}

}  // namespace

std::int64_t TransactionEngine::cancel_owned_codes(std::string_view msisdn) {
    std::int64_t total = 0;
    for (auto& [_, code] : codes_) {
        if (code.live() && owned_by(code, msisdn)) {
            total += code.remaining.amount_minor;
            refund_code(code, CodeState::Cancelled, "cancelled");
        }
    }
    return total;
}

std::optional<Transaction> TransactionEngine::sweep_to_bank(std::string_view msisdn) {
    const auto& s = registry_.require_active(msisdn);
    const auto balance = ledger_.balance(AccountId::wallet(s.msisdn)).amount_minor;
    if (balance == 0) return std::nullopt;
    if (!s.bank_account) throw Error(ErrorCode::ResidualBalanceNoBank);
    const auto key = "sweep:" + s.msisdn + ":" + std::to_string(ledger_.last_seq());
    const auto fingerprint = fingerprint_of({"SWEEP", s.msisdn, std::to_string(balance)});
    auto& txn = begin(TxnKind::WalletToBank, s.msisdn, *s.bank_account, balance, key, FundingSource::Wallet);
    advance(txn, TxnState::Validated);
    std::optional<EftReceipt> credit;
    fail_if_thrown(txn, [&] { credit = bank_.eft(EftDirection::Credit, txn.recipient, balance, txn.txn_id); });
    try {
        post(txn, EntryType::WalletToBank,
             {posting(AccountId::wallet(s.msisdn), -balance), posting(mirror(txn.recipient), balance)},
             Meta{{"reason", "deregistration"}}, fingerprint);
    } catch (const Error& e) {
        compensate(*credit);
        fail(txn, e);
    }
    notify(txn, {{txn.sender, "transaction successful. Your remaining balance of " + format_money(txn.amount) +
                                  " was sent to bank account " + txn.recipient + ". Ref " + txn.txn_id}});
    return txn;
}

std::int64_t TransactionEngine::parked_total(std::string_view msisdn) const {
    std::int64_t total = 0;
    for (const auto& [_, code] : codes_) {
        if (code.live() && code.origin == CodeOrigin::ParkedTransfer && code.holder == msisdn &&
            clock_.now() <= code.expires_at) {
            total += code.remaining.amount_minor;
        }
    }
    return total;
}

std::int64_t TransactionEngine::live_code_total() const {
    std::int64_t total = 0;
    for (const auto& [_, code] : codes_) {
        if (code.live()) total += code.remaining.amount_minor;
    }
    return total;
}

std::int64_t TransactionEngine::owned_code_total(std::string_view msisdn) const {
    std::int64_t total = 0;
    for (const auto& [_, code] : codes_) {
        if (code.live() && owned_by(code, msisdn)) total += code.remaining.amount_minor;
    }
    return total;
}

std::int64_t TransactionEngine::codes_touching(std::string_view msisdn) const {
    std::int64_t total = 0;
    for (const auto& [_, code] : codes_) {
        if (code.live() && (code.holder == msisdn || code.funder == msisdn)) total += code.remaining.amount_minor;
    }
    return total;
}

const Transaction* TransactionEngine::find_transaction(std::string_view txn_id) const {
    auto it = txns_.find(txn_id);
    return it == txns_.end() ? nullptr : &it->second;
}

const AccessCode* TransactionEngine::find_code(std::string_view code_id) const {
    auto it = codes_.find(code_id);
    return it == codes_.end() ? nullptr : &it->second;
}

std::vector<AccessCode> TransactionEngine::codes() const {
    std::vector<AccessCode> out;
    for (const auto& [_, c] : codes_) out.push_back(c);
    return out;
}

std::vector<Transaction> TransactionEngine::transactions() const {
    std::vector<Transaction> out;
    for (const auto& [_, t] : txns_) out.push_back(t);
    return out;
}

const std::optional<RedemptionReceipt> TransactionEngine::find_receipt(std::string_view idempotency_key) const {
    auto it = receipts_.find(std::string(idempotency_key));
    if (it == receipts_.end()) return std::nullopt;
    return it->second;
}

void TransactionEngine::restore(const JournalEntry& entry) {
    apply_code_meta(entry);
    const auto& meta = entry.meta;
    const auto key_it = meta.find(std::string(kIdempotencyMetaKey));
    if (auto kind_it = meta.find("txn_kind"); kind_it != meta.end()) {
        const auto kind = parse_txn_kind(kind_it->second);
        if (!kind) throw Error(ErrorCode::CorruptJournal, "unknown txn_kind " + kind_it->second);
        Transaction txn;
        txn.txn_id = entry.txn_id;
        txn.kind = *kind;
        txn.sender = meta_str(meta, "sender");
        txn.recipient = meta_str(meta, "recipient");
        txn.amount = Money{meta_int(meta, "amount_minor"), ledger_.currency()};
        txn.fee = Money{meta_int(meta, "fee_minor"), ledger_.currency()};
        txn.source = parse_funding_source(meta_str(meta, "source")).value_or(FundingSource::Wallet);
        txn.state = TxnState::Notified;
        txn.seq = entry.seq;
        txn.posted_at = entry.ts;
        if (key_it != meta.end()) txn.idempotency_key = key_it->second;
        if (auto it = meta.find("issued_code_id"); it != meta.end()) {
            txn.code_id = it->second;
            txn.code_expires_at = meta_time(meta, "code_expires_at");
            txn.parked = meta.count("parked_for") != 0;
        } else if (auto c = meta.find("code_id"); c != meta.end()) {
            txn.code_id = c->second;
        }
        if (!txn.idempotency_key.empty()) {
            idempotency_[txn.idempotency_key] = {meta_str(meta, "request"), txn.txn_id};
        }
        txns_[txn.txn_id] = std::move(txn);
    }
    if (entry.type == EntryType::Redemption && key_it != meta.end()) {
        if (auto r = meta.find("redemption"); r != meta.end() && r->second == "atm") {
            RedemptionReceipt receipt;
            receipt.txn_id = entry.txn_id;
            receipt.code_id = meta_str(meta, "code_id");
            receipt.msisdn = meta_str(meta, "sender");
            receipt.amount = Money{meta_int(meta, "amount_minor"), ledger_.currency()};
            receipt.remaining = Money{meta_int(meta, "code_remaining_after"), ledger_.currency()};
            receipt.code_state =
                parse_code_state(meta_str(meta, "code_state_after")).value_or(CodeState::PartiallyRedeemed);
            receipt.seq = entry.seq;
            receipt.ts = entry.ts;
            receipts_[key_it->second] = receipt;
            receipt_fingerprints_[key_it->second] = meta_str(meta, "request");
        }
    }
}

}  // namespace ewallet
