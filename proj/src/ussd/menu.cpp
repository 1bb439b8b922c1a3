#include "ewallet/ussd/menu.hpp"

#include <algorithm>

#include "ewallet/text.hpp"

namespace ewallet {

std::string_view to_string(MenuNode node) {
    switch (node) {
        case MenuNode::IncomingFunds: return "INCOMING_FUNDS";
        case MenuNode::PinPrompt: return "PIN_PROMPT";
        case MenuNode::Root: return "ROOT";
        case MenuNode::TransferTarget: return "TRANSFER_TARGET";
        case MenuNode::RecipientPrompt: return "RECIPIENT_PROMPT";
        case MenuNode::AmountPrompt: return "AMOUNT_PROMPT";
        case MenuNode::SourceSelect: return "SOURCE_SELECT";
        case MenuNode::Confirm: return "CONFIRM";
        case MenuNode::WithdrawAmount: return "WITHDRAW_AMOUNT";
        case MenuNode::ChangePinOld: return "CHANGE_PIN_OLD";
        case MenuNode::ChangePinNew: return "CHANGE_PIN_NEW";
        case MenuNode::Ended: return "ENDED";
    }
    return "ENDED";
}

UssdMenu::UssdMenu(Platform& platform, UssdOptions options) : platform_(platform), options_(std::move(options)) {}

UssdReply UssdMenu::handle(std::string_view session_id, std::string_view raw_msisdn, std::string_view raw_input) {
    std::lock_guard lock(mu_);
    auto guard = platform_.lock();
    const auto input = trim(raw_input);
    const auto msisdn = normalize_msisdn(raw_msisdn, platform_.options().registry.country_code);
    if (session_id.empty()) throw Error(ErrorCode::BadRequest, "session_id is required");
    if (!msisdn) throw Error(ErrorCode::UnknownMsisdn);
    const auto now = platform_.clock().now();

    auto it = sessions_.find(session_id);
    const bool dialled = input == options_.service_code || input == options_.service_code + "#";
    if (it != sessions_.end() && it->second.node != MenuNode::Ended && now - it->second.last_seen > options_.session_ttl) {
        it->second.node = MenuNode::Ended;
    }
    // An expired session answers SESSION_EXPIRED until it is dialled afresh.
    if (it != sessions_.end() && it->second.node == MenuNode::Ended && dialled) {
        sessions_.erase(it);
        it = sessions_.end();
    }
    if (it == sessions_.end()) {
        if (!dialled) throw Error(ErrorCode::WrongServiceCode, "Dial " + options_.service_code + " to use eWallet");
        Session s;
        s.id = std::string(session_id);
        s.msisdn = *msisdn;
        s.last_seen = now;
        s.started = now;
        auto reply = start(s);
        if (!reply.end_session) sessions_.emplace(std::string(session_id), std::move(s));
        return reply;
    }
    auto& s = it->second;
    if (s.msisdn != *msisdn) throw Error(ErrorCode::BadRequest, "session belongs to another number");
    if (s.node == MenuNode::Ended) {
        throw Error(ErrorCode::SessionExpired, "Session expired. Dial " + options_.service_code + " to start again");
    }
    s.last_seen = now;
    ++s.step;
    auto reply = dispatch(s, input);
    if (reply.end_session) sessions_.erase(std::string(session_id));
    return reply;
}

std::size_t UssdMenu::expire_sessions() {
    std::lock_guard lock(mu_);
    const auto now = platform_.clock().now();
    std::size_t expired = 0;
    for (auto it = sessions_.begin(); it != sessions_.end();) {
        const auto idle = now - it->second.last_seen;
        if (it->second.node == MenuNode::Ended) {
            it = idle > 2 * options_.session_ttl ? sessions_.erase(it) : std::next(it);
            continue;
        }
        if (idle > options_.session_ttl) {
            it->second.node = MenuNode::Ended;
            ++expired;
        }
        ++it;
    }
    return expired;
}

std::size_t UssdMenu::active_sessions() const {
    std::lock_guard lock(mu_);
    return std::count_if(sessions_.begin(), sessions_.end(),
                         [](const auto& kv) { return kv.second.node != MenuNode::Ended; });
}

UssdReply UssdMenu::end(Session& s, std::string text) {
    s.node = MenuNode::Ended;
    return {std::move(text), true};
}

UssdReply UssdMenu::screen(Session& s, MenuNode node) {
    s.node = node;
    auto& engine = platform_.engine();
    switch (node) {
        case MenuNode::IncomingFunds: {
            const auto parked = format_money(engine.parked_total(s.msisdn), platform_.ledger().currency());
            const bool registered = platform_.registry().find(s.msisdn) != nullptr;
            return {"You have an incoming " + parked + "\n1. Withdraw the money\n2. " +
                        (registered ? "Save it into your account" : "Create an account to save your money"),
                    false};
        }
        case MenuNode::PinPrompt: return {std::string(screens::kPinPrompt), false};
        case MenuNode::Root: return {std::string(screens::kRoot), false};
        case MenuNode::TransferTarget: return {std::string(screens::kTransferTarget), false};
        case MenuNode::RecipientPrompt: return {"Enter the recipient's cellphone number", false};
        case MenuNode::AmountPrompt: return {"Enter the amount", false};
        case MenuNode::SourceSelect: return {std::string(screens::kSourceSelect), false};
        case MenuNode::Confirm: return {confirm_text(s) + "\n1. Confirm\n2. Cancel", false};
        case MenuNode::WithdrawAmount: return {"Enter the amount to withdraw", false};
        case MenuNode::ChangePinOld: return {"Enter your current PIN", false};
        case MenuNode::ChangePinNew: return {"Enter your new PIN (4 to 6 digits)", false};
        case MenuNode::Ended: break;
    }
    return end(s, "Goodbye");
}

UssdReply UssdMenu::invalid(Session& s, std::string_view error) {
    if (++s.invalid >= options_.max_invalid_inputs) return end(s, "Too many invalid entries. Session ended.");
    auto again = screen(s, s.node);
    again.text = std::string(error) + "\n" + again.text;
    return again;
}

UssdReply UssdMenu::start(Session& s) {
    if (!platform_.telco().validate_msisdn(s.msisdn).valid) {
        return end(s, "Your cellphone number could not be verified by your network.");
    }
    const auto* sub = platform_.registry().find(s.msisdn);
    if (!sub) {
        if (platform_.engine().parked_total(s.msisdn) > 0) return screen(s, MenuNode::IncomingFunds);
        return end(s, "You are not registered for eWallet. Register on the eWallet website or at your bank.");
    }
    if (sub->status == SubscriberStatus::Locked) {
        return end(s, "Your account is locked. Contact eWallet support to unlock it.");
    }
    return screen(s, MenuNode::PinPrompt);
}

UssdReply UssdMenu::dispatch(Session& s, const std::string& input) {
    auto& registry = platform_.registry();
    auto& engine = platform_.engine();
    const auto& currency = platform_.ledger().currency();

    switch (s.node) {
        case MenuNode::IncomingFunds: {
            if (input == "1") {
                return end(s, "Use the temporary PIN from your SMS together with your cellphone number at any ATM.");
            }
            if (input != "2") return invalid(s, "Invalid selection");
            if (!registry.find(s.msisdn)) {
                return end(s, "Register on the eWallet website or at your bank. The money is kept for you until "
                              "your temporary PIN expires.");
            }
            try {
                const auto claimed = engine.claim_parked(s.msisdn);
                return end(s, std::string(screens::kSuccess) + "\n" + format_money(claimed, currency) +
                                  " has been saved into your eWallet account");
            } catch (const Error& e) {
                return end(s, e.what());
            }
        }
        case MenuNode::PinPrompt: {
            try {
                registry.verify_pin(s.msisdn, input);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::InvalidLogin) {
                    return {std::string(screens::kInvalidLogin) + "\nEnter your PIN", false};
                }
                return end(s, e.code() == ErrorCode::AccountLocked
                                  ? "Your account has been locked. Contact eWallet support to unlock it."
                                  : std::string(e.what()));
            }
            s.invalid = 0;
            if (engine.parked_total(s.msisdn) > 0) return screen(s, MenuNode::IncomingFunds);
            return screen(s, MenuNode::Root);
        }
        case MenuNode::Root: {
            if (input == "1") return screen(s, MenuNode::TransferTarget);
            if (input == "2") {
                s.draft = Draft{};
                s.draft.withdrawal = true;
                return screen(s, MenuNode::WithdrawAmount);
            }
            if (input == "3") return screen(s, MenuNode::ChangePinOld);
            if (input == "4") {
                try {
                    return end(s, "Your eWallet balance is " + format_money(engine.check_balance(s.msisdn)));
                } catch (const Error& e) {
                    return end(s, e.what());
                }
            }
            return invalid(s, "Invalid selection");
        }
        case MenuNode::TransferTarget: {
            s.draft = Draft{};
            if (input == "1") {
                s.draft.to_self = true;
                return screen(s, MenuNode::AmountPrompt);
            }
            if (input == "2") return screen(s, MenuNode::RecipientPrompt);
            return invalid(s, "Invalid selection");
        }
        case MenuNode::RecipientPrompt: {
            const auto recipient = normalize_msisdn(input, platform_.options().registry.country_code);
            if (!recipient || !platform_.telco().validate_msisdn(*recipient).valid) {
                return invalid(s, "Unknown cellphone number");
            }
            if (*recipient == s.msisdn) return invalid(s, "You cannot send money to yourself");
            s.draft.recipient = *recipient;
            return screen(s, MenuNode::AmountPrompt);
        }
        case MenuNode::AmountPrompt:
        case MenuNode::WithdrawAmount: {
            const auto amount = parse_major_amount(input);
            if (amount <= 0) return invalid(s, "Invalid amount");
            s.draft.amount = amount;
            return after_amount(s);
        }
        case MenuNode::SourceSelect: {
            if (input == "1") {
                s.draft.source = FundingSource::Bank;
            } else if (input == "2") {
                s.draft.source = FundingSource::Wallet;
            } else {
                return invalid(s, "Invalid selection");
            }
            return confirm_or_execute(s);
        }
        case MenuNode::Confirm: {
            if (input == "1") return execute(s);
            if (input == "2") return end(s, "Transaction cancelled");
            return invalid(s, "Invalid selection");
        }
        case MenuNode::ChangePinOld: {
            try {
                registry.verify_pin(s.msisdn, input);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::InvalidLogin) {
                    return {std::string(screens::kInvalidLogin) + "\nEnter your current PIN", false};
                }
                return end(s, e.what());
            }
            return screen(s, MenuNode::ChangePinNew);
        }
        case MenuNode::ChangePinNew: {
            if (!is_valid_pin(input)) return invalid(s, "PIN must be 4 to 6 digits");
            try {
                DetailChanges changes;
                changes.pin = input;
                platform_.update_details(Channel::Ussd, s.msisdn, changes);
            } catch (const Error& e) {
                return end(s, e.what());
            }
            return end(s, "Your PIN has been changed");
        }
        case MenuNode::Ended: break;
    }
    return end(s, "Goodbye");
}

UssdReply UssdMenu::after_amount(Session& s) {
    auto& engine = platform_.engine();
    auto& bank = platform_.bank();
    const auto& sub = platform_.registry().require_active(s.msisdn);
    const auto wallet = platform_.ledger().balance(AccountId::wallet(s.msisdn)).amount_minor;
    const auto& d = s.draft;
    try {
        if (d.withdrawal) {
            if (wallet < d.amount + engine.fees().fee(TxnKind::Withdrawal, d.amount)) {
                return end(s, std::string(screens::kNotSufficientFunds));
            }
            return confirm_or_execute(s);
        }
        if (d.to_self) {
            if (!sub.bank_account) return end(s, "No bank account is linked to your eWallet");
            if (bank.available_balance(*sub.bank_account) < d.amount) {
                return end(s, std::string(screens::kNotSufficientFunds));
            }
            return confirm_or_execute(s);
        }
        const auto total = d.amount + engine.fees().fee(TxnKind::P2P, d.amount);
        const bool wallet_covers = wallet >= total;
        if (wallet_covers && sub.bank_account) return screen(s, MenuNode::SourceSelect);
        if (wallet_covers) {
            s.draft.source = FundingSource::Wallet;
        } else if (sub.bank_account && bank.available_balance(*sub.bank_account) >= total) {
            s.draft.source = FundingSource::Bank;
        } else {
            return end(s, std::string(screens::kNotSufficientFunds));
        }
    } catch (const Error& e) {
        return end(s, e.what());
    }
    return confirm_or_execute(s);
}

UssdReply UssdMenu::confirm_or_execute(Session& s) {
    if (s.draft.amount >= options_.confirm_threshold_minor) return screen(s, MenuNode::Confirm);
    s.node = MenuNode::Confirm;
    return execute(s);
}

std::string UssdMenu::confirm_text(const Session& s) const {
    auto& engine = platform_.engine();
    const auto& d = s.draft;
    const auto& currency = platform_.ledger().currency();
    if (d.withdrawal) {
        return "Withdraw " + format_money(d.amount, currency) + "\nFee: " +
               format_money(engine.fees().fee(TxnKind::Withdrawal, d.amount), currency);
    }
    if (d.to_self) {
        return "Move " + format_money(d.amount, currency) + " from your bank account to your eWallet\nFee: " +
               format_money(engine.fees().fee(TxnKind::Recharge, d.amount), currency);
    }
    return "Send " + format_money(d.amount, currency) + " to " + d.recipient + " from your " +
           (d.source == FundingSource::Bank ? "bank account" : "eWallet account") + "\nFee: " +
           format_money(engine.fees().fee(TxnKind::P2P, d.amount), currency);
}

UssdReply UssdMenu::execute(Session& s) {
    auto& engine = platform_.engine();
    const auto& d = s.draft;
    const auto key = "ussd:" + s.id + ":" + std::to_string(s.started.time_since_epoch().count()) + ":" +
                     std::to_string(s.step);
    const auto ok = std::string(screens::kSuccess) + "\n";
    try {
        if (d.withdrawal) {
            const auto code = engine.request_withdrawal(s.msisdn, d.amount, key);
            return end(s, ok + "Your temporary PIN for " + format_money(code.issued_amount) +
                              " has been sent by SMS. Use it before " + format_timestamp(code.expires_at));
        }
        if (d.to_self) {
            const auto txn = engine.recharge(s.msisdn, d.amount, key);
            return end(s, ok + format_money(txn.amount.amount_minor - txn.fee.amount_minor, txn.amount.currency) +
                              " moved from your bank account to your eWallet");
        }
        const auto txn = engine.transfer_wallet_to_wallet(s.msisdn, d.recipient, d.amount, key,
                                                          d.source.value_or(FundingSource::Auto));
        auto text = ok + "You sent " + format_money(txn.amount) + " to " + txn.recipient;
        if (txn.parked) text += "\nThe recipient will get a temporary PIN by SMS";
        return end(s, text);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::NotSufficientFunds) return end(s, std::string(screens::kNotSufficientFunds));
        return end(s, e.what());
    }
}

}  // namespace ewallet
