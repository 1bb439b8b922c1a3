// One test per business process. Ledger effects are checked against the
// oracle fold, notifications against the SMS outbox.

#include <gtest/gtest.h>

#include "world.hpp"

using namespace testing_support;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::Internal;
}

std::int64_t bank_balance(World& w, const std::string& number) { return w.platform.bank().balance(number); }

}  // namespace

TEST(Process, Login) {
    World w;
    w.enroll(kKayembe, "4821");
    const auto temp = w.sms_capture(kKayembe, "temporary password is ([A-Za-z0-9]+)");
    const auto first = w.registry().login(Channel::Web, kKayembe, temp);
    EXPECT_TRUE(first.must_change_password);
    EXPECT_EQ(code_of([&] { w.registry().authenticate(first.token); }), ErrorCode::PasswordChangeRequired);
    w.registry().change_password(first.token, temp, "river-stone");
    const auto web = w.registry().login(Channel::Web, kKayembe, "river-stone");
    EXPECT_FALSE(web.must_change_password);
    EXPECT_EQ(w.registry().authenticate(web.token).msisdn, kKayembe);

    const auto ussd = w.registry().login(Channel::Ussd, "0820000001", "4821");
    EXPECT_EQ(ussd.msisdn, kKayembe);

    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Web, kKayembe, "wrong"); }), ErrorCode::InvalidLogin);
    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Web, kKayembe, "wrong"); }), ErrorCode::InvalidLogin);
    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Web, kKayembe, "wrong"); }), ErrorCode::AccountLocked);
    EXPECT_EQ(w.registry().find(kKayembe)->status, SubscriberStatus::Locked);
    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Web, kKayembe, "river-stone"); }), ErrorCode::AccountLocked);

    // Session tokens lapse on the clock.
    w.registry().unlock(kKayembe);
    const auto again = w.registry().login(Channel::Web, kKayembe, "river-stone");
    w.clock.advance(std::chrono::minutes(16));
    EXPECT_EQ(code_of([&] { w.registry().authenticate(again.token); }), ErrorCode::Unauthorized);
    w.expect_consistent();
}

TEST(Process, Registration) {
    World w;
    const auto before = w.ledger().last_seq();
    const auto r = w.enroll(kKayembe, "4821", kKayembeBank);
    EXPECT_EQ(r.login_id, kKayembe);
    EXPECT_EQ(r.temporary_password.size(), 10u);

    ASSERT_EQ(w.ledger().last_seq(), before + 1);
    const auto& marker = w.ledger().entries().back();
    EXPECT_EQ(marker.type, EntryType::RegistrationMarker);
    EXPECT_TRUE(marker.postings.empty());
    EXPECT_EQ(marker.txn_id.rfind("ID-", 0), 0u);
    for (const auto& [k, v] : marker.meta) {
        EXPECT_EQ(v.find("4821"), std::string::npos) << k;
        EXPECT_EQ(v.find(r.temporary_password), std::string::npos) << k;
        EXPECT_EQ(v.find("Lubumbashi"), std::string::npos) << k;
    }

    EXPECT_TRUE(w.ledger().is_open(AccountId::wallet(kKayembe)));
    EXPECT_EQ(w.wallet(kKayembe), 0);
    EXPECT_EQ(w.last_sms(kKayembe), "Welcome to eWallet. Your Login ID is 27820000001 and your temporary password is " +
                                        r.temporary_password + ". Dial #555* to use your wallet.");
    EXPECT_EQ(code_of([&] { w.enroll("0820000001"); }), ErrorCode::DuplicateRegistration);
    w.expect_consistent();
}

TEST(Process, PinRetrieval) {
    World w;
    w.enroll(kKayembe, "4821");
    EXPECT_EQ(w.registry().secret_question(kKayembe), "Name of your first school?");
    const auto seq = w.ledger().last_seq();
    EXPECT_EQ(code_of([&] { w.registry().retrieve_pin(kKayembe, "Kolwezi"); }), ErrorCode::InvalidAnswer);
    w.registry().retrieve_pin(kKayembe, "  LUBUMBASHI primary ");
    EXPECT_GT(w.ledger().last_seq(), seq);
    const auto pin = w.sms_capture(kKayembe, "Your new eWallet PIN is ([0-9]+)\\. Keep it secret\\.");
    ASSERT_EQ(pin.size(), 4u);
    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Ussd, kKayembe, "4821"); }), ErrorCode::InvalidLogin);
    EXPECT_EQ(w.registry().login(Channel::Ussd, kKayembe, pin).msisdn, kKayembe);
    EXPECT_EQ(code_of([&] { w.registry().retrieve_pin(kWife, "x"); }), ErrorCode::UnknownMsisdn);
}

TEST(Process, UserDataValidation) {
    World w;
    const auto seq = w.ledger().last_seq();
    Application app{kWife, "Wife", "12", "q", "a", std::nullopt};
    try {
        w.platform.register_subscriber(app);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
        EXPECT_NE(std::string(e.what()).find("pin"), std::string::npos);
    }
    app.pin = "1357";
    app.full_name = "  ";
    app.secret_answer = "";
    try {
        w.platform.register_subscriber(app);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("full_name"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("secret_answer"), std::string::npos);
    }
    app.full_name = "Wife";
    app.secret_answer = "a";
    app.bank_account = "9999999";
    EXPECT_EQ(code_of([&] { w.platform.register_subscriber(app); }), ErrorCode::UnknownBankAccount);
    app.msisdn = "27829999999";
    EXPECT_EQ(code_of([&] { w.platform.register_subscriber(app); }), ErrorCode::UnknownMsisdn);
    EXPECT_EQ(w.ledger().last_seq(), seq);
    EXPECT_FALSE(w.registry().is_registered(kWife));
    EXPECT_TRUE(w.outbox(kWife).empty());
}

TEST(Process, Withdrawal) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.engine().recharge(kKayembe, 50000, "fund");
    const auto code = w.engine().request_withdrawal(kKayembe, 20000, "wd");
    EXPECT_EQ(w.wallet(kKayembe), 30000);
    EXPECT_EQ(w.suspense(), 20000);
    EXPECT_EQ(code.state, CodeState::Issued);
    const auto pin = w.code_from_sms(kKayembe);
    ASSERT_EQ(pin.size(), 8u);
    EXPECT_NE(w.last_sms(kKayembe).find("for R200"), std::string::npos);

    const auto pool = std::string(SimulatedBank::kAtmCashPool);
    const auto cash_before = bank_balance(w, pool);
    const auto receipt = w.engine().redeem_at_atm(pin, kKayembe, 20000, "atm");
    EXPECT_EQ(receipt.code_state, CodeState::Redeemed);
    EXPECT_EQ(w.suspense(), 0);
    EXPECT_EQ(bank_balance(w, pool), cash_before + 20000);
    EXPECT_TRUE(w.platform.reconcile().empty());
    EXPECT_EQ(code_of([&] { w.engine().redeem_at_atm(pin, kKayembe, 1, "atm2"); }), ErrorCode::CodeAlreadyRedeemed);
    EXPECT_EQ(code_of([&] { w.engine().request_withdrawal(kKayembe, 30001, "wd2"); }),
              ErrorCode::NotSufficientFunds);
    w.expect_consistent();
}

TEST(Process, BalanceCheck) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.enroll(kWife, "1357");
    w.engine().recharge(kKayembe, 75000, "r");
    w.engine().transfer_wallet_to_wallet(kKayembe, kWife, 12500, "t");
    w.engine().request_withdrawal(kWife, 2500, "w");
    const auto f = w.fold();
    EXPECT_EQ(w.engine().check_balance(kKayembe).amount_minor, f.at(AccountId::wallet(kKayembe).str()));
    EXPECT_EQ(w.engine().check_balance(kWife).amount_minor, f.at(AccountId::wallet(kWife).str()));
    EXPECT_EQ(w.engine().check_balance(kWife).amount_minor, 10000);
    const auto seq = w.ledger().last_seq();
    w.engine().check_balance(kKayembe);
    EXPECT_EQ(w.ledger().last_seq(), seq);
    EXPECT_EQ(code_of([&] { w.engine().check_balance(kParent); }), ErrorCode::UnknownMsisdn);
}

TEST(Process, WalletToWallet) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.enroll(kWife, "1357");
    w.engine().recharge(kKayembe, 100000, "r");
    const auto seq = w.ledger().last_seq();
    const auto t = w.engine().transfer_wallet_to_wallet(kKayembe, "0830000002", 55000, "t");
    EXPECT_EQ(w.ledger().last_seq(), seq + 1);
    EXPECT_FALSE(t.parked);
    EXPECT_EQ(t.state, TxnState::Notified);
    EXPECT_EQ(w.wallet(kKayembe), 45000);
    EXPECT_EQ(w.wallet(kWife), 55000);
    EXPECT_NE(w.last_sms(kWife).find("R550"), std::string::npos);
    EXPECT_NE(w.last_sms(kKayembe).find("R550"), std::string::npos);

    // An unregistered recipient gets a temporary PIN and the money waits in suspense.
    const auto parked = w.engine().transfer_wallet_to_wallet(kKayembe, kParent, 10000, "p");
    EXPECT_TRUE(parked.parked);
    EXPECT_EQ(w.suspense(), 10000);
    EXPECT_EQ(w.code_from_sms(kParent).size(), 8u);
    w.enroll(kParent, "2580");
    EXPECT_EQ(w.wallet(kParent), 10000);
    EXPECT_EQ(w.suspense(), 0);
    w.expect_consistent();
}

TEST(Process, WalletToBank) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.engine().recharge(kKayembe, 100000, "r");
    const auto family = bank_balance(w, kFamilyBank);
    const auto t = w.engine().transfer_wallet_to_bank(kKayembe, kFamilyBank, 40000, "wb");
    EXPECT_EQ(t.kind, TxnKind::WalletToBank);
    EXPECT_EQ(w.wallet(kKayembe), 60000);
    EXPECT_EQ(bank_balance(w, kFamilyBank), family + 40000);
    EXPECT_TRUE(w.platform.reconcile().empty());
    EXPECT_EQ(code_of([&] { w.engine().transfer_wallet_to_bank(kKayembe, "9999999", 1, "bad"); }),
              ErrorCode::UnknownBankAccount);
    EXPECT_EQ(w.wallet(kKayembe), 60000);
    w.expect_consistent();
}

TEST(Process, BankToBank) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    const auto own = bank_balance(w, kKayembeBank);
    const auto family = bank_balance(w, kFamilyBank);
    const auto t = w.engine().transfer_bank_to_bank(kKayembe, kFamilyBank, 25000, "bb");
    EXPECT_EQ(t.kind, TxnKind::BankToBank);
    EXPECT_EQ(bank_balance(w, kKayembeBank), own - 25000);
    EXPECT_EQ(bank_balance(w, kFamilyBank), family + 25000);
    EXPECT_EQ(w.wallet(kKayembe), 0);
    EXPECT_TRUE(w.platform.reconcile().empty());

    w.enroll(kWife, "1357");
    EXPECT_EQ(code_of([&] { w.engine().transfer_bank_to_bank(kWife, kFamilyBank, 100, "nb"); }),
              ErrorCode::NoLinkedBankAccount);
    EXPECT_EQ(code_of([&] { w.engine().transfer_bank_to_bank(kKayembe, kFamilyBank, own, "big"); }),
              ErrorCode::NotSufficientFunds);
    w.expect_consistent();
}

TEST(Process, Recharge) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    const auto own = bank_balance(w, kKayembeBank);
    w.engine().recharge(kKayembe, 80000, "r");
    EXPECT_EQ(w.wallet(kKayembe), 80000);
    EXPECT_EQ(bank_balance(w, kKayembeBank), own - 80000);
    EXPECT_TRUE(w.platform.reconcile().empty());
    EXPECT_EQ(code_of([&] { w.engine().recharge(kKayembe, 0, "zero"); }), ErrorCode::AmountInvalid);
    EXPECT_EQ(code_of([&] { w.engine().recharge(kKayembe, own, "big"); }), ErrorCode::NotSufficientFunds);
    EXPECT_EQ(w.wallet(kKayembe), 80000);
    w.expect_consistent();
}

TEST(Process, UpdateDetails) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    DetailChanges web;
    web.full_name = "Kayembe Mutombo";
    web.bank_account = kFamilyBank;
    w.platform.update_details(Channel::Web, kKayembe, web);
    EXPECT_EQ(w.registry().find(kKayembe)->full_name, "Kayembe Mutombo");
    EXPECT_EQ(w.registry().find(kKayembe)->bank_account, std::string(kFamilyBank));

    DetailChanges phone;
    phone.full_name = "K";
    EXPECT_EQ(code_of([&] { w.platform.update_details(Channel::Ussd, kKayembe, phone); }),
              ErrorCode::ForbiddenFieldForChannel);

    DetailChanges pin;
    pin.pin = "9753";
    w.platform.update_details(Channel::Ussd, kKayembe, pin);
    EXPECT_EQ(w.registry().login(Channel::Ussd, kKayembe, "9753").msisdn, kKayembe);

    // Moving a number with money in the wallet is refused.
    w.enroll(kWife, "1357");
    w.engine().recharge(kKayembe, 1000, "r");
    w.engine().transfer_wallet_to_wallet(kKayembe, kWife, 1000, "t");
    DetailChanges move;
    move.msisdn = kAirtel;
    EXPECT_EQ(code_of([&] { w.platform.update_details(Channel::Web, kWife, move); }), ErrorCode::ValidationFailed);
    EXPECT_EQ(w.platform.update_details(Channel::Web, kKayembe, move), kAirtel);
    EXPECT_FALSE(w.registry().is_registered(kKayembe));
    EXPECT_TRUE(w.registry().is_registered(kAirtel));
    w.expect_consistent();
}

TEST(Process, Deregistration) {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.enroll(kWife, "1357");
    w.engine().recharge(kKayembe, 60000, "r");
    w.engine().transfer_wallet_to_wallet(kKayembe, kWife, 1000, "t");

    // No linked bank account and money in the wallet: nothing changes.
    const auto seq = w.ledger().last_seq();
    EXPECT_EQ(code_of([&] { w.platform.deregister(kWife, true); }), ErrorCode::ResidualBalanceNoBank);
    EXPECT_EQ(w.wallet(kWife), 1000);
    EXPECT_EQ(w.registry().find(kWife)->status, SubscriberStatus::Active);
    EXPECT_EQ(w.ledger().last_seq(), seq);

    // Without confirmation only the prompt goes out.
    const auto prompt = w.platform.deregister(kKayembe, false);
    EXPECT_FALSE(prompt.closed);
    EXPECT_EQ(w.ledger().last_seq(), seq);

    w.engine().request_withdrawal(kKayembe, 9000, "wd");
    const auto bank = bank_balance(w, kKayembeBank);
    const auto done = w.platform.deregister(kKayembe, true);
    EXPECT_TRUE(done.closed);
    EXPECT_EQ(done.cancelled_codes_minor, 9000);
    ASSERT_TRUE(done.sweep);
    EXPECT_EQ(done.sweep->amount.amount_minor, 59000);
    EXPECT_EQ(done.sweep->fee.amount_minor, 0);
    EXPECT_EQ(bank_balance(w, kKayembeBank), bank + 59000);
    EXPECT_EQ(w.wallet(kKayembe), 0);
    EXPECT_EQ(w.suspense(), 0);
    EXPECT_FALSE(w.registry().is_registered(kKayembe));
    EXPECT_EQ(code_of([&] { w.registry().login(Channel::Ussd, kKayembe, "4821"); }), ErrorCode::AccountClosed);
    EXPECT_TRUE(w.platform.reconcile().empty());
    w.expect_consistent();
}
