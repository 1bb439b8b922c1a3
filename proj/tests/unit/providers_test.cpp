#include <gtest/gtest.h>

#include "ewallet/engine/fees.hpp"
#include "ewallet/error.hpp"
#include "ewallet/providers/providers.hpp"
#include "world.hpp"

using namespace ewallet;

namespace {

struct Providers : ::testing::Test {
    ManualClock clock;
    SimulatedTelco telco;
    SimulatedBank bank;
    SimulatedSmsGateway sms{telco, clock};

    void SetUp() override { apply_seed(testing_support::kayembe_fixture(), telco, bank); }
};

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return ErrorCode::Internal;
}

}  // namespace

TEST_F(Providers, TelcoLookup) {
    const auto ok = telco.validate_msisdn("27820000001");
    EXPECT_TRUE(ok.valid);
    EXPECT_EQ(ok.carrier, "Vodacom");
    EXPECT_EQ(telco.validate_msisdn("27840000005").carrier, "Cell C");
    EXPECT_FALSE(telco.validate_msisdn("27829999999").valid);
    EXPECT_FALSE(telco.validate_msisdn("abc").valid);
    EXPECT_FALSE(telco.add_msisdn("abc", "MTN"));
}

TEST_F(Providers, BankAccountsFromFixture) {
    const auto ok = bank.validate_bank_account("1001001");
    EXPECT_TRUE(ok.valid);
    EXPECT_EQ(ok.holder, "Kayembe Mutombo");
    EXPECT_EQ(bank.balance("1001001"), 2000000);
    EXPECT_EQ(bank.contact_msisdn("1001001"), "27820000001");
    EXPECT_FALSE(bank.contact_msisdn("3003003"));
    EXPECT_FALSE(bank.validate_bank_account("9999999").valid);
}

TEST_F(Providers, EftMovesBankBalances) {
    const auto r = bank.eft(EftDirection::Credit, "2002002", 55000, "TX-1");
    EXPECT_EQ(bank.balance("2002002"), 55000);
    EXPECT_EQ(r.balance_after, 55000);
    EXPECT_EQ(r.ref, "TX-1");
    EXPECT_EQ(code_of([&] { bank.eft(EftDirection::Debit, "2002002", 55001, "TX-2"); }),
              ErrorCode::NotSufficientFunds);
    EXPECT_EQ(code_of([&] { bank.eft(EftDirection::Debit, "404", 1, "TX-3"); }), ErrorCode::UnknownBankAccount);
    bank.eft(EftDirection::Debit, "1001001", 1234, "TX-4");
    bank.eft(EftDirection::Credit, "1001001", 1234, "TX-4:reversal");
    EXPECT_EQ(bank.balance("1001001"), 2000000);
    EXPECT_EQ(bank.eft_log().size(), 3u);
    EXPECT_EQ(bank.opening_balance("2002002"), 0);
}

TEST_F(Providers, FaultInjection) {
    bank.faults.fail_next(1);
    EXPECT_FALSE(bank.healthy());
    EXPECT_EQ(code_of([&] { bank.validate_bank_account("1001001"); }), ErrorCode::ProviderUnavailable);
    EXPECT_TRUE(bank.validate_bank_account("1001001").valid);
    bank.faults.fail_next(1);
    EXPECT_EQ(code_of([&] { bank.eft(EftDirection::Credit, "1001001", 5, "TX"); }), ErrorCode::ProviderUnavailable);
    EXPECT_EQ(bank.balance("1001001"), 2000000);
    EXPECT_TRUE(bank.eft_log().empty());
    sms.faults.fail_next(1);
    EXPECT_EQ(code_of([&] { sms.send_sms("27820000001", "hi"); }), ErrorCode::ProviderUnavailable);
}

TEST_F(Providers, SmsOutboxIsFifoAndAckOnly) {
    sms.send_sms("27820000001", "first");
    clock.advance(std::chrono::seconds{1});
    sms.send_sms("27820000001", "second");
    auto box = sms.outbox("27820000001");
    ASSERT_EQ(box.size(), 2u);
    EXPECT_EQ(box[0].body, "first");
    EXPECT_EQ(box[1].body, "second");
    EXPECT_LE(box[0].queued_at, box[1].queued_at);
    EXPECT_EQ(sms.outbox("27820000001").size(), 2u);  // polling does not consume
    EXPECT_EQ(sms.ack("27820000001", box[0].id), 1u);
    box = sms.outbox("27820000001");
    EXPECT_EQ(box[0].delivery_state, DeliveryState::Delivered);
    EXPECT_EQ(box[1].delivery_state, DeliveryState::Queued);
    EXPECT_EQ(sms.ack("27820000001", box[0].id), 0u);
    EXPECT_EQ(code_of([&] { sms.send_sms("27829999999", "x"); }), ErrorCode::UnknownMsisdn);
}

TEST_F(Providers, EventsReplayIntoAFreshBank) {
    std::vector<nlohmann::json> events;
    SimulatedBank recorded;
    recorded.set_event_sink([&](const nlohmann::json& e) { events.push_back(e); });
    recorded.add_account("1", "One", 1000);
    recorded.eft(EftDirection::Debit, "1", 300, "TX-1");
    SimulatedBank replayed;
    for (const auto& e : events) replayed.apply_event(e);
    EXPECT_EQ(replayed.balance("1"), 700);
    EXPECT_EQ(replayed.opening_balance("1"), 1000);
    EXPECT_EQ(replayed.eft_log().size(), 1u);
}

TEST(Fees, PercentAndFlatWithHalfUpRounding) {
    auto s = FeeSchedule::agency_comparison();
    EXPECT_EQ(s.fee(TxnKind::P2P, 55000), 5500);
    EXPECT_EQ(s.fee(TxnKind::P2P, 5), 1);   // 0.5 rounds up
    EXPECT_EQ(s.fee(TxnKind::P2P, 4), 0);   // 0.4 rounds down
    EXPECT_EQ(s.fee(TxnKind::P2P, 15), 2);  // 1.5 rounds up
    EXPECT_EQ(s.fee(TxnKind::P2P, 0), 0);
    FeeSchedule flat;
    flat.applies_to[TxnKind::WalletToBank] = {0, 500};
    EXPECT_EQ(flat.fee(TxnKind::WalletToBank, 55000), 500);
    EXPECT_EQ(flat.fee(TxnKind::P2P, 55000), 0);
    FeeSchedule both;
    both.applies_to[TxnKind::Recharge] = {250, 100};
    EXPECT_EQ(both.fee(TxnKind::Recharge, 10000), 350);
    EXPECT_EQ(FeeSchedule::free_of_charge().fee(TxnKind::P2P, 55000), 0);
}

TEST(Fees, Presets) {
    EXPECT_TRUE(FeeSchedule::preset("default"));
    EXPECT_EQ(FeeSchedule::preset("default")->fee(TxnKind::P2P, 55000), 0);
    EXPECT_EQ(FeeSchedule::preset("agency-comparison")->fee(TxnKind::P2P, 55000), 5500);
    EXPECT_FALSE(FeeSchedule::preset("bogus"));
    for (auto k : {TxnKind::P2P, TxnKind::WalletToBank, TxnKind::BankToBank, TxnKind::Recharge, TxnKind::Withdrawal,
                   TxnKind::MerchantPayment}) {
        EXPECT_EQ(parse_txn_kind(to_string(k)), k);
    }
}

TEST(Fees, RoundingMatchesExactArithmetic) {
    auto s = FeeSchedule::agency_comparison();
    SeededRandom rng(5);
    for (int i = 0; i < 5000; ++i) {
        const auto amount = static_cast<std::int64_t>(rng.below(100'000'000));
        // 10% half-up in exact integer arithmetic: floor((amount + 5) / 10).
        EXPECT_EQ(s.fee(TxnKind::P2P, amount), amount == 0 ? 0 : (amount + 5) / 10) << amount;
    }
}
