#include "scenario.hpp"

#include <fstream>
#include <httplib.h>
#include <nlohmann/json.hpp>
#include <ostream>
#include <regex>
#include <stdexcept>

namespace ewallet::tools {

namespace {

using json = nlohmann::json;

constexpr const char* kKayembe = "27820000001";
constexpr const char* kWife = "27830000002";
constexpr const char* kParent = "243810000003";
constexpr const char* kSeller = "27840000005";

struct StepFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Client {
public:
    explicit Client(const std::string& url) : http_(url) { http_.set_read_timeout(30, 0); }

    json call(const std::string& method, const std::string& path, const json& body = nullptr,
              const std::string& token = {}, const std::string& key = {}, int expect = 200) {
        httplib::Headers headers;
        if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
        if (!key.empty()) headers.emplace("Idempotency-Key", key);
        httplib::Result res = method == "GET" ? http_.Get(path, headers)
                                              : http_.Post(path, headers, body.is_null() ? "{}" : body.dump(),
                                                           "application/json");
        if (!res) throw StepFailed(method + " " + path + ": " + httplib::to_string(res.error()));
        json j = json::parse(res->body, nullptr, false);
        if (res->status != expect) {
            throw StepFailed(method + " " + path + " returned " + std::to_string(res->status) + ": " + res->body);
        }
        return j;
    }

    // Latest SMS to msisdn whose body matches pattern; returns capture 1.
    std::string sms_capture(const std::string& msisdn, const std::string& pattern) {
        const auto box = call("GET", "/sms/outbox/" + msisdn);
        const std::regex re(pattern);
        const auto& messages = box.at("messages");
        for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
            std::smatch m;
            const auto body = it->at("body").get<std::string>();
            if (std::regex_search(body, m, re)) return m[1];
        }
        throw StepFailed("no SMS to " + msisdn + " matching " + pattern);
    }

    std::string ussd(const std::string& session, const std::string& msisdn, const std::string& input) {
        return call("POST", "/ussd", {{"session_id", session}, {"msisdn", msisdn}, {"input", input}})
            .at("text")
            .get<std::string>();
    }

private:
    httplib::Client http_;
};

std::int64_t balance(Client& c, const std::string& msisdn, const std::string& token) {
    return c.call("GET", "/wallets/" + msisdn + "/balance", nullptr, token).at("balance_minor").get<std::int64_t>();
}

void expect_equal(const std::string& what, std::int64_t got, std::int64_t want) {
    if (got != want) {
        throw StepFailed(what + ": expected " + std::to_string(want) + ", got " + std::to_string(got));
    }
}

// Registers, reads the welcome SMS, replaces the temporary password and
// returns a working token.
std::string onboard(Client& c, const std::string& msisdn, const std::string& name, const std::string& pin,
                    const std::string& bank) {
    json app{{"msisdn", msisdn},
             {"full_name", name},
             {"pin", pin},
             {"secret_question", "Name of your first school?"},
             {"secret_answer", "Lubumbashi Primary"}};
    if (!bank.empty()) app["bank_account"] = bank;
    c.call("POST", "/register", app, {}, {}, 201);
    const auto temp = c.sms_capture(msisdn, "temporary password is ([A-Za-z0-9]+)");
    const auto first = c.call("POST", "/login", {{"login_id", msisdn}, {"password", temp}});
    const auto password = "s3cure-" + msisdn;
    c.call("POST", "/password", {{"current_password", temp}, {"new_password", password}},
           first.at("token").get<std::string>());
    return c.call("POST", "/login", {{"login_id", msisdn}, {"password", password}}).at("token").get<std::string>();
}

}  // namespace

int run_scenario(const std::string& url, const std::filesystem::path& fixture_path, std::ostream& out) {
    Client c(url);
    int step = 0;
    auto done = [&](const std::string& text) { out << "step " << ++step << ": " << text << '\n'; };
    try {
        std::ifstream in(fixture_path);
        if (!in) throw StepFailed("cannot read fixture " + fixture_path.string());
        const auto fixture = json::parse(in);
        c.call("POST", "/admin/seed", fixture);
        done("seeded telco numbers and bank accounts");

        const auto kayembe = onboard(c, kKayembe, "Kayembe Mutombo", "4821", "1001001");
        done("Kayembe registered with bank account 1001001");

        c.call("POST", "/recharge", {{"amount_minor", 500000}}, kayembe, "scn-recharge");
        expect_equal("Kayembe balance after recharge", balance(c, kKayembe, kayembe), 500000);
        done("Kayembe moved R5000 of salary into his eWallet");

        const auto parked = c.call("POST", "/transfers/wallet", {{"recipient_msisdn", kWife}, {"amount_minor", 55000}},
                                   kayembe, "scn-p2p-wife");
        if (!parked.at("parked").get<bool>()) throw StepFailed("transfer to the unregistered wife was not parked");
        c.sms_capture(kWife, "(You have an incoming R550)");
        done("Kayembe sent R550 to his wife; she received a temporary PIN by SMS");

        const auto wife = onboard(c, kWife, "Ngalula Mutombo", "1357", "");
        expect_equal("wife balance after registering", balance(c, kWife, wife), 55000);
        done("his wife registered and the R550 landed in her new eWallet");

        c.call("POST", "/transfers/wallet", {{"recipient_msisdn", kParent}, {"amount_minor", 30000}}, wife,
               "scn-p2p-parent");
        const auto parent_code = c.sms_capture(kParent, "temporary PIN is ([0-9]{8})");
        done("she sent R300 to her mother in Lubumbashi, who has no eWallet");

        c.call("POST", "/withdrawals", {{"amount_minor", 20000}}, wife, "scn-withdraw");
        const auto wife_code = c.sms_capture(kWife, "temporary PIN is ([0-9]{8})");
        const auto seller = onboard(c, kSeller, "Mama Ngozi", "2468", "2002002");
        c.call("POST", "/pos/charge", {{"buyer_msisdn", kWife}, {"code", wife_code}, {"amount_minor", 15000}}, seller,
               "scn-pos");
        expect_equal("seller balance after the sale", balance(c, kSeller, seller), 15000);
        done("she took a R200 withdrawal PIN and spent R150 of it at a seller");

        const auto receipt = c.call("POST", "/atm/redeem",
                                    {{"msisdn", kParent}, {"code", parent_code}, {"amount_minor", 15000}}, {},
                                    "scn-atm");
        expect_equal("parked code remaining after ATM", receipt.at("remaining_minor").get<std::int64_t>(), 15000);
        done("her mother withdrew half of the R300 at an ATM");

        const std::string session = "scn-ussd";
        c.ussd(session, kKayembe, "#555*");
        c.ussd(session, kKayembe, "4821");
        const auto screen = c.ussd(session, kKayembe, "4");
        if (screen != "Your eWallet balance is R4450") throw StepFailed("unexpected balance screen: " + screen);
        expect_equal("wife balance at the end", balance(c, kWife, wife), 5000);
        done("Kayembe checked his balance over USSD: R4450");

        const auto health = c.call("GET", "/health");
        if (!health.at("reconciled").get<bool>()) throw StepFailed("bank mirrors do not reconcile");
        done("journal at seq " + std::to_string(health.at("journal_seq").get<std::uint64_t>()) +
             ", bank mirrors reconcile");
    } catch (const std::exception& e) {
        out << "scenario failed at step " << step + 1 << ": " << e.what() << '\n';
        return 1;
    }
    out << "scenario complete\n";
    return 0;
}

}  // namespace ewallet::tools
