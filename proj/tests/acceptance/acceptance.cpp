// Acceptance run. Prints one PASS/FAIL line per criterion and exits non-zero
// if any criterion fails.

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "world.hpp"

using namespace testing_support;
using Wall = std::chrono::steady_clock;

namespace {

struct Outcome {
    bool ok = false;
    std::string detail;
};

int failures = 0;

void run(const std::string& name, const std::function<Outcome()>& criterion) {
    Outcome o;
    try {
        o = criterion();
    } catch (const std::exception& e) {
        o = {false, std::string("threw ") + e.what()};
    }
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.ok) ++failures;
}

double seconds_since(Wall::time_point start) {
    return std::chrono::duration<double>(Wall::now() - start).count();
}

template <typename F>
std::optional<ErrorCode> rejected(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return std::nullopt;
}

// Feeds new journal entries through the oracle one at a time: each entry must
// balance, keep the running total at zero and leave protected accounts
// non-negative. Between operations every ledger balance must match the fold.
struct Auditor {
    World& w;
    oracle::Fold fold;
    std::size_t seen = 0;
    std::optional<std::string> problem;

    explicit Auditor(World& world) : w(world) {}

    bool check() {
        if (problem) return false;
        const auto& entries = w.ledger().entries();
        for (; seen < entries.size(); ++seen) {
            const auto& e = entries[seen];
            std::vector<std::pair<std::string, std::int64_t>> postings;
            for (const auto& p : e.postings) postings.emplace_back(p.account.str(), p.delta_minor);
            oracle::step(fold, e.seq, postings);
            if (fold.violation) {
                problem = *fold.violation;
                return false;
            }
            if (fold.total() != 0) {
                problem = "total " + std::to_string(fold.total()) + " after seq " + std::to_string(e.seq);
                return false;
            }
        }
        for (const auto& id : w.ledger().accounts()) {
            if (w.ledger().balance(id).amount_minor != fold.at(id.str())) {
                problem = id.str() + " differs from the oracle at seq " + std::to_string(fold.entries);
                return false;
            }
        }
        std::int64_t live = 0;
        for (const auto& c : w.engine().codes()) {
            if (c.live()) live += c.remaining.amount_minor;
        }
        if (live != w.suspense()) {
            problem = "suspense " + std::to_string(w.suspense()) + " but live codes hold " + std::to_string(live);
            return false;
        }
        return true;
    }
};

std::string number(const char* prefix, int i, int width) {
    std::ostringstream s;
    s << prefix << std::setw(width) << std::setfill('0') << i;
    return s.str();
}

// ---------------------------------------------------------------- fuzz

Outcome conservation_fuzz() {
    World w(World::with_fees(FeeSchedule::agency_comparison()));
    Auditor audit(w);
    std::mt19937_64 rng(20240611);
    auto pick = [&](std::size_t n) { return static_cast<std::size_t>(rng() % n); };

    std::vector<std::string> people;
    std::vector<std::string> banks{kKayembeBank, kSellerBank, kFamilyBank};
    json seed{{"msisdns", json::array()}, {"bank_accounts", json::array()}};
    for (int i = 0; i < 40; ++i) {
        const auto m = number("2771", i, 7);
        people.push_back(m);
        seed["msisdns"].push_back({{"msisdn", m}, {"carrier", "MTN"}});
        if (i < 25) {
            const auto b = number("5", i, 6);
            banks.push_back(b);
            seed["bank_accounts"].push_back(
                {{"number", b}, {"holder", "Holder " + m}, {"balance_minor", 1'000'000'000}, {"msisdn", m}});
        }
    }
    w.platform.seed(seed);
    w.enroll(kSeller, "2468", kSellerBank);

    struct Code {
        std::string id, pin, holder;
    };
    std::vector<Code> codes;
    std::set<std::string> registered;
    auto registered_person = [&]() -> std::optional<std::string> {
        if (registered.empty()) return std::nullopt;
        auto it = registered.begin();
        std::advance(it, pick(registered.size()));
        return *it;
    };
    auto amount_up_to = [&](std::int64_t cap) { return 1 + static_cast<std::int64_t>(rng() % std::max<std::int64_t>(1, cap)); };
    auto track = [&](const std::optional<std::string>& code_id, const std::string& holder) {
        if (!code_id) return;
        codes.push_back({*code_id, w.code_from_sms(holder), holder});
    };

    const auto start = Wall::now();
    std::size_t completed = 0, attempts = 0, rejections = 0;
    std::map<std::string, std::size_t> by_kind;
    while (completed < 10'000 && attempts < 60'000) {
        ++attempts;
        const auto key = "fz-" + std::to_string(attempts);
        const auto op = pick(100);
        std::string kind;
        try {
            const auto who = registered_person();
            if (op < 8 || !who) {
                kind = "register";
                const auto& m = people[pick(people.size())];
                if (registered.count(m)) continue;
                const auto i = std::stoi(m.substr(4));
                w.enroll(m, "1234", i < 25 ? std::optional<std::string>(number("5", i, 6)) : std::nullopt);
                registered.insert(m);
            } else if (op < 10) {
                kind = "deregister";
                w.platform.deregister(*who, true);
                registered.erase(*who);
            } else if (op < 25) {
                kind = "recharge";
                w.engine().recharge(*who, amount_up_to(200'000), key);
            } else if (op < 45) {
                kind = "transfer";
                const auto& to = people[pick(people.size())];
                const auto source = std::array{FundingSource::Wallet, FundingSource::Bank, FundingSource::Auto}[pick(3)];
                const auto t = w.engine().transfer_wallet_to_wallet(*who, to, amount_up_to(w.wallet(*who) + 5000), key,
                                                                    source);
                if (t.parked) track(t.code_id, to);
            } else if (op < 52) {
                kind = "wallet-to-bank";
                w.engine().transfer_wallet_to_bank(*who, banks[pick(banks.size())], amount_up_to(w.wallet(*who)), key);
            } else if (op < 58) {
                kind = "bank-to-bank";
                w.engine().transfer_bank_to_bank(*who, banks[pick(banks.size())], amount_up_to(300'000), key);
            } else if (op < 68) {
                kind = "withdrawal";
                const auto c = w.engine().request_withdrawal(*who, amount_up_to(w.wallet(*who)), key);
                track(c.code_id, *who);
            } else if (op < 90 && !codes.empty()) {
                const auto& c = codes[pick(codes.size())];
                const auto* live = w.engine().find_code(c.id);
                const auto cap = live && live->live() ? live->remaining.amount_minor : 1000;
                const auto amount = amount_up_to(cap);
                if (op < 78) {
                    kind = "atm";
                    w.engine().redeem_at_atm(c.pin, c.holder, amount, key);
                } else if (op < 85) {
                    kind = "merchant-code";
                    w.engine().pay_merchant(c.holder, kSeller, amount, c.pin, key);
                } else {
                    kind = "code-to-bank";
                    w.engine().transfer_wallet_to_bank(c.holder, banks[pick(banks.size())], amount, key, c.pin);
                }
            } else if (op < 95) {
                kind = "merchant-wallet";
                w.engine().pay_merchant(*who, kSeller, amount_up_to(w.wallet(*who)), std::nullopt, key);
            } else {
                kind = "expiry";
                w.clock.advance(std::chrono::hours(1 + pick(30)));
                w.platform.expire_due();
            }
            ++completed;
            ++by_kind[kind];
        } catch (const Error&) {
            ++rejections;
        }
        if (!audit.check()) return {false, "after " + std::to_string(completed) + " operations: " + *audit.problem};
    }
    const auto elapsed = seconds_since(start);
    std::ostringstream d;
    d << completed << " operations (" << rejections << " rejected attempts) over " << audit.fold.entries
      << " journal entries in " << std::fixed << std::setprecision(1) << elapsed << " s, " << by_kind.size()
      << " operation kinds, sum 0 and oracle agreement after every entry";
    return {completed >= 10'000 && by_kind.size() >= 12 && elapsed < 60.0, d.str()};
}

// ---------------------------------------------------------------- processes

std::pair<int, std::string> capture(const std::string& command) {
    std::string out;
    FILE* p = ::popen(command.c_str(), "r");
    if (!p) return {-1, out};
    char buf[4096];
    while (std::fgets(buf, sizeof buf, p)) out += buf;
    const int status = ::pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

Outcome process_coverage() {
    const auto [status, out] = capture(std::string(EWALLET_INTEGRATION_TESTS) + " --gtest_filter='Process.*' 2>&1");
    const std::vector<std::string> names{"Login",      "Registration",  "PinRetrieval", "UserDataValidation",
                                         "Withdrawal", "BalanceCheck",  "WalletToWallet", "WalletToBank",
                                         "BankToBank", "Recharge",      "UpdateDetails", "Deregistration"};
    std::size_t passed = 0;
    std::string missing;
    for (const auto& n : names) {
        if (out.find("[       OK ] Process." + n + " ") != std::string::npos) {
            ++passed;
        } else {
            missing += " " + n;
        }
    }
    return {status == 0 && passed == names.size(),
            std::to_string(passed) + "/12 process tests passed" + (missing.empty() ? "" : ", missing:" + missing)};
}

// ---------------------------------------------------------------- menu

Outcome menu_fidelity() {
    const std::string root = "1. Transfer money\n2. Withdraw money\n3. Change pin number\n4. Check your balance";
    const std::string target = "1. Transfer money to your eWallet\n2. Transfer money to someone else";
    const std::string source = "1. Bank account\n2. eWallet account";
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.engine().recharge(kKayembe, 100000, "fund");
    std::vector<std::pair<std::string, std::string>> mismatches;
    auto expect = [&](const std::string& got, const std::string& want) {
        if (got != want) mismatches.emplace_back(want, got);
    };
    expect(w.dial("s", kKayembe, "#555*").text, "Welcome to eWallet\nEnter your PIN");
    expect(w.dial("s", kKayembe, "4821").text, root);
    expect(w.dial("s", kKayembe, "1").text, target);
    expect(w.dial("s", kKayembe, "2").text, "Enter the recipient's cellphone number");
    expect(w.dial("s", kKayembe, "0830000002").text, "Enter the amount");
    expect(w.dial("s", kKayembe, "550").text, source);
    expect(w.dial("s", kKayembe, "2").text,
           "Send R550 to 27830000002 from your eWallet account\nFee: R0\n1. Confirm\n2. Cancel");
    expect(w.dial("s", kKayembe, "1").text,
           "transaction successful\nYou sent R550 to 27830000002\nThe recipient will get a temporary PIN by SMS");
    // The 55000 minor-unit transfer is now parked for the wife.
    expect(w.dial("w", kWife, "#555*").text,
           "You have an incoming R550\n1. Withdraw the money\n2. Create an account to save your money");
    expect(w.last_sms(kWife).substr(0, 25), "You have an incoming R550");

    PlatformOptions manual;
    manual.engine.auto_credit_parked = false;
    World v(manual);
    v.enroll(kKayembe, "4821", kKayembeBank);
    v.engine().recharge(kKayembe, 100000, "fund");
    v.engine().transfer_wallet_to_wallet(kKayembe, kWife, 55000, "p");
    v.enroll(kWife, "1357");
    v.dial("w", kWife, "#555*");
    expect(v.dial("w", kWife, "1357").text,
           "You have an incoming R550\n1. Withdraw the money\n2. Save it into your account");

    if (!mismatches.empty()) {
        return {false, "expected [" + mismatches[0].first + "] got [" + mismatches[0].second + "]"};
    }
    return {true, "root, transfer, source-selection and both incoming-funds screens match verbatim"};
}

// ---------------------------------------------------------------- access codes

Outcome access_code_safety() {
    World w;
    const std::string payer = "27710009999";
    w.platform.seed({{"msisdns", {{{"msisdn", payer}, {"carrier", "MTN"}}}},
                     {"bank_accounts",
                      {{{"number", "7000001"}, {"holder", "Payer"}, {"balance_minor", 1'000'000'000'000}, {"msisdn", payer}}}}});
    w.enroll(payer, "1234", std::string("7000001"));
    w.enroll(kSeller, "2468", kSellerBank);
    Auditor audit(w);
    std::mt19937_64 rng(99);
    auto pick = [&](std::int64_t n) { return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n)); };
    const std::vector<std::string> strangers{kWife, kParent, kAirtel, kTelkom};

    std::size_t doubles = 0, doubles_rejected = 0, after_expiry = 0, after_expiry_rejected = 0, expiries = 0;
    std::size_t partial = 0;
    int n = 0;
    for (int schedule = 0; schedule < 1000; ++schedule) {
        auto key = [&] { return "ac-" + std::to_string(++n); };
        const auto issued = 100 + pick(100'000);
        w.engine().recharge(payer, issued, key());

        // Withdrawal codes refund their holder, parked transfers their sender;
        // both are the payer here.
        std::string code_id, holder;
        if (pick(2) == 0) {
            holder = payer;
            code_id = w.engine().request_withdrawal(payer, issued, key()).code_id;
        } else {
            holder = strangers[static_cast<std::size_t>(pick(static_cast<std::int64_t>(strangers.size())))];
            const auto t = w.engine().transfer_wallet_to_wallet(payer, holder, issued, key());
            if (!t.parked || !t.code_id) return {false, "transfer to an unregistered number was not parked"};
            code_id = *t.code_id;
        }
        const auto pin = w.code_from_sms(holder);
        auto remaining = [&] { return w.engine().find_code(code_id)->remaining.amount_minor; };

        std::int64_t redeemed = 0;
        auto redeem = [&](std::int64_t amount) {
            switch (pick(3)) {
                case 0: w.engine().redeem_at_atm(pin, holder, amount, key()); break;
                case 1: w.engine().pay_merchant(holder, kSeller, amount, pin, key()); break;
                default: w.engine().transfer_wallet_to_bank(holder, kFamilyBank, amount, key(), pin); break;
            }
        };
        const auto steps = pick(6);
        for (int s = 0; s < steps && remaining() > 0; ++s) {
            const bool last = pick(4) == 0;
            const auto amount = last ? remaining() : 1 + pick(remaining());
            const auto before = w.ledger().last_seq();
            const bool over = pick(10) == 0;
            if (over) {
                if (!rejected([&] { redeem(remaining() + 1); }) || w.ledger().last_seq() != before) {
                    return {false, "over-redemption was accepted"};
                }
                continue;
            }
            redeem(amount);
            redeemed += amount;
            if (remaining() > 0) ++partial;
        }

        std::int64_t refunded = 0;
        if (remaining() > 0) {
            const auto wallet = w.wallet(payer);
            w.clock.advance(w.engine().options().access_code_ttl + std::chrono::seconds(1));
            if (w.platform.expire_due() != 1) return {false, "schedule " + std::to_string(schedule) + ": expiry count"};
            refunded = w.wallet(payer) - wallet;
            ++expiries;
            for (int a = 0; a < 2; ++a) {
                ++after_expiry;
                const auto before = w.ledger().last_seq();
                if (rejected([&] { redeem(1); }) && w.ledger().last_seq() == before) ++after_expiry_rejected;
            }
        } else {
            for (int a = 0; a < 1 + pick(3); ++a) {
                ++doubles;
                const auto before = w.ledger().last_seq();
                const auto code = rejected([&] { redeem(1 + pick(issued)); });
                if (code == ErrorCode::CodeAlreadyRedeemed && w.ledger().last_seq() == before) ++doubles_rejected;
            }
        }
        if (issued != redeemed + remaining() + refunded) {
            return {false, "schedule " + std::to_string(schedule) + ": issued " + std::to_string(issued) +
                               " != redeemed " + std::to_string(redeemed) + " + remaining " +
                               std::to_string(remaining()) + " + refunded " + std::to_string(refunded)};
        }
        if (!audit.check()) return {false, *audit.problem};
        if (w.suspense() != 0) return {false, "suspense left after schedule " + std::to_string(schedule)};
    }
    std::ostringstream d;
    d << "1000 schedules (" << partial << " partial redemptions, " << expiries << " expiry refunds), "
      << doubles_rejected << "/" << doubles << " double redemptions rejected, " << after_expiry_rejected << "/"
      << after_expiry << " redemptions after expiry rejected, issued = redeemed + remaining + refunded throughout";
    return {doubles > 0 && doubles == doubles_rejected && after_expiry == after_expiry_rejected && expiries > 0, d.str()};
}

// ---------------------------------------------------------------- idempotency

Outcome idempotency() {
    World w;
    w.enroll(kKayembe, "4821", kKayembeBank);
    w.enroll(kSeller, "2468", kSellerBank);
    w.enroll(kWife, "1357");
    const auto kayembe = w.web_login(kKayembe);
    const auto seller = w.web_login(kSeller);
    w.engine().recharge(kKayembe, 500000, "setup");

    struct Call {
        std::string name, path;
        std::function<json()> body;
        std::string token;
    };
    std::string withdrawal_code, parked_code;
    const std::vector<Call> calls{
        {"recharge", "/recharge", [] { return json{{"amount_minor", 10000}}; }, kayembe},
        {"wallet transfer", "/transfers/wallet", [] { return json{{"recipient_msisdn", kWife}, {"amount_minor", 1000}}; }, kayembe},
        {"parked transfer", "/transfers/wallet", [] { return json{{"recipient_msisdn", kParent}, {"amount_minor", 4000}}; }, kayembe},
        {"bank transfer", "/transfers/bank", [] { return json{{"account_number", kFamilyBank}, {"amount_minor", 1000}}; }, kayembe},
        {"bank-to-bank", "/transfers/bank-to-bank", [] { return json{{"account_number", kFamilyBank}, {"amount_minor", 1000}}; }, kayembe},
        {"withdrawal", "/withdrawals", [] { return json{{"amount_minor", 5000}}; }, kayembe},
        {"atm", "/atm/redeem", [&] { return json{{"msisdn", kKayembe}, {"code", withdrawal_code}, {"amount_minor", 1000}}; }, ""},
        {"pos by code", "/pos/charge", [&] { return json{{"buyer_msisdn", kKayembe}, {"code", withdrawal_code}, {"amount_minor", 1000}}; }, seller},
        {"pos by pin", "/pos/charge", [] { return json{{"buyer_msisdn", kKayembe}, {"buyer_pin", "4821"}, {"amount_minor", 1000}}; }, seller},
        {"code to bank", "/transfers/bank", [&] { return json{{"msisdn", kParent}, {"access_code", parked_code}, {"account_number", kFamilyBank}, {"amount_minor", 500}}; }, ""},
    };
    for (const auto& c : calls) {
        const auto before = w.ledger().last_seq();
        const auto body = c.body();
        std::vector<std::string> replies;
        for (int i = 0; i < 3; ++i) {
            const auto r = w.call("POST", c.path, body, c.token, "idem-" + c.name);
            if (r.status != 200) return {false, c.name + " returned " + std::to_string(r.status) + " " + r.body.dump()};
            replies.push_back(r.body.dump());
        }
        if (w.ledger().last_seq() != before + 1) {
            return {false, c.name + " wrote " + std::to_string(w.ledger().last_seq() - before) + " journal entries"};
        }
        if (replies[0] != replies[1] || replies[1] != replies[2]) return {false, c.name + " replies differ"};
        if (c.name == "withdrawal") withdrawal_code = w.code_from_sms(kKayembe);
        if (c.name == "parked transfer") parked_code = w.code_from_sms(kParent);
    }
    return {true, std::to_string(calls.size()) + " money-moving endpoints: 3 calls each gave one journal entry and identical replies"};
}

// ---------------------------------------------------------------- processes under kill -9

struct Service {
    pid_t pid = -1;
    int port = 0;

    static Service start(const std::filesystem::path& journal, const std::filesystem::path& log) {
        Service s;
        s.pid = ::fork();
        if (s.pid == 0) {
            const int fd = ::open(log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
            ::dup2(fd, 1);
            ::dup2(fd, 2);
            std::vector<std::string> args{EWALLET_CLI, "serve", "--listen", "127.0.0.1:0", "--journal",
                                          journal.string(), "--seed", std::string(EWALLET_FIXTURE_DIR) + "/kayembe.json"};
            std::vector<char*> argv;
            for (auto& a : args) argv.push_back(a.data());
            argv.push_back(nullptr);
            ::execv(argv[0], argv.data());
            std::_Exit(127);
        }
        const auto deadline = Wall::now() + std::chrono::seconds(15);
        const std::regex re("listening on http://127\\.0\\.0\\.1:([0-9]+)");
        while (Wall::now() < deadline) {
            std::ifstream in(log);
            std::stringstream text;
            text << in.rdbuf();
            std::smatch m;
            const auto str = text.str();
            if (std::regex_search(str, m, re)) {
                s.port = std::stoi(m[1]);
                return s;
            }
            int status = 0;
            if (::waitpid(s.pid, &status, WNOHANG) == s.pid) throw std::runtime_error("service exited: " + str);
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        s.stop(SIGKILL);
        throw std::runtime_error("service did not start");
    }

    void stop(int sig) {
        if (pid <= 0) return;
        ::kill(pid, sig);
        int status = 0;
        ::waitpid(pid, &status, 0);
        pid = -1;
    }
};

struct Step {
    std::string who, path;
    json body;
    std::string key;
};

// Drives the scripted run, killing the service before the listed steps.
// Half of the kills land while the request is in flight.
class ScriptedRun {
public:
    ScriptedRun(std::filesystem::path dir, std::set<std::size_t> kills, std::uint64_t seed)
        : dir_(std::move(dir)), kills_(std::move(kills)), rng_(seed) {}

    std::map<std::string, std::int64_t> execute(const std::vector<Step>& steps, std::string& error) {
        const auto journal = dir_ / "journal.jsonl";
        restart();
        for (const auto& [m, pin, bank] : subscribers()) {
            json app{{"msisdn", m}, {"full_name", "Subscriber " + m}, {"pin", pin},
                     {"secret_question", "q"}, {"secret_answer", "a"}};
            if (!bank.empty()) app["bank_account"] = bank;
            post("", "/register", app, "");
            const auto box = client_->Get("/sms/outbox/" + m);
            std::smatch match;
            const std::regex re("temporary password is ([A-Za-z0-9]+)");
            const auto text = box->body;
            std::regex_search(text, match, re);
            const auto first = json::parse(post("", "/login", {{"login_id", m}, {"password", match[1].str()}}, "")->body);
            send(first.at("token").get<std::string>(), "/password",
                 {{"current_password", match[1].str()}, {"new_password", "pw-" + m}}, "");
        }
        login_all();
        for (std::size_t i = 0; i < steps.size(); ++i) {
            const auto& s = steps[i];
            if (kills_.count(i)) {
                if (rng_() % 2 == 0) {
                    service_.stop(SIGKILL);
                } else {
                    std::thread inflight([&] { post(s.who, s.path, s.body, s.key); });
                    std::this_thread::sleep_for(std::chrono::microseconds(rng_() % 3000));
                    service_.stop(SIGKILL);
                    inflight.join();
                }
                ++killed_;
                restart();
                login_all();
            }
            if (!post(s.who, s.path, s.body, s.key)) {
                error = "step " + std::to_string(i) + " got no response";
                return {};
            }
        }
        const auto reconcile = client_->Get("/admin/reconcile");
        if (!reconcile || !json::parse(reconcile->body).at("reconciled").get<bool>()) error = "bank mirrors do not reconcile";
        service_.stop(SIGTERM);
        const auto f = oracle::fold_file(journal);
        if (f.violation) error = *f.violation;
        return f.balances;
    }

    int killed() const { return killed_; }

    static std::vector<std::tuple<std::string, std::string, std::string>> subscribers() {
        return {{kKayembe, "4821", kKayembeBank}, {kWife, "1357", ""}, {kSeller, "2468", kSellerBank}};
    }

private:
    void restart() {
        service_ = Service::start(dir_ / "journal.jsonl", dir_ / ("serve-" + std::to_string(starts_++) + ".log"));
        client_ = std::make_unique<httplib::Client>("127.0.0.1", service_.port);
        client_->set_read_timeout(10, 0);
    }

    void login_all() {
        for (const auto& [m, pin, bank] : subscribers()) {
            const auto r = post("", "/login", {{"login_id", m}, {"password", "pw-" + m}}, "");
            tokens_[m] = json::parse(r->body).at("token").get<std::string>();
        }
    }

    httplib::Result post(const std::string& who, const std::string& path, const json& body, const std::string& key) {
        return send(who.empty() ? std::string{} : tokens_[who], path, body, key);
    }

    httplib::Result send(const std::string& token, const std::string& path, const json& body, const std::string& key) {
        httplib::Headers h;
        if (!token.empty()) h.emplace("Authorization", "Bearer " + token);
        if (!key.empty()) h.emplace("Idempotency-Key", key);
        return client_->Post(path, h, body.dump(), "application/json");
    }

    std::filesystem::path dir_;
    std::set<std::size_t> kills_;
    std::mt19937_64 rng_;
    Service service_;
    std::unique_ptr<httplib::Client> client_;
    std::map<std::string, std::string> tokens_;
    int starts_ = 0;
    int killed_ = 0;
};

std::vector<Step> script(std::size_t count) {
    std::mt19937 rng(31);
    std::vector<Step> steps;
    for (std::size_t i = 0; i < count; ++i) {
        const auto key = "crash-" + std::to_string(i);
        const auto amount = static_cast<std::int64_t>(100 + rng() % 4000);
        switch (rng() % 8) {
            case 0: steps.push_back({kKayembe, "/recharge", {{"amount_minor", amount * 4}}, key}); break;
            case 1: steps.push_back({kKayembe, "/transfers/wallet", {{"recipient_msisdn", kWife}, {"amount_minor", amount}}, key}); break;
            case 2: steps.push_back({kWife, "/transfers/wallet", {{"recipient_msisdn", kKayembe}, {"amount_minor", amount}}, key}); break;
            case 3: steps.push_back({kKayembe, "/transfers/wallet", {{"recipient_msisdn", kParent}, {"amount_minor", amount}}, key}); break;
            case 4: steps.push_back({kKayembe, "/transfers/bank", {{"account_number", kFamilyBank}, {"amount_minor", amount}}, key}); break;
            case 5: steps.push_back({kKayembe, "/transfers/bank-to-bank", {{"account_number", kFamilyBank}, {"amount_minor", amount}}, key}); break;
            case 6: steps.push_back({kWife, "/withdrawals", {{"amount_minor", amount}}, key}); break;
            default: steps.push_back({kSeller, "/pos/charge", {{"buyer_msisdn", kWife}, {"buyer_pin", "1357"}, {"amount_minor", amount}}, key}); break;
        }
    }
    return steps;
}

Outcome crash_restart() {
    const auto steps = script(150);
    std::string error;
    const auto base_dir = temp_dir("acceptance-baseline");
    ScriptedRun baseline(base_dir, {}, 1);
    const auto expected = baseline.execute(steps, error);
    if (!error.empty()) return {false, "uninterrupted run: " + error};

    std::mt19937_64 rng(8);
    std::set<std::size_t> kills;
    while (kills.size() < 20) kills.insert(static_cast<std::size_t>(rng() % steps.size()));
    const auto dir = temp_dir("acceptance-crash");
    ScriptedRun crashed(dir, kills, 2);
    const auto actual = crashed.execute(steps, error);
    if (!error.empty()) return {false, "interrupted run: " + error};

    std::size_t differing = 0;
    std::string first;
    std::set<std::string> accounts;
    for (const auto& [a, _] : expected) accounts.insert(a);
    for (const auto& [a, _] : actual) accounts.insert(a);
    for (const auto& a : accounts) {
        const auto e = expected.count(a) ? expected.at(a) : 0;
        const auto g = actual.count(a) ? actual.at(a) : 0;
        if (e != g) {
            if (first.empty()) first = a + " " + std::to_string(g) + " vs " + std::to_string(e);
            ++differing;
        }
    }
    std::filesystem::remove_all(base_dir);
    std::filesystem::remove_all(dir);
    if (differing) return {false, std::to_string(differing) + " accounts differ, first " + first};
    return {crashed.killed() == 20, std::to_string(crashed.killed()) + " SIGKILLs over " + std::to_string(steps.size()) +
                                        " scripted requests, " + std::to_string(accounts.size()) +
                                        " account balances identical to the uninterrupted run"};
}

// ---------------------------------------------------------------- fees

Outcome fee_configuration() {
    const auto preset = FeeSchedule::preset("agency-comparison");
    if (!preset) return {false, "agency-comparison preset missing"};
    World agency(World::with_fees(*preset));
    World plain;
    for (World* w : {&agency, &plain}) {
        w->enroll(kKayembe, "4821", kKayembeBank);
        w->engine().recharge(kKayembe, 100000, "fund");
    }
    const auto before = agency.fees();
    const auto wallet = agency.wallet(kKayembe);
    const auto t = agency.engine().transfer_wallet_to_wallet(kKayembe, kWife, 55000, "p");
    const auto booked = agency.fees() - before;
    const auto free_before = plain.fees();
    const auto u = plain.engine().transfer_wallet_to_wallet(kKayembe, kWife, 55000, "p");
    const auto free_booked = plain.fees() - free_before;
    const bool ok = booked == 5500 && t.fee.amount_minor == 5500 && free_booked == 0 && u.fee.amount_minor == 0 &&
                    agency.wallet(kKayembe) == wallet - 55000 - 5500;
    return {ok, "R550 transfer booked " + std::to_string(booked) + " minor to fee income with agency-comparison, " +
                    std::to_string(free_booked) + " with defaults"};
}

// ---------------------------------------------------------------- scenario

Outcome scenario_walkthrough() {
    const auto dir = temp_dir("acceptance-scenario");
    const auto journal = dir / "journal.jsonl";
    auto service = Service::start(journal, dir / "serve.log");
    const auto url = "http://127.0.0.1:" + std::to_string(service.port);
    const auto [status, out] = capture(std::string(EWALLET_CLI) + " scenario --url " + url + " --fixture " +
                                       EWALLET_FIXTURE_DIR + "/kayembe.json 2>&1");
    service.stop(SIGTERM);
    const auto [replay_status, replay_out] = capture(std::string(EWALLET_CLI) + " replay --journal " + journal.string() + " 2>&1");
    const auto f = oracle::fold_file(journal);
    const bool ok = status == 0 && out.find("scenario complete") != std::string::npos && replay_status == 0 &&
                    !f.violation && f.total() == 0;
    std::filesystem::remove_all(dir);
    if (!ok) return {false, "scenario exit " + std::to_string(status) + ", replay exit " + std::to_string(replay_status) + ": " + out + replay_out};
    auto last = replay_out.substr(0, replay_out.find('\n'));
    return {true, "scenario exited 0; replay: " + last};
}

}  // namespace

int main() {
    // A killed service must not take the client down with it.
    ::signal(SIGPIPE, SIG_IGN);
    run("conservation fuzz", conservation_fuzz);
    run("process coverage", process_coverage);
    run("menu fidelity", menu_fidelity);
    run("access-code safety", access_code_safety);
    run("idempotency", idempotency);
    run("crash-restart equivalence", crash_restart);
    run("fee configuration", fee_configuration);
    run("scenario walkthrough", scenario_walkthrough);
    return failures == 0 ? 0 : 1;
}
