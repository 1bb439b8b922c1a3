#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "ewallet/platform.hpp"

namespace ewallet {

enum class MenuNode {
    IncomingFunds,
    PinPrompt,
    Root,
    TransferTarget,
    RecipientPrompt,
    AmountPrompt,
    SourceSelect,
    Confirm,
    WithdrawAmount,
    ChangePinOld,
    ChangePinNew,
    Ended,
};
std::string_view to_string(MenuNode node);

struct UssdReply {
    std::string text;
    bool end_session = false;
};

struct UssdOptions {
    std::string service_code = "#555*";
    std::chrono::seconds session_ttl{120};
    int max_invalid_inputs = 3;
    // Amounts at or above this ask for confirmation before posting. Zero
    // confirms everything.
    std::int64_t confirm_threshold_minor = 0;
};

// Menu screens. Kept verbatim so handset tests can compare them.
namespace screens {
inline constexpr std::string_view kRoot =
    "1. Transfer money\n2. Withdraw money\n3. Change pin number\n4. Check your balance";
inline constexpr std::string_view kTransferTarget =
    "1. Transfer money to your eWallet\n2. Transfer money to someone else";
inline constexpr std::string_view kSourceSelect = "1. Bank account\n2. eWallet account";
inline constexpr std::string_view kPinPrompt = "Welcome to eWallet\nEnter your PIN";
inline constexpr std::string_view kInvalidLogin = "Invalid login details";
inline constexpr std::string_view kNotSufficientFunds = "Not sufficient funds";
inline constexpr std::string_view kSuccess = "transaction successful";
}  // namespace screens

// Server-side session state machine for the handset menu. One session per
// session_id; the first request must carry the service code.
class UssdMenu {
public:
    UssdMenu(Platform& platform, UssdOptions options = {});

    UssdReply handle(std::string_view session_id, std::string_view msisdn, std::string_view input);
    // Ends sessions idle past the TTL and returns how many it ended. An ended
    // session keeps answering SESSION_EXPIRED for one more TTL, then is dropped.
    std::size_t expire_sessions();
    std::size_t active_sessions() const;

    const UssdOptions& options() const { return options_; }

private:
    struct Draft {
        bool to_self = false;
        std::string recipient;
        std::int64_t amount = 0;
        std::optional<FundingSource> source;
        bool withdrawal = false;
    };
    struct Session {
        std::string id;
        std::string msisdn;
        MenuNode node = MenuNode::Root;
        int invalid = 0;
        int step = 0;
        Timestamp last_seen{};
        Timestamp started{};
        Draft draft;
    };

    UssdReply start(Session& s);
    UssdReply dispatch(Session& s, const std::string& input);
    UssdReply screen(Session& s, MenuNode node);
    UssdReply invalid(Session& s, std::string_view error);
    UssdReply end(Session& s, std::string text);
    UssdReply after_amount(Session& s);
    UssdReply confirm_or_execute(Session& s);
    UssdReply execute(Session& s);
    std::string confirm_text(const Session& s) const;

    Platform& platform_;
    UssdOptions options_;
    mutable std::mutex mu_;
    std::map<std::string, Session, std::less<>> sessions_;
};

}  // namespace ewallet
