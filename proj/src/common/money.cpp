#include "ewallet/money.hpp"

#include <cctype>
#include <limits>

namespace ewallet {

namespace {

std::string_view currency_prefix(std::string_view currency) {
    if (currency == "ZAR") return "R";
    if (currency == "USD") return "$";
    if (currency == "CDF") return "FC";
    return {};
}

}  // namespace

bool is_currency_code(std::string_view code) {
    if (code.size() != 3) return false;
    for (char c : code) {
        if (c < 'A' || c > 'Z') return false;
    }
    return true;
}

std::string format_money(std::int64_t amount_minor, std::string_view currency) {
    std::string out;
    if (amount_minor < 0) {
        out += '-';
    }
    // Avoid overflow on INT64_MIN by working in unsigned.
    const std::uint64_t magnitude = amount_minor < 0
        ? static_cast<std::uint64_t>(-(amount_minor + 1)) + 1
        : static_cast<std::uint64_t>(amount_minor);
    const auto prefix = currency_prefix(currency);
    if (prefix.empty()) {
        out += currency;
        out += ' ';
    } else {
        out += prefix;
    }
    out += std::to_string(magnitude / 100);
    if (const auto cents = magnitude % 100; cents != 0) {
        out += '.';
        if (cents < 10) out += '0';
        out += std::to_string(cents);
    }
    return out;
}

std::int64_t parse_major_amount(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);
    if (!text.empty() && text.front() == 'R') text.remove_prefix(1);
    if (text.empty()) return -1;

    constexpr std::int64_t kLimit = std::numeric_limits<std::int64_t>::max() / 1000;
    std::int64_t whole = 0;
    std::size_t i = 0;
    bool digits = false;
    for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {
        whole = whole * 10 + (text[i] - '0');
        if (whole > kLimit) return -1;
        digits = true;
    }
    std::int64_t cents = 0;
    if (i < text.size()) {
        if (text[i] != '.') return -1;
        ++i;
        const std::size_t frac_start = i;
        for (; i < text.size() && std::isdigit(static_cast<unsigned char>(text[i])); ++i) {}
        const std::size_t frac_len = i - frac_start;
        if (i != text.size() || frac_len == 0 || frac_len > 2) return -1;
        cents = (text[frac_start] - '0') * 10;
        if (frac_len == 2) cents += text[frac_start + 1] - '0';
    }
    if (!digits) return -1;
    return whole * 100 + cents;
}

}  // namespace ewallet
