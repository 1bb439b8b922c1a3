#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace ewallet {

// Amount in minor currency units (cents). Never floating point.
struct Money {
    std::int64_t amount_minor = 0;
    std::string currency = "ZAR";

    friend bool operator==(const Money&, const Money&) = default;
};

// Three uppercase ASCII letters.
bool is_currency_code(std::string_view code);

// "R550" for 55000 ZAR, "R275.50" for 27550 ZAR. Whole amounts drop the cents.
std::string format_money(std::int64_t amount_minor, std::string_view currency);
inline std::string format_money(const Money& m) { return format_money(m.amount_minor, m.currency); }

// Parses a user-typed major-unit amount ("550", "550.5", "R550.50") into minor
// units. Returns -1 for anything that is not a non-negative decimal with at
// most two fraction digits.
std::int64_t parse_major_amount(std::string_view text);

}  // namespace ewallet
