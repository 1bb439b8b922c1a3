#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace ewallet {

std::string trim(std::string_view s);
std::string fold_case(std::string_view s);
bool is_digits(std::string_view s);

// Normalises a typed cellphone number to its international digit form.
// Spaces, dashes and a leading '+' are dropped; a single leading '0' is
// replaced by the deployment's country code. Returns nullopt unless the
// result is 9-15 digits.
std::optional<std::string> normalize_msisdn(std::string_view raw, std::string_view country_code = "27");

// Salted one-way digest: "sha256$<salt>$<hex>".
std::string make_digest(std::string_view secret, std::string_view salt);
bool verify_digest(std::string_view secret, std::string_view digest);
std::string sha256_hex(std::string_view data);

}  // namespace ewallet
