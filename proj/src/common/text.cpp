#include "ewallet/text.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <memory>

#include "ewallet/error.hpp"

namespace ewallet {

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

std::string fold_case(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

bool is_digits(std::string_view s) {
    if (s.empty()) return false;
    for (char c : s) {
        if (c < '0' || c > '9') return false;
    }
    return true;
}

std::optional<std::string> normalize_msisdn(std::string_view raw, std::string_view country_code) {
    std::string digits;
    bool plus = false;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const char c = raw[i];
        if (c == ' ' || c == '-') continue;
        if (c == '+' && digits.empty() && !plus) {
            plus = true;
            continue;
        }
        if (c < '0' || c > '9') return std::nullopt;
        digits += c;
    }
    if (!plus && digits.size() > 1 && digits[0] == '0' && digits[1] != '0') {
        digits = std::string(country_code) + digits.substr(1);
    }
    if (digits.size() < 9 || digits.size() > 15) return std::nullopt;
    return digits;
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error(ErrorCode::Internal, "sha256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

std::string make_digest(std::string_view secret, std::string_view salt) {
    std::string material(salt);
    material += ':';
    material += secret;
    return "sha256$" + std::string(salt) + "$" + sha256_hex(material);
}

bool verify_digest(std::string_view secret, std::string_view digest) {
    constexpr std::string_view kScheme = "sha256$";
    if (digest.substr(0, kScheme.size()) != kScheme) return false;
    const auto rest = digest.substr(kScheme.size());
    const auto dollar = rest.find('$');
    if (dollar == std::string_view::npos) return false;
    const std::string expected = make_digest(secret, rest.substr(0, dollar));
    if (expected.size() != digest.size()) return false;
    unsigned char diff = 0;
    for (std::size_t i = 0; i < expected.size(); ++i) {
        diff |= static_cast<unsigned char>(expected[i] ^ digest[i]);
    }
    return diff == 0;
}

}  // namespace ewallet
