#include "ewallet/random.hpp"

#include <openssl/rand.h>

#include <limits>

#include "ewallet/error.hpp"

namespace ewallet {

std::uint64_t Random::below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    for (;;) {
        const std::uint64_t v = next();
        if (v < limit) return v % bound;
    }
}

std::string Random::digits(std::size_t n) {
    std::string out(n, '0');
    for (auto& c : out) c = static_cast<char>('0' + below(10));
    return out;
}

std::string Random::alphanumeric(std::size_t n) {
    static constexpr char kAlphabet[] =
        "ABCDEFGHJKLMNPQRSTUVWXYZabcdefghijkmnopqrstuvwxyz23456789";
    std::string out(n, 'A');
    for (auto& c : out) c = kAlphabet[below(sizeof kAlphabet - 1)];
    return out;
}

std::string Random::hex(std::size_t n) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(n, '0');
    for (auto& c : out) c = kHex[below(16)];
    return out;
}

std::uint64_t SecureRandom::next() {
    std::uint64_t v = 0;
    if (RAND_bytes(reinterpret_cast<unsigned char*>(&v), sizeof v) != 1) {
        throw Error(ErrorCode::Internal, "system random source failed");
    }
    return v;
}

std::uint64_t SeededRandom::next() {
    std::lock_guard lock(mu_);
    return engine_();
}

}  // namespace ewallet
