#pragma once

#include <cstdint>
#include <mutex>
#include <random>
#include <string>

namespace ewallet {

class Random {
public:
    virtual ~Random() = default;
    virtual std::uint64_t next() = 0;

    // Uniform in [0, bound) without modulo bias.
    std::uint64_t below(std::uint64_t bound);
    std::string digits(std::size_t n);
    std::string alphanumeric(std::size_t n);
    std::string hex(std::size_t n);
};

// OpenSSL RAND_bytes. Used for PINs, passwords and access codes in production.
class SecureRandom final : public Random {
public:
    std::uint64_t next() override;
};

// Reproducible stream for tests and scripted runs.
class SeededRandom final : public Random {
public:
    explicit SeededRandom(std::uint64_t seed) : engine_(seed) {}
    std::uint64_t next() override;

private:
    std::mutex mu_;
    std::mt19937_64 engine_;
};

}  // namespace ewallet
