#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ewallet {

using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

class Clock {
public:
    virtual ~Clock() = default;
    virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
public:
    Timestamp now() const override;
};

// Test clock; starts at a fixed instant and only moves when told to.
class ManualClock final : public Clock {
public:
    explicit ManualClock(Timestamp start = Timestamp{std::chrono::milliseconds{1'700'000'000'000}})
        : ms_(start.time_since_epoch().count()) {}

    Timestamp now() const override { return Timestamp{std::chrono::milliseconds{ms_.load()}}; }
    void advance(std::chrono::milliseconds d) { ms_ += d.count(); }
    void set(Timestamp t) { ms_ = t.time_since_epoch().count(); }

private:
    std::atomic<std::int64_t> ms_;
};

// ISO-8601 UTC with millisecond precision: 2023-11-14T22:13:20.000Z
std::string format_timestamp(Timestamp t);
std::optional<Timestamp> parse_timestamp(std::string_view text);

}  // namespace ewallet
