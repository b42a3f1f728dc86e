#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <string>

namespace spark {

class Clock {
public:
    using time_point = std::chrono::system_clock::time_point;
    virtual ~Clock() = default;
    virtual time_point now() = 0;
};

class SystemClock : public Clock {
public:
    time_point now() override { return std::chrono::system_clock::now(); }
};

/// Logical clock for replayable runs: every reading advances by `step`.
class StepClock : public Clock {
public:
    explicit StepClock(time_point start = time_point{std::chrono::seconds{1735689600}},
                       std::chrono::milliseconds step = std::chrono::milliseconds{1})
        : current_(start), step_(step) {}

    time_point now() override {
        std::lock_guard lock(mutex_);
        auto t = current_;
        current_ += step_;
        return t;
    }

private:
    std::mutex mutex_;
    time_point current_;
    std::chrono::milliseconds step_;
};

/// "YYYY-MM-DDTHH:MM:SS.mmmZ"
inline std::string format_timestamp(Clock::time_point t) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
    std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                  static_cast<int>(ms % 1000));
    return buf;
}

}  // namespace spark
