#pragma once

#include <iostream>
#include <mutex>
#include <string>

namespace crowdps {

/// Minimal stderr logger. Warnings can be silenced (tests) or counted.
class Log {
public:
    static Log& instance() {
        static Log log;
        return log;
    }

    void warn(const std::string& msg) {
        std::lock_guard<std::mutex> lock(mutex_);
        ++warning_count_;
        if (!quiet_) std::cerr << "[warn] " << msg << "\n";
    }

    void info(const std::string& msg) {
        std::lock_guard<std::mutex> lock(mutex_);
        if (!quiet_) std::cerr << "[info] " << msg << "\n";
    }

    void set_quiet(bool q) { quiet_ = q; }
    long warning_count() const { return warning_count_; }

private:
    std::mutex mutex_;
    bool quiet_ = false;
    long warning_count_ = 0;
};

inline void log_warn(const std::string& msg) { Log::instance().warn(msg); }
inline void log_info(const std::string& msg) { Log::instance().info(msg); }

} // namespace crowdps
