#ifndef HYPERFC_LOG_HPP
#define HYPERFC_LOG_HPP

#include <sstream>
#include <string>

namespace hyperfc {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from the HYPERFC_LOG environment variable
// (error|warn|info|debug), default warn.
LogLevel log_level();
void set_log_level(LogLevel level);
void log_message(LogLevel level, const std::string& msg);

namespace detail {
template <typename... Args>
std::string log_format(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}
} // namespace detail

template <typename... Args>
void log_error(Args&&... args) {
    log_message(LogLevel::Error, detail::log_format(std::forward<Args>(args)...));
}
template <typename... Args>
void log_warn(Args&&... args) {
    if (log_level() >= LogLevel::Warn)
        log_message(LogLevel::Warn, detail::log_format(std::forward<Args>(args)...));
}
template <typename... Args>
void log_info(Args&&... args) {
    if (log_level() >= LogLevel::Info)
        log_message(LogLevel::Info, detail::log_format(std::forward<Args>(args)...));
}
template <typename... Args>
void log_debug(Args&&... args) {
    if (log_level() >= LogLevel::Debug)
        log_message(LogLevel::Debug, detail::log_format(std::forward<Args>(args)...));
}

} // namespace hyperfc

#endif
