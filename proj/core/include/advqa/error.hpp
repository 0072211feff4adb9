#pragma once

#include <stdexcept>
#include <string>

namespace advqa {

/// Library-wide exception. `code()` is a short stable identifier
/// (e.g. "duplicate_id", "unknown_session") that the HTTP layer and the
/// CLI surface verbatim to clients.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

} // namespace advqa
