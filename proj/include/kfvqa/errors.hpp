#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace kfvqa {

// Failure category, mapped to distinct CLI exit codes.
enum class ErrorKind { config, data, backend, integrity, internal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), kind_(kind), code_(std::move(code)) {}

    ErrorKind kind() const { return kind_; }
    const std::string& code() const { return code_; }

    static Error config(std::string code, const std::string& message) {
        return {ErrorKind::config, std::move(code), message};
    }
    static Error data(std::string code, const std::string& message) {
        return {ErrorKind::data, std::move(code), message};
    }
    static Error backend(std::string code, const std::string& message) {
        return {ErrorKind::backend, std::move(code), message};
    }
    static Error integrity(std::string code, const std::string& message) {
        return {ErrorKind::integrity, std::move(code), message};
    }
    static Error internal(std::string code, const std::string& message) {
        return {ErrorKind::internal, std::move(code), message};
    }

private:
    ErrorKind kind_;
    std::string code_;
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::data: return 3;
        case ErrorKind::backend: return 4;
        case ErrorKind::integrity: return 5;
        case ErrorKind::internal: return 1;
    }
    return 1;
}

}  // namespace kfvqa
