#pragma once

#include <stdexcept>
#include <string>

namespace dfs {

// Exit status reported by the command-line tool for each failure class.
enum class ErrorKind : int {
    usage = 2,
    missing_input = 3,
    schema_mismatch = 4,
    infeasible = 5,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

struct MissingInputError : Error {
    explicit MissingInputError(const std::string& what) : Error(ErrorKind::missing_input, what) {}
};

struct SchemaError : Error {
    explicit SchemaError(const std::string& what) : Error(ErrorKind::schema_mismatch, what) {}
};

struct InfeasibleError : Error {
    explicit InfeasibleError(const std::string& what) : Error(ErrorKind::infeasible, what) {}
};

}  // namespace dfs
