#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace rankforge {

// Single exception type carrying a machine-readable category ("MissingProduct",
// "GroupSizeError", ...). The CLI prints "error: <category>: <message>" and
// exits nonzero; tests match on category().
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& message)
        : std::runtime_error(category + ": " + message), category_(std::move(category)) {}

    const std::string& category() const noexcept { return category_; }

private:
    std::string category_;
};

[[noreturn]] inline void fail(std::string category, const std::string& message) {
    throw Error(std::move(category), message);
}

}  // namespace rankforge
