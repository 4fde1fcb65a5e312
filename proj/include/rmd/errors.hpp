#pragma once

#include <stdexcept>
#include <string>

namespace rmd {

// Bad user input: missing files, malformed annotations, usage errors. Exit code 2.
class InputError : public std::runtime_error {
public:
    explicit InputError(const std::string& msg) : std::runtime_error(msg) {}
};

// Parse failure in a line-oriented file; line is 1-based.
class ParseError : public InputError {
public:
    ParseError(const std::string& path, int line, const std::string& msg)
        : InputError(path + ":" + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// LLM / embedding backend failure after retries. Exit code 3.
class ProviderError : public std::runtime_error {
public:
    explicit ProviderError(const std::string& msg) : std::runtime_error(msg) {}
};

// Agent reply violated the required shape after all retries.
class DecompositionError : public ProviderError {
public:
    DecompositionError(const std::string& msg, std::string raw_reply)
        : ProviderError(msg), raw_reply_(std::move(raw_reply)) {}
    const std::string& raw_reply() const { return raw_reply_; }

private:
    std::string raw_reply_;
};

}  // namespace rmd
