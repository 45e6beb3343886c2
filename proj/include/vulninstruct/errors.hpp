#pragma once

#include <stdexcept>
#include <string>

namespace vulninstruct {

// Base class for every error raised by the library. Subclasses exist where a
// caller is expected to branch on the failure kind.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class LexError : public Error {
public:
    LexError(const std::string& what, int line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

class SegmentError : public Error {
public:
    using Error::Error;
};

class PatchParseError : public Error {
public:
    // hunk_index is 0-based; the message counts from 1
    PatchParseError(const std::string& what, int hunk_index)
        : Error(what + " (hunk " + std::to_string(hunk_index + 1) + ")"), hunk_index_(hunk_index) {}
    int hunk_index() const { return hunk_index_; }

private:
    int hunk_index_;
};

class CorpusError : public Error {
public:
    using Error::Error;
};

class EndpointError : public Error {
public:
    EndpointError(const std::string& what, int status = 0) : Error(what), status_(status) {}
    int status() const { return status_; }

private:
    int status_;
};

class AuthError : public EndpointError {
public:
    using EndpointError::EndpointError;
};

class BudgetError : public Error {
public:
    using Error::Error;
};

class BudgetExhausted : public Error {
public:
    using Error::Error;
};

// The model declined to answer.
class RefusalError : public Error {
public:
    using Error::Error;
};

class AttackError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace vulninstruct
