#pragma once

#include <stdexcept>
#include <string>

namespace landreuse {

// Base class for every error raised by the library. The kind drives the
// HTTP status mapping in the service layer.
class Error : public std::runtime_error {
public:
    enum class Kind { invalid_input, not_found, conflict, retry_later, io };

    explicit Error(const std::string& what, Kind kind = Kind::invalid_input)
        : std::runtime_error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

class NotFound : public Error {
public:
    explicit NotFound(const std::string& what) : Error(what, Kind::not_found) {}
};

class Conflict : public Error {
public:
    explicit Conflict(const std::string& what) : Error(what, Kind::conflict) {}
};

class RetryLater : public Error {
public:
    explicit RetryLater(const std::string& what) : Error(what, Kind::retry_later) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(what, Kind::io) {}
};

}  // namespace landreuse
