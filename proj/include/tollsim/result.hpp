#pragma once

#include <stdexcept>
#include <utility>
#include <variant>

namespace tollsim {

// Minimal expected-style carrier for operations whose failure is ordinary
// control flow (ledger rejections, negotiation refusals). T and E must be
// distinct types.
template <typename T, typename E>
class Result {
public:
    Result(T value) : v_(std::move(value)) {}
    Result(E error) : v_(std::move(error)) {}

    bool ok() const { return std::holds_alternative<T>(v_); }
    explicit operator bool() const { return ok(); }

    const T& value() const& {
        if (!ok()) throw std::logic_error("Result::value() on error");
        return std::get<T>(v_);
    }
    T& value() & {
        if (!ok()) throw std::logic_error("Result::value() on error");
        return std::get<T>(v_);
    }
    T&& value() && {
        if (!ok()) throw std::logic_error("Result::value() on error");
        return std::get<T>(std::move(v_));
    }

    const E& error() const& {
        if (ok()) throw std::logic_error("Result::error() on success");
        return std::get<E>(v_);
    }

private:
    std::variant<T, E> v_;
};

}  // namespace tollsim
