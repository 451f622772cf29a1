#pragma once

#include <stdexcept>
#include <type_traits>
#include <utility>
#include <variant>

namespace flowatlas {

// Minimal value-or-error carrier (std::expected is C++23). T and E must be
// distinct types so construction is unambiguous.
template <class T, class E>
class Expected
{
    static_assert(!std::is_same_v<T, E>, "value and error types must differ");

public:
    Expected(T value) : data_(std::in_place_index<0>, std::move(value)) {}
    Expected(E error) : data_(std::in_place_index<1>, std::move(error)) {}

    bool has_value() const noexcept { return data_.index() == 0; }
    explicit operator bool() const noexcept { return has_value(); }

    const T& value() const&
    {
        if (!has_value())
            throw std::logic_error("Expected::value() on an error");
        return std::get<0>(data_);
    }
    T&& value() &&
    {
        if (!has_value())
            throw std::logic_error("Expected::value() on an error");
        return std::get<0>(std::move(data_));
    }
    const E& error() const&
    {
        if (has_value())
            throw std::logic_error("Expected::error() on a value");
        return std::get<1>(data_);
    }

    const T& operator*() const& { return value(); }
    const T* operator->() const { return &value(); }

private:
    std::variant<T, E> data_;
};

} // namespace flowatlas
