#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace tw {

template <class... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    (os << ... << args);
    return os.str();
}

template <class... Args>
[[noreturn]] void fail(Args&&... args) {
    throw std::runtime_error(cat(std::forward<Args>(args)...));
}

template <class... Args>
void require(bool cond, Args&&... args) {
    if (!cond) fail(std::forward<Args>(args)...);
}

std::string shape_str(const std::vector<std::int64_t>& shape);

}  // namespace tw
