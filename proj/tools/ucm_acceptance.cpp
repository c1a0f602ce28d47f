#include "ucm/acceptance.hpp"

#include <iostream>

int main() {
    auto checks = ucm::run_acceptance();
    bool all = true;
    for (const auto& c : checks) {
        std::cout << ucm::format_check(c) << '\n';
        all = all && c.passed;
    }
    std::size_t passed = 0;
    for (const auto& c : checks) passed += c.passed;
    std::cout << passed << "/" << checks.size() << " criteria passed\n";
    return all ? 0 : 1;
}
