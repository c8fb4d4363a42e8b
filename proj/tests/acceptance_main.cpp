#include <iostream>

#include "issl/acceptance.hpp"

int main() {
    bool ok = issl::acceptance::run_all(std::cout);
    return ok ? 0 : 1;
}
