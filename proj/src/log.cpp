#include "log.hpp"

#include <cstdlib>
#include <iostream>

namespace qme::log {

int level() {
    static const int cached = [] {
        const char* env = std::getenv("QME_LOG");
        if (env == nullptr || *env == '\0') return 0;
        return std::atoi(env);
    }();
    return cached;
}

void write(int min_level, const std::string& message) {
    if (level() < min_level) return;
    std::cerr << "[qme] " << message << "\n";
}

}  // namespace qme::log
