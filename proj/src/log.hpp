// log.hpp — stderr logging gated by the QME_LOG environment variable
// (0 = silent, 1 = info, 2 = debug). Default is silent.

#pragma once

#include <sstream>
#include <string>

namespace qme::log {

int level();

void write(int min_level, const std::string& message);

template <typename... Args>
void info(Args&&... args) {
    if (level() < 1) return;
    std::ostringstream os;
    (os << ... << args);
    write(1, os.str());
}

template <typename... Args>
void debug(Args&&... args) {
    if (level() < 2) return;
    std::ostringstream os;
    (os << ... << args);
    write(2, os.str());
}

}  // namespace qme::log
