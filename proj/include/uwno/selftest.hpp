#pragma once

#include <ostream>

namespace uwno {

// Fast built-in verification: wavelet reconstruction, Parseval, gradient
// checks and the dice counting oracle. Prints one line per suite; returns
// true iff every suite passed.
bool run_selftest(std::ostream& out);

} // namespace uwno
