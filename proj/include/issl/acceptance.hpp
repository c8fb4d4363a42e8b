#pragma once

#include <ostream>

namespace issl::acceptance {

// Runs every acceptance criterion, printing one pass/fail line per criterion.
// Returns true iff all criteria pass.
bool run_all(std::ostream& out);

}  // namespace issl::acceptance
