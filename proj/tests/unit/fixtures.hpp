#pragma once

#include "bubble/equilibrium.hpp"

namespace testing {

inline bubble::Scenario small_scenario(const char* name, int paths, int steps) {
    bubble::Scenario s = bubble::preset(name);
    s.numerics.n_paths = paths;
    s.numerics.n_steps = steps;
    return s;
}

// Solved once per test binary.
inline const bubble::Equilibrium& default_equilibrium() {
    static const bubble::Equilibrium eq = bubble::picard_solve(small_scenario("Default", 4000, 50));
    return eq;
}

inline const bubble::Equilibrium& nobubble_equilibrium() {
    static const bubble::Equilibrium eq = bubble::picard_solve(small_scenario("NoBubble", 4000, 50));
    return eq;
}

}  // namespace testing
