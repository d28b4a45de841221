#pragma once

#include <cstdint>

namespace ecoattn {

/// Exact arithmetic-event counters accumulated by an instrumented kernel.
///
/// Conventions (these are contracts, not approximations):
///  * each multiply-accumulate contributes one `mul` and one `add`;
///    accumulating n terms into a zero-initialised accumulator costs n adds;
///  * a product between a {-1,+1} code entry and a real operand is executed
///    as a sign-conditional accumulate and billed as one `add`;
///  * elementwise division of a vector by a scalar is executed as one
///    reciprocal plus one scaling per entry, and every one of those events
///    is billed under `div`;
///  * power-of-two scalings are billed under `shift`;
///  * transcendental evaluations (exp, cos) are billed under `exp`;
///  * folding of configuration constants happens at setup time and is never
///    billed; per-element application of such constants is billed.
struct OpLedger {
    std::uint64_t mul = 0;
    std::uint64_t add = 0;
    std::uint64_t shift = 0;
    std::uint64_t exp = 0;
    std::uint64_t div = 0;

    std::uint64_t total() const { return mul + add + shift + exp + div; }

    OpLedger& merge(const OpLedger& other) {
        mul += other.mul;
        add += other.add;
        shift += other.shift;
        exp += other.exp;
        div += other.div;
        return *this;
    }

    friend OpLedger operator+(OpLedger lhs, const OpLedger& rhs) {
        lhs.merge(rhs);
        return lhs;
    }

    bool operator==(const OpLedger&) const = default;
};

} // namespace ecoattn
