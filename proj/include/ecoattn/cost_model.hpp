#pragma once

#include <cstdint>
#include <string>

#include "ecoattn/op_ledger.hpp"
#include "ecoattn/rng.hpp"

namespace ecoattn {

enum class Precision { fp16, fp32 };

const char* precision_name(Precision p);

/// Per-operation energy (picojoules) and area (square microns) for 45nm
/// adders and multipliers at both precisions.
struct EnergyTable {
    double add_pj_fp16 = 0.0;
    double mul_pj_fp16 = 0.0;
    double add_pj_fp32 = 0.0;
    double mul_pj_fp32 = 0.0;
    double add_um2_fp16 = 0.0;
    double mul_um2_fp16 = 0.0;
    double add_um2_fp32 = 0.0;
    double mul_um2_fp32 = 0.0;

    static EnergyTable default_table();

    double add_pj(Precision p) const;
    double mul_pj(Precision p) const;
};

/// Total energy of a ledger: multiplies and divisions bill at the
/// multiplier rate, additions at the adder rate, shifts and transcendental
/// lookups at zero.
double energy_of(const OpLedger& ledger, const EnergyTable& table, Precision precision);

enum class Variant { softmax, kernel_linear, hashed, binarized };

const char* variant_name(Variant v);

/// Parses "softmax" / "kernel_linear" / "hashed" / "binarized".
Variant variant_from_name(const std::string& name);

/// Closed-form ledger for one attention-core invocation with n queries and
/// keys and head width d_p.  `width` is the code width for hashed and the
/// feature count for kernel_linear; it is ignored for softmax, and the
/// binarized variant always uses d_p as its code width.
///
/// The formulas mirror the instrumented kernels term by term:
///
///  softmax       mul = 2 n^2 d_p + n^2      (score MACs + temperature + mix MACs)
///                add = 2 n^2 d_p + 2 n^2    (score/mix MACs + shift and sum)
///                exp = n^2,  div = n^2
///
///  kernel_linear mul = 4 n f d_p + 3 n f    (features, summaries, queries)
///                add = 4 n f d_p + 4 n f
///                exp = 2 n f,  div = n (d_p + 1)
///
///  hashed        add = 2 n b d_p + 2 n b + 2 n d_p + n
///                shift = d_p,  div = n (d_p + 1),  mul = 0
///
///  binarized     the hashed formula with b = d_p
OpLedger analytic_counts(Variant v, std::size_t n, std::size_t d_p, std::size_t width);

struct CountCheck {
    bool ok = true;
    std::string field;            ///< first divergent counter, empty when ok
    std::uint64_t expected = 0;
    std::uint64_t actual = 0;
    std::string message;
};

/// Field-by-field comparison; reports the first divergent counter.
CountCheck compare_ledgers(const OpLedger& expected, const OpLedger& actual);

struct VerifyReport {
    Variant variant = Variant::softmax;
    std::size_t n = 0;
    std::size_t d_p = 0;
    std::size_t width = 0;
    OpLedger analytic;
    OpLedger instrumented;
    CountCheck check;
};

/// Runs the real kernel on seeded random inputs and compares its
/// instrumented ledger with the closed form.  Exactness is the contract:
/// any divergence is a defect in one side or the other.
VerifyReport verify_counts(Variant v,
                           std::size_t n,
                           std::size_t d_p,
                           std::size_t width,
                           SeededRng& rng);

/// Cost summary for one kernel invocation, serializable to JSON.
struct CostReport {
    std::string variant;
    std::size_t n = 0;
    std::size_t d_p = 0;
    std::size_t bits = 0;
    OpLedger ledger;
    double energy_pj = 0.0;
    Precision precision = Precision::fp32;

    std::string to_json() const;
};

} // namespace ecoattn
