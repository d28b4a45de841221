#include "ecoattn/cost_model.hpp"

#include <nlohmann/json.hpp>

#include "ecoattn/attention.hpp"
#include "ecoattn/binary_codes.hpp"
#include "ecoattn/errors.hpp"
#include "ecoattn/numerics.hpp"
#include "ecoattn/random_features.hpp"

namespace ecoattn {

const char* precision_name(Precision p) {
    return p == Precision::fp16 ? "fp16" : "fp32";
}

EnergyTable EnergyTable::default_table() {
    // 45nm per-operation costs.
    EnergyTable t;
    t.add_pj_fp16 = 0.4;
    t.mul_pj_fp16 = 1.1;
    t.add_pj_fp32 = 0.9;
    t.mul_pj_fp32 = 3.7;
    t.add_um2_fp16 = 1360.0;
    t.mul_um2_fp16 = 1640.0;
    t.add_um2_fp32 = 4184.0;
    t.mul_um2_fp32 = 7700.0;
    return t;
}

double EnergyTable::add_pj(Precision p) const {
    return p == Precision::fp16 ? add_pj_fp16 : add_pj_fp32;
}

double EnergyTable::mul_pj(Precision p) const {
    return p == Precision::fp16 ? mul_pj_fp16 : mul_pj_fp32;
}

double energy_of(const OpLedger& ledger, const EnergyTable& table, Precision precision) {
    const double mul_rate = table.mul_pj(precision);
    const double add_rate = table.add_pj(precision);
    // Divisions bill at the multiplier rate; shifts and transcendental
    // evaluations bill at zero.
    return static_cast<double>(ledger.mul) * mul_rate +
           static_cast<double>(ledger.div) * mul_rate +
           static_cast<double>(ledger.add) * add_rate;
}

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::softmax: return "softmax";
        case Variant::kernel_linear: return "kernel_linear";
        case Variant::hashed: return "hashed";
        case Variant::binarized: return "binarized";
    }
    return "softmax";
}

Variant variant_from_name(const std::string& name) {
    if (name == "softmax") return Variant::softmax;
    if (name == "kernel_linear") return Variant::kernel_linear;
    if (name == "hashed") return Variant::hashed;
    if (name == "binarized") return Variant::binarized;
    throw ParamError("unknown variant '" + name +
                     "' (expected softmax, kernel_linear, hashed or binarized)");
}

OpLedger analytic_counts(Variant v, std::size_t n, std::size_t d_p, std::size_t width) {
    if (n == 0 || d_p == 0) {
        throw ParamError("analytic_counts: n and d_p must be positive");
    }
    const std::uint64_t N = n;
    const std::uint64_t D = d_p;

    OpLedger out;
    switch (v) {
        case Variant::softmax: {
            out.mul = 2 * N * N * D + N * N;
            out.add = 2 * N * N * D + 2 * N * N;
            out.exp = N * N;
            out.div = N * N;
            break;
        }
        case Variant::kernel_linear: {
            if (width == 0) {
                throw ParamError("analytic_counts: feature count must be positive");
            }
            const std::uint64_t F = width;
            out.mul = 4 * N * F * D + 3 * N * F;
            out.add = 4 * N * F * D + 4 * N * F;
            out.exp = 2 * N * F;
            out.div = N * (D + 1);
            break;
        }
        case Variant::hashed:
        case Variant::binarized: {
            const std::uint64_t B = (v == Variant::binarized) ? D : width;
            if (B == 0) {
                throw ParamError("analytic_counts: code width must be positive");
            }
            out.add = 2 * N * B * D + 2 * N * B + 2 * N * D + N;
            out.shift = D;
            out.div = N * (D + 1);
            break;
        }
    }
    return out;
}

CountCheck compare_ledgers(const OpLedger& expected, const OpLedger& actual) {
    CountCheck check;
    const struct {
        const char* name;
        std::uint64_t exp;
        std::uint64_t act;
    } fields[] = {
        {"mul", expected.mul, actual.mul},     {"add", expected.add, actual.add},
        {"shift", expected.shift, actual.shift}, {"exp", expected.exp, actual.exp},
        {"div", expected.div, actual.div},
    };
    for (const auto& f : fields) {
        if (f.exp != f.act) {
            check.ok = false;
            check.field = f.name;
            check.expected = f.exp;
            check.actual = f.act;
            check.message = std::string(f.name) + ": expected " + std::to_string(f.exp) +
                            ", instrumented " + std::to_string(f.act);
            return check;
        }
    }
    return check;
}

VerifyReport verify_counts(Variant v,
                           std::size_t n,
                           std::size_t d_p,
                           std::size_t width,
                           SeededRng& rng) {
    VerifyReport report;
    report.variant = v;
    report.n = n;
    report.d_p = d_p;
    report.width = width;
    report.analytic = analytic_counts(v, n, d_p, width);

    // Random-but-valid inputs; the counts depend only on the shapes.
    RealMatrix x(n, d_p);
    for (float& e : x.data()) {
        e = static_cast<float>(rng.next_normal());
    }
    const RealMatrix q = row_l2_normalize(x).matrix;
    RealMatrix v_mat(n, d_p);
    for (float& e : v_mat.data()) {
        e = static_cast<float>(rng.next_normal());
    }

    OpLedger ledger;
    switch (v) {
        case Variant::softmax: {
            softmax_attention(q, q, v_mat, 0.5f, ledger);
            break;
        }
        case Variant::kernel_linear: {
            const RandomFeatureMap map =
                make_random_feature_map(d_p, width, 1.0f, rng);
            kernel_linear_attention(q, q, v_mat, map, ledger);
            break;
        }
        case Variant::hashed: {
            const BinaryCodeMatrix codes = BinaryCodeMatrix::random(n, width, rng);
            hashed_attention(codes, codes, v_mat, ledger);
            break;
        }
        case Variant::binarized: {
            const BinaryCodeMatrix codes = binarize_sign_scale(q).codes;
            hashed_attention(codes, codes, v_mat, ledger);
            break;
        }
    }
    report.instrumented = ledger;
    report.check = compare_ledgers(report.analytic, report.instrumented);
    return report;
}

std::string CostReport::to_json() const {
    nlohmann::ordered_json j;
    j["variant"] = variant;
    j["n"] = n;
    j["d_p"] = d_p;
    j["bits"] = bits;
    j["mul"] = ledger.mul;
    j["add"] = ledger.add;
    j["shift"] = ledger.shift;
    j["exp"] = ledger.exp;
    j["div"] = ledger.div;
    j["energy_pj"] = energy_pj;
    j["precision"] = precision_name(precision);
    return j.dump();
}

} // namespace ecoattn
