#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ecoattn/cost_model.hpp"
#include "ecoattn/matrix.hpp"
#include "ecoattn/op_ledger.hpp"

namespace ecoattn {

enum class InputMode { random_unit, two_cluster, file };

/// One benchmark configuration: which variant to run, at what shape, on
/// which inputs, over which seeds.
struct Scenario {
    std::string name = "scenario";
    Variant variant = Variant::softmax;
    std::size_t n = 64;
    std::size_t d_p = 16;
    std::size_t bits = 16;             ///< hash code width b
    std::size_t m = 25;                ///< support samples for hash learning
    std::size_t pairs_per_row = 10;    ///< l
    std::size_t num_features = 64;     ///< random-feature count
    float temperature = 0.5f;
    bool sigma_median = true;          ///< hash-learning bandwidth heuristic
    float sigma = 1.0f;                ///< used when !sigma_median
    float cluster_sep = 4.0f;
    float cluster_noise = 1.0f;
    std::vector<std::uint64_t> seeds = {1};
    InputMode input_mode = InputMode::random_unit;
    std::string input_path;
    bool no_timing = false;            ///< report wall_ms as 0 for byte-stable output

    /// Throws ParamError naming the offending key.
    void validate() const;
};

/// Flat key=value scenario file; '#' starts a comment.  Unknown keys are
/// rejected by name.
Scenario parse_scenario_file(const std::string& path);

/// Applies one "key=value" override (the --set flag).
void apply_override(Scenario& s, const std::string& key, const std::string& value);

/// Comma-separated unsigned 64-bit seed list.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

/// Outcome of one (scenario, seed) run.
struct RunRecord {
    std::string scenario;
    std::string variant;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t d_p = 0;
    std::size_t bits = 0;        ///< code width in play: b, d_p for binarized, else 0
    double mean_err = 0.0;       ///< mean over tokens of L1 row error / d_p
    double max_err = 0.0;        ///< max over tokens of the same metric
    OpLedger ledger;             ///< attention-core events only
    double energy_pj = 0.0;
    double wall_ms = 0.0;
    bool denominators_positive = true;  ///< hashed variants assert this
};

/// Runs every seed of the scenario.  Seeds execute in parallel when the
/// ECOATTN_THREADS environment variable allows it; records are ordered by
/// seed regardless.
std::vector<RunRecord> run_scenario(const Scenario& s);

/// Fixed-column CSV (header + one row per record, trailing newline):
/// scenario,variant,seed,n,d_p,bits,mean_err,max_err,mul,add,shift,exp,div,energy_pj,wall_ms
std::string to_csv(const std::vector<RunRecord>& records);

enum class SweepAxis { n, bits, features };

SweepAxis sweep_axis_from_name(const std::string& name);
const char* sweep_axis_name(SweepAxis axis);

struct SweepResult {
    std::vector<RunRecord> records;
    SweepAxis axis = SweepAxis::n;
    std::vector<std::size_t> values;
    /// Least-squares slope of log(ledger total) vs log(axis value).
    double slope = 0.0;
};

/// Reruns `base` with the axis overridden per value (ascending, >= 2
/// entries).  The bits axis applies to code-based variants and the features
/// axis to kernel_linear; mismatches are parameter errors.
SweepResult sweep(const Scenario& base,
                  SweepAxis axis,
                  const std::vector<std::size_t>& values);

/// JSON document with a "records" array mirroring the CSV fields, plus a
/// "scaling" object when a sweep summary is supplied.
std::string to_json(const std::vector<RunRecord>& records,
                    const SweepResult* sweep_summary = nullptr);

/// Deterministic invariant suite behind the `selftest` CLI verb.  Prints one
/// "selftest: <name> PASS|FAIL" line per check; returns true when all pass.
/// Output bytes are identical across runs.
bool run_selftest(std::ostream& out);

/// Instrumented-vs-analytic count verification grid behind the `verify` CLI
/// verb; one line per configuration, returns true when every ledger matches.
bool run_verify_grid(std::ostream& out);

} // namespace ecoattn
