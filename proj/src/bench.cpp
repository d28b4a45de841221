#include "ecoattn/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "ecoattn/attention.hpp"
#include "ecoattn/binary_codes.hpp"
#include "ecoattn/errors.hpp"
#include "ecoattn/hash_learning.hpp"
#include "ecoattn/numerics.hpp"
#include "ecoattn/random_features.hpp"
#include "ecoattn/rng.hpp"

namespace ecoattn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::size_t parse_count(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw ParamError("scenario key '" + key + "': '" + text + "' is not a count");
    }
    if (pos != text.size() || text[0] == '-') {
        throw ParamError("scenario key '" + key + "': '" + text + "' is not a count");
    }
    return static_cast<std::size_t>(value);
}

float parse_real(const std::string& key, const std::string& text) {
    std::size_t pos = 0;
    float value = 0.0f;
    try {
        value = std::stof(text, &pos);
    } catch (const std::exception&) {
        throw ParamError("scenario key '" + key + "': '" + text + "' is not a number");
    }
    if (pos != text.size()) {
        throw ParamError("scenario key '" + key + "': '" + text + "' is not a number");
    }
    return value;
}

InputMode input_mode_from_name(const std::string& name) {
    if (name == "random_unit") return InputMode::random_unit;
    if (name == "two_cluster") return InputMode::two_cluster;
    if (name == "file") return InputMode::file;
    throw ParamError("scenario key 'input': unknown mode '" + name +
                     "' (expected random_unit, two_cluster or file)");
}

} // namespace

void Scenario::validate() const {
    if (name.empty()) {
        throw ParamError("scenario key 'name': must be non-empty");
    }
    if (name.find(',') != std::string::npos || name.find('\n') != std::string::npos) {
        throw ParamError("scenario key 'name': must not contain commas or newlines");
    }
    if (n == 0) {
        throw ParamError("scenario key 'n': must be positive");
    }
    if (d_p == 0) {
        throw ParamError("scenario key 'd_p': must be positive");
    }
    if (bits == 0) {
        throw ParamError("scenario key 'bits': must be positive");
    }
    if (num_features == 0) {
        throw ParamError("scenario key 'features': must be positive");
    }
    if (!(temperature > 0.0f)) {
        throw ParamError("scenario key 'temperature': must be positive");
    }
    if (!sigma_median && !(sigma > 0.0f)) {
        throw ParamError("scenario key 'sigma': must be positive or 'median'");
    }
    if (!(cluster_sep >= 0.0f)) {
        throw ParamError("scenario key 'cluster_sep': must be non-negative");
    }
    if (!(cluster_noise >= 0.0f)) {
        throw ParamError("scenario key 'cluster_noise': must be non-negative");
    }
    if (seeds.empty()) {
        throw ParamError("scenario key 'seeds': must list at least one seed");
    }
    if (input_mode == InputMode::file && input_path.empty()) {
        throw ParamError("scenario key 'input_path': required when input=file");
    }
    if (variant == Variant::hashed) {
        if (m == 0) {
            throw ParamError("scenario key 'm': must be positive");
        }
        if (m > n) {
            throw ParamError("scenario key 'm': support samples exceed n");
        }
        if (pairs_per_row == 0 || 2 * pairs_per_row >= n) {
            throw ParamError("scenario key 'l': need 0 < 2*l < n");
        }
    }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) {
            throw ParamError("seed list: empty entry in '" + text + "'");
        }
        std::size_t pos = 0;
        unsigned long long value = 0;
        try {
            value = std::stoull(item, &pos);
        } catch (const std::exception&) {
            throw ParamError("seed list: '" + item + "' is not a 64-bit seed");
        }
        if (pos != item.size() || item[0] == '-') {
            throw ParamError("seed list: '" + item + "' is not a 64-bit seed");
        }
        seeds.push_back(static_cast<std::uint64_t>(value));
    }
    if (seeds.empty()) {
        throw ParamError("seed list: no seeds in '" + text + "'");
    }
    return seeds;
}

void apply_override(Scenario& s, const std::string& key, const std::string& value) {
    if (key == "name") {
        s.name = value;
    } else if (key == "variant") {
        s.variant = variant_from_name(value);
    } else if (key == "n") {
        s.n = parse_count(key, value);
    } else if (key == "d_p") {
        s.d_p = parse_count(key, value);
    } else if (key == "bits") {
        s.bits = parse_count(key, value);
    } else if (key == "m") {
        s.m = parse_count(key, value);
    } else if (key == "l") {
        s.pairs_per_row = parse_count(key, value);
    } else if (key == "features") {
        s.num_features = parse_count(key, value);
    } else if (key == "temperature") {
        s.temperature = parse_real(key, value);
    } else if (key == "sigma") {
        if (value == "median") {
            s.sigma_median = true;
        } else {
            s.sigma_median = false;
            s.sigma = parse_real(key, value);
        }
    } else if (key == "cluster_sep") {
        s.cluster_sep = parse_real(key, value);
    } else if (key == "cluster_noise") {
        s.cluster_noise = parse_real(key, value);
    } else if (key == "seeds") {
        s.seeds = parse_seed_list(value);
    } else if (key == "input") {
        s.input_mode = input_mode_from_name(value);
    } else if (key == "input_path") {
        s.input_path = value;
    } else {
        throw ParamError("unknown scenario key '" + key + "'");
    }
}

Scenario parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("scenario file: cannot open " + path);
    }
    Scenario s;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParamError("scenario file " + path + ":" + std::to_string(line_no) +
                             ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ParamError("scenario file " + path + ":" + std::to_string(line_no) +
                             ": expected key=value, got '" + line + "'");
        }
        apply_override(s, key, value);
    }
    return s;
}

namespace {

struct SeedInputs {
    RealMatrix q;  ///< tied query/key matrix, rows unit L2
    RealMatrix v;
};

RealMatrix random_normal_matrix(std::size_t rows, std::size_t cols, SeededRng& rng) {
    RealMatrix m(rows, cols);
    for (float& x : m.data()) {
        x = static_cast<float>(rng.next_normal());
    }
    return m;
}

RealMatrix load_input_matrix(const std::string& path, std::size_t rows, std::size_t cols,
                             std::ifstream& in) {
    RealMatrix m(rows, cols);
    for (float& x : m.data()) {
        if (!(in >> x)) {
            throw IoError("input file " + path + ": expected " +
                          std::to_string(2 * rows * cols) + " numbers");
        }
    }
    return m;
}

SeedInputs make_inputs(const Scenario& s, SeededRng& rng) {
    SeedInputs inputs;
    switch (s.input_mode) {
        case InputMode::random_unit: {
            inputs.q = row_l2_normalize(random_normal_matrix(s.n, s.d_p, rng)).matrix;
            break;
        }
        case InputMode::two_cluster: {
            // Two blobs at +/- (sep/2) along a random unit direction, rows
            // alternating between clusters, then normalized back to the sphere.
            RealMatrix direction = random_normal_matrix(1, s.d_p, rng);
            const auto normed = row_l2_normalize(direction);
            if (!normed.degenerate_rows.empty()) {
                for (std::size_t c = 0; c < s.d_p; ++c) {
                    direction.at(0, c) = (c == 0) ? 1.0f : 0.0f;
                }
            } else {
                direction = normed.matrix;
            }
            RealMatrix x(s.n, s.d_p);
            for (std::size_t i = 0; i < s.n; ++i) {
                const float side = (i % 2 == 0) ? 0.5f : -0.5f;
                for (std::size_t c = 0; c < s.d_p; ++c) {
                    x.at(i, c) = side * s.cluster_sep * direction.at(0, c) +
                                 s.cluster_noise * static_cast<float>(rng.next_normal());
                }
            }
            inputs.q = row_l2_normalize(x).matrix;
            break;
        }
        case InputMode::file: {
            std::ifstream in(s.input_path);
            if (!in) {
                throw IoError("input file " + s.input_path + ": cannot open");
            }
            const RealMatrix raw_q = load_input_matrix(s.input_path, s.n, s.d_p, in);
            inputs.v = load_input_matrix(s.input_path, s.n, s.d_p, in);
            float tail = 0.0f;
            if (in >> tail) {
                throw IoError("input file " + s.input_path + ": trailing numbers beyond " +
                              std::to_string(2 * s.n * s.d_p));
            }
            raw_q.check_finite("input file q");
            inputs.v.check_finite("input file v");
            inputs.q = row_l2_normalize(raw_q).matrix;
            return inputs;
        }
    }
    inputs.v = random_normal_matrix(s.n, s.d_p, rng);
    return inputs;
}

RunRecord run_one_seed(const Scenario& s, std::uint64_t seed) {
    SeededRng rng(seed);
    const SeedInputs inputs = make_inputs(s, rng);

    // Exact reference, computed once per seed.  Its weight matrix doubles as
    // the self-supervision scores for hash learning.
    OpLedger reference_ledger;
    RealMatrix reference_weights;
    const RealMatrix reference = softmax_attention(inputs.q, inputs.q, inputs.v,
                                                   s.temperature, reference_ledger,
                                                   &reference_weights);

    RunRecord record;
    record.scenario = s.name;
    record.variant = variant_name(s.variant);
    record.seed = seed;
    record.n = s.n;
    record.d_p = s.d_p;

    const auto started = std::chrono::steady_clock::now();
    RealMatrix output;
    OpLedger ledger;
    std::int64_t min_denominator = 1;
    switch (s.variant) {
        case Variant::softmax: {
            output = softmax_attention(inputs.q, inputs.q, inputs.v, s.temperature, ledger);
            record.bits = 0;
            break;
        }
        case Variant::kernel_linear: {
            // Matching the reference requires the kernel bandwidth to satisfy
            // sigma^2 = temperature on unit-norm rows.
            const float sigma = std::sqrt(s.temperature);
            const RandomFeatureMap map =
                make_random_feature_map(s.d_p, s.num_features, sigma, rng);
            output = kernel_linear_attention(inputs.q, inputs.q, inputs.v, map, ledger);
            record.bits = 0;
            break;
        }
        case Variant::hashed: {
            HashLearningConfig hcfg;
            hcfg.m = s.m;
            hcfg.bits = s.bits;
            hcfg.pairs_per_row = s.pairs_per_row;
            hcfg.sigma_mode = s.sigma_median ? SigmaMode::median : SigmaMode::fixed;
            hcfg.sigma = s.sigma;
            const LearnReport report =
                learn_hash_functions(inputs.q, reference_weights, hcfg, rng);
            const BinaryCodeMatrix codes = hash_codes(report.hfs, inputs.q);
            output = hashed_attention(codes, codes, inputs.v, ledger, &min_denominator);
            record.bits = s.bits;
            break;
        }
        case Variant::binarized: {
            const BinaryCodeMatrix codes = binarize_sign_scale(inputs.q).codes;
            output = hashed_attention(codes, codes, inputs.v, ledger, &min_denominator);
            record.bits = s.d_p;
            break;
        }
    }
    const auto finished = std::chrono::steady_clock::now();

    double sum_err = 0.0;
    double max_err = 0.0;
    for (std::size_t t = 0; t < s.n; ++t) {
        double row_err = 0.0;
        for (std::size_t c = 0; c < s.d_p; ++c) {
            row_err += std::fabs(static_cast<double>(output.at(t, c)) -
                                 static_cast<double>(reference.at(t, c)));
        }
        row_err /= static_cast<double>(s.d_p);
        sum_err += row_err;
        max_err = std::max(max_err, row_err);
    }
    record.mean_err = sum_err / static_cast<double>(s.n);
    record.max_err = max_err;
    record.ledger = ledger;
    record.energy_pj = energy_of(ledger, EnergyTable::default_table(), Precision::fp32);
    record.denominators_positive = min_denominator > 0;
    if (!s.no_timing) {
        record.wall_ms =
            std::chrono::duration<double, std::milli>(finished - started).count();
    }
    return record;
}

std::size_t thread_budget() {
    const char* env = std::getenv("ECOATTN_THREADS");
    if (env == nullptr || *env == '\0') {
        return 1;
    }
    const std::string text(env);
    std::size_t pos = 0;
    unsigned long long value = 0;
    try {
        value = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw ParamError("ECOATTN_THREADS: '" + text + "' is not a positive integer");
    }
    if (pos != text.size() || value == 0) {
        throw ParamError("ECOATTN_THREADS: '" + text + "' is not a positive integer");
    }
    return static_cast<std::size_t>(value);
}

} // namespace

namespace {

/// Canonical emission order: by (scenario, seed), stable for duplicates.
void sort_records(std::vector<RunRecord>& records) {
    std::stable_sort(records.begin(), records.end(),
                     [](const RunRecord& a, const RunRecord& b) {
                         return a.scenario != b.scenario ? a.scenario < b.scenario
                                                         : a.seed < b.seed;
                     });
}

} // namespace

std::vector<RunRecord> run_scenario(const Scenario& s) {
    s.validate();
    const std::size_t workers = std::min(thread_budget(), s.seeds.size());

    std::vector<RunRecord> records(s.seeds.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < s.seeds.size(); ++i) {
            records[i] = run_one_seed(s, s.seeds[i]);
        }
        sort_records(records);
        return records;
    }

    // Each seed's pipeline is isolated (own RNG, own ledger); slots are
    // preassigned so parallel execution cannot change output order.
    std::vector<std::exception_ptr> failures(s.seeds.size());
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w]() {
            for (std::size_t i = w; i < s.seeds.size(); i += workers) {
                try {
                    records[i] = run_one_seed(s, s.seeds[i]);
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    for (const auto& failure : failures) {
        if (failure) {
            std::rethrow_exception(failure);
        }
    }
    sort_records(records);
    return records;
}

namespace {

std::string fixed6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string sig6(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

} // namespace

std::string to_csv(const std::vector<RunRecord>& records) {
    if (records.empty()) {
        throw ParamError("to_csv: no records");
    }
    std::string out =
        "scenario,variant,seed,n,d_p,bits,mean_err,max_err,mul,add,shift,exp,div,"
        "energy_pj,wall_ms\n";
    for (const RunRecord& r : records) {
        out += r.scenario;
        out += ',';
        out += r.variant;
        out += ',';
        out += std::to_string(r.seed);
        out += ',';
        out += std::to_string(r.n);
        out += ',';
        out += std::to_string(r.d_p);
        out += ',';
        out += std::to_string(r.bits);
        out += ',';
        out += fixed6(r.mean_err);
        out += ',';
        out += fixed6(r.max_err);
        out += ',';
        out += std::to_string(r.ledger.mul);
        out += ',';
        out += std::to_string(r.ledger.add);
        out += ',';
        out += std::to_string(r.ledger.shift);
        out += ',';
        out += std::to_string(r.ledger.exp);
        out += ',';
        out += std::to_string(r.ledger.div);
        out += ',';
        out += sig6(r.energy_pj);
        out += ',';
        out += fixed6(r.wall_ms);
        out += '\n';
    }
    return out;
}

std::string to_json(const std::vector<RunRecord>& records, const SweepResult* sweep_summary) {
    if (records.empty()) {
        throw ParamError("to_json: no records");
    }
    nlohmann::ordered_json doc;
    doc["records"] = nlohmann::ordered_json::array();
    for (const RunRecord& r : records) {
        nlohmann::ordered_json row;
        row["scenario"] = r.scenario;
        row["variant"] = r.variant;
        row["seed"] = r.seed;
        row["n"] = r.n;
        row["d_p"] = r.d_p;
        row["bits"] = r.bits;
        row["mean_err"] = r.mean_err;
        row["max_err"] = r.max_err;
        row["mul"] = r.ledger.mul;
        row["add"] = r.ledger.add;
        row["shift"] = r.ledger.shift;
        row["exp"] = r.ledger.exp;
        row["div"] = r.ledger.div;
        row["energy_pj"] = r.energy_pj;
        row["wall_ms"] = r.wall_ms;
        doc["records"].push_back(std::move(row));
    }
    if (sweep_summary != nullptr) {
        nlohmann::ordered_json scaling;
        scaling["axis"] = sweep_axis_name(sweep_summary->axis);
        scaling["values"] = sweep_summary->values;
        scaling["slope"] = sweep_summary->slope;
        doc["scaling"] = std::move(scaling);
    }
    return doc.dump(2) + "\n";
}

SweepAxis sweep_axis_from_name(const std::string& name) {
    if (name == "n") return SweepAxis::n;
    if (name == "bits") return SweepAxis::bits;
    if (name == "features") return SweepAxis::features;
    throw ParamError("sweep axis '" + name + "' (expected n, bits or features)");
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::n: return "n";
        case SweepAxis::bits: return "bits";
        case SweepAxis::features: return "features";
    }
    return "n";
}

SweepResult sweep(const Scenario& base,
                  SweepAxis axis,
                  const std::vector<std::size_t>& values) {
    if (values.empty()) {
        throw ParamError("sweep: values must be non-empty");
    }
    if (values.size() < 2) {
        throw ParamError("sweep: need at least 2 axis values");
    }
    if (!std::is_sorted(values.begin(), values.end()) ||
        std::adjacent_find(values.begin(), values.end()) != values.end()) {
        throw ParamError("sweep: values must be strictly ascending");
    }
    if (axis == SweepAxis::bits &&
        base.variant != Variant::hashed && base.variant != Variant::binarized) {
        throw ParamError("sweep: the bits axis applies to code-based variants only");
    }
    if (axis == SweepAxis::features && base.variant != Variant::kernel_linear) {
        throw ParamError("sweep: the features axis applies to kernel_linear only");
    }

    SweepResult result;
    result.axis = axis;
    result.values = values;

    std::vector<double> log_x;
    std::vector<double> log_y;
    for (const std::size_t value : values) {
        Scenario s = base;
        switch (axis) {
            case SweepAxis::n: s.n = value; break;
            case SweepAxis::bits: s.bits = value; break;
            case SweepAxis::features: s.num_features = value; break;
        }
        const std::vector<RunRecord> records = run_scenario(s);
        // Core counts are shape-determined, so the first seed represents all.
        log_x.push_back(std::log(static_cast<double>(value)));
        log_y.push_back(std::log(static_cast<double>(records.front().ledger.total())));
        result.records.insert(result.records.end(), records.begin(), records.end());
    }

    double mean_x = 0.0;
    double mean_y = 0.0;
    for (std::size_t i = 0; i < log_x.size(); ++i) {
        mean_x += log_x[i];
        mean_y += log_y[i];
    }
    mean_x /= static_cast<double>(log_x.size());
    mean_y /= static_cast<double>(log_y.size());
    double cov = 0.0;
    double var = 0.0;
    for (std::size_t i = 0; i < log_x.size(); ++i) {
        cov += (log_x[i] - mean_x) * (log_y[i] - mean_y);
        var += (log_x[i] - mean_x) * (log_x[i] - mean_x);
    }
    result.slope = cov / var;
    return result;
}

namespace {

/// Quadratic-order evaluation of binary-code attention: per-pair affinities
/// plus the positivity bias, normalized per query.  Used by the selftest to
/// cross-check the linearized kernel.
RealMatrix hashed_attention_quadratic(const BinaryCodeMatrix& codes_q,
                                      const BinaryCodeMatrix& codes_k,
                                      const RealMatrix& v) {
    const int c_exp = bias_exponent(codes_q.bits());
    const double bias = static_cast<double>(std::int64_t{1} << c_exp);
    RealMatrix out(codes_q.n(), v.cols());
    for (std::size_t t = 0; t < codes_q.n(); ++t) {
        double denom = 0.0;
        std::vector<double> num(v.cols(), 0.0);
        for (std::size_t i = 0; i < codes_k.n(); ++i) {
            const double w =
                static_cast<double>(hamming_affinity(codes_q.row(t), codes_k.row(i))) + bias;
            denom += w;
            for (std::size_t c = 0; c < v.cols(); ++c) {
                num[c] += w * static_cast<double>(v.at(i, c));
            }
        }
        for (std::size_t c = 0; c < v.cols(); ++c) {
            out.at(t, c) = static_cast<float>(num[c] / denom);
        }
    }
    return out;
}

bool report_check(std::ostream& out, const char* name, bool ok) {
    out << "selftest: " << name << (ok ? " PASS" : " FAIL") << "\n";
    return ok;
}

} // namespace

bool run_selftest(std::ostream& out) {
    bool all_ok = true;

    {
        // Integer identity between code inner products and Hamming distance.
        SeededRng rng(7001);
        bool ok = true;
        for (int trial = 0; trial < 2000 && ok; ++trial) {
            const BinaryCodeMatrix codes = BinaryCodeMatrix::random(2, 16, rng);
            int direct = 0;
            for (std::size_t j = 0; j < 16; ++j) {
                direct += static_cast<int>(codes.at(0, j)) * static_cast<int>(codes.at(1, j));
            }
            ok = direct == hamming_affinity(codes.row(0), codes.row(1));
        }
        all_ok &= report_check(out, "code-affinity identity", ok);
    }
    {
        // Instrumented ledgers equal the closed forms on a small grid.
        SeededRng rng(7002);
        bool ok = true;
        for (const Variant v : {Variant::softmax, Variant::kernel_linear, Variant::hashed,
                                Variant::binarized}) {
            for (const std::size_t n : {8u, 32u}) {
                for (const std::size_t width : {8u, 16u}) {
                    ok = ok && verify_counts(v, n, 8, width, rng).check.ok;
                }
            }
        }
        all_ok &= report_check(out, "instrumented-counts match closed forms", ok);
    }
    {
        // Softmax rows are convex weights.
        SeededRng rng(7003);
        OpLedger ledger;
        const RealMatrix q = row_l2_normalize(random_normal_matrix(16, 8, rng)).matrix;
        const RealMatrix v = random_normal_matrix(16, 8, rng);
        RealMatrix weights;
        softmax_attention(q, q, v, 0.5f, ledger, &weights);
        bool ok = true;
        for (std::size_t t = 0; t < weights.rows(); ++t) {
            float sum = 0.0f;
            for (std::size_t i = 0; i < weights.cols(); ++i) {
                ok = ok && weights.at(t, i) >= 0.0f;
                sum += weights.at(t, i);
            }
            ok = ok && std::fabs(sum - 1.0f) < 1e-5f;
        }
        all_ok &= report_check(out, "softmax weights are convex", ok);
    }
    {
        // Linearized code attention equals the quadratic-order evaluation.
        SeededRng rng(7004);
        const BinaryCodeMatrix codes = BinaryCodeMatrix::random(32, 16, rng);
        const RealMatrix v = random_normal_matrix(32, 8, rng);
        OpLedger ledger;
        const RealMatrix fast = hashed_attention(codes, codes, v, ledger);
        const RealMatrix slow = hashed_attention_quadratic(codes, codes, v);
        double worst = 0.0;
        for (std::size_t t = 0; t < fast.rows(); ++t) {
            double diff = 0.0;
            double ref = 0.0;
            for (std::size_t c = 0; c < fast.cols(); ++c) {
                diff += std::fabs(static_cast<double>(fast.at(t, c)) -
                                  static_cast<double>(slow.at(t, c)));
                ref += std::fabs(static_cast<double>(slow.at(t, c)));
            }
            worst = std::max(worst, diff / std::max(ref, 1e-12));
        }
        all_ok &= report_check(out, "association-order equivalence", worst < 1e-4);
    }
    {
        // Hashed denominators stay positive (flag surfaced per record).
        Scenario s;
        s.name = "selftest";
        s.variant = Variant::hashed;
        s.n = 32;
        s.d_p = 8;
        s.bits = 8;
        s.m = 16;
        s.pairs_per_row = 4;
        s.seeds = {11, 12};
        s.no_timing = true;
        const auto records = run_scenario(s);
        bool ok = true;
        for (const RunRecord& r : records) {
            ok = ok && r.denominators_positive && r.ledger.mul == 0;
        }
        all_ok &= report_check(out, "hashed denominators positive, core mul-free", ok);
    }
    {
        // Energy recomputation from a record's own counts is exact.
        Scenario s;
        s.name = "selftest";
        s.variant = Variant::kernel_linear;
        s.n = 24;
        s.d_p = 8;
        s.num_features = 16;
        s.seeds = {3};
        s.no_timing = true;
        const auto records = run_scenario(s);
        const RunRecord& r = records.front();
        const double again =
            energy_of(r.ledger, EnergyTable::default_table(), Precision::fp32);
        all_ok &= report_check(out, "energy equals recomputation", again == r.energy_pj);
    }
    {
        // Byte-identical reruns.
        Scenario s;
        s.name = "selftest";
        s.variant = Variant::binarized;
        s.n = 24;
        s.d_p = 8;
        s.seeds = {5, 6, 7};
        s.no_timing = true;
        const std::string once = to_csv(run_scenario(s));
        const std::string twice = to_csv(run_scenario(s));
        all_ok &= report_check(out, "scenario reruns are byte-identical", once == twice);
    }
    {
        // Hash-set serialization round-trips bit-exactly.
        SeededRng rng(7005);
        const RealMatrix q = row_l2_normalize(random_normal_matrix(24, 8, rng)).matrix;
        OpLedger scratch;
        RealMatrix weights;
        softmax_attention(q, q, random_normal_matrix(24, 8, rng), 0.5f, scratch, &weights);
        HashLearningConfig cfg;
        cfg.m = 12;
        cfg.bits = 4;
        cfg.pairs_per_row = 3;
        cfg.steps = 40;
        const LearnReport report = learn_hash_functions(q, weights, cfg, rng);
        const std::string path = "selftest_hash_set.bin";
        save_hash_function_set(report.hfs, path);
        const HashFunctionSet loaded = load_hash_function_set(path);
        std::remove(path.c_str());
        const bool ok = loaded.support_samples == report.hfs.support_samples &&
                        loaded.mu == report.hfs.mu && loaded.a == report.hfs.a &&
                        loaded.bandwidth == report.hfs.bandwidth &&
                        loaded.bits == report.hfs.bits;
        all_ok &= report_check(out, "hash-set serialization round-trip", ok);
    }
    return all_ok;
}

bool run_verify_grid(std::ostream& out) {
    SeededRng rng(9001);
    bool all_ok = true;
    for (const Variant v : {Variant::softmax, Variant::kernel_linear, Variant::hashed,
                            Variant::binarized}) {
        for (const std::size_t n : {8u, 32u, 128u}) {
            for (const std::size_t d_p : {8u, 32u}) {
                for (const std::size_t width : {8u, 16u}) {
                    const VerifyReport report = verify_counts(v, n, d_p, width, rng);
                    out << "verify: " << variant_name(v) << " n=" << n << " d_p=" << d_p
                        << " width=" << width;
                    if (report.check.ok) {
                        out << " OK (total " << report.instrumented.total() << ")\n";
                    } else {
                        out << " MISMATCH " << report.check.message << "\n";
                        all_ok = false;
                    }
                }
            }
        }
    }
    return all_ok;
}

} // namespace ecoattn
