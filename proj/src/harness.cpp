#include "mflab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mflab/bbgky.hpp"
#include "mflab/fock.hpp"
#include "mflab/manybody.hpp"
#include "mflab/scattering.hpp"
#include "mflab/solvers.hpp"

namespace mflab::harness {

namespace {

enum class FieldType { integer, real, text, int_list, real_list };

struct Field {
    const char* key;
    FieldType type;
    bool required;
    const char* fallback;   // nullptr when required
    const char* doc;
};

const std::vector<Field> kCommonFields = {
    {"format_version", FieldType::integer, true, nullptr, "config format version, must be 1"},
    {"experiment", FieldType::text, true, nullptr, "experiment kind"},
};

const std::vector<Field> kGridFields = {
    {"grid_sites", FieldType::integer, true, nullptr, "lattice sites M"},
    {"grid_length", FieldType::real, true, nullptr, "torus length L"},
};

const std::vector<Field> kKernelFields = {
    {"kernel_kind", FieldType::text, true, nullptr, "table | gaussian | cosine | gravity"},
    {"kernel_values", FieldType::real_list, false, "", "table kernel samples (length M)"},
    {"kernel_amp", FieldType::real, false, "1", "gaussian/cosine amplitude"},
    {"kernel_width", FieldType::real, false, "1", "gaussian width"},
    {"kernel_alpha", FieldType::real, false, "0", "gravity regularization (default 1/M)"},
};

const std::vector<Field> kInitFields = {
    {"init_kind", FieldType::text, true, nullptr, "explicit | plane-wave | gaussian"},
    {"phi_re", FieldType::real_list, false, "", "explicit amplitudes, real parts"},
    {"phi_im", FieldType::real_list, false, "", "explicit amplitudes, imaginary parts"},
    {"init_mode", FieldType::integer, false, "0", "plane-wave mode index"},
    {"init_amp", FieldType::real, false, "1", "plane-wave / gaussian amplitude"},
    {"init_width", FieldType::real, false, "1", "gaussian width"},
    {"init_center", FieldType::real, false, "0", "gaussian center"},
    {"normalize", FieldType::integer, false, "1", "normalize the initial state (0/1)"},
};

const std::vector<Field> kSolverFields = {
    {"dt", FieldType::real, false, "1e-3", "time step"},
    {"t_end", FieldType::real, true, nullptr, "final time"},
    {"scheme", FieldType::text, false, "fourth-order-split",
     "strang-split | fourth-order-split | explicit-rk4"},
    {"record_every", FieldType::integer, false, "1", "recording stride"},
    {"blowup_threshold", FieldType::real, false, "0", "H^{1/2} threshold; 0 disables"},
};

std::map<std::string, std::vector<Field>> schema_registry() {
    auto join = [](std::initializer_list<const std::vector<Field>*> parts,
                   std::vector<Field> extra = {}) {
        std::vector<Field> out;
        for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
        out.insert(out.end(), extra.begin(), extra.end());
        return out;
    };
    std::map<std::string, std::vector<Field>> reg;
    reg["hartree"] = join({&kCommonFields, &kGridFields, &kKernelFields, &kInitFields,
                           &kSolverFields},
                          {{"coupling", FieldType::real, true, nullptr, "kappa"}});
    reg["gp"] = join({&kCommonFields, &kGridFields, &kInitFields, &kSolverFields},
                     {{"a0", FieldType::real, true, nullptr, "scattering length"}});
    reg["semirel"] = join({&kCommonFields, &kGridFields, &kInitFields, &kSolverFields},
                          {{"coupling", FieldType::real, true, nullptr,
                            "kappa > 0 means attraction"},
                           {"alpha", FieldType::real, false, "0",
                            "kernel regularization (default 1/M)"}});
    reg["scatter"] = join({&kCommonFields},
                          {{"pot_kind", FieldType::text, true, nullptr, "square-well"},
                           {"v0", FieldType::real, true, nullptr, "well height"},
                           {"radius", FieldType::real, true, nullptr, "well radius"},
                           {"r_max", FieldType::real, true, nullptr, "mesh extent"},
                           {"mesh_points", FieldType::integer, true, nullptr, "mesh size"},
                           {"rescale_n", FieldType::int_list, false, "",
                            "N values for the 1/N rescaling check"},
                           {"born_lambda", FieldType::real_list, false, "",
                            "weak-coupling prefactors for the Born table"}});
    reg["exact-sweep"] = join({&kCommonFields, &kGridFields, &kKernelFields, &kInitFields},
                              {{"coupling", FieldType::real, true, nullptr, "kappa"},
                               {"n_list", FieldType::int_list, true, nullptr, "particle numbers"},
                               {"time", FieldType::real, true, nullptr, "comparison time"},
                               {"dt", FieldType::real, false, "1e-3", "Hartree reference step"}});
    reg["bbgky"] = join({&kCommonFields, &kGridFields, &kKernelFields, &kInitFields},
                        {{"coupling", FieldType::real, true, nullptr, "kappa"},
                         {"n_particles", FieldType::integer, true, nullptr, "N"},
                         {"depth", FieldType::integer, true, nullptr, "hierarchy depth K"},
                         {"closure", FieldType::text, false, "truncate-zero",
                          "truncate-zero | factorize-top"},
                         {"time", FieldType::real, true, nullptr, "horizon"},
                         {"dt", FieldType::real, false, "1e-3", "integrator step"},
                         {"record_every", FieldType::integer, false, "100", "recording stride"},
                         {"compare_exact", FieldType::integer, false, "1",
                          "compare against exact reduced densities (0/1)"}});
    reg["fock-rate"] = join({&kCommonFields, &kGridFields, &kKernelFields, &kInitFields},
                            {{"coupling", FieldType::real, true, nullptr, "kappa"},
                             {"n_list", FieldType::int_list, true, nullptr, "mean particle numbers"},
                             {"time", FieldType::real, true, nullptr, "comparison time"},
                             {"dt", FieldType::real, false, "1e-3", "Hartree reference step"}});
    reg["fock-algebra"] = join({&kCommonFields},
                               {{"modes", FieldType::integer, true, nullptr, "mode count M"},
                                {"n_max", FieldType::integer, true, nullptr, "Fock cutoff"},
                                {"phi_re", FieldType::real_list, true, nullptr,
                                 "coherent orbital, real parts"},
                                {"phi_im", FieldType::real_list, true, nullptr,
                                 "coherent orbital, imaginary parts"},
                                {"f_re", FieldType::real_list, true, nullptr,
                                 "test function, real parts"},
                                {"f_im", FieldType::real_list, true, nullptr,
                                 "test function, imaginary parts"},
                                {"trials", FieldType::integer, false, "100", "random trials"},
                                {"seed", FieldType::integer, false, "20250814", "trial seed"}});
    return reg;
}

const std::map<std::string, std::vector<Field>>& schemas() {
    static const auto reg = schema_registry();
    return reg;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

long parse_int(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw schema_error("key '" + key + "': expected integer, got '" + raw + "'");
    }
}

double parse_real(const std::string& key, const std::string& raw) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(raw, &pos);
        if (pos != raw.size()) throw std::invalid_argument("trailing");
        if (!std::isfinite(v)) throw std::invalid_argument("nonfinite");
        return v;
    } catch (const std::exception&) {
        throw schema_error("key '" + key + "': expected real, got '" + raw + "'");
    }
}

std::vector<double> parse_real_list(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    std::istringstream in(raw);
    std::string tok;
    while (in >> tok) out.push_back(parse_real(key, tok));
    return out;
}

std::vector<int> parse_int_list(const std::string& key, const std::string& raw) {
    std::vector<int> out;
    std::istringstream in(raw);
    std::string tok;
    while (in >> tok) out.push_back(static_cast<int>(parse_int(key, tok)));
    return out;
}

// Typed access with schema defaults.
class SpecView {
  public:
    explicit SpecView(const ExperimentSpec& spec) : spec_(spec) {
        const auto it = schemas().find(spec.experiment);
        if (it == schemas().end())
            throw schema_error("unknown experiment kind '" + spec.experiment + "'");
        fields_ = &it->second;
    }

    std::string text(const std::string& key) const { return raw(key); }
    long integer(const std::string& key) const { return parse_int(key, raw(key)); }
    double real(const std::string& key) const { return parse_real(key, raw(key)); }
    std::vector<double> real_list(const std::string& key) const {
        return parse_real_list(key, raw(key));
    }
    std::vector<int> int_list(const std::string& key) const {
        return parse_int_list(key, raw(key));
    }

  private:
    std::string raw(const std::string& key) const {
        const auto it = spec_.values.find(key);
        if (it != spec_.values.end()) return it->second;
        for (const auto& f : *fields_)
            if (key == f.key && f.fallback) return f.fallback;
        throw schema_error("missing required key '" + key + "'");
    }

    const ExperimentSpec& spec_;
    const std::vector<Field>* fields_;
};

Grid make_grid(const SpecView& v) {
    return Grid(static_cast<int>(v.integer("grid_sites")), v.real("grid_length"));
}

Kernel make_kernel(const SpecView& v, const Grid& g) {
    const std::string kind = v.text("kernel_kind");
    if (kind == "table") {
        auto vals = v.real_list("kernel_values");
        if (static_cast<int>(vals.size()) != g.num_sites)
            throw schema_error("kernel_values: need exactly grid_sites entries");
        return Kernel(g, std::move(vals));
    }
    if (kind == "gaussian") {
        const double amp = v.real("kernel_amp");
        const double width = v.real("kernel_width");
        std::vector<double> vals(g.num_sites);
        for (int j = 0; j < g.num_sites; ++j) {
            const double d = periodic_distance(g, j);
            vals[j] = amp * std::exp(-d * d / (2.0 * width * width));
        }
        return Kernel(g, std::move(vals));
    }
    if (kind == "cosine") {
        const double amp = v.real("kernel_amp");
        std::vector<double> vals(g.num_sites);
        for (int j = 0; j < g.num_sites; ++j)
            vals[j] = amp * (1.0 + std::cos(2.0 * 3.14159265358979323846 * j / g.num_sites));
        return Kernel(g, std::move(vals));
    }
    if (kind == "gravity") {
        double alpha = v.real("kernel_alpha");
        if (alpha == 0.0) alpha = 1.0 / g.num_sites;
        return gravitational_kernel(g, alpha);
    }
    throw schema_error("kernel_kind: unknown kind '" + kind + "'");
}

WaveFunction make_initial(const SpecView& v, const Grid& g) {
    const std::string kind = v.text("init_kind");
    std::vector<cplx> amp(g.num_sites);
    if (kind == "explicit") {
        const auto re = v.real_list("phi_re");
        const auto im = v.real_list("phi_im");
        if (static_cast<int>(re.size()) != g.num_sites ||
            (!im.empty() && im.size() != re.size()))
            throw schema_error("phi_re/phi_im: need grid_sites entries");
        for (int j = 0; j < g.num_sites; ++j)
            amp[j] = cplx(re[j], im.empty() ? 0.0 : im[j]);
    } else if (kind == "plane-wave") {
        const int mode = static_cast<int>(v.integer("init_mode"));
        if (mode < 0 || mode >= g.num_sites) throw schema_error("init_mode out of range");
        const double a = v.real("init_amp");
        const double k = g.mode_wavenumbers[mode];
        const double root_l = std::sqrt(g.length);
        for (int j = 0; j < g.num_sites; ++j) {
            const double x = j * g.spacing;
            amp[j] = a / root_l * std::exp(cplx(0.0, k * x));
        }
    } else if (kind == "gaussian") {
        const double a = v.real("init_amp");
        const double width = v.real("init_width");
        const double center = v.real("init_center");
        for (int j = 0; j < g.num_sites; ++j) {
            double d = std::fmod(std::abs(j * g.spacing - center), g.length);
            d = std::min(d, g.length - d);
            amp[j] = a * std::exp(-d * d / (2.0 * width * width));
        }
    } else {
        throw schema_error("init_kind: unknown kind '" + kind + "'");
    }
    WaveFunction phi(g, std::move(amp));
    if (v.integer("normalize") != 0) {
        const double norm = l2_norm(phi);
        if (norm == 0.0) throw schema_error("initial state has zero norm");
        for (auto& c : phi.amplitudes) c /= norm;
    }
    return phi;
}

Scheme parse_scheme(const std::string& s) {
    if (s == "strang-split") return Scheme::strang_split;
    if (s == "fourth-order-split") return Scheme::fourth_order_split;
    if (s == "explicit-rk4") return Scheme::explicit_rk4;
    throw schema_error("scheme: unknown scheme '" + s + "'");
}

SolverConfig make_solver_config(const SpecView& v) {
    SolverConfig cfg;
    cfg.dt = v.real("dt");
    cfg.t_end = v.real("t_end");
    cfg.scheme = parse_scheme(v.text("scheme"));
    cfg.record_every = static_cast<int>(v.integer("record_every"));
    cfg.blowup_threshold = v.real("blowup_threshold");
    cfg.store_snapshots = false;
    return cfg;
}

ResultTable trajectory_table(const Trajectory& tr) {
    ResultTable t;
    t.columns = {"t", "mass", "energy", "h_half", "blowup_flag"};
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
        const bool flagged = tr.blowup_time && tr.times[i] >= *tr.blowup_time;
        t.rows.push_back({tr.times[i], tr.mass_series[i], tr.energy_series[i],
                          tr.h_half_series[i], flagged ? 1.0 : 0.0});
    }
    return t;
}

}  // namespace

ExperimentSpec parse_spec_text(const std::string& text) {
    ExperimentSpec spec;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw schema_error("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw schema_error("line " + std::to_string(lineno) + ": empty key");
        if (spec.values.count(key))
            throw schema_error("duplicate key '" + key + "'");
        spec.values[key] = value;
    }
    const auto it = spec.values.find("experiment");
    if (it != spec.values.end()) spec.experiment = it->second;
    return spec;
}

ExperimentSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw schema_error("cannot open spec file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_spec_text(buf.str());
}

void validate_spec(const ExperimentSpec& spec) {
    if (spec.experiment.empty()) throw schema_error("missing required key 'experiment'");
    const auto it = schemas().find(spec.experiment);
    if (it == schemas().end())
        throw schema_error("unknown experiment kind '" + spec.experiment + "'");
    const auto& fields = it->second;

    std::vector<std::string> problems;
    for (const auto& f : fields) {
        if (!f.required) continue;
        if (!spec.has(f.key)) problems.push_back(std::string("missing key '") + f.key + "'");
    }
    for (const auto& [key, value] : spec.values) {
        const auto match = std::find_if(fields.begin(), fields.end(),
                                        [&](const Field& f) { return key == f.key; });
        if (match == fields.end()) {
            problems.push_back("unknown key '" + key + "'");
            continue;
        }
        try {
            switch (match->type) {
                case FieldType::integer: parse_int(key, value); break;
                case FieldType::real: parse_real(key, value); break;
                case FieldType::text: break;
                case FieldType::int_list: parse_int_list(key, value); break;
                case FieldType::real_list: parse_real_list(key, value); break;
            }
        } catch (const schema_error& e) {
            problems.push_back(e.what());
        }
    }
    if (spec.has("format_version") &&
        parse_int("format_version", spec.values.at("format_version")) != kFormatVersion)
        problems.push_back("format_version: expected " + std::to_string(kFormatVersion));
    if (!problems.empty()) {
        std::string msg = "spec validation failed:";
        for (const auto& p : problems) msg += "\n  " + p;
        throw schema_error(msg);
    }
}

std::vector<std::string> list_experiments() {
    std::vector<std::string> out;
    for (const auto& [k, v] : schemas()) out.push_back(k);
    return out;
}

std::string describe_experiment(const std::string& kind) {
    const auto it = schemas().find(kind);
    if (it == schemas().end()) throw schema_error("unknown experiment kind '" + kind + "'");
    std::string out = kind + "\n";
    for (const auto& f : it->second) {
        out += "  " + std::string(f.key) + (f.required ? "  (required)  " : "  (optional)  ") +
               f.doc + "\n";
    }
    return out;
}

std::uint64_t spec_hash(const ExperimentSpec& spec) {
    std::uint64_t h = 1469598103934665603ull;
    auto feed = [&](const std::string& s) {
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ull;
        }
    };
    for (const auto& [k, v] : spec.values) {   // std::map: sorted
        feed(k);
        feed("=");
        feed(v);
        feed("\n");
    }
    return h;
}

std::string spec_hash_hex(const ExperimentSpec& spec) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(spec_hash(spec)));
    return buf;
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_csv(const std::string& path, const ResultTable& table, const std::string& hash_hex) {
    std::ofstream out(path, std::ios::binary);   // binary: LF endings everywhere
    if (!out) throw schema_error("cannot write '" + path + "'");
    out << "# " << kToolVersion << "\n";
    out << "# spec_hash=" << hash_hex << "\n";
    for (std::size_t c = 0; c < table.columns.size(); ++c)
        out << table.columns[c] << (c + 1 < table.columns.size() ? "," : "");
    out << "\n";
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c)
            out << format_double(row[c]) << (c + 1 < row.size() ? "," : "");
        out << "\n";
    }
}

CsvFile read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw schema_error("cannot open '" + path + "'");
    CsvFile file;
    std::string line;
    bool header_done = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("spec_hash=");
            if (pos != std::string::npos) file.hash_hex = trim(line.substr(pos + 10));
            continue;
        }
        std::istringstream row(line);
        std::string cell;
        if (!header_done) {
            while (std::getline(row, cell, ',')) file.table.columns.push_back(trim(cell));
            header_done = true;
        } else {
            std::vector<double> vals;
            while (std::getline(row, cell, ',')) vals.push_back(parse_real("csv", trim(cell)));
            if (vals.size() != file.table.columns.size())
                throw schema_error("csv row width mismatch in '" + path + "'");
            file.table.rows.push_back(std::move(vals));
        }
    }
    if (!header_done) throw schema_error("csv '" + path + "' has no header");
    return file;
}

RateFit fit_rate(const ResultTable& table, const std::string& x_col, const std::string& y_col) {
    const auto cx = std::find(table.columns.begin(), table.columns.end(), x_col);
    const auto cy = std::find(table.columns.begin(), table.columns.end(), y_col);
    if (cx == table.columns.end() || cy == table.columns.end())
        throw schema_error("fit_rate: no such column");
    const std::size_t ix = cx - table.columns.begin();
    const std::size_t iy = cy - table.columns.begin();
    if (table.rows.size() < 3) throw dimension_error("fit_rate: need at least 3 rows");
    double sx = 0, sxx = 0, sy = 0, sxy = 0;
    const double n = static_cast<double>(table.rows.size());
    for (const auto& row : table.rows) {
        if (!(row[ix] > 0.0) || !(row[iy] > 0.0))
            throw dimension_error("fit_rate: nonpositive value in log-log fit");
        const double lx = std::log(row[ix]);
        const double ly = std::log(row[iy]);
        sx += lx;
        sxx += lx * lx;
        sy += ly;
        sxy += lx * ly;
    }
    const double det = n * sxx - sx * sx;
    RateFit fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy * sxx - sx * sxy) / det;
    double ss = 0.0;
    for (const auto& row : table.rows) {
        const double r = std::log(row[iy]) - (fit.intercept + fit.slope * std::log(row[ix]));
        ss += r * r;
    }
    fit.residual = std::sqrt(ss / n);
    return fit;
}

namespace {

using nlohmann::json;

RunOutput run_impl(const ExperimentSpec& spec, const std::string& out_dir, bool quiet) {
    (void)quiet;
    validate_spec(spec);
    const SpecView v(spec);
    const std::string hash = spec_hash_hex(spec);
    std::filesystem::create_directories(out_dir);
    const auto path = [&](const std::string& name) {
        return (std::filesystem::path(out_dir) / name).string();
    };

    RunOutput out;
    json meta;
    meta["tool"] = kToolVersion;
    meta["experiment"] = spec.experiment;
    meta["spec_hash"] = hash;
    meta["spec"] = json::object();
    for (const auto& [k, val] : spec.values) meta["spec"][k] = val;
    const auto t0 = std::chrono::steady_clock::now();

    auto write_table = [&](const std::string& name, const ResultTable& table) {
        write_csv(path(name), table, hash);
        out.files.push_back(path(name));
    };

    const std::string kind = spec.experiment;
    if (kind == "hartree" || kind == "gp" || kind == "semirel") {
        const Grid g = make_grid(v);
        const WaveFunction phi0 = make_initial(v, g);
        SolverConfig cfg = make_solver_config(v);
        Trajectory tr;
        if (kind == "hartree") {
            const EffectiveModel model = hartree_model(g, make_kernel(v, g), v.real("coupling"));
            tr = evolve_hartree(phi0, model, cfg);
        } else if (kind == "gp") {
            tr = evolve_gp(phi0, v.real("a0"), cfg);
        } else {
            double alpha = v.real("alpha");
            if (alpha == 0.0) alpha = 1.0 / g.num_sites;
            const EffectiveModel model = semirelativistic_model(g, v.real("coupling"), alpha);
            if (cfg.blowup_threshold == 0.0)
                cfg.blowup_threshold = 20.0 * sobolev_half_norm(phi0);
            tr = evolve_semirel(phi0, model, cfg);
        }
        write_table("result.csv", trajectory_table(tr));
        if (tr.blowup_time) meta["blowup_time"] = *tr.blowup_time;
    } else if (kind == "scatter") {
        if (v.text("pot_kind") != "square-well")
            throw schema_error("pot_kind: only 'square-well' is available");
        const RadialPotential pot = square_well(v.real("v0"), v.real("radius"), v.real("r_max"),
                                                static_cast<int>(v.integer("mesh_points")));
        const ScatteringResult res = solve_zero_energy(pot);
        ResultTable profile;
        profile.columns = {"r", "V", "f"};
        const double dr = pot.mesh_size();
        for (std::size_t i = 0; i < pot.samples.size(); ++i)
            profile.rows.push_back({i * dr, pot.samples[i], res.f_profile[i]});
        write_table("profile.csv", profile);

        json jres;
        jres["a0_asymptote"] = res.a0_asymptote;
        jres["a0_integral"] = res.a0_integral;
        jres["discrepancy"] = res.discrepancy;
        jres["mesh_size"] = res.mesh_size;
        jres["ill_conditioned"] = res.ill_conditioned;
        for (int n : v.int_list("rescale_n"))
            jres["rescaled"].push_back({{"N", n}, {"a", scaled_length(pot, n)}});
        for (double lam : v.real_list("born_lambda")) {
            const RadialPotential weak = scaled_potential(pot, lam);
            const double born = born_length(weak);
            const double a = scattering_length(solve_zero_energy(weak));
            jres["born"].push_back({{"lambda", lam}, {"a0", a}, {"born", born}});
        }
        std::ofstream jf(path("result.json"), std::ios::binary);
        jf << jres.dump(2) << "\n";
        out.files.push_back(path("result.json"));
    } else if (kind == "exact-sweep") {
        const Grid g = make_grid(v);
        const WaveFunction phi0 = make_initial(v, g);
        const EffectiveModel model = hartree_model(g, make_kernel(v, g), v.real("coupling"));
        SolverConfig cfg;
        cfg.dt = v.real("dt");
        const auto rows = convergence_sweep(phi0, model, v.int_list("n_list"), v.real("time"),
                                            cfg);
        ResultTable table;
        table.columns = {"N", "dimension", "trace_distance"};
        json walls = json::array();
        for (const auto& r : rows) {
            table.rows.push_back({double(r.particles), double(r.dimension), r.distance});
            walls.push_back(r.wall_seconds);
        }
        meta["wall_seconds_per_cell"] = walls;   // volatile; kept out of the CSV
        write_table("result.csv", table);
    } else if (kind == "bbgky") {
        const Grid g = make_grid(v);
        const WaveFunction phi0 = make_initial(v, g);
        const EffectiveModel model = hartree_model(g, make_kernel(v, g), v.real("coupling"));
        const DiscreteModel dm = to_discrete_model(g, model);
        const int n = static_cast<int>(v.integer("n_particles"));
        const int depth = static_cast<int>(v.integer("depth"));
        const std::string closure_name = v.text("closure");
        const ClosureRule rule = closure_name == "factorize-top" ? ClosureRule::factorize_top
                                                                 : ClosureRule::truncate_zero;
        if (closure_name != "factorize-top" && closure_name != "truncate-zero")
            throw schema_error("closure: unknown rule '" + closure_name + "'");
        Vec c0 = to_mode_vector(phi0);
        c0 /= c0.norm();
        SolverConfig cfg;
        cfg.dt = v.real("dt");
        cfg.t_end = v.real("time");
        cfg.record_every = static_cast<int>(v.integer("record_every"));
        const HierarchyState init = factorized_state(c0, depth, n);
        const HierarchyTrajectory tr = evolve_hierarchy(init, rule, dm, cfg);

        const bool compare = v.integer("compare_exact") != 0;
        ResultTable table;
        table.columns = {"t", "k", "trace_deviation", "hermiticity"};
        if (compare) table.columns.push_back("distance_exact");
        ManyBodyState psi0;
        ManyBodyOperator h;
        if (compare) {
            auto basis = build_basis(g.num_sites, n);
            h = build_mean_field_hamiltonian(dm, basis);
            psi0 = product_state(basis, c0);
        }
        for (std::size_t i = 0; i < tr.times.size(); ++i) {
            for (int k = 1; k <= depth; ++k) {
                const Mat& gamma = tr.states[i].gammas[k - 1];
                std::vector<double> row = {
                    tr.times[i], double(k), std::abs(gamma.trace() - cplx(1.0)),
                    (gamma - gamma.adjoint()).cwiseAbs().maxCoeff()};
                if (compare) {
                    const ManyBodyState psi_t = propagate(psi0, h, tr.times[i]);
                    ReducedDensity lhs;
                    lhs.order = k;
                    lhs.matrix = gamma;
                    row.push_back(trace_distance(lhs, reduced_density(psi_t, k)));
                }
                table.rows.push_back(std::move(row));
            }
        }
        write_table("result.csv", table);
    } else if (kind == "fock-rate") {
        const Grid g = make_grid(v);
        const WaveFunction phi0 = make_initial(v, g);
        const EffectiveModel model = hartree_model(g, make_kernel(v, g), v.real("coupling"));
        const DiscreteModel dm = to_discrete_model(g, model);
        Vec c0 = to_mode_vector(phi0);
        c0 /= c0.norm();
        SolverConfig cfg;
        cfg.dt = v.real("dt");
        const auto rows = rate_sweep(c0, dm, v.int_list("n_list"), v.real("time"), cfg);
        ResultTable table;
        table.columns = {"N", "n_max", "dimension", "leakage", "trace_distance"};
        json walls = json::array();
        for (const auto& r : rows) {
            table.rows.push_back({double(r.particles), double(r.n_max), double(r.dimension),
                                  r.leakage, r.distance});
            walls.push_back(r.wall_seconds);
        }
        meta["wall_seconds_per_cell"] = walls;
        write_table("result.csv", table);
    } else if (kind == "fock-algebra") {
        const int m = static_cast<int>(v.integer("modes"));
        const int nmax = static_cast<int>(v.integer("n_max"));
        const auto pre = v.real_list("phi_re");
        const auto pim = v.real_list("phi_im");
        const auto fre = v.real_list("f_re");
        const auto fim = v.real_list("f_im");
        if (static_cast<int>(pre.size()) != m || pim.size() != pre.size() ||
            static_cast<int>(fre.size()) != m || fim.size() != fre.size())
            throw schema_error("phi/f lists must have 'modes' entries");
        Vec phi(m), f(m);
        for (int j = 0; j < m; ++j) {
            phi(j) = cplx(pre[j], pim[j]);
            f(j) = cplx(fre[j], fim[j]);
        }
        const int trials = static_cast<int>(v.integer("trials"));
        const auto seed = static_cast<std::uint64_t>(v.integer("seed"));
        auto space = make_fock_space(m, nmax);

        ResultTable table;
        table.columns = {"check_id", "value", "bound"};
        const double nbar = phi.squaredNorm();
        const FockVector coh = coherent_state(phi, space);

        // 1: Poisson sector weights
        double poisson_dev = 0.0;
        {
            double p = std::exp(-nbar);
            for (int n = 0; n <= nmax; ++n) {
                poisson_dev = std::max(poisson_dev, std::abs(sector_weight(coh, n) - p));
                p *= nbar / (n + 1);
            }
        }
        table.rows.push_back({1, poisson_dev, 1e-10});
        // 2: <N> identity
        table.rows.push_back({2, std::abs(number_expectation(coh) - nbar), 1e-9});
        // 3: annihilation eigenvector
        {
            const FockVector a_coh = apply_ladder(LadderKind::annihilate, f, coh);
            const cplx eig = f.dot(phi);
            table.rows.push_back(
                {3, (a_coh.coefficients - eig * coh.coefficients).norm(), 1e-9});
        }
        // 4/5: Weyl shift relations
        const WeylShiftResiduals shift = weyl_conjugate_check(phi, f, space);
        table.rows.push_back({4, shift.annihilate, 1e-8});
        table.rows.push_back({5, shift.create, 1e-8});
        // 6: CCR on random states below the cutoff; 7/8: ladder bounds
        double ccr_dev = 0.0, bound_a = 0.0, bound_c = 0.0;
        {
            std::mt19937_64 rng(seed);
            std::normal_distribution<double> gauss(0.0, 1.0);
            for (int trial = 0; trial < trials; ++trial) {
                FockVector psi = vacuum(space);
                const int fill = std::max(1, nmax / 2);
                for (std::int64_t i = 0; i < space->offsets[fill + 1]; ++i)
                    psi.coefficients(i) = cplx(gauss(rng), gauss(rng));
                psi.coefficients /= psi.coefficients.norm();
                Vec fr(m), gr(m);
                for (int j = 0; j < m; ++j) {
                    fr(j) = cplx(gauss(rng), gauss(rng));
                    gr(j) = cplx(gauss(rng), gauss(rng));
                }
                // [a(f), a+(g)] = <f,g>
                const FockVector cg = apply_ladder(LadderKind::create, gr, psi);
                const FockVector acg = apply_ladder(LadderKind::annihilate, fr, cg);
                const FockVector af = apply_ladder(LadderKind::annihilate, fr, psi);
                const FockVector caf = apply_ladder(LadderKind::create, gr, af);
                const cplx comm = psi.coefficients.dot(acg.coefficients - caf.coefficients);
                ccr_dev = std::max(ccr_dev, std::abs(comm - fr.dot(gr)));
                // bounds |a(f)psi| <= |f||N^{1/2}psi|, |a+(f)psi| <= |f||(N+1)^{1/2}psi|
                double nhalf = 0.0, nhalf1 = 0.0;
                for (int n = 0; n <= nmax; ++n) {
                    const double w = sector_weight(psi, n);
                    nhalf += n * w;
                    nhalf1 += (n + 1) * w;
                }
                bound_a = std::max(bound_a,
                                   af.coefficients.norm() - fr.norm() * std::sqrt(nhalf));
                const FockVector cf = apply_ladder(LadderKind::create, fr, psi);
                bound_c = std::max(bound_c,
                                   cf.coefficients.norm() - fr.norm() * std::sqrt(nhalf1));
            }
        }
        table.rows.push_back({6, ccr_dev, 1e-10});
        table.rows.push_back({7, bound_a, 1e-12});
        table.rows.push_back({8, bound_c, 1e-12});
        // 9: Weyl unitarity on the coherent state
        table.rows.push_back({9, std::abs(coh.coefficients.norm() - 1.0), 1e-10});
        // 10: coherent Gamma^(1) is rank one
        {
            const ReducedDensity g1 = gamma1_fock(coh);
            Eigen::SelfAdjointEigenSolver<Mat> eig(g1.matrix);
            Eigen::VectorXd ev = eig.eigenvalues();
            std::sort(ev.data(), ev.data() + ev.size());
            table.rows.push_back({10, std::abs(ev(ev.size() - 2)), 1e-12});
        }
        write_table("result.csv", table);
    } else {
        throw schema_error("unknown experiment kind '" + kind + "'");
    }

    meta["outputs"] = json::array();
    for (const auto& f : out.files)
        meta["outputs"].push_back(std::filesystem::path(f).filename().string());
    meta["wall_time_s"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::ofstream mf(path("metadata.json"), std::ios::binary);
    mf << meta.dump(2) << "\n";
    out.files.push_back(path("metadata.json"));
    return out;
}

}  // namespace

RunOutput run(const ExperimentSpec& spec, const std::string& out_dir, bool quiet) {
    return run_impl(spec, out_dir, quiet);
}

}  // namespace mflab::harness
