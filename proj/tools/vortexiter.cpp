// vortexiter: iterate | kernel | verify | fields
#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vortexiter/vortexiter.hpp"

namespace fs = std::filesystem;
using namespace vortexiter;

namespace {

constexpr const char* kVersion = "0.1.0";

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CheckFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kIterate = {
    {"preset", "taylor-green"}, {"amplitude", "0.1"}, {"const", "1,0,0"}, {"u0_file", ""},
    {"n", "32"},                {"dt", "1e-3"},       {"T", "auto"},      {"T_max", "0.1"},
    {"C1", "1"},                {"nu", "0.5"},        {"L", "1"},         {"tol", "1e-8"},
    {"max_iter", "50"},         {"residual", "true"}, {"snapshot_stride", "10"},
    {"seed", "1"},              {"threads", "0"},     {"out", "vortexiter_out"},
};

const Defaults kKernel = {
    {"drift", "shear"},   {"amplitude", "1"},      {"const", "1,0,0"},        {"drift_file", ""},
    {"method", "mc"},     {"xi", "0.5,0.5,0.5"},   {"tau", "0"},              {"t", "0.1"},
    {"targets", "0.5,0.5,0.5;0.6,0.5,0.5;0.5,0.65,0.5"}, {"periodic", "true"},
    {"n_paths", "100000"}, {"dt", "1e-3"},         {"n", "32"},               {"pde_dt", "1e-3"},
    {"seed", "1"},        {"threads", "0"},        {"out", "vortexiter_out"},
};

const Defaults kVerify = {
    {"sweep", "gaussian"}, {"n_samples", "1000000"}, {"drift", "shear"}, {"amplitude", "1"},
    {"const", "1,0,0"},    {"drift_file", ""},       {"n", "32"},        {"dt", "1e-3"},
    {"times", "0.02,0.05,0.1"}, {"betas", "1.5,2,4"}, {"closure_threshold", "2"},
    {"seed", "1"},         {"threads", "0"},         {"out", "vortexiter_out"},
};

const Defaults kFields = {{"input", ""}, {"out", ""}};

// Resolved key=value settings; origin is "default", "FILE:LINE" or "flag".
class Settings {
public:
    Settings(std::string command, const Defaults& d) : command_(std::move(command)), order_() {
        for (const auto& [k, v] : d) {
            values_[k] = v;
            origin_[k] = "default";
            order_.push_back(k);
        }
    }

    void load_file(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw UsageError("config: cannot open '" + path + "'");
        std::string line;
        int no = 0;
        while (std::getline(is, line)) {
            ++no;
            const std::string where = path + ":" + std::to_string(no);
            if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw UsageError("config " + where + ": expected key=value, got '" + line + "'");
            const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
            if (key.empty()) throw UsageError("config " + where + ": empty field name");
            if (key == "version") continue;
            if (key == "command") {
                if (val != command_)
                    throw UsageError("config " + where + ": field 'command' is '" + val + "', running '" + command_ + "'");
                continue;
            }
            if (!values_.count(key)) throw UsageError("config " + where + ": unknown field '" + key + "' for " + command_);
            values_[key] = val;
            origin_[key] = where;
        }
    }

    void set_flag(const std::string& key, const std::string& v) {
        values_.at(key) = v;
        origin_.at(key) = "flag";
    }

    const std::string& str(const std::string& key) const { return values_.at(key); }

    double num(const std::string& key) const {
        const std::string& s = str(key);
        try {
            std::size_t pos = 0;
            const double v = std::stod(s, &pos);
            if (pos == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw bad(key, "a number");
    }

    long integer(const std::string& key) const {
        const std::string& s = str(key);
        try {
            std::size_t pos = 0;
            const long v = std::stol(s, &pos);
            if (pos == s.size()) return v;
        } catch (const std::exception&) {
        }
        throw bad(key, "an integer");
    }

    std::uint64_t u64(const std::string& key) const {
        const std::string& s = str(key);
        try {
            std::size_t pos = 0;
            const auto v = std::stoull(s, &pos);
            if (pos == s.size() && s.find('-') == std::string::npos) return v;
        } catch (const std::exception&) {
        }
        throw bad(key, "a non-negative integer");
    }

    bool flag(const std::string& key) const {
        const std::string& s = str(key);
        if (s == "true" || s == "1" || s == "yes") return true;
        if (s == "false" || s == "0" || s == "no") return false;
        throw bad(key, "true or false");
    }

    std::vector<double> list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            try {
                std::size_t pos = 0;
                out.push_back(std::stod(item, &pos));
                if (pos != item.size()) throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw bad(key, "a comma-separated list of numbers");
            }
        }
        if (out.empty()) throw bad(key, "a non-empty list");
        return out;
    }

    Vec3 vec3(const std::string& key) const {
        const auto v = list(key);
        if (v.size() != 3) throw bad(key, "three comma-separated numbers");
        return {v[0], v[1], v[2]};
    }

    std::vector<Vec3> points(const std::string& key) const {
        std::vector<Vec3> out;
        std::stringstream ss(str(key));
        std::string item;
        while (std::getline(ss, item, ';')) {
            std::vector<double> c;
            std::stringstream is(item);
            std::string x;
            while (std::getline(is, x, ',')) {
                try {
                    c.push_back(std::stod(trim(x)));
                } catch (const std::exception&) {
                    throw bad(key, "points x,y,z separated by ';'");
                }
            }
            if (c.size() != 3) throw bad(key, "points x,y,z separated by ';'");
            out.push_back({c[0], c[1], c[2]});
        }
        if (out.empty()) throw bad(key, "at least one point");
        return out;
    }

    UsageError bad(const std::string& key, const std::string& what) const {
        return UsageError("field '" + key + "' (" + origin_.at(key) + "): expected " + what + ", got '" + str(key) + "'");
    }

    void write_manifest(const fs::path& path) const {
        std::ofstream os(path);
        if (!os) throw UsageError("cannot write manifest '" + path.string() + "'");
        os << "# vortexiter run manifest; rerun with: vortexiter " << command_ << " --config manifest\n";
        os << "command=" << command_ << "\n";
        os << "version=" << kVersion << "\n";
        for (const auto& k : order_) os << k << "=" << values_.at(k) << "\n";
    }

    const std::string& command() const { return command_; }

private:
    static std::string trim(const std::string& s) {
        const auto a = s.find_first_not_of(" \t\r\n");
        if (a == std::string::npos) return "";
        const auto b = s.find_last_not_of(" \t\r\n");
        return s.substr(a, b - a + 1);
    }

    std::string command_;
    std::vector<std::string> order_;
    std::map<std::string, std::string> values_, origin_;
};

std::string g17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream os(p);
    if (!os) throw UsageError("cannot write '" + p.string() + "'");
    return os;
}

fs::path prepare_out(const Settings& s) {
    const fs::path out = s.str("out");
    if (out.empty()) throw UsageError("field 'out': output directory required");
    std::error_code ec;
    fs::create_directories(out, ec);
    if (ec) throw UsageError("cannot create output directory '" + out.string() + "': " + ec.message());
    s.write_manifest(out / "manifest");
    return out;
}

int grid_n(const Settings& s) {
    const long n = s.integer("n");
    if (n < 4 || n % 2 != 0 || n > 512) throw s.bad("n", "an even grid size in [4, 512]");
    return int(n);
}

// Calls f(drift, sampled field) for the configured preset.
template <class F>
void with_drift(const Settings& s, const std::string& key, F&& f) {
    const std::string preset = s.str(key);
    const double a = s.num("amplitude");
    auto grid = [&] { return GridSpec(grid_n(s)); };
    if (preset == "zero") {
        f(ZeroDrift{}, PeriodicVectorField(grid(), 3));
    } else if (preset == "const") {
        const ConstantDrift d{s.vec3("const")};
        f(d, sample_drift(d, grid(), 0.0));
    } else if (preset == "shear") {
        const ShearDrift d{a};
        f(d, sample_drift(d, grid(), 0.0));
    } else if (preset == "taylor-green") {
        const TaylorGreenDrift d{a};
        f(d, sample_drift(d, grid(), 0.0));
    } else if (preset == "file") {
        const std::string path = s.str("drift_file");
        if (path.empty()) throw UsageError("field 'drift_file': required when " + key + "=file");
        if (!fs::exists(path)) throw UsageError("field 'drift_file': no such file '" + path + "'");
        FieldSnapshot snap = read_field(path);
        if (snap.field.components() != 3) throw UsageError("drift file '" + path + "' must have 3 components");
        const auto hist = std::make_shared<DriftHistory>(DriftHistory::frozen(snap.field));
        f(HistoryDrift(hist), snap.field);
    } else {
        throw s.bad(key, "one of zero, const, shear, taylor-green, file");
    }
}

void write_reports(const fs::path& p, const std::vector<BoundCheckReport>& reps) {
    auto os = open_out(p);
    os << "inequality_id,param_json,max_ratio,C1_fit,C2_fit,pass\n";
    for (const auto& r : reps)
        os << r.id << "," << csv_quote(r.params_json) << "," << g17(r.max_ratio) << "," << g17(r.C1_fit) << ","
           << g17(r.C2_fit) << "," << (r.pass ? "true" : "false") << "\n";
}

// ---------------------------------------------------------------------------

int cmd_iterate(const Settings& s) {
    const std::string preset = s.str("preset");
    PhysicalProblem prob;
    prob.nu = s.num("nu");
    prob.L = s.num("L");
    if (preset == "file") {
        const std::string path = s.str("u0_file");
        if (path.empty() || !fs::exists(path)) throw UsageError("field 'u0_file': no such file '" + path + "'");
        prob.u0 = read_field(path).field;
    } else {
        const GridSpec g(grid_n(s));
        const double a = s.num("amplitude");
        if (preset == "zero") prob.u0 = PeriodicVectorField(g, 3);
        else if (preset == "const") prob.u0 = sample_drift(ConstantDrift{s.vec3("const")}, g, 0.0);
        else if (preset == "shear") prob.u0 = sample_drift(ShearDrift{a}, g, 0.0);
        else if (preset == "taylor-green") prob.u0 = sample_drift(TaylorGreenDrift{a}, g, 0.0);
        else throw s.bad("preset", "one of zero, const, shear, taylor-green, file");
    }
    IterationConfig cfg;
    if (s.str("T") != "auto") {
        cfg.T = s.num("T");
        if (!(*cfg.T > 0.0)) throw s.bad("T", "a positive time or 'auto'");
    }
    cfg.T_max = s.num("T_max");
    cfg.C1 = s.num("C1");
    cfg.tol = s.num("tol");
    cfg.max_iter = int(s.integer("max_iter"));
    if (cfg.max_iter < 1) throw s.bad("max_iter", "a positive integer");
    cfg.compute_residual = s.flag("residual");
    cfg.solver.dt = s.num("dt");
    const long stride = s.integer("snapshot_stride");
    if (stride < 1) throw s.bad("snapshot_stride", "a positive integer");
    const fs::path out = prepare_out(s);

    const IterationReport rep = picard_iterate(prob, cfg);

    {
        auto os = open_out(out / "iteration.csv");
        os << "n,delta_n,sup_u,sup_w,residual\n";
        for (std::size_t i = 0; i < rep.delta.size(); ++i)
            os << i + 1 << "," << g17(rep.delta[i]) << "," << g17(rep.sup_u[i]) << "," << g17(rep.sup_w[i]) << ","
               << g17(rep.residual[i]) << "\n";
    }
    {
        const auto& tr = rep.last_solve;
        auto os = open_out(out / "diagnostics.csv");
        os << "t,max_div_w,mean_w_norm,sup_w,sup_sqrt_t_grad_w\n";
        for (std::size_t i = 0; i < tr.times.size(); ++i)
            os << g17(tr.times[i]) << "," << g17(tr.max_div_w[i]) << "," << g17(tr.mean_w_norm[i]) << ","
               << g17(tr.sup_w[i]) << "," << g17(tr.sup_sqrt_t_grad_w[i]) << "\n";
    }
    nlohmann::json summary{{"converged", rep.converged}, {"iterations", rep.iterations}, {"T_scaled", rep.T},
                           {"T_physical", rep.map.to_physical(rep.T)}, {"T0_physical", rep.T0},
                           {"omega0_sup_scaled", rep.omega0_sup}, {"snapshot_units", "scaled"},
                           {"nu", rep.map.nu}, {"L", rep.map.L}, {"velocity_scale", rep.map.velocity_scale()}};
    if (!rep.u.empty()) {
        const DiagnosticTable d = regularity_diagnostics(rep);
        auto os = open_out(out / "regularity.csv");
        os << "t,sup_u,sqrt_t_grad_u,sup_w,sqrt_t_grad_w\n";
        for (std::size_t i = 0; i < d.times.size(); ++i)
            os << g17(d.times[i]) << "," << g17(d.sup_u[i]) << "," << g17(d.sqrt_t_grad_u[i]) << "," << g17(d.sup_w[i])
               << "," << g17(d.sqrt_t_grad_w[i]) << "\n";
        summary["sup_u_ratio"] = d.sup_u_ratio;
        summary["grad_u_parabolic_ratio"] = d.grad_u_parabolic_ratio;
        summary["sup_w_ratio"] = d.sup_w_ratio;
        summary["grad_w_parabolic_ratio"] = d.grad_w_parabolic_ratio;
        for (std::size_t i = 0; i < rep.u.size(); ++i) {
            if (i % std::size_t(stride) != 0 && i + 1 != rep.u.size()) continue;
            char name[32];
            std::snprintf(name, sizeof name, "u_%05zu.vf3d", i);
            write_field(rep.u[i], rep.times[i], (out / name).string());
            std::snprintf(name, sizeof name, "w_%05zu.vf3d", i);
            write_field(rep.w[i], rep.times[i], (out / name).string());
        }
    }
    open_out(out / "report.json") << summary.dump(2) << "\n";
    std::cout << "iterate: converged=" << (rep.converged ? "true" : "false") << " iterations=" << rep.iterations
              << " T=" << rep.T << " delta=" << (rep.delta.empty() ? 0.0 : rep.delta.back()) << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_kernel(const Settings& s) {
    const std::string method = s.str("method");
    if (method != "mc" && method != "pde" && method != "both" && method != "bismut")
        throw s.bad("method", "one of mc, pde, both, bismut");
    const Vec3 xi = s.vec3("xi");
    const double tau = s.num("tau"), t = s.num("t");
    if (!(t > tau)) throw UsageError("fields 't' and 'tau': need t > tau");
    const auto targets = s.points("targets");
    const bool periodic = s.flag("periodic");
    SdeConfig cfg;
    cfg.dt = s.num("dt");
    cfg.n_paths = std::size_t(s.u64("n_paths"));
    cfg.seed = s.u64("seed");
    cfg.threads = int(s.integer("threads"));
    cfg.validate();
    const std::string preset = s.str("drift");
    const bool need_pde = method == "pde" || method == "both" || (method == "bismut" && preset != "zero");
    if (need_pde && !periodic) throw UsageError("field 'periodic': the PDE kernel lives on the torus; set periodic=true");

    // validate the drift before touching the output directory
    with_drift(s, "drift", [](const auto&, const PeriodicVectorField&) {});
    const fs::path out = prepare_out(s);

    with_drift(s, "drift", [&](const auto& drift, const PeriodicVectorField& sampled) {
        std::optional<KernelTrajectory> tr;
        if (need_pde) {
            SolveConfig sc;
            sc.dt = s.num("pde_dt");
            tr = kernel_pde(xi, DriftHistory::frozen(sampled), t - tau, sc);
        }
        auto pde_at = [&](const Vec3& y) { return spectral_evaluate(to_spectral(tr->p.back()), 0, y); };

        if (method == "mc" || method == "both") {
            KernelMcOptions opt;
            opt.periodic = periodic;
            if (tr) opt.initial_variance = tr->t_mollify;
            const auto est = kernel_mc(tau, xi, t, targets, drift, cfg, opt);
            auto os = open_out(out / "estimates.csv");
            os << "target_x,target_y,target_z,t,value,std_err,n_paths,seed\n";
            for (const auto& e : est)
                os << g17(e.target[0]) << "," << g17(e.target[1]) << "," << g17(e.target[2]) << "," << g17(e.t) << ","
                   << g17(e.value) << "," << g17(e.std_error) << "," << e.n_paths << "," << e.seed << "\n";
            if (preset == "zero") {
                bool ok = true;
                auto cs = open_out(out / "check.csv");
                cs << "target_x,target_y,target_z,t,value,reference,std_err,pass\n";
                for (const auto& e : est) {
                    const Vec3 r{e.target[0] - xi[0], e.target[1] - xi[1], e.target[2] - xi[2]};
                    const double h = t - tau + opt.initial_variance;
                    const double ref = periodic ? periodized_gaussian3(h, r) : gaussian3(h, r);
                    const bool pass = std::abs(e.value - ref) <= std::max(3.0 * e.std_error, 1e-12 * ref);
                    ok = ok && pass;
                    cs << g17(e.target[0]) << "," << g17(e.target[1]) << "," << g17(e.target[2]) << "," << g17(e.t) << ","
                       << g17(e.value) << "," << g17(ref) << "," << g17(e.std_error) << "," << (pass ? "pass" : "fail")
                       << "\n";
                }
                if (!ok) throw CheckFailed("kernel: zero-drift estimate disagrees with the Gaussian");
            }
            if (method == "both") {
                auto cs = open_out(out / "comparison.csv");
                cs << "target_x,target_y,target_z,t,mc,std_err,pde,rel_err,pass\n";
                for (const auto& e : est) {
                    const double p = pde_at(e.target);
                    const bool pass = std::abs(e.value - p) <= std::max(3.0 * e.std_error, 0.05 * std::abs(p));
                    cs << g17(e.target[0]) << "," << g17(e.target[1]) << "," << g17(e.target[2]) << "," << g17(e.t) << ","
                       << g17(e.value) << "," << g17(e.std_error) << "," << g17(p) << "," << g17((e.value - p) / p) << ","
                       << (pass ? "pass" : "fail") << "\n";
                }
            }
        }
        if (method == "pde") {
            auto os = open_out(out / "estimates.csv");
            os << "target_x,target_y,target_z,t,value,std_err,n_paths,seed\n";
            for (const auto& y : targets)
                os << g17(y[0]) << "," << g17(y[1]) << "," << g17(y[2]) << "," << g17(t) << "," << g17(pde_at(y))
                   << ",0,0,0\n";
        }
        if (method == "bismut") {
            std::function<double(double, const Vec3&)> kernel;
            if (tr) {
                kernel = [&](double time, const Vec3& y) { return evaluate_kernel(*tr, time - tau, y); };
            } else {
                kernel = [&](double time, const Vec3& y) {
                    const Vec3 r{y[0] - xi[0], y[1] - xi[1], y[2] - xi[2]};
                    return periodic ? periodized_gaussian3(time - tau, r) : gaussian3(time - tau, r);
                };
            }
            auto os = open_out(out / "estimates.csv");
            os << "target_x,target_y,target_z,t,value,component,std_err,n_paths,seed\n";
            for (const auto& x : targets) {
                const auto e = bismut_gradient(tau, xi, t - tau, x, drift, kernel, cfg);
                for (int c = 0; c < 3; ++c)
                    os << g17(x[0]) << "," << g17(x[1]) << "," << g17(x[2]) << "," << g17(t) << "," << g17(e.value[c])
                       << "," << c << "," << g17(e.std_error[c]) << "," << e.n_paths << "," << e.seed << "\n";
            }
        }
    });
    std::cout << "kernel: method=" << method << " drift=" << preset << " targets=" << targets.size() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_verify(const Settings& s) {
    const std::string sweep = s.str("sweep");
    const std::vector<std::string> known{"gaussian", "integrals", "integrated", "envelopes", "vorticity", "all"};
    if (std::find(known.begin(), known.end(), sweep) == known.end())
        throw s.bad("sweep", "one of gaussian, integrals, integrated, envelopes, vorticity, all");
    const bool all = sweep == "all";
    const auto times = s.list("times");
    const auto betas = s.list("betas");
    for (double b : betas)
        if (!(b > 1.0)) throw s.bad("betas", "values > 1");
    const std::size_t n_samples = std::size_t(s.u64("n_samples"));
    const std::uint64_t seed = s.u64("seed");
    const int threads = int(s.integer("threads"));
    const double dt = s.num("dt");
    if (all || sweep == "envelopes" || sweep == "vorticity") with_drift(s, "drift", [](const auto&, const PeriodicVectorField&) {});
    const fs::path out = prepare_out(s);

    std::vector<BoundCheckReport> reps;
    auto append = [&](const std::vector<BoundCheckReport>& r) { reps.insert(reps.end(), r.begin(), r.end()); };
    if (all || sweep == "gaussian") append(check_gaussian_inequalities());
    if (all || sweep == "integrals") append(check_integral_sweep(standard_integral_sweep(), n_samples, seed, threads));
    if (all || sweep == "integrated") {
        auto mk = [](double a, double b, int d, std::vector<double> y) {
            IntegralParams p;
            p.alpha = a;
            p.beta = b;
            p.d = d;
            p.x.assign(d, 0.0);
            p.y = std::move(y);
            p.tau = 0.0;
            p.t = 1.0;
            return p;
        };
        for (const auto& p : {mk(1, 2, 1, {0.3}), mk(0.5, 1.5, 3, {0.1, 0.2, 0.0}), mk(0, 1, 3, {0.2, -0.1, 0.1}),
                              mk(1, 1.2, 3, {0.3, 0.0, 0.1}), mk(0, 2, 3, {0.05, 0.05, 0.05})})
            reps.push_back(check_integrated_bound(p).report);
    }
    if (all || sweep == "envelopes") {
        with_drift(s, "drift", [&](const auto& drift, const PeriodicVectorField& b) {
            SolveConfig sc;
            sc.dt = dt;
            const double tmax = *std::max_element(times.begin(), times.end());
            const auto tr = kernel_pde(Vec3{0.5, 0.5, 0.5}, DriftHistory::frozen(b), tmax, sc);
            EnvelopeOptions opt;
            opt.t_offset = tr.t_mollify;
            std::vector<double> prev_k, prev_g;
            for (double beta : betas) {
                const auto ek = verify_kernel_envelope(kernel_probes(tr, times, beta), tr.xi, beta, b.sup_norm(), opt);
                const auto eg = verify_gradient_envelope(kernel_probes(tr, times, beta, 2, 1e-6, true), tr.xi, beta,
                                                         b.sup_norm(),
                                                         [&](double tt) { return drift.grad_parabolic_norm(0.0, tt); }, opt);
                reps.push_back(ek.report);
                reps.push_back(eg.report);
                prev_k.push_back(ek.normalized_C1);
                prev_g.push_back(eg.normalized_C1);
            }
            for (const auto& [id, v] : {std::pair{"kernel_envelope_beta_monotone", prev_k},
                                        std::pair{"gradient_envelope_beta_monotone", prev_g}}) {
                double worst = 0.0;
                for (std::size_t i = 1; i < v.size(); ++i) worst = std::max(worst, v[i] / v[i - 1]);
                nlohmann::json pj{{"betas", betas}, {"normalized_C1", v}};
                reps.push_back({id, pj.dump(), worst, std::nan(""), std::nan(""), worst <= 1.0 + 1e-12,
                                "max ratio of consecutive normalized C1"});
            }
        });
    }
    if (all || sweep == "vorticity") {
        with_drift(s, "drift", [&](const auto& drift, const PeriodicVectorField& b) {
            const PeriodicVectorField w0 = curl(sample_drift(TaylorGreenDrift{1.0}, b.grid(), 0.0));
            SolveConfig sc;
            sc.dt = dt;
            sc.t_end = *std::max_element(times.begin(), times.end());
            const auto tr = solve_linearized_vorticity(w0, DriftHistory::frozen(b), sc);
            for (double beta : betas) {
                VorticityBoundInputs in;
                in.beta = beta;
                in.b_sup = b.sup_norm();
                in.grad_b_norm = [&](double tt) { return drift.grad_parabolic_norm(0.0, tt); };
                in.closure_threshold = s.num("closure_threshold");
                append(verify_vorticity_bounds(tr, w0, in));
            }
        });
    }
    write_reports(out / "bounds.csv", reps);
    std::size_t failed = 0;
    for (const auto& r : reps) failed += r.pass ? 0 : 1;
    std::cout << "verify: sweep=" << sweep << " checks=" << reps.size() << " failed=" << failed << "\n";
    if (failed) throw CheckFailed("verify: " + std::to_string(failed) + " check(s) failed, see bounds.csv");
    return 0;
}

// ---------------------------------------------------------------------------

int cmd_fields(const Settings& s) {
    const std::string in = s.str("input");
    if (in.empty()) throw UsageError("field 'input': VF3D file required");
    if (!fs::exists(in)) throw UsageError("field 'input': no such file '" + in + "'");
    const FieldSnapshot snap = read_field(in);
    const PeriodicVectorField& f = snap.field;
    const GridSpec g = f.grid();
    std::cout << "file=" << in << "\nn=" << g.n << "\ncomponents=" << f.components() << "\ntime=" << g17(snap.time)
              << "\nsup=" << g17(f.sup_norm()) << "\n";
    const auto m = mean(f);
    for (int c = 0; c < f.components(); ++c) std::cout << "mean_" << c << "=" << g17(m[c]) << "\n";
    if (f.components() == 3) std::cout << "max_div=" << g17(divergence(f).sup_norm()) << "\n";
    if (!s.str("out").empty()) {
        const fs::path out = prepare_out(s);
        const fs::path csv = out / (fs::path(in).stem().string() + ".csv");
        auto os = open_out(csv);
        os << "x,y,z";
        for (int c = 0; c < f.components(); ++c) os << ",c" << c;
        os << "\n";
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k) {
                    const std::size_t q = g.index(i, j, k);
                    os << g17(g.coord(i)) << "," << g17(g.coord(j)) << "," << g17(g.coord(k));
                    for (int c = 0; c < f.components(); ++c) os << "," << g17(f.at(c, q));
                    os << "\n";
                }
        std::cout << "csv=" << csv.string() << "\n";
    }
    return 0;
}

struct Command {
    std::string name;
    std::string help;
    const Defaults* defaults;
    int (*run)(const Settings&);
    CLI::App* app = nullptr;
    std::string config;
    std::map<std::string, std::string> flags;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"vortexiter: vorticity iteration, stochastic kernels and bound checks"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::vector<Command> cmds{
        {"iterate", "Picard iteration for the periodic Navier-Stokes problem", &kIterate, cmd_iterate, nullptr, {}, {}},
        {"kernel", "Monte Carlo / PDE transition kernels and Bismut gradients", &kKernel, cmd_kernel, nullptr, {}, {}},
        {"verify", "Inequality sweeps and envelope fits", &kVerify, cmd_verify, nullptr, {}, {}},
        {"fields", "Inspect a VF3D snapshot or convert it to CSV", &kFields, cmd_fields, nullptr, {}, {}},
    };
    for (auto& c : cmds) {
        c.app = app.add_subcommand(c.name, c.help);
        c.app->add_option("--config", c.config, "key=value file (# comments); flags override it");
        for (const auto& [key, def] : *c.defaults) {
            std::string names = "--" + key;
            std::string dashed = key;
            std::replace(dashed.begin(), dashed.end(), '_', '-');
            if (dashed != key) names += ",--" + dashed;
            c.app->add_option(names, c.flags[key], "default: " + (def.empty() ? std::string("(none)") : def));
        }
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    for (auto& c : cmds) {
        if (!c.app->parsed()) continue;
        try {
            Settings s(c.name, *c.defaults);
            if (!c.config.empty()) s.load_file(c.config);
            for (const auto& [key, def] : *c.defaults)
                if (c.app->count("--" + key) > 0) s.set_flag(key, c.flags[key]);
            return c.run(s);
        } catch (const UsageError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        } catch (const FormatError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 2;
        } catch (const InvalidArgument& e) {
            std::cerr << "error: invalid configuration: " << e.what() << "\n";
            return 2;
        } catch (const CheckFailed& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        } catch (const NumericalFailure& e) {
            std::cerr << "error: numerical failure: " << e.what() << "\n";
            return 1;
        } catch (const std::exception& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }
    return 2;
}
