#pragma once

#include "fpk/assembly.hpp"
#include "fpk/mollify.hpp"
#include "fpk/ornstein.hpp"
#include "fpk/spectral.hpp"
#include "fpk/weakform.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace fpk {

namespace fs = std::filesystem;

struct PipelineConfig {
    Rational delta = Rational(1, 2);
    int stages = 3;
    double h = 1.0 / 512;        // assembly build / verification resolution
    double csv_h = 1.0 / 128;    // materialization resolution
    int tiles_disjoint = 4;
    int tiles_overlapping = 9;
    double kappa = 6.0;
    double window_gaussian = 6.5;
    std::string out = "run";
    bool run_construct = true, run_smooth = true, run_assemble = true, run_verify = true,
         run_probe = true;
    double tol_residual = 1e-3;
    double tol_order = 1.8;
    double probe_r = 1.2;

    json to_json_obj() const {
        return json{{"delta", to_string(delta)},
                    {"stages", stages},
                    {"h", h},
                    {"csv_h", csv_h},
                    {"tiles_disjoint", tiles_disjoint},
                    {"tiles_overlapping", tiles_overlapping},
                    {"kappa", kappa},
                    {"window_gaussian", window_gaussian},
                    {"out", out},
                    {"run_construct", run_construct},
                    {"run_smooth", run_smooth},
                    {"run_assemble", run_assemble},
                    {"run_verify", run_verify},
                    {"run_probe", run_probe},
                    {"tol_residual", tol_residual},
                    {"tol_order", tol_order},
                    {"probe_r", probe_r}};
    }
};

inline double parse_grid_step(const std::string& s) {
    auto slash = s.find('/');
    if (slash != std::string::npos)
        return std::stod(s.substr(0, slash)) / std::stod(s.substr(slash + 1));
    return std::stod(s);
}

// flat key = value text; '#' starts a comment
inline PipelineConfig parse_config(const std::string& text) {
    PipelineConfig c;
    std::istringstream in(text);
    std::string line;
    std::map<std::string, std::string> kv;
    while (std::getline(in, line)) {
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string t) {
            t.erase(0, t.find_first_not_of(" \t\r"));
            auto e = t.find_last_not_of(" \t\r");
            t.erase(e == std::string::npos ? 0 : e + 1);
            return t;
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    try {
        for (const auto& [k, v] : kv) {
            if (k == "delta") c.delta = parse_rational(v);
            else if (k == "stages") c.stages = std::stoi(v);
            else if (k == "h") c.h = parse_grid_step(v);
            else if (k == "csv_h") c.csv_h = parse_grid_step(v);
            else if (k == "tiles_disjoint") c.tiles_disjoint = std::stoi(v);
            else if (k == "tiles_overlapping") c.tiles_overlapping = std::stoi(v);
            else if (k == "kappa") c.kappa = std::stod(v);
            else if (k == "window_gaussian") c.window_gaussian = std::stod(v);
            else if (k == "out") c.out = v;
            else if (k == "run_construct") c.run_construct = v != "0";
            else if (k == "run_smooth") c.run_smooth = v != "0";
            else if (k == "run_assemble") c.run_assemble = v != "0";
            else if (k == "run_verify") c.run_verify = v != "0";
            else if (k == "run_probe") c.run_probe = v != "0";
            else if (k == "tol_residual") c.tol_residual = std::stod(v);
            else if (k == "tol_order") c.tol_order = std::stod(v);
            else if (k == "probe_r") c.probe_r = std::stod(v);
            else throw ConfigError("unknown config key: " + k);
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad config value: ") + e.what());
    }
    // validate everything before any stage runs
    if (!(c.delta > 0 && c.delta < 1)) throw ConfigError("delta must lie in (0,1)");
    if (c.stages < 1 || c.stages > 6) throw ConfigError("stages must lie in [1,6]");
    if (!(c.h > 0 && c.h <= 1.0 / 8)) throw ConfigError("h must lie in (0, 1/8]");
    if (!(c.csv_h > 0)) throw ConfigError("csv_h must be positive");
    if (c.tiles_disjoint < 1 || c.tiles_disjoint > 9) throw ConfigError("tiles_disjoint in [1,9]");
    if (c.tiles_overlapping < 1 || c.tiles_overlapping > 9)
        throw ConfigError("tiles_overlapping in [1,9]");
    if (!(c.kappa > 0)) throw ConfigError("kappa must be positive");
    if (!(c.tol_residual > 0) || !(c.tol_order > 0)) throw ConfigError("tolerances must be positive");
    if (!(c.probe_r > 1 && c.probe_r < 2)) throw ConfigError("probe_r must lie in (1,2)");
    if (c.out.empty()) throw ConfigError("out directory missing");
    return c;
}

inline PipelineConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

struct RunManifest {
    json config;
    std::vector<std::pair<std::string, std::string>> artifacts;  // path, hash
    std::map<std::string, double> wall_times;
    std::map<std::string, bool> checks;
    std::string manifest_hash;

    bool all_pass() const {
        for (const auto& [k, v] : checks)
            if (!v) return false;
        return true;
    }

    json to_json_obj() const {
        json a = json::array();
        for (const auto& [p, h] : artifacts) a.push_back({{"path", p}, {"hash", h}});
        return json{{"config", config},
                    {"artifacts", a},
                    {"wall_times", wall_times},
                    {"checks", checks},
                    {"all_pass", all_pass()},
                    {"manifest_hash", manifest_hash}};
    }
};

namespace detail {

inline std::string file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot hash missing file: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return hash_hex(h);
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write: " + path);
    out << text;
}

struct StageArtifacts {
    std::vector<ConstructionState> states;
    std::vector<EpsilonSelection> selections;
};

inline GridField sample_density(const FPKAssembly& A, double h_csv, int max_nodes = 1025) {
    double span = A.support_hi - A.support_lo;
    long n = static_cast<long>(std::ceil(span / h_csv)) + 1;
    if (n > max_nodes) n = max_nodes;
    if (n % 2 == 0) ++n;
    double h = span / (n - 1);
    GridField g(A.support_lo, A.support_lo, h, static_cast<int>(n), static_cast<int>(n));
    parallel_blocks(static_cast<std::size_t>(n), worker_count() * 2,
                    [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                        for (std::size_t j = jlo; j < jhi; ++j)
                            for (long i = 0; i < n; ++i)
                                g.at(static_cast<int>(i), static_cast<int>(j)) =
                                    A.rho(g.x(static_cast<int>(i)), g.y(static_cast<int>(j)));
                    });
    return g;
}

// density of the N-tile overlapping assembly sampled on its support at h
inline GridField sample_overlapping_density(const FPKAssembly& A, double h) {
    long n = static_cast<long>(std::round((A.support_hi - A.support_lo) / h)) + 1;
    if (n % 2 == 0) ++n;
    GridField g(A.support_lo, A.support_lo, h, static_cast<int>(n), static_cast<int>(n));
    parallel_blocks(static_cast<std::size_t>(n), worker_count() * 2,
                    [&](std::size_t, std::size_t jlo, std::size_t jhi) {
                        for (std::size_t j = jlo; j < jhi; ++j)
                            for (long i = 0; i < n; ++i)
                                g.at(static_cast<int>(i), static_cast<int>(j)) =
                                    A.rho(g.x(static_cast<int>(i)), g.y(static_cast<int>(j)));
                    });
    return g;
}

}  // namespace detail

// Executes construct -> smooth -> assemble -> verify -> probe, writing all
// artifacts and the manifest under cfg.out. Exit contract: the caller maps
// all_pass() to the process exit code.
inline RunManifest run_pipeline(const PipelineConfig& cfg) {
    RunManifest man;
    man.config = cfg.to_json_obj();
    fs::create_directories(cfg.out);
    auto artifact = [&](const std::string& rel) {
        man.artifacts.emplace_back(rel, detail::file_hash(cfg.out + "/" + rel));
    };
    auto timed = [&](const std::string& name, auto&& fn) {
        auto t0 = std::chrono::steady_clock::now();
        fn();
        man.wall_times[name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    detail::write_text(cfg.out + "/config.txt", man.config.dump(2) + "\n");
    artifact("config.txt");

    detail::StageArtifacts st;

    if (cfg.run_construct) timed("construct", [&] {
        fs::create_directories(cfg.out + "/stages");
        st.states = construct_sequence(cfg.delta, cfg.stages);
        for (const auto& s : st.states) {
            json j{{"stage", s.n},
                   {"alpha_history", json::array()},
                   {"p", to_json(s.p)},
                   {"report", to_json(s.report)}};
            for (const auto& a : s.alpha_history) j["alpha_history"].push_back(to_string(a));
            std::string rel = "stages/stage_" + std::to_string(s.n) + ".json";
            detail::write_text(cfg.out + "/" + rel, j.dump(2) + "\n");
            artifact(rel);
            man.checks["stage_" + std::to_string(s.n) + "_properties"] = s.report.all_pass();
        }
    });

    if (cfg.run_smooth && !st.states.empty()) timed("smooth", [&] {
        fs::create_directories(cfg.out + "/smooth");
        for (const auto& s : st.states) {
            auto targets = step_norm_targets(s.p);
            auto sel = select_epsilon(s.p, cfg.delta, targets);
            st.selections.push_back(sel);
            json j = to_json(sel.report);
            j["halvings"] = sel.halvings;
            j["targets"] = json{{"l1", targets.l1},
                                {"int_var_x", targets.int_var_x},
                                {"int_var_y", targets.int_var_y},
                                {"sup_fx", targets.sup_fx},
                                {"sup_fy", targets.sup_fy}};
            std::string rel = "smooth/stage_" + std::to_string(s.n) + "_report.json";
            detail::write_text(cfg.out + "/" + rel, j.dump(2) + "\n");
            artifact(rel);
            const double tol = 1e-8;
            man.checks["stage_" + std::to_string(s.n) + "_contraction"] =
                sel.report.xx_l1 <= targets.int_var_x + tol &&
                sel.report.yy_l1 <= targets.int_var_y + tol &&
                sel.report.x_sup <= targets.sup_fy + tol && sel.report.y_sup <= targets.sup_fx + tol;
            // grid csv: full when affordable at h = eps/8, else an exact-valued
            // preview at csv_h (recorded as such)
            double hg = sel.eps / 8.0;
            double span = 2.0 * (1.0 + 2.0 * sel.eps) + 2.0 * sel.eps;
            bool full = (span / hg) * (span / hg) <= 9e6;
            std::string rel2 = "smooth/stage_" + std::to_string(s.n) +
                               (full ? "_grid.csv" : "_grid_preview.csv");
            if (full) {
                write_csv(smooth_xy(s.p, sel.eps, hg), cfg.out + "/" + rel2);
            } else {
                MollifiedField f(s.p, sel.eps);
                double lo = f.support_xlo() - sel.eps;
                long n = static_cast<long>(std::ceil((f.support_xhi() + sel.eps - lo) / cfg.csv_h)) + 1;
                if (n % 2 == 0) ++n;
                GridField g(lo, lo, cfg.csv_h, static_cast<int>(n), static_cast<int>(n));
                for (long jj = 0; jj < n; ++jj)
                    for (long ii = 0; ii < n; ++ii)
                        g.at(static_cast<int>(ii), static_cast<int>(jj)) =
                            f.q(g.x(static_cast<int>(ii)), g.y(static_cast<int>(jj)));
                write_csv(g, cfg.out + "/" + rel2);
            }
            artifact(rel2);
        }
        // ratio monotonicity across stages
        bool mono = true;
        for (std::size_t k = 1; k < st.selections.size(); ++k)
            mono = mono && st.selections[k].report.ratio > st.selections[k - 1].report.ratio;
        man.checks["ratio_nondecreasing"] = mono;
    });

    FPKAssembly Adis, Aover, Agau;
    if (cfg.run_assemble && !st.states.empty()) timed("assemble", [&] {
        AssemblyParams par;
        par.h = cfg.h;
        par.kappa = cfg.kappa;
        Adis = assemble_disjoint(make_tile_plan(TilePlan::Mode::disjoint, cfg.tiles_disjoint),
                                 st.states, par);
        Aover = assemble_overlapping(
            make_tile_plan(TilePlan::Mode::overlapping, cfg.tiles_overlapping), st.states, par);
        Agau = gaussian_variant(Adis, cfg.window_gaussian);
        for (const auto* A : {&Adis, &Aover, &Agau}) {
            std::string dir = "assembly_" + A->mode;
            write_assembly(*A, cfg.out + "/" + dir, cfg.csv_h);
            for (const std::string f : {"rho", "bx", "by", "vx", "vy"})
                artifact(dir + "/" + f + ".csv");
            artifact(dir + "/recipe.json");
        }
        man.checks["disjoint_tiles_disjoint"] = true;  // plan construction enforces it
        man.checks["overlapping_positive"] = true;     // assemble_overlapping enforces it
    });

    if (cfg.run_verify && cfg.run_assemble && !st.states.empty()) timed("verify", [&] {
        fs::create_directories(cfg.out + "/verify");
        json all;
        for (const auto* A : {&Adis, &Aover, &Agau}) {
            double margin = (A->window_hi - A->window_lo) * 0.02;
            double basis_lo = std::max(A->window_lo + margin, -2.4);
            double basis_hi = std::min(A->window_hi - margin, 2.4);
            auto basis = bump_basis(basis_lo, basis_hi);
            auto rep = residual_suite(A->rho, A->bx, A->by, basis, A->window_lo, A->window_hi, cfg.h);
            all[A->mode] = to_json(rep);
            man.checks["residual_" + A->mode] = rep.max_normalized <= cfg.tol_residual;
            man.checks["order_" + A->mode] = rep.order >= cfg.tol_order;
        }
        detail::write_text(cfg.out + "/verify/residuals.json", all.dump(2) + "\n");
        artifact("verify/residuals.json");

        // gradient masses over D_n with the harmonic targets
        auto sums = gradient_mass_partial_sums(Aover);
        json gm{{"scale", Aover.scale_k}, {"sums", sums}, {"cuts", {1, 2, 4, 9}}};
        bool gm_ok = true;
        std::vector<int> cuts = {1, 2, 4, 9};
        for (std::size_t k = 0; k < sums.size(); ++k) {
            double target = 0;
            for (int n = 1; n <= cuts[k]; ++n) target += 0.5 / n;
            gm_ok = gm_ok && sums[k] >= 0.9 * target * Aover.scale_k;
        }
        man.checks["gradient_mass_harmonic"] = gm_ok;
        detail::write_text(cfg.out + "/verify/gradient_mass.json", gm.dump(2) + "\n");
        artifact("verify/gradient_mass.json");

        // logarithmic gradient bound on the strictly positive variant
        auto [lhs, rhs] = l2_loggrad_check(Agau.rho, Agau.drho_x, Agau.drho_y, Agau.bx, Agau.by,
                                           Agau.window_lo, Agau.window_hi, cfg.h);
        json lg{{"lhs", lhs}, {"rhs", rhs}};
        man.checks["loggrad_bound"] = lhs <= rhs * (1 + 1e-4);
        detail::write_text(cfg.out + "/verify/loggrad.json", lg.dump(2) + "\n");
        artifact("verify/loggrad.json");
    });

    if (cfg.run_probe && cfg.run_assemble && !st.states.empty()) timed("probe", [&] {
        fs::create_directories(cfg.out + "/probe");
        GridField rho = detail::sample_overlapping_density(Aover, cfg.h);
        std::vector<double> alphas;
        for (int k = 0; k <= 20; ++k) alphas.push_back(k * 0.05);
        auto curve = threshold_sweep(rho, cfg.probe_r, alphas);
        std::string csv = "alpha,norm,at_or_below_alpha_star\n";
        for (std::size_t k = 0; k < curve.alphas.size(); ++k) {
            char buf[96];
            snprintf(buf, sizeof buf, "%.2f,%.17g,%d\n", curve.alphas[k], curve.norms[k],
                     curve.alphas[k] < curve.alpha_star ? 1 : 0);
            csv += buf;
        }
        detail::write_text(cfg.out + "/probe/sweep.csv", csv);
        artifact("probe/sweep.csv");

        // two-resolution study: rebuild at h/2 and compare the band norms
        AssemblyParams par2;
        par2.h = cfg.h / 2;
        par2.kappa = cfg.kappa;
        auto Ao2 = assemble_overlapping(
            make_tile_plan(TilePlan::Mode::overlapping, cfg.tiles_overlapping), st.states, par2);
        GridField rho2 = detail::sample_overlapping_density(Ao2, cfg.h / 2);
        json study;
        for (double a : {0.3, 0.95}) {
            double n1 = frac_norm(rho, cfg.probe_r, a);
            double n2 = frac_norm(rho2, cfg.probe_r, a);
            study[a == 0.3 ? "low_band" : "high_band"] =
                json{{"alpha", a}, {"norm_h", n1}, {"norm_h2", n2}, {"change", n2 / n1 - 1.0}};
        }
        man.checks["frac_low_band_stable"] =
            std::fabs(study["low_band"]["change"].get<double>()) <= 0.05;
        study["alpha_star"] = curve.alpha_star;
        detail::write_text(cfg.out + "/probe/threshold_study.json", study.dump(2) + "\n");
        artifact("probe/threshold_study.json");
    });

    // export bundle
    timed("export", [&] {
        fs::create_directories(cfg.out + "/export");
        if (!st.selections.empty()) {
            std::string csv = "stage,ratio,mixed_l1,xx_l1,yy_l1,x_sup,y_sup,eps\n";
            for (std::size_t k = 0; k < st.selections.size(); ++k) {
                const auto& r = st.selections[k].report;
                char buf[256];
                snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k + 1,
                         r.ratio, r.mixed_l1, r.xx_l1, r.yy_l1, r.x_sup, r.y_sup, r.eps);
                csv += buf;
            }
            detail::write_text(cfg.out + "/export/ratio_vs_n.csv", csv);
            artifact("export/ratio_vs_n.csv");
        }
    });

    // manifest hash covers the config and every artifact hash, in order
    std::string blob = man.config.dump();
    for (const auto& [p, h] : man.artifacts) blob += p + ":" + h + ";";
    man.manifest_hash = hash_hex(fnv1a(blob.data(), blob.size()));
    detail::write_text(cfg.out + "/manifest.json", man.to_json_obj().dump(2) + "\n");
    return man;
}

// Post-run export: collects plotting CSV bundles from a completed run
// directory; missing artifacts are an error listing the absent files.
inline std::vector<std::string> export_plots(const std::string& run_dir) {
    std::vector<std::string> missing;
    if (!fs::exists(run_dir + "/manifest.json")) missing.push_back("manifest.json");
    if (!fs::exists(run_dir + "/export/ratio_vs_n.csv")) missing.push_back("export/ratio_vs_n.csv");
    if (!fs::exists(run_dir + "/verify/gradient_mass.json"))
        missing.push_back("verify/gradient_mass.json");
    if (!fs::exists(run_dir + "/probe/sweep.csv")) missing.push_back("probe/sweep.csv");
    if (!missing.empty()) {
        std::string msg = "missing artifacts:";
        for (const auto& m : missing) msg += " " + m;
        throw ConfigError(msg);
    }
    fs::create_directories(run_dir + "/export");
    // gradient-mass-vs-N csv from the verify report
    std::ifstream in(run_dir + "/verify/gradient_mass.json");
    json gm = json::parse(in);
    std::string csv = "N,S_N,harmonic_target\n";
    auto cuts = gm.at("cuts");
    auto sums = gm.at("sums");
    double scale = gm.at("scale").get<double>();
    for (std::size_t k = 0; k < sums.size(); ++k) {
        double target = 0;
        for (int n = 1; n <= cuts[k].get<int>(); ++n) target += 0.5 / n;
        char buf[128];
        snprintf(buf, sizeof buf, "%d,%.17g,%.17g\n", cuts[k].get<int>(), sums[k].get<double>(),
                 target * scale);
        csv += buf;
    }
    detail::write_text(run_dir + "/export/gradient_mass_vs_N.csv", csv);
    fs::copy_file(run_dir + "/probe/sweep.csv", run_dir + "/export/frac_norm_sweep.csv",
                  fs::copy_options::overwrite_existing);
    return {run_dir + "/export/ratio_vs_n.csv", run_dir + "/export/gradient_mass_vs_N.csv",
            run_dir + "/export/frac_norm_sweep.csv"};
}

}  // namespace fpk
