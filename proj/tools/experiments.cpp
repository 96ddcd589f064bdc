#include "experiments.hpp"

#include "microlocal/analytic_wf.hpp"
#include "microlocal/io.hpp"
#include "microlocal/microsupport.hpp"
#include "microlocal/parallel.hpp"
#include "microlocal/qft_examples.hpp"
#include "microlocal/spacetime.hpp"
#include "microlocal/transforms.hpp"
#include "microlocal/wf_calculus.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

namespace microlocal::experiments {

namespace fs = std::filesystem;

// ---- config plumbing ----

json ExperimentConfig::to_json() const {
    return json{{"experiment", experiment}, {"seed", seed}, {"params", params}, {"out", out_dir}, {"png", png}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    c.experiment = j.at("experiment").get<std::string>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.params = j.at("params");
    c.out_dir = j.value("out", std::string{});
    c.png = j.value("png", false);
    return c;
}

Table& ExperimentResult::table(const std::string& name, std::vector<std::string> columns) {
    for (auto& [n, t] : tables) {
        if (n == name) return t;
    }
    tables.emplace_back(name, Table{std::move(columns), json::array()});
    return tables.back().second;
}

bool ExperimentResult::check(const std::string& name, bool ok, const std::string& message) {
    verdicts[name] = ok;
    if (!ok) failures.push_back(name + ": " + message);
    return ok;
}

namespace {

const char* type_label(const json& j) {
    if (j.is_boolean()) return "boolean";
    if (j.is_number()) return "number";
    if (j.is_string()) return "string";
    if (j.is_array()) return "array";
    if (j.is_object()) return "object";
    return "null";
}

void overlay(json& target, const json& user, const std::string& path) {
    if (!user.is_object()) throw SchemaError(path, std::string("expected object, got ") + type_label(user));
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string field = path + "." + it.key();
        if (!target.contains(it.key())) throw SchemaError(field, "unknown field");
        json& slot = target[it.key()];
        const json& v = it.value();
        if (slot.is_object()) {
            overlay(slot, v, field);
            continue;
        }
        if (std::string(type_label(slot)) != type_label(v)) {
            throw SchemaError(field, std::string("expected ") + type_label(slot) + ", got " + type_label(v));
        }
        if (slot.is_number_integer() && !v.is_number_integer()) {
            throw SchemaError(field, "expected integer");
        }
        if (slot.is_array() && !slot.empty()) {
            for (std::size_t k = 0; k < v.size(); ++k) {
                if (std::string(type_label(slot[0])) != type_label(v[k])) {
                    throw SchemaError(field + "[" + std::to_string(k) + "]",
                                      std::string("expected ") + type_label(slot[0]));
                }
            }
        }
        slot = v;
    }
}

// ---- shared helpers ----

json ladder_defaults(double h_max = 0.5, double ratio = 0.8, int count = 16) {
    return json{{"h_max", h_max}, {"ratio", ratio}, {"count", count}};
}

HLadder ladder_param(const json& p, const char* key = "ladder") {
    const json& l = p.at(key);
    return make_h_ladder(l.at("h_max").get<double>(), l.at("ratio").get<double>(), l.at("count").get<int>());
}

double num(const json& p, const char* key) { return p.at(key).get<double>(); }
int integer(const json& p, const char* key) { return p.at(key).get<int>(); }

json jnum(double v) { return number_to_json(v); }

json point_json(const PhasePoint& q) { return json::array({q.x[0], q.xi[0]}); }

json points_json(const std::vector<PhasePoint>& pts) {
    json a = json::array();
    for (const auto& q : pts) a.push_back(point_json(q));
    return a;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

std::string artifact_path(const ExperimentConfig& c, ExperimentResult& r, const std::string& file) {
    r.artifacts.push_back(file);
    return (fs::path(c.out_dir) / file).string();
}

bool want_files(const ExperimentConfig& c) { return !c.out_dir.empty(); }

SampledFamily strip_exact(SampledFamily f) {
    f.fbi_exact = nullptr;
    return f;
}

std::vector<double> arange(double a, double b, double step) {
    std::vector<double> out;
    for (long k = 0;; ++k) {
        const double v = a + k * step;
        if (v > b + 1e-9 * step) break;
        out.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
    }
    return out;
}

// ---- fbi ----

struct Mixture {
    std::vector<PhasePoint> centres;
    std::vector<cplx> coeffs;
};

SampledFamily mixture_at(const Mixture& m, double h) {
    SampledFamily f = family_scale(coherent_state(m.centres[0], h), m.coeffs[0]);
    for (std::size_t k = 1; k < m.centres.size(); ++k) {
        f = family_sum(f, family_scale(coherent_state(m.centres[k], h), m.coeffs[k]));
    }
    return strip_exact(f);
}

void run_fbi_isometry(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder ladder = ladder_param(p);
    const int n_mix = integer(p, "mixtures");
    const int n_comp = integer(p, "components");
    const double range = num(p, "centre_range");
    const double tol = num(p, "tolerance");
    r.tolerances = {{"relative", tol}};

    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> pos(-range, range);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<Mixture> mixes(n_mix);
    for (auto& m : mixes) {
        for (int k = 0; k < n_comp; ++k) {
            const double x = pos(rng), xi = pos(rng);
            const double re = gauss(rng), im = gauss(rng);
            m.centres.push_back(PhasePoint{{x, 0.0}, {xi, 0.0}});
            m.coeffs.emplace_back(re, im);
        }
    }
    json in = json::array();
    for (const auto& m : mixes) {
        json comps = json::array();
        for (std::size_t k = 0; k < m.centres.size(); ++k) {
            comps.push_back({{"x", m.centres[k].x[0]}, {"xi", m.centres[k].xi[0]},
                             {"re", m.coeffs[k].real()}, {"im", m.coeffs[k].imag()}});
        }
        in.push_back(comps);
    }
    r.inputs = {{"ladder", to_json(ladder)}, {"mixtures", in}};

    const std::size_t nr = ladder.size();
    std::vector<double> ratio(mixes.size() * nr);
    // Trapezoid sums of Gaussians; steps of sqrt(h)/3 resolve every cross term above 1e-15.
    parallel_for(ratio.size(), [&](std::size_t idx) {
        const Mixture& m = mixes[idx / nr];
        const double h = ladder[idx % nr];
        const SampledFamily f = mixture_at(m, h);
        const double s = std::sqrt(h);
        double lo = 1e300, hi = -1e300, klo = 1e300, khi = -1e300;
        for (const auto& q : m.centres) {
            lo = std::min(lo, q.x[0]);
            hi = std::max(hi, q.x[0]);
            klo = std::min(klo, q.xi[0]);
            khi = std::max(khi, q.xi[0]);
        }
        const double pad = 8.0 * s;
        double norm_f = 0.0;
        const double dy = s / 6.0;
        for (double y : grid_axis(lo - pad, hi + pad, dy)) norm_f += std::norm(f(h, y));
        const auto ys = grid_axis(lo - pad, hi + pad, dy);
        norm_f *= ys.size() > 1 ? ys[1] - ys[0] : dy;

        FbiWindow w{lo - pad, hi + pad, klo - pad, khi + pad, s / 3.0, s / 3.0};
        const FbiField field = fbi_field(f, w, {h});
        const auto xs = w.xs(), ks = w.xis();
        double norm_t = 0.0;
        for (const cplx& v : field.values[0]) norm_t += std::norm(v);
        norm_t *= (xs[1] - xs[0]) * (ks[1] - ks[0]);
        ratio[idx] = std::sqrt(norm_t / norm_f);
    });

    auto& t = r.table("isometry", {"mixture", "h", "ratio", "abs_error"});
    double worst = 0.0;
    for (std::size_t idx = 0; idx < ratio.size(); ++idx) {
        const double err = std::abs(ratio[idx] - 1.0);
        worst = std::max(worst, err);
        t.add({idx / nr, ladder[idx % nr], ratio[idx], err});
    }
    r.metrics = {{"max_relative_error", worst}, {"samples", ratio.size()}};
    r.check("isometry", worst <= tol, "max |ratio - 1| = " + fmt(worst));
}

struct TestFunction {
    std::string name;
    SampledFamily f;
    // Centre of the phase-space content at scale h: xi range of T_h f.
    std::function<std::pair<double, double>(double h)> xi_range;
    std::pair<double, double> x_range;
};

SampledFamily modulated_gaussian(double k) {
    SampledFamily f = gaussian_function();
    f.eval = [k](double, const Vec& y) { return cplx{std::exp(-0.5 * y[0] * y[0]) * std::cos(k * y[0])}; };
    f.xi_extent = k;
    f.label = "modulated_gaussian";
    return f;
}

void run_fbi_reconstruction(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto rungs = p.at("rungs").get<std::vector<double>>();
    const double tol = num(p, "tolerance");
    const double half = num(p, "sample_half_width");
    r.tolerances = {{"sup_relative", tol}};
    r.inputs = {{"rungs", rungs}, {"samples", json::array({-half, half, 0.1})}};

    const PhasePoint pc{{0.3, 0.0}, {0.7, 0.0}};
    std::vector<TestFunction> battery;
    battery.push_back({"coherent", strip_exact(coherent_family(pc)),
                       [](double h) { return std::pair{0.7 - 8.0 * std::sqrt(h), 0.7 + 8.0 * std::sqrt(h)}; },
                       {-3.0, 3.6}});
    battery.push_back({"gaussian", gaussian_function(),
                       [](double h) { return std::pair{-8.0 * std::sqrt(h), 8.0 * std::sqrt(h)}; },
                       {-7.0, 7.0}});
    battery.push_back({"modulated_gaussian", modulated_gaussian(4.0),
                       [](double h) { return std::pair{-4.0 * h - 8.0 * std::sqrt(h), 4.0 * h + 8.0 * std::sqrt(h)}; },
                       {-7.0, 7.0}});

    const auto ys = arange(-half, half, 0.1);
    std::vector<double> err(battery.size() * rungs.size());
    std::vector<int> warn(err.size());
    parallel_for(err.size(), [&](std::size_t idx) {
        const TestFunction& tf = battery[idx / rungs.size()];
        const double h = rungs[idx % rungs.size()];
        const double s = std::sqrt(h);
        const auto [k0, k1] = tf.xi_range(h);
        FbiWindow w{tf.x_range.first, tf.x_range.second, k0, k1, s / 4.0, s / 4.0};
        const FbiField field = fbi_field(tf.f, w, {h});
        double e = 0.0, peak = 0.0;
        for (double y : ys) {
            const Reconstruction rec = fbi_adjoint_reconstruct(field, 0, y);
            const cplx u = tf.f(h, y);
            e = std::max(e, std::abs(rec.value - u));
            peak = std::max(peak, std::abs(u));
            warn[idx] |= rec.warning ? 1 : 0;
        }
        err[idx] = e / peak;
    });
    auto& t = r.table("reconstruction", {"function", "h", "sup_relative_error", "window_warning"});
    double worst = 0.0;
    for (std::size_t idx = 0; idx < err.size(); ++idx) {
        worst = std::max(worst, err[idx]);
        t.add({battery[idx / rungs.size()].name, rungs[idx % rungs.size()], err[idx], warn[idx] != 0});
        r.check("window_" + battery[idx / rungs.size()].name + "_" + fmt(rungs[idx % rungs.size()]),
                warn[idx] == 0, "field not negligible on the window edge");
    }
    r.metrics = {{"max_sup_relative_error", worst}};
    r.check("reconstruction", worst <= tol, "sup relative error " + fmt(worst));
}

void run_fbi_radial(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto xs = p.at("points").get<std::vector<double>>();
    const double tol = num(p, "tolerance");
    r.tolerances = {{"pointwise_relative", tol}, {"integration_rel_tol", num(p, "integration_rel_tol")}};
    r.inputs = {{"points", xs}, {"functions", {"gaussian", "modulated_gaussian"}}};
    const std::vector<std::pair<std::string, SampledFamily>> fns{{"gaussian", gaussian_function()},
                                                                 {"modulated_gaussian", modulated_gaussian(4.0)}};
    std::vector<RadialReconstruction> rec(fns.size() * xs.size());
    parallel_for(rec.size(), [&](std::size_t idx) {
        rec[idx] = fbi_radial_reconstruct(fns[idx / xs.size()].second, xs[idx % xs.size()], num(p, "integration_rel_tol"));
    });
    auto& t = r.table("radial", {"function", "x", "reconstructed", "exact", "relative_error", "converged"});
    double worst = 0.0;
    bool all_conv = true;
    for (std::size_t idx = 0; idx < rec.size(); ++idx) {
        const auto& [name, f] = fns[idx / xs.size()];
        const double x = xs[idx % xs.size()];
        const cplx u = f(1.0, x);
        const double e = std::abs(rec[idx].value - u) / std::abs(u);
        worst = std::max(worst, e);
        all_conv = all_conv && rec[idx].converged;
        t.add({name, x, rec[idx].value.real(), u.real(), e, rec[idx].converged});
    }
    r.metrics = {{"max_relative_error", worst}};
    r.check("radial_inversion", worst <= tol, "max pointwise relative error " + fmt(worst));
    r.check("converged", all_conv, "s-integral did not converge at some point");
}

// ---- microsupport ----

PhaseWindow window_param(const json& w) {
    return PhaseWindow::line(num(w, "x_lo"), num(w, "x_hi"), num(w, "xi_lo"), num(w, "xi_hi"), num(w, "x_step"),
                             num(w, "xi_step"));
}

json window_defaults(double x0, double x1, double k0, double k1, double step = 0.25) {
    return json{{"x_lo", x0}, {"x_hi", x1}, {"xi_lo", k0}, {"xi_hi", k1}, {"x_step", step}, {"xi_step", step}};
}

json window_json(const PhaseWindow& w) {
    return window_defaults(w.x_box.lo[0], w.x_box.hi[0], w.xi_box.lo[0], w.xi_box.hi[0], w.x_step);
}

const DecayFit* fit_at(const MicrosupportMap& m, double x, double xi) {
    for (std::size_t i = 0; i < m.nodes.size(); ++i) {
        if (std::abs(m.nodes[i].x[0] - x) < 1e-9 && std::abs(m.nodes[i].xi[0] - xi) < 1e-9) return &m.fits[i];
    }
    return nullptr;
}

void maybe_write_map(const ExperimentConfig& c, ExperimentResult& r, const MicrosupportMap& m, const std::string& stem) {
    if (!want_files(c)) return;
    std::ofstream os(artifact_path(c, r, stem + ".csv"));
    write_microsupport_csv(m, os);
    if (c.png) write_microsupport_png(m, artifact_path(c, r, stem + ".png"));
}

void run_zero_energy(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder ladder = ladder_param(p);
    const PhaseWindow w = window_param(p.at("window"));
    const double eps = num(p, "eps");
    const double delta_min = num(p, "delta_hat_min");
    r.inputs = {{"ladder", to_json(ladder)}, {"window", window_json(w)}, {"eps", eps}, {"coherent_centre", {0.0, 1.0}}};
    r.tolerances = {{"delta_hat_min", delta_min}, {"thresholds", to_json(DecayThresholds{})}};

    const PhaseSet zero = PhaseSet::zero_section(w.x_box);
    const DecayFit cf = uniform_small_check(compact_fourier_family(), zero, eps, w, ladder);

    ScanOptions flat;
    flat.weight_powers = {0};
    const SampledFamily coh = coherent_family({{0.0, 0.0}, {1.0, 0.0}});
    const DecayFit cu = uniform_small_check(coh, zero, eps, w, ladder, flat);
    const MicrosupportMap cm = microsupport_scan(coh, w, ladder, flat);
    const DecayFit* at = fit_at(cm, 0.0, 1.0);
    maybe_write_map(c, r, cm, "coherent_map");

    r.metrics = {{"compact_fourier", to_json(cf)}, {"coherent_uniform", to_json(cu)},
                 {"coherent_at_0_1", at ? to_json(*at) : json(nullptr)},
                 {"coherent_not_exp_small_nodes", points_json(cm.nodes_with(Verdict::NOT_EXP_SMALL))}};
    r.check("compact_fourier_exp_small", cf.verdict == Verdict::EXP_SMALL,
            "verdict " + to_string(cf.verdict));
    r.check("compact_fourier_delta", cf.delta_hat >= delta_min, "delta_hat " + fmt(cf.delta_hat));
    r.check("coherent_uniform_not_small", cu.verdict == Verdict::NOT_EXP_SMALL,
            "off-zero-section check on the coherent family gave " + to_string(cu.verdict));
    r.check("coherent_node_0_1", at && at->verdict == Verdict::NOT_EXP_SMALL,
            "verdict at (0, 1) is " + (at ? to_string(at->verdict) : std::string("missing")));
}

void run_bump(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder base = ladder_param(p);
    const PhaseWindow w = window_param(p.at("window"));
    const auto eps_list = p.at("eps").get<std::vector<double>>();
    const double plateau_tol = num(p, "plateau_tolerance");
    const double ref_eps = num(p, "ladder_reference_eps");
    BumpParams bp;
    bp.k_lo = {num(p, "k_lo"), 0.0};
    bp.k_hi = {num(p, "k_hi"), 0.0};
    r.inputs = {{"ladder", to_json(base)}, {"window", window_json(w)}, {"eps", eps_list},
                {"K", {bp.k_lo[0], bp.k_hi[0]}}, {"ladder_reference_eps", ref_eps}};
    r.tolerances = {{"plateau", plateau_tol}, {"delta_min_base", DecayThresholds{}.delta_min}};

    auto& t = r.table("collar_checks", {"eps", "ladder_scale", "delta_min", "delta_hat", "r_squared", "verdict"});
    double plateau_err = 0.0;
    for (double eps : eps_list) {
        // Thin collars decay like eps^2/h: shrink the ladder with eps^2 and the rate floor with it.
        const double lambda = std::min(1.0, (eps / ref_eps) * (eps / ref_eps));
        const HLadder ladder = lambda < 1.0 ? rescale_ladder(base, lambda) : base;
        const BumpFamily b = bump_family(BumpKind::PLATEAU, bp, ladder);
        for (double h : ladder.rungs) {
            for (double x : grid_axis(bp.k_lo[0], bp.k_hi[0], 0.01)) {
                plateau_err = std::max(plateau_err, std::abs(b.realization(h, x) - 1.0));
            }
        }
        ScanOptions o;
        o.thresholds.delta_min *= lambda;
        const DecayFit fit = uniform_small_check(b.realization, PhaseSet::zero_section(w.x_box), eps, w, ladder, o);
        t.add({eps, lambda, o.thresholds.delta_min, jnum(fit.delta_hat), fit.r_squared, to_string(fit.verdict)});
        r.check("collar_" + fmt(eps), fit.verdict == Verdict::EXP_SMALL,
                "eps " + fmt(eps) + " gave " + to_string(fit.verdict));
    }
    r.metrics = {{"plateau_max_error", plateau_err}};
    r.check("plateau", plateau_err <= plateau_tol, "max |chi_h - 1| on K = " + fmt(plateau_err));
}

void run_product(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder ladder = ladder_param(p);
    const PhaseWindow w = window_param(p.at("window"));
    const int pairs = integer(p, "pairs");
    const double span = num(p, "centre_range");
    const double sum_max = num(p, "max_momentum_sum");
    r.inputs = {{"ladder", to_json(ladder)}, {"window", window_json(w)}};
    r.tolerances = {{"containment", w.cell_diagonal()}};

    // Centres on window nodes: off-node coherent states leave no node NOT_EXP_SMALL.
    std::mt19937_64 rng(c.seed);
    const int n_side = static_cast<int>(std::llround(span / w.x_step));
    std::uniform_int_distribution<int> pick(-n_side, n_side);
    struct Pair {
        double x, xi1, xi2;
    };
    std::vector<Pair> ps;
    while (static_cast<int>(ps.size()) < pairs) {
        const Pair q{pick(rng) * w.x_step, pick(rng) * w.xi_step, pick(rng) * w.xi_step};
        if (std::abs(q.xi1 + q.xi2) <= sum_max) ps.push_back(q);
    }
    json in = json::array();
    for (const auto& q : ps) in.push_back({{"x", q.x}, {"xi1", q.xi1}, {"xi2", q.xi2}});
    r.inputs["pairs"] = in;

    std::vector<ProductReport> reps(ps.size());
    parallel_for(ps.size(), [&](std::size_t i) {
        const auto a = strip_exact(coherent_family({{ps[i].x, 0.0}, {ps[i].xi1, 0.0}}));
        const auto b = strip_exact(coherent_family({{ps[i].x, 0.0}, {ps[i].xi2, 0.0}}));
        reps[i] = product_microsupport(a, b, w, ladder);
    });
    auto& t = r.table("pairs", {"pair", "x", "xi1", "xi2", "product_flags", "predicted", "contained", "worst_distance"});
    std::size_t total_flags = 0;
    for (std::size_t i = 0; i < reps.size(); ++i) {
        const auto& rep = reps[i];
        const auto flags = rep.product_map.nodes_with(Verdict::NOT_EXP_SMALL);
        total_flags += flags.size();
        t.add({i, ps[i].x, ps[i].xi1, ps[i].xi2, flags.size(), rep.containment.predicted.size(),
               rep.containment.contained, rep.containment.worst_distance});
        r.check("pair_" + std::to_string(i), rep.containment.contained,
                std::to_string(rep.containment.escaped.size()) + " product nodes escape the fiberwise sum");
        r.check("pair_" + std::to_string(i) + "_nonvacuous", !flags.empty(), "product has no NOT_EXP_SMALL node");
    }
    if (!reps.empty()) maybe_write_map(c, r, reps[0].product_map, "product_map_0");
    r.metrics = {{"product_flags_total", total_flags}};
}

void run_pullback(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder ladder = ladder_param(p);
    const PhaseWindow w = window_param(p.at("window"));
    const double amp = num(p, "sine_amplitude");
    const double slope = num(p, "linear_slope");
    const PhasePoint centre{{0.0, 0.0}, {num(p, "xi0"), 0.0}};
    r.inputs = {{"ladder", to_json(ladder)}, {"window", window_json(w)}, {"source", point_json(centre)},
                {"maps", {"x -> " + fmt(slope) + " x", "x -> x + " + fmt(amp) + " sin x"}}};
    const double tol = w.cell_diagonal();
    r.tolerances = {{"match", tol}};

    BumpParams bp;
    bp.k_lo = {-1.0, 0.0};
    bp.k_hi = {1.0, 0.0};
    const SampledFamily chi = bump_family(BumpKind::PLATEAU, bp, ladder).realization;
    SampledFamily u = strip_exact(coherent_family(centre));
    u.support = Box::interval(-20.0, 20.0);

    const std::vector<std::pair<std::string, AnalyticMap>> maps{{"linear", linear_map(slope)},
                                                                {"sine", sine_perturbation(amp)}};
    std::vector<MicrosupportMap> scans(maps.size());
    parallel_for(maps.size(), [&](std::size_t i) {
        scans[i] = microsupport_scan(pullback_family(u, maps[i].second, chi), w, ladder);
    });
    auto& t = r.table("pullback", {"map", "predicted", "flagged", "contained", "worst_distance", "predicted_hit"});
    for (std::size_t i = 0; i < maps.size(); ++i) {
        const auto& name = maps[i].first;
        const auto pred = pullback_points({centre}, maps[i].second, w.x_box.lo[0], w.x_box.hi[0]);
        const auto flags = scans[i].nodes_with(Verdict::NOT_EXP_SMALL);
        const ContainmentReport fwd = check_containment(flags, pred, tol);
        std::vector<PhasePoint> in_window;
        for (const auto& q : pred) {
            if (w.x_box.contains(q.x) && w.xi_box.contains(q.xi)) in_window.push_back(q);
        }
        const ContainmentReport back = check_containment(in_window, flags, tol);
        t.add({name, points_json(pred), points_json(flags), fwd.contained, fwd.worst_distance, back.contained});
        r.check(name + "_flags_predicted", fwd.contained,
                std::to_string(fwd.escaped.size()) + " flagged nodes away from the prediction");
        r.check(name + "_prediction_flagged", back.contained && !in_window.empty(),
                "predicted point without a flagged node nearby");
        maybe_write_map(c, r, scans[i], "pullback_" + name);
    }
}

// ---- wfa ----

void run_wfa_truth(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto base = p.at("base_points").get<std::vector<double>>();
    const double cell = num(p, "cell");
    const HLadder ladder = wfa_ladder();
    r.inputs = {{"base_points", base}, {"ladder", to_json(ladder)}};
    r.tolerances = {{"cell", cell}};

    struct Case {
        std::string name;
        SampledFamily f;
    };
    const std::vector<Case> cases{{"delta", point_mass(0.0)},
                                  {"gaussian", gaussian_function()},
                                  {"bump", nonanalytic_bump()},
                                  {"spectral_boundary_value", spectral_boundary_value()}};
    std::vector<OneSidedResult> res(cases.size() * base.size());
    parallel_for(res.size(), [&](std::size_t idx) {
        res[idx] = one_sided_check(cases[idx / base.size()].f, base[idx % base.size()], ladder);
    });
    auto& t = r.table("truth_table", {"function", "x", "side", "fbi_side", "sech_side", "delta_plus", "delta_minus",
                                      "verdict_plus", "verdict_minus", "disagree"});
    std::size_t disagree = 0;
    for (std::size_t ci = 0; ci < cases.size(); ++ci) {
        const std::string& name = cases[ci].name;
        std::vector<std::string> bad;
        for (std::size_t b = 0; b < base.size(); ++b) {
            const auto& o = res[ci * base.size() + b];
            const double x = base[b];
            t.add({name, x, to_string(o.side), to_string(o.fbi_side), to_string(o.sech_side),
                   jnum(o.fit_plus.delta_hat), jnum(o.fit_minus.delta_hat), to_string(o.fit_plus.verdict),
                   to_string(o.fit_minus.verdict), o.disagree});
            if (o.disagree) ++disagree;
            bool ok = true;
            if (name == "delta") {
                ok = (std::abs(x) < 1e-12) ? o.side == Side::BOTH : o.side == Side::NONE;
            } else if (name == "gaussian") {
                ok = o.side == Side::NONE;
            } else if (name == "bump") {
                const double d = std::min(std::abs(x - 1.0), std::abs(x + 1.0));
                if (d < 1e-12) ok = o.side == Side::BOTH;
                else if (d > cell + 1e-12) ok = o.side == Side::NONE;
            } else {
                if (std::abs(x) < 1e-12) ok = o.side == Side::UPPER || o.side == Side::LOWER;
                else if (std::abs(x) >= 0.5 - 1e-12) ok = o.side == Side::NONE;
            }
            if (!ok) bad.push_back(fmt(x) + ":" + to_string(o.side));
        }
        std::string msg;
        for (const auto& s : bad) msg += s + " ";
        r.check(name, bad.empty(), "unexpected sides " + msg);
    }
    r.metrics = {{"disagree_flags", disagree}};
    r.check("detectors_agree", disagree == 0, std::to_string(disagree) + " DISAGREE flags");
    if (want_files(c) && c.png) {
        WfaReport rep = wfa_detect(nonanalytic_bump(), {Vec{1.0, 0.0}}, directions_1d(), ladder);
        write_wfa_polar_png(rep, 0, artifact_path(c, r, "bump_polar_x1.png"));
    }
}

// ---- spectral ----

void run_counterexample(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const int k_max = integer(p, "k_max");
    const int k_even_check = integer(p, "k_route_check_max");
    const double route_tol = num(p, "route_tolerance");
    const double odd_tol = num(p, "odd_tolerance");
    const int root_lo = integer(p, "root_k_min");
    r.inputs = {{"k_max", k_max}, {"root_range", {root_lo, k_max}}};
    r.tolerances = {{"route", route_tol}, {"odd", odd_tol}};

    const CounterexampleReport rep = counterexample_g(k_max);
    auto& t = r.table("derivatives", {"k", "cauchy", "tricomi", "rel_diff", "root"});
    double worst_even = 0.0, worst_odd = 0.0;
    bool increasing = true;
    double prev = -1.0;
    for (const auto& row : rep.rows) {
        t.add({row.k, row.cauchy, row.tricomi, row.rel_diff, row.root});
        if (row.k % 2 == 0 && row.k <= k_even_check) worst_even = std::max(worst_even, row.rel_diff);
        if (row.k % 2 == 1) worst_odd = std::max(worst_odd, row.rel_diff);
        if (row.k % 2 == 0 && row.k >= root_lo) {
            if (prev >= 0.0 && !(row.root > prev)) increasing = false;
            prev = row.root;
        }
    }
    r.metrics = {{"max_even_route_difference", worst_even},
                 {"max_odd_relative", worst_odd},
                 {"radius", jnum(rep.radius.radius)},
                 {"radius_tag", to_string(rep.radius.tag)},
                 {"g0", counterexample_g_value(0.0)}};
    r.check("routes_agree", worst_even <= route_tol, "even-k route difference " + fmt(worst_even));
    r.check("odd_vanish", worst_odd <= odd_tol, "odd-k relative size " + fmt(worst_odd));
    r.check("roots_increasing", increasing, "root test values not strictly increasing");
}

SpectralMeasure measure_from(const json& m) {
    const std::string kind = m.at("kind").get<std::string>();
    if (kind == "atom") return SpectralMeasure::atom(num(m, "mass"));
    if (kind == "exp_alpha") return SpectralMeasure::exp_alpha(num(m, "m0"), num(m, "alpha"));
    throw SchemaError("params.measures.kind", "unknown measure kind '" + kind + "'");
}

void run_classification(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const int k_max = integer(p, "k_max");
    r.inputs = {{"measures", p.at("measures")}, {"k_max", k_max}};
    r.tolerances = {{"analytic_slope_max", 0.1}, {"gevrey_slope_min", 0.5}};
    auto& t = r.table("classes", {"measure", "expected", "class", "slope", "k_max_used", "repeat_identical"});
    for (const auto& m : p.at("measures")) {
        const SpectralMeasure rho = measure_from(m);
        const AnalyticityReport a = measure_analyticity_class(rho, k_max);
        const AnalyticityReport b = measure_analyticity_class(rho, k_max);
        bool same = a.cls == b.cls && a.slope == b.slope && a.table.size() == b.table.size();
        for (std::size_t k = 0; same && k < a.table.size(); ++k) same = a.table[k].log_moment == b.table[k].log_moment;
        const std::string label = m.at("label").get<std::string>();
        const std::string expected = m.at("expected").get<std::string>();
        t.add({label, expected, to_string(a.cls), a.slope, a.k_max_used, same});
        r.check(label, to_string(a.cls) == expected, "class " + to_string(a.cls) + ", slope " + fmt(a.slope));
        r.check(label + "_deterministic", same, "repeat run differs");
    }
}

// ---- qm ----

void run_qm_fbi(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const HLadder ladder = ladder_param(p);
    const auto alphas = p.at("alphas").get<std::vector<double>>();
    const auto t0s = p.at("t0").get<std::vector<double>>();
    const double eta = num(p, "eta");
    const double target = num(p, "delta_target");
    const double rel = num(p, "delta_relative_tolerance");
    const double match = num(p, "match_tolerance");
    const int levels = integer(p, "levels");
    r.inputs = {{"ladder", to_json(ladder)}, {"alphas", alphas}, {"t0", t0s}, {"eta", eta}, {"levels", levels}};
    r.tolerances = {{"closed_form_relative", match}, {"delta_target", target}, {"delta_relative", rel}};

    auto& rows = r.table("profile", {"alpha", "t0", "h", "quadrature", "closed_form", "rel_diff"});
    auto& fits = r.table("fits", {"alpha", "t0", "delta_hat", "r_squared", "verdict", "max_rel_diff", "eta_sq_half"});
    double worst = 0.0;
    for (double a : alphas) {
        const TruncatedQM model = harmonic_oscillator(levels, a);
        for (double t0 : t0s) {
            const QmFbiProfile prof = qm_fbi_profile(model, t0, eta, ladder);
            for (const auto& row : prof.rows) rows.add({a, t0, row.h, row.quadrature, row.closed_form, row.rel_diff});
            fits.add({a, t0, jnum(prof.fit.delta_hat), prof.fit.r_squared, to_string(prof.fit.verdict),
                      prof.max_rel_diff, 0.5 * eta * eta});
            worst = std::max(worst, prof.max_rel_diff);
            const std::string tag = "alpha_" + fmt(a) + "_t0_" + fmt(t0);
            r.check(tag + "_delta", std::abs(prof.fit.delta_hat - target) <= rel * target,
                    "fitted delta " + fmt(prof.fit.delta_hat) + " vs " + fmt(target) + " +- " + fmt(100 * rel) +
                        "% (eta^2/2 = " + fmt(0.5 * eta * eta) + ")");
        }
    }
    r.metrics = {{"max_closed_form_relative", worst}};
    r.check("closed_form", worst <= match, "quadrature vs closed form " + fmt(worst));
}

std::vector<cplx> state_from(const json& a, int n) {
    std::vector<cplx> phi(n, 0.0);
    for (const auto& e : a) {
        const int k = e.at(0).get<int>();
        if (k < 0 || k >= n) throw SchemaError("params.cases.phi", "level out of range");
        phi[k] = cplx{e.at(1).get<double>(), e.size() > 2 ? e.at(2).get<double>() : 0.0};
    }
    return phi;
}

void run_qm_correlator(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const int levels = integer(p, "levels");
    const TruncatedQM model = harmonic_oscillator(levels, num(p, "alpha"));
    r.inputs = {{"cases", p.at("cases")}, {"levels", levels}, {"alpha", model.alpha}, {"ladder", to_json(wfa_ladder())}};
    r.tolerances = {{"cone_bins", 1}};
    auto& t = r.table("correlators", {"case", "m", "base_points", "frequencies", "frequency_violations", "flagged",
                                      "cone_violations", "rightmost_violations"});
    std::size_t idx = 0;
    for (const auto& cs : p.at("cases")) {
        const int m = cs.at("m").get<int>();
        std::vector<Vec> bp;
        for (const auto& b : cs.at("base_points")) bp.push_back(Vec{b.at(0).get<double>(), b.size() > 1 ? b.at(1).get<double>() : 0.0});
        const auto phi = state_from(cs.at("phi"), levels);
        const CorrelatorReport rep = qm_correlator_wfa(model, phi, m, bp, wfa_ladder());
        t.add({idx, m, bp.size(), rep.frequencies, rep.frequency_violations.size(), rep.flagged,
               rep.cone_violations.size(), rep.rightmost_violations.size()});
        const std::string tag = "case_" + std::to_string(idx) + "_m" + std::to_string(m);
        r.check(tag + "_cone", rep.cone_violations.empty(),
                std::to_string(rep.cone_violations.size()) + " flagged directions outside the nested cone");
        r.check(tag + "_rightmost", rep.rightmost_violations.empty(),
                std::to_string(rep.rightmost_violations.size()) + " rightmost-causal violations");
        r.check(tag + "_frequencies", rep.frequency_violations.empty() && rep.frequencies > 0,
                std::to_string(rep.frequency_violations.size()) + " frequency vectors outside the cone");
        if (want_files(c) && idx == 0) {
            std::ofstream os(artifact_path(c, r, "correlator_wfa_0.csv"));
            write_wfa_csv(rep.wfa, os);
        }
        ++idx;
    }
}

// ---- spacetime ----

void run_envelope_diamond(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto res = p.at("resolutions").get<std::vector<int>>();
    const double tol = num(p, "hausdorff_max");
    const double amp = num(p, "conformal_amplitude");
    const SpacetimeModel mk = minkowski();
    const SpacetimeModel cf =
        conformal([amp](double t, double x) { return 1.0 + amp * std::sin(t) * std::cos(x); }, mk.chart_box);
    r.inputs = {{"chart", {mk.chart_box.lo[0], mk.chart_box.hi[0], mk.chart_box.lo[1], mk.chart_box.hi[1]}},
                {"resolutions", res},
                {"seed_point", {0.0, 0.0}},
                {"diamond", {{0.0, 0.0}, {2.0, 0.0}}},
                {"conformal_factor", "1 + " + fmt(amp) + " sin t cos x"}};
    r.tolerances = {{"hausdorff_cells", tol}};
    auto& t = r.table("masks", {"n", "future_hausdorff", "diamond_hausdorff", "future_cells", "diamond_cells",
                                "conformal_future_identical", "conformal_diamond_identical"});
    for (int n : res) {
        const Region fut = chronological_set(mk, Vec{0.0, 0.0}, TimeDirection::FUTURE, n, n);
        const Region fut_ex = region_from_predicate(mk.chart_box, n, n, [](double tt, double x) { return tt > std::abs(x); });
        const Region dia = i_zero(mk, {0.0, 0.0}, {2.0, 0.0}, n, n).region;
        const Region dia_ex = region_from_predicate(mk.chart_box, n, n,
                                                    [](double tt, double x) { return std::abs(x) < std::min(tt, 2.0 - tt); });
        const Region cfut = chronological_set(cf, Vec{0.0, 0.0}, TimeDirection::FUTURE, n, n);
        const Region cdia = i_zero(cf, {0.0, 0.0}, {2.0, 0.0}, n, n).region;
        const double hf = hausdorff_cells(fut, fut_ex), hd = hausdorff_cells(dia, dia_ex);
        t.add({n, hf, hd, fut.count(), dia.count(), fut.same_mask(cfut), dia.same_mask(cdia)});
        const std::string tag = "n" + std::to_string(n);
        r.check(tag + "_future", hf <= tol, "I+(0) Hausdorff " + fmt(hf));
        r.check(tag + "_diamond", hd <= tol, "diamond Hausdorff " + fmt(hd));
        r.check(tag + "_conformal", fut.same_mask(cfut) && dia.same_mask(cdia), "conformal masks differ");
        if (want_files(c) && c.png) write_region_png(dia, artifact_path(c, r, "diamond_" + std::to_string(n) + ".png"));
    }
}

void run_envelope_tube(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto res = p.at("resolutions").get<std::vector<int>>();
    const double width = num(p, "tube_half_width");
    const double cover_min = num(p, "coverage_min");
    const auto mono_res = p.at("monotone_resolutions").get<std::vector<int>>();
    const SpacetimeModel mk = minkowski();
    r.inputs = {{"resolutions", res}, {"monotone_resolutions", mono_res}, {"tube", {{"half_width", width}, {"t_range", {0.0, 2.0}}}}};
    r.tolerances = {{"coverage_min", cover_min}};
    auto& t = r.table("envelopes", {"n", "iterations", "converged", "envelope_cells", "diamond_cells", "covered",
                                    "coverage", "idempotent", "monotone_pairs", "monotone_ok"});
    for (int n : res) {
        auto mask = [&](auto pred) { return region_from_predicate(mk.chart_box, n, n, pred); };
        const Region tube = mask([&](double tt, double x) { return std::abs(x) < width && tt > 0.0 && tt < 2.0; });
        const Region dia = mask([](double tt, double x) { return std::abs(x) < std::min(tt, 2.0 - tt); });
        const EnvelopeResult e = timelike_envelope(mk, tube);
        std::size_t covered = 0;
        for (std::size_t k = 0; k < dia.cells.size(); ++k) covered += (dia.cells[k] && e.region.cells[k]) ? 1 : 0;
        const double coverage = static_cast<double>(covered) / static_cast<double>(dia.count());
        const bool idem = timelike_envelope(mk, e.region).region.same_mask(e.region);

        // Nested inputs A within B: E(A) must lie within E(B), and A within E(A).
        const Region wide = mask([&](double tt, double x) { return std::abs(x) < 2.0 * width && tt > 0.0 && tt < 2.0; });
        const Region slab = mask([](double tt, double) { return tt > 0.0 && tt < 0.2; });
        const Region shifted = mask([&](double tt, double x) { return std::abs(x - 0.5) < width && tt > 0.5 && tt < 1.5; });
        std::vector<std::pair<Region, Region>> battery{
            {tube, wide}, {slab, slab.united(tube)}, {tube, tube.united(shifted)}, {shifted, wide.united(shifted)}};
        // Each battery pair costs two envelopes, which grow like n^4.
        if (std::find(mono_res.begin(), mono_res.end(), n) == mono_res.end()) battery.clear();
        int mono_ok = 0;
        for (const auto& [a, b] : battery) {
            const Region ea = timelike_envelope(mk, a).region;
            const Region eb = timelike_envelope(mk, b).region;
            mono_ok += (a.subset_of(ea) && ea.subset_of(eb)) ? 1 : 0;
        }
        t.add({n, e.iterations, e.converged, e.region.count(), dia.count(), covered, coverage, idem, battery.size(), mono_ok});
        const std::string tag = "n" + std::to_string(n);
        r.check(tag + "_coverage", coverage >= cover_min, "diamond coverage " + fmt(coverage));
        r.check(tag + "_idempotent", idem, "E(E(O)) differs from E(O)");
        r.check(tag + "_monotone", mono_ok == static_cast<int>(battery.size()),
                std::to_string(battery.size() - mono_ok) + " monotonicity failures");
        r.check(tag + "_converged", e.converged, "envelope iteration did not stabilise");
        if (want_files(c) && c.png) write_region_png(e.region, artifact_path(c, r, "tube_envelope_" + std::to_string(n) + ".png"));
    }
}

void run_tube_sweep(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const double delta = num(p, "delta");
    const double amp = num(p, "bend_amplitude");
    const double cusp_delta = num(p, "cusp_delta");
    const int cells = integer(p, "cone_cells");
    const SpacetimeModel mk = minkowski();
    r.inputs = {{"delta", delta}, {"bend_amplitude", amp}, {"cusp_delta", cusp_delta}, {"cone_cells", cells}};
    const ConicSet fwd = causal_conic_set(mk, mk.chart_box, cells);
    auto& t = r.table("boundaries", {"family", "s", "side", "holmgren_ok"});
    const std::vector<std::pair<std::string, CurveFamily>> families{
        {"straight", straight_segment({0.0, 0.0}, {2.0, 0.0})}, {"bent", bent_segment_family(2.0, amp)}};
    for (const auto& [name, fam] : families) {
        int ok = 0, total = 0;
        for (const auto& b : tube_sweep(mk, fam, delta)) {
            for (std::size_t k = 0; k < 2; ++k) {
                const bool h = ucp_predicates(fwd, b.sides[k].surface, b.sides[k].window).holmgren_ok;
                t.add({name, b.s, k, h});
                ok += h ? 1 : 0;
                ++total;
            }
        }
        r.check(name + "_holmgren", ok == total, std::to_string(total - ok) + " boundaries meet the causal cone");
    }
    const bool edge = ucp_predicates(fwd, fwd).edge_ok;
    r.check("edge", edge, "W and -W intersect");
    bool rejected = false;
    json where = nullptr;
    try {
        tube_sweep(mk, bent_segment_family(2.0, amp), cusp_delta);
    } catch (const TubeError& e) {
        rejected = true;
        where = {{"s", e.s}, {"t", e.t}};
    }
    r.metrics = {{"edge_ok", edge}, {"cusp_rejected_at", where}};
    r.check("cusp_rejected", rejected, "tube past the focal distance was accepted");
}

// ---- commutator ----

void run_commutator(const ExperimentConfig& c, ExperimentResult& r) {
    const json& p = c.params;
    const auto res = p.at("resolutions").get<std::vector<int>>();
    const double r0 = num(p, "source_radius");
    const double tol = num(p, "hausdorff_max");
    const double factor = num(p, "residual_factor");
    CommutatorOptions o;
    o.step = num(p, "step");
    o.chart = Box::rect(-2.0, 2.0, -2.0, 2.0);
    const SpacetimeModel mk = minkowski(o.chart);
    const SampledFamily f = spacetime_bump(0.0, 0.0, r0);
    const double bound = factor * o.step * o.step;
    r.inputs = {{"source", {{"centre", {0.0, 0.0}}, {"radius", r0}}}, {"step", o.step}, {"resolutions", res},
                {"chart", {o.chart.lo[0], o.chart.hi[0], o.chart.lo[1], o.chart.hi[1]}}};
    r.tolerances = {{"hausdorff_cells", tol}, {"residual_bound", bound}};

    auto& t = r.table("support", {"kind", "n", "support_cells", "causal_cells", "hausdorff"});
    auto& rt = r.table("residuals", {"kind", "residual", "bound", "clipped"});
    const std::vector<std::pair<PropagatorKind, TimeDirection>> kinds{{PropagatorKind::RET, TimeDirection::FUTURE},
                                                                      {PropagatorKind::ADV, TimeDirection::PAST}};
    for (const auto& [kind, dir] : kinds) {
        const CommutatorResult g = commutator_1p1(f, kind, o);
        rt.add({to_string(kind), g.residual, bound, g.clipped});
        r.check(to_string(kind) + "_residual", g.residual < bound,
                "residual " + fmt(g.residual) + " vs " + fmt(bound));
        for (int n : res) {
            const Region sup = propagator_support(g, n, n);
            const Region seed = region_from_predicate(o.chart, n, n, [r0](double tt, double x) { return tt * tt + x * x < r0 * r0; });
            const Region causal = chronological_set(mk, seed, dir);
            const double hd = hausdorff_cells(sup, causal);
            t.add({to_string(kind), n, sup.count(), causal.count(), hd});
            r.check(to_string(kind) + "_n" + std::to_string(n), hd <= tol, "support Hausdorff " + fmt(hd));
            if (want_files(c) && c.png && kind == PropagatorKind::RET) {
                write_region_png(sup, artifact_path(c, r, "ret_support_" + std::to_string(n) + ".png"));
            }
        }
    }
    const CommutatorResult pj = commutator_1p1(f, PropagatorKind::PJ, o);
    double asym = 0.0, peak = 0.0;
    for (double tt : arange(-2.0, 2.0, 0.04)) {
        for (double x : arange(-2.0, 2.0, 0.04)) {
            asym = std::max(asym, std::abs(pj(tt, x) + pj(-tt, x)));
            peak = std::max(peak, std::abs(pj(tt, x)));
        }
    }
    r.metrics = {{"pj_antisymmetry", asym}, {"pj_peak", peak}};
    r.check("pj_antisymmetric", asym <= 1e-12 * std::max(1.0, peak), "PJ time reflection defect " + fmt(asym));
}

// ---- registry ----

std::vector<ExperimentInfo> build_registry() {
    std::vector<ExperimentInfo> v;
    v.push_back({"fbi-isometry", "fbi", 1, "FBI transform is an isometry on coherent mixtures",
                 {{"mixtures", 20}, {"components", 3}, {"centre_range", 1.0}, {"tolerance", 1e-6},
                  {"ladder", ladder_defaults()}},
                 run_fbi_isometry});
    v.push_back({"fbi-coherent-reconstruction", "fbi", 2, "Adjoint reconstruction from coherent states",
                 {{"rungs", {0.1, 0.05, 0.025}}, {"tolerance", 1e-4}, {"sample_half_width", 2.0}},
                 run_fbi_reconstruction});
    v.push_back({"fbi-radial-inversion", "fbi", 3, "Radial inversion formula",
                 {{"points", {-0.9, -0.7, -0.5, -0.3, -0.1, 0.1, 0.3, 0.5, 0.7, 0.9}},
                  {"tolerance", 1e-3},
                  {"integration_rel_tol", 1e-4}},
                 run_fbi_radial});
    v.push_back({"microsupport-zero-energy", "microsupport", 4, "Compact Fourier support is zero energy",
                 {{"eps", 0.5}, {"delta_hat_min", 0.1}, {"window", window_defaults(-2, 2, -2, 2)},
                  {"ladder", ladder_defaults()}},
                 run_zero_energy});
    v.push_back({"microsupport-bump", "microsupport", 5, "Plateau bump family is zero energy",
                 {{"eps", {0.1, 0.3}}, {"k_lo", -1.0}, {"k_hi", 1.0}, {"plateau_tolerance", 1e-12},
                  {"ladder_reference_eps", 0.2}, {"window", window_defaults(-4, 4, -2, 2)},
                  {"ladder", ladder_defaults()}},
                 run_bump});
    v.push_back({"microsupport-product", "microsupport", 6, "Microsupport of products",
                 {{"pairs", 10}, {"centre_range", 1.0}, {"max_momentum_sum", 1.5},
                  {"window", window_defaults(-2, 2, -2, 2)}, {"ladder", ladder_defaults()}},
                 run_product});
    v.push_back({"microsupport-pullback", "microsupport", 7, "Pullback covariance",
                 {{"xi0", 1.0}, {"linear_slope", 2.0}, {"sine_amplitude", 0.3},
                  {"window", window_defaults(-2, 2, -3, 3)}, {"ladder", ladder_defaults()}},
                 run_pullback});
    v.push_back({"wfa-truth-table", "wfa", 8, "Analytic wavefront detector truth table",
                 {{"base_points", {-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0}}, {"cell", 0.5}},
                 run_wfa_truth});
    v.push_back({"spectral-counterexample", "spectral", 9, "Taylor coefficients of the smeared counterexample",
                 {{"k_max", 24}, {"k_route_check_max", 20}, {"route_tolerance", 1e-6}, {"odd_tolerance", 1e-10},
                  {"root_k_min", 8}},
                 run_counterexample});
    v.push_back({"spectral-classification", "spectral", 10, "Analyticity class of spectral measures",
                 {{"k_max", 24},
                  {"measures",
                   {{{"label", "atom"}, {"kind", "atom"}, {"mass", 1.0}, {"m0", 0.0}, {"alpha", 1.0}, {"expected", "ANALYTIC"}},
                    {{"label", "exp_alpha_1_1"}, {"kind", "exp_alpha"}, {"mass", 0.0}, {"m0", 1.0}, {"alpha", 1.0}, {"expected", "ANALYTIC"}},
                    {{"label", "exp_alpha_1_half"}, {"kind", "exp_alpha"}, {"mass", 0.0}, {"m0", 1.0}, {"alpha", 0.5},
                     {"expected", "GEVREY_NONANALYTIC"}}}}},
                 run_classification});
    v.push_back({"qm-fbi-identity", "qm", 11, "FBI identity for truncated quantum mechanics",
                 {{"alphas", {0.5, 1.0}}, {"t0", {0.0, 0.7}}, {"eta", 1.0}, {"levels", 10}, {"delta_target", 1.0},
                  {"delta_relative_tolerance", 0.1}, {"match_tolerance", 1e-6}, {"ladder", ladder_defaults()}},
                 run_qm_fbi});
    v.push_back({"qm-correlator-cone", "qm", 12, "Correlator wavefront sets lie in the nested cone",
                 {{"levels", 10},
                  {"alpha", 1.0},
                  {"cases",
                   {{{"m", 1}, {"phi", {{1, 1.0}}}, {"base_points", {{-1.0}, {0.0}, {0.5}, {2.0}}}},
                    {{"m", 2}, {"phi", {{0, 1.0}, {2, 0.5}}}, {"base_points", {{0.0, 0.0}, {0.5, -0.3}}}}}}},
                 run_qm_correlator});
    v.push_back({"envelope-diamond", "envelope", 13, "Causal sets match their analytic masks",
                 {{"resolutions", {64, 128}}, {"hausdorff_max", 1.0}, {"conformal_amplitude", 0.3}},
                 run_envelope_diamond});
    v.push_back({"envelope-tube", "envelope", 14, "Timelike tube envelope of a thin tube",
                 {{"resolutions", {128, 256}}, {"monotone_resolutions", {128}}, {"tube_half_width", 0.1}, {"coverage_min", 0.99}},
                 run_envelope_tube});
    v.push_back({"calculus-tube-sweep", "calculus", 15, "Tube sweep and unique continuation predicates",
                 {{"delta", 0.1}, {"bend_amplitude", 0.2}, {"cusp_delta", 2.2}, {"cone_cells", 8}},
                 run_tube_sweep});
    v.push_back({"commutator-support", "commutator", 16, "Propagator support and residual",
                 {{"resolutions", {64, 128}}, {"source_radius", 0.3}, {"step", 0.02}, {"hausdorff_max", 1.0},
                  {"residual_factor", 10.0}},
                 run_commutator});
    return v;
}

}  // namespace

const std::vector<ExperimentInfo>& registry() {
    static const std::vector<ExperimentInfo> reg = build_registry();
    return reg;
}

const ExperimentInfo& find_experiment(const std::string& name) {
    for (const auto& e : registry()) {
        if (e.name == name) return e;
    }
    throw UsageError("unknown experiment '" + name + "'");
}

std::vector<std::string> group_names() {
    std::vector<std::string> g;
    for (const auto& e : registry()) {
        if (std::find(g.begin(), g.end(), e.group) == g.end()) g.push_back(e.group);
    }
    return g;
}

std::vector<const ExperimentInfo*> experiments_in_group(const std::string& group) {
    std::vector<const ExperimentInfo*> out;
    for (const auto& e : registry()) {
        if (group == "all" || e.group == group) out.push_back(&e);
    }
    if (out.empty()) throw UsageError("unknown group '" + group + "'");
    return out;
}

ExperimentConfig resolve_config(const std::string& experiment, const json& user, std::uint64_t seed) {
    const ExperimentInfo& info = find_experiment(experiment);
    ExperimentConfig c;
    c.experiment = info.name;
    c.seed = seed;
    c.params = info.defaults;
    if (user.is_null()) return c;
    if (!user.is_object()) throw SchemaError("config", "expected object");
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string& k = it.key();
        if (k == "experiment") {
            if (!it.value().is_string()) throw SchemaError("experiment", "expected string");
        } else if (k == "seed") {
            if (!it.value().is_number_integer() || it.value().get<std::int64_t>() < 0) {
                throw SchemaError("seed", "expected non-negative integer");
            }
            c.seed = it.value().get<std::uint64_t>();
        } else if (k == "params") {
            overlay(c.params, it.value(), "params");
        } else {
            throw SchemaError(k, "unknown field");
        }
    }
    return c;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
    const ExperimentInfo& info = find_experiment(config.experiment);
    ExperimentResult r;
    r.experiment = info.name;
    if (!config.out_dir.empty()) fs::create_directories(config.out_dir);
    info.run(config, r);
    return r;
}

json make_envelope(const ExperimentConfig& config, const ExperimentResult& result) {
    const ExperimentInfo& info = find_experiment(config.experiment);
    json tables = json::object();
    for (const auto& [name, t] : result.tables) tables[name] = {{"columns", t.columns}, {"rows", t.rows}};
    return json{{"schema", kSchemaVersion},
                {"experiment", info.name},
                {"criterion", info.criterion},
                {"title", info.title},
                {"config", {{"verbatim", config.source_text}, {"resolved", config.to_json()}}},
                {"seeds", {{"seed", config.seed}}},
                {"inputs", result.inputs},
                {"tolerances", result.tolerances},
                {"tables", tables},
                {"metrics", result.metrics},
                {"verdicts", result.verdicts},
                {"failures", result.failures},
                {"artifacts", result.artifacts},
                {"status", result.passed() ? "pass" : "fail"}};
}

void write_outputs(const ExperimentConfig& config, const ExperimentResult& result) {
    if (config.out_dir.empty()) return;
    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    std::ofstream(dir / (config.experiment + ".json")) << make_envelope(config, result).dump(2) << "\n";
    for (const auto& [name, t] : result.tables) {
        std::ofstream os(dir / (config.experiment + "." + name + ".csv"));
        os.precision(17);
        for (std::size_t k = 0; k < t.columns.size(); ++k) os << (k ? "," : "") << t.columns[k];
        os << "\n";
        for (const auto& row : t.rows) {
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (k) os << ",";
                const json& v = row[k];
                if (v.is_string()) os << v.get<std::string>();
                else if (v.is_number_float()) os << v.get<double>();
                else if (v.is_structured()) {
                    std::string d = v.dump();
                    std::string q;
                    for (char ch : d) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
                    os << '"' << q << '"';
                } else os << v.dump();
            }
            os << "\n";
        }
    }
}

}  // namespace microlocal::experiments
