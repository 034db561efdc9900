#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "singsusp/experiments.hpp"

using namespace singsusp;
namespace fs = std::filesystem;

namespace {

// inline JSON or @file
json parse_arg(const std::string &s, const char *what)
{
    if (!s.empty() && s[0] == '@') return read_json_file(s.substr(1));
    try {
        return json::parse(s);
    } catch (const json::parse_error &e) {
        throw UsageError(std::string("bad JSON for ") + what + ": " + e.what());
    }
}

void emit(const json &j, const std::string &out)
{
    const std::string text = j.dump(2) + "\n";
    if (out.empty() || out == "-") {
        std::fwrite(text.data(), 1, text.size(), stdout);
        return;
    }
    std::ofstream f(out, std::ios::binary);
    if (!f) throw UsageError("cannot write " + out);
    f << text;
}

std::string tsv_from_estimate(const json &e)
{
    std::string s = "n\teps\tcount\tlog_count\n";
    char buf[128];
    for (const auto &c : e["counts"]) {
        const auto n = c["count"].get<std::size_t>();
        std::snprintf(buf, sizeof buf, "%d\t%.17g\t%zu\t%.17g\n", c["n"].get<int>(), c["eps"].get<double>(), n,
                      std::log(static_cast<double>(std::max<std::size_t>(1, n))));
        s += buf;
    }
    return s;
}

void write_tsv(const Report &r, const std::string &dir)
{
    if (dir.empty()) return;
    fs::create_directories(dir);
    const auto &an = r.body["analyses"];
    const std::string name = r.body["scenario"].get<std::string>();
    for (const char *k : {"entropy_map", "entropy_flow"}) {
        if (!an.contains(k) || an[k].contains("error")) continue;
        std::ofstream f(fs::path(dir) / (name + "." + k + ".tsv"), std::ios::binary);
        f << tsv_from_estimate(an[k]);
    }
}

Scenario load_scenario(const std::string &arg)
{
    const auto suite = bundled_suite();
    if (const Scenario *s = find_bundled(suite, arg)) return *s;
    if (!fs::exists(arg)) throw UsageError("no bundled scenario or file named \"" + arg + "\"");
    return Scenario::from_json(read_json_file(arg));
}

struct Common {
    std::string system = R"({"kind":"CatMap"})";
    std::string brake = "null";
    std::string out;
};

void add_common(CLI::App *c, Common &o, bool with_brake = true)
{
    c->add_option("--system", o.system, "system JSON (inline or @file)");
    if (with_brake) c->add_option("--brake", o.brake, "brake JSON (inline or @file); null for alpha = 1");
    c->add_option("--out", o.out, "output file (default stdout)");
}

SingularSuspension build_ss(const Common &o, DiscreteSystem &sys)
{
    sys = system_from_json(parse_arg(o.system, "--system"));
    return make_singular_suspension(MappingTorus{sys}, brake_from_json(sys, parse_arg(o.brake, "--brake")));
}

MeasureSampler build_measure(const DiscreteSystem &sys, const std::string &text, std::uint64_t seed)
{
    const json j = parse_arg(text, "--measure");
    MeasureSampler mu;
    mu.seed = opt<std::uint64_t>(j, "seed", seed);
    const auto k = opt<std::string>(j, "kind", "LebesgueOnBase");
    if (k == "LebesgueOnBase") mu.kind = MeasureKind::LebesgueOnBase;
    else if (k == "ErgodicAlongOrbit") {
        mu.kind = MeasureKind::ErgodicAlongOrbit;
        mu.orbit_start = point_from_json(sys, need(j, "start"));
        mu.burn_in = opt<int>(j, "burn_in", 100);
    } else if (k == "UniformOnSubshift") {
        mu.kind = MeasureKind::UniformOnSubshift;
        mu.subshift = subshift_from_json(need(j, "subshift"));
    } else throw UsageError("unknown measure kind " + k);
    return mu;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"singsusp: suspension flows, singular suspensions, entropy and expansiveness experiments"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    bool have_seed = false;
    unsigned nworkers = 0;
    app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { seed = s, have_seed = true; }, "override the seed");
    app.add_option("--workers", nworkers, "worker threads (default SINGSUSP_WORKERS or all cores)");

    // run
    auto *run = app.add_subcommand("run", "run a scenario file or bundled scenario");
    std::string run_target, run_out, run_tsv;
    run->add_option("scenario", run_target, "scenario.json or bundled name")->required();
    run->add_option("--out", run_out, "report file (default stdout)");
    run->add_option("--tsv", run_tsv, "directory for count tables");

    // suite
    auto *suite = app.add_subcommand("suite", "bundled suite");
    suite->require_subcommand(1);
    auto *suite_list = suite->add_subcommand("list", "list bundled scenarios");
    auto *suite_export = suite->add_subcommand("export", "write bundled scenarios as JSON files");
    std::string export_dir;
    suite_export->add_option("dir", export_dir)->required();
    auto *suite_run = suite->add_subcommand("run", "run every bundled scenario");
    std::string suite_out, suite_tsv;
    suite_run->add_option("--out", suite_out, "directory for reports");
    suite_run->add_option("--tsv", suite_tsv, "directory for count tables");

    // metric
    auto *metric = app.add_subcommand("metric", "d̄ between two fiber points");
    Common mo;
    std::string mp, mq;
    int hops = 5;
    add_common(metric, mo, false);
    metric->add_option("--p", mp, "fiber point JSON")->required();
    metric->add_option("--q", mq, "fiber point JSON")->required();
    metric->add_option("--hops", hops, "chain length for the chain infimum");

    // gamma
    auto *gam = app.add_subcommand("gamma", "traversal time gamma(x)");
    Common go;
    std::string gx;
    double gcap = 1e6;
    add_common(gam, go);
    gam->add_option("--x", gx, "base point JSON")->required();
    gam->add_option("--cap", gcap, "divergence cap");

    // egamma
    auto *eg = app.add_subcommand("egamma", "expected gamma under a measure");
    Common eo;
    std::string emeasure = R"({"kind":"LebesgueOnBase"})";
    std::size_t esamples = 1000;
    double ecap = 1e6;
    add_common(eg, eo);
    eg->add_option("--measure", emeasure, "measure JSON");
    eg->add_option("--samples", esamples, "sample count (>= 100)");
    eg->add_option("--cap", ecap, "divergence cap");

    // flow
    auto *fl = app.add_subcommand("flow", "psi_t(p)");
    Common fo;
    std::string fp;
    double ft = 1.0;
    add_common(fl, fo);
    fl->add_option("--p", fp, "fiber point JSON")->required();
    fl->add_option("-t,--time", ft, "flow time (may be negative)");

    // entropy
    auto *en = app.add_subcommand("entropy", "entropy estimate of a map or a flow");
    std::string ekind;
    Common no;
    std::string nmeasure = R"({"kind":"LebesgueOnBase"})", ngrid, epsgrid, ntsv;
    std::size_t nsamples = 1u << 14;
    bool exhaustive = false;
    en->add_option("kind", ekind, "map or flow")->required()->check(CLI::IsMember({"map", "flow"}));
    add_common(en, no);
    en->add_option("--measure", nmeasure, "measure JSON");
    en->add_option("--samples", nsamples, "sample count");
    en->add_option("--n-grid", ngrid, "JSON array or {from,to,step}");
    en->add_option("--eps-grid", epsgrid, "JSON array");
    en->add_flag("--exhaustive", exhaustive, "exhaustive cylinders (symbolic maps)");
    en->add_option("--tsv", ntsv, "write the counts table to this file");

    // subshift
    auto *sub = app.add_subcommand("subshift", "minimal subshifts");
    sub->require_subcommand(1);
    auto *sb = sub->add_subcommand("build", "construct a minimal subshift of given entropy");
    double starget = 0.3, stol = 0.02;
    int slevels = 3, salpha = 2;
    std::string sout;
    sb->add_option("--target", starget, "target entropy");
    sb->add_option("--levels", slevels, "levels (>= 3)");
    sb->add_option("--tol", stol, "tolerance");
    sb->add_option("--alphabet", salpha, "alphabet size");
    sb->add_option("--out", sout, "envelope file (default stdout)");
    auto *sc = sub->add_subcommand("certify", "minimality certificate of a subshift");
    std::string senv;
    std::size_t sword = 0, swindow = 0;
    sc->add_option("subshift", senv, "envelope JSON file or inline JSON")->required();
    sc->add_option("--word-len", sword, "word length (default L1)");
    sc->add_option("--window", swindow, "window length (default 2 L2)");

    // expansive
    auto *ex = app.add_subcommand("expansive", "expansiveness falsifiers");
    std::string xkind, xpairs = "{}";
    Common xo;
    std::size_t xn = 1000;
    double xe = 0.25, xeps = 0.25, xdelta = 0.05, xT = 20, xdt = 0.1;
    int xhorizon = 10;
    ex->add_option("kind", xkind, "map or flow")->required()->check(CLI::IsMember({"map", "flow"}));
    add_common(ex, xo);
    ex->add_option("--pairs", xpairs, "pair sampler JSON");
    ex->add_option("--n-pairs", xn, "number of pairs");
    ex->add_option("--e", xe, "map expansivity constant");
    ex->add_option("--horizon", xhorizon, "map horizon");
    ex->add_option("--eps", xeps, "flow eps");
    ex->add_option("--delta", xdelta, "flow delta");
    ex->add_option("--T", xT, "flow horizon");
    ex->add_option("--dt", xdt, "grid resolution");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        // help and version exit 0, every other parse failure is a usage error
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (nworkers > 0) set_workers(nworkers);
        const std::uint64_t dseed = have_seed ? seed : 1;
        if (run->parsed()) {
            Scenario s = load_scenario(run_target);
            if (have_seed) s.seed = seed;
            Report r = run_scenario(s);
            emit(r.body, run_out);
            write_tsv(r, run_tsv);
            std::fprintf(stderr, "%s: %s\n", s.name.c_str(), r.pass ? "PASS" : "FAIL");
            return r.pass ? 0 : 1;
        }
        if (suite_list->parsed()) {
            for (const auto &s : bundled_suite()) std::printf("%-26s %s\n", s.name.c_str(), s.citation.c_str());
            return 0;
        }
        if (suite_export->parsed()) {
            fs::create_directories(export_dir);
            for (const auto &s : bundled_suite()) emit(s.to_json(), (fs::path(export_dir) / (s.name + ".json")).string());
            return 0;
        }
        if (suite_run->parsed()) {
            bool all = true;
            if (!suite_out.empty()) fs::create_directories(suite_out);
            for (auto s : bundled_suite()) {
                if (have_seed) s.seed = seed;
                Report r = run_scenario(s);
                all = all && r.pass;
                if (!suite_out.empty()) emit(r.body, (fs::path(suite_out) / (s.name + ".report.json")).string());
                write_tsv(r, suite_tsv);
                std::printf("%-26s %s\n", s.name.c_str(), r.pass ? "PASS" : "FAIL");
                for (const auto &v : r.body["verdicts"])
                    std::printf("    %s: %s\n", v["verdict"].get<std::string>().c_str(), v["detail"].get<std::string>().c_str());
                std::fflush(stdout);
            }
            return all ? 0 : 1;
        }
        if (metric->parsed()) {
            const DiscreteSystem sys = system_from_json(parse_arg(mo.system, "--system"));
            const MappingTorus mt{sys};
            const FiberPoint p = fiber_point_from_json(sys, parse_arg(mp, "--p")), q = fiber_point_from_json(sys, parse_arg(mq, "--q"));
            emit({{"bar_metric", bar_metric(mt, p, q)}, {"chain_metric", chain_metric(mt, p, q, hops)}}, mo.out);
            return 0;
        }
        if (gam->parsed()) {
            DiscreteSystem sys;
            SingularSuspension ss = build_ss(go, sys);
            ss.quad.cap = gcap;
            emit(gamma_to_json(gamma_eval(ss, point_from_json(sys, parse_arg(gx, "--x")))), go.out);
            return 0;
        }
        if (eg->parsed()) {
            DiscreteSystem sys;
            SingularSuspension ss = build_ss(eo, sys);
            emit(expected_gamma_to_json(expected_gamma(ss, build_measure(sys, emeasure, dseed), esamples, ecap)), eo.out);
            return 0;
        }
        if (fl->parsed()) {
            DiscreteSystem sys;
            SingularSuspension ss = build_ss(fo, sys);
            const FiberPoint p = fiber_point_from_json(sys, parse_arg(fp, "--p"));
            const PsiResult r = psi_flow_ex(ss, ft, p);
            emit({{"point", fiber_point_to_json(r.point)}, {"trapped", r.trapped}, {"phi_time", r.phi_time}}, fo.out);
            return 0;
        }
        if (en->parsed()) {
            DiscreteSystem sys;
            SingularSuspension ss = build_ss(no, sys);
            json oj{{"samples", nsamples}, {"exhaustive", exhaustive}, {"seed", dseed}};
            if (!ngrid.empty()) oj["n_grid"] = parse_arg(ngrid, "--n-grid");
            if (!epsgrid.empty()) oj["eps_grid"] = parse_arg(epsgrid, "--eps-grid");
            const EntropyOptions o = detail::entropy_options(oj, dseed);
            const MeasureSampler mu = build_measure(sys, nmeasure, dseed);
            const EntropyEstimate e = ekind == "map" ? entropy_estimate_map(sys, mu, o) : entropy_estimate_flow(ss, mu, o);
            emit(estimate_to_json(e), no.out);
            if (!ntsv.empty()) {
                std::ofstream f(ntsv, std::ios::binary);
                f << estimate_tsv(e);
            }
            return 0;
        }
        if (sb->parsed()) {
            emit(subshift_envelope(minimal_subshift_with_entropy(starget, slevels, stol, salpha)), sout);
            return 0;
        }
        if (sc->parsed()) {
            json j = fs::exists(senv) ? read_json_file(senv) : parse_arg(senv, "subshift");
            auto sh = subshift_from_json(j);
            const std::size_t wl = sword ? sword : static_cast<std::size_t>(sh->l1());
            const std::size_t win = swindow ? swindow : 2 * static_cast<std::size_t>(sh->l2());
            const auto c = minimality_certificate(*sh, wl, win);
            json out{{"result", c.certified ? "Certified" : "Refuted"}, {"word_len", wl}, {"window", win}, {"gap", c.gap},
                     {"words_checked", c.words_checked}, {"measured_entropy", measured_entropy(*sh)}};
            if (!c.certified) {
                std::string w;
                for (auto s : c.word) w.push_back(static_cast<char>('0' + s));
                out["word"] = w;
                out["window_position"] = c.window_position;
            }
            emit(out, "");
            return 0;
        }
        if (ex->parsed()) {
            DiscreteSystem sys;
            SingularSuspension ss = build_ss(xo, sys);
            json a = {{"pairs", parse_arg(xpairs, "--pairs")}, {"n_pairs", xn}};
            detail::Context cx;
            cx.sys = sys;
            cx.ss = ss;
            json out;
            if (xkind == "map") {
                a["e"] = xe;
                a["horizon"] = xhorizon;
                out = detail::run_expansive_map(cx, a, dseed);
            } else {
                a["eps"] = xeps;
                a["delta"] = xdelta;
                a["grid"] = {{"T", xT}, {"dt", xdt}};
                out = detail::run_expansive_flow(cx, a, dseed);
            }
            emit(out, xo.out);
            return 0;
        }
    } catch (const UsageError &e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception &e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
