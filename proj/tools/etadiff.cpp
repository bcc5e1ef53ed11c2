// etadiff: laboratory front end for the eta-limited adaptive-diffusion
// broadcast: graph generation, distance-distribution fitting, forwarding
// schedules, protocol simulation, and attack evaluation.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "etad/adversary.hpp"
#include "etad/distmodel.hpp"
#include "etad/errors.hpp"
#include "etad/forwarding.hpp"
#include "etad/graph.hpp"
#include "etad/protocol.hpp"
#include "etad/rng.hpp"
#include "svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace etad;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitParameter = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitFitFailure = 4;

struct RunDir {
    fs::path path;

    void write(const std::string& name, const std::string& content) const {
        std::ofstream out(path / name, std::ios::binary);
        out << content;
        if (!out) throw std::runtime_error("failed to write " + (path / name).string());
        files.push_back(name);
    }
    mutable std::vector<std::string> files;
};

RunDir open_run_dir(const std::string& out_flag, const std::string& command, uint64_t seed) {
    fs::path dir;
    if (!out_flag.empty()) {
        dir = out_flag;
        if (fs::exists(dir) && !fs::is_empty(dir))
            throw parameter_error("output directory already populated: " + dir.string());
    } else {
        int counter = 0;
        do {
            std::ostringstream name;
            name << "runs/" << command << "-seed" << seed;
            if (counter) name << '-' << counter;
            dir = name.str();
            ++counter;
        } while (fs::exists(dir) && !fs::is_empty(dir));
    }
    fs::create_directories(dir);
    return RunDir{dir, {}};
}

void write_manifest(const RunDir& dir, const std::string& command, const json& params,
                    const json& notes = json::object()) {
    json m;
    m["command"] = command;
    m["parameters"] = params;
    m["outputs"] = dir.files;
    if (!notes.empty()) m["notes"] = notes;
    std::ofstream out(dir.path / "manifest.json", std::ios::binary);
    out << m.dump(2) << "\n";
}

std::optional<uint32_t> pool_sources_for(uint32_t n) {
    if (n <= 10000) return std::nullopt; // every node
    return 1000u;
}

std::vector<uint64_t> parse_u64_list(const std::string& s) {
    std::vector<uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        if (!tok.empty()) out.push_back(std::stoull(tok));
    if (out.empty()) throw parameter_error("empty list: " + s);
    return out;
}

// Grid syntax: "n=500,1000;k=2,4,6;seeds=3".
struct FitGrid {
    std::vector<uint64_t> ns{500, 1000, 2000};
    std::vector<uint64_t> ks{2, 4, 6};
    uint64_t seeds = 3;
};

FitGrid parse_fit_grid(const std::string& s) {
    FitGrid g;
    if (s.empty()) return g;
    std::stringstream ss(s);
    std::string part;
    while (std::getline(ss, part, ';')) {
        auto eq = part.find('=');
        if (eq == std::string::npos) throw parameter_error("bad grid clause: " + part);
        std::string key = part.substr(0, eq), val = part.substr(eq + 1);
        if (key == "n")
            g.ns = parse_u64_list(val);
        else if (key == "k")
            g.ks = parse_u64_list(val);
        else if (key == "seeds")
            g.seeds = std::stoull(val);
        else
            throw parameter_error("unknown grid key: " + key);
    }
    return g;
}

// ----------------------------------------------------------------- generate

int cmd_generate(uint64_t n, uint64_t k, uint64_t seed, const std::string& out) {
    Graph g = Graph::generate_k_growing(static_cast<uint32_t>(n), static_cast<uint32_t>(k), seed);
    DistanceHistogram h = pooled_histogram(g, pool_sources_for(g.node_count()));

    RunDir dir = open_run_dir(out, "generate", seed);
    dir.write("graph.edges", g.serialize());
    dir.write("histogram.csv", h.to_csv());
    json params{{"n", n}, {"k", k}, {"seed", seed}};
    write_manifest(dir, "generate", params);
    std::cout << dir.path.string() << ": " << g.edge_count() << " edges\n";
    return kExitOk;
}

// ---------------------------------------------------------------------- fit

int cmd_fit(const FitGrid& grid, const std::string& model, uint64_t seed, const std::string& out) {
    ModelId id = model_from_string(model);

    FitDataset data;
    DistanceHistogram plot_hist;
    uint64_t best_n = 0, best_k = 0;
    for (uint64_t n : grid.ns)
        for (uint64_t k : grid.ks)
            for (uint64_t s = 0; s < grid.seeds; ++s) {
                uint64_t graph_seed = seed + s + 1000003 * (n ^ (k << 20));
                Graph g = Graph::generate_k_growing(static_cast<uint32_t>(n),
                                                    static_cast<uint32_t>(k), graph_seed);
                DistanceHistogram h = pooled_histogram(g, pool_sources_for(g.node_count()));
                NormalParams p = fit_normal(h);
                data.rows.push_back({static_cast<double>(n), static_cast<double>(k), p.mu, p.sigma});
                if (s == 0 && n * k >= best_n * best_k) {
                    best_n = n;
                    best_k = k;
                    plot_hist = std::move(h);
                }
            }

    FitResult fit = fit_model_constants(data, id); // may throw fit_failure_error
    BiasReport bias = model_bias_report(data, fit.constants);

    // Comparison chart for the densest combo: empirical mass vs candidate fits.
    std::vector<FamilyScore> fams = compare_families(plot_hist);
    std::vector<svg::Series> series;
    {
        svg::Series emp{"observed", "#888888", {}, {}, true};
        uint64_t tot = 0;
        for (size_t d = 1; d < plot_hist.counts.size(); ++d) tot += plot_hist.counts[d];
        for (size_t d = 1; d < plot_hist.counts.size(); ++d) {
            emp.x.push_back(static_cast<double>(d));
            emp.y.push_back(static_cast<double>(plot_hist.counts[d]) / static_cast<double>(tot));
        }
        series.push_back(std::move(emp));
        const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
        int ci = 0;
        for (const FamilyScore& f : fams) {
            svg::Series s{family_name(f.family), colors[ci++ % 5], {}, {}, false};
            for (size_t i = 0; i < f.pmf.size(); ++i) {
                s.x.push_back(static_cast<double>(i + 1));
                s.y.push_back(f.pmf[i]);
            }
            series.push_back(std::move(s));
        }
    }
    std::string title = "shortest-path distances, n=" + std::to_string(best_n) +
                        " k=" + std::to_string(best_k);

    RunDir dir = open_run_dir(out, "fit", seed);
    dir.write("dataset.csv", data.to_csv());
    dir.write("constants.json", fit.constants.to_json());
    dir.write("bias.csv", bias.to_csv());
    dir.write("comparison.svg", svg::chart(title, "distance (hops)", "probability", series));
    json params{{"model", model}, {"seed", seed}};
    params["grid"] = {{"n", grid.ns}, {"k", grid.ks}, {"seeds", grid.seeds}};
    json notes{{"rss", fit.rss},
               {"residual_std", fit.residual_std},
               {"iterations", fit.iterations},
               {"best_family", family_name(fams.front().family)}};
    write_manifest(dir, "fit", params, notes);
    std::cout << dir.path.string() << ": " << data.rows.size() << " rows, residual std "
              << fit.residual_std << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- schedule

int cmd_schedule(uint64_t n, uint64_t k, uint64_t T, double epsilon, bool smooth, bool refined,
                 uint64_t seed, const std::string& out) {
    NormalParams p{estimate_mu(static_cast<uint32_t>(n), static_cast<uint32_t>(k)),
                   estimate_sigma(static_cast<uint32_t>(n), static_cast<uint32_t>(k))};
    DiscreteDistribution f =
        discretize(p, static_cast<uint32_t>(n), static_cast<uint32_t>(k), epsilon);

    ForwardingSchedule schedule;
    if (smooth) {
        schedule = smoothed_probabilities(f, static_cast<int>(T));
    } else {
        ScheduleOutcome oc = ideal_probabilities(f, static_cast<int>(T));
        if (!oc.schedule) {
            std::cerr << "ideal schedule infeasible; violations (t, i, required p):\n";
            for (const Violation& v : oc.violations)
                std::cerr << "  t=" << v.t << " i=" << v.i << " required=" << v.required << "\n";
            std::cerr << "rerun with --smooth to adjust the target states\n";
            return kExitInfeasible;
        }
        schedule = *oc.schedule;
    }

    if (refined) {
        // Keeper-side heuristic: a holder that kept the token knows it is not
        // at the outermost distance, so condition the state on that.
        for (size_t idx = 1; idx < schedule.per_step.size(); ++idx) {
            int t = static_cast<int>(idx) + 1;
            if (static_cast<size_t>(t) > f.support()) break;
            TargetState st = target_state(f, t);
            if (st.probs.size() < 2) continue;
            st.probs.back() = 0.0;
            double sum = 0.0;
            for (double v : st.probs) sum += v;
            for (double& v : st.probs) v /= sum;
            schedule.combined[idx] =
                combined_probability(st, TransitionMatrix{t, schedule.per_step[idx]});
        }
    }

    RunDir dir = open_run_dir(out, "schedule", seed);
    dir.write("schedule.json", schedule.to_json());
    json params{{"n", n},           {"k", k},          {"T", T},
                {"epsilon", epsilon}, {"smooth", smooth}, {"refined", refined},
                {"seed", seed}};
    json notes{{"mu", p.mu}, {"sigma", p.sigma}, {"t_max", f.support() - 1}};
    write_manifest(dir, "schedule", params, notes);
    std::cout << dir.path.string() << ": T=" << schedule.T
              << (schedule.smoothed ? " (smoothed)" : "") << "\n";
    return kExitOk;
}

// ----------------------------------------------------------------- simulate

int cmd_simulate(SimConfig cfg, const std::string& out) {
    SimResult res = run_simulation(cfg);
    RunDir dir = open_run_dir(out, "simulate", cfg.seed);
    dir.write("trace.csv", res.trace.to_csv());
    dir.write("summary.json", res.summary_json());
    write_manifest(dir, "simulate", json::parse(cfg.to_json()));
    std::cout << dir.path.string() << ": " << res.infected.size() << "/" << cfg.n
              << " infected, token path " << (res.token_path.size() - 1) << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- attack

int cmd_attack(uint64_t n, uint64_t k, uint64_t eta, uint64_t depth, double beta, uint64_t runs,
               bool omnipresent, uint64_t seed, const std::string& out) {
    if (!(beta > 0.0) || beta >= 1.0) throw parameter_error("attack: beta must be in (0, 1)");
    auto attackers_count = static_cast<uint32_t>(std::ceil(beta * static_cast<double>(n)));

    std::ostringstream agg;
    agg << "run,variant,success,candidate_set_size,rank,observations\n";
    json reports = json::array();
    uint32_t ad_success = 0, fl_success = 0;
    double ad_cand = 0, fl_cand = 0;

    for (uint64_t r = 0; r < runs; ++r) {
        uint64_t run_seed = seed + r;
        Graph g = Graph::generate_k_growing(static_cast<uint32_t>(n), static_cast<uint32_t>(k),
                                            run_seed);
        Rng pick(run_seed ^ 0x9e3779b97f4a7c15ull);
        auto origin = static_cast<uint32_t>(pick.below(n));
        AttackerSet att = uniform_attackers(static_cast<uint32_t>(n), attackers_count,
                                            run_seed ^ 0xda3e39cb94b95bdbull, origin);
        if (omnipresent) {
            g = augment_with_connected_attacker(g);
            att.members.push_back(static_cast<uint32_t>(n));
            att.beta = static_cast<double>(att.members.size()) / static_cast<double>(n + 1);
        }

        SimConfig ad;
        ad.n = static_cast<uint32_t>(n);
        ad.k = static_cast<uint32_t>(k);
        ad.graph_seed = run_seed;
        ad.eta = static_cast<uint32_t>(eta);
        ad.depth = static_cast<uint32_t>(depth);
        ad.origin = origin;
        ad.seed = run_seed;
        SimConfig fl = ad;
        fl.depth = 1;

        AttackReport ra = jordan_center_attack(run_simulation(g, ad).trace, g, att, origin);
        AttackReport rf = jordan_center_attack(run_simulation(g, fl).trace, g, att, origin);

        ad_success += ra.success;
        fl_success += rf.success;
        ad_cand += static_cast<double>(ra.candidate_set_size);
        fl_cand += static_cast<double>(rf.candidate_set_size);
        agg << r << ",eta-ad," << ra.success << ',' << ra.candidate_set_size << ',' << ra.rank
            << ',' << ra.observation_count << '\n';
        agg << r << ",flood," << rf.success << ',' << rf.candidate_set_size << ',' << rf.rank
            << ',' << rf.observation_count << '\n';
        if (r < 5) {
            reports.push_back(json::parse(ra.to_json()));
            reports.push_back(json::parse(rf.to_json()));
        }
    }

    RunDir dir = open_run_dir(out, "attack", seed);
    dir.write("aggregate.csv", agg.str());
    dir.write("reports.json", reports.dump(2) + "\n");
    json params{{"n", n},       {"k", k},     {"eta", eta},  {"depth", depth},
                {"beta", beta}, {"runs", runs}, {"seed", seed}};
    json notes{{"eta_ad_success", ad_success},
               {"flood_success", fl_success},
               {"eta_ad_mean_candidates", ad_cand / static_cast<double>(runs)},
               {"flood_mean_candidates", fl_cand / static_cast<double>(runs)}};
    write_manifest(dir, "attack", params, notes);
    std::cout << dir.path.string() << ": eta-ad " << ad_success << "/" << runs << " vs flood "
              << fl_success << "/" << runs << "\n";
    return kExitOk;
}

// ------------------------------------------------------------------- table2

int cmd_table2(double beta, const std::string& ns_str, const std::string& etas_str,
               double c_flag, uint64_t pack_flag, uint64_t seed, const std::string& out) {
    std::vector<uint64_t> ns = parse_u64_list(ns_str);
    std::vector<uint64_t> etas64 = parse_u64_list(etas_str);
    std::vector<uint32_t> etas(etas64.begin(), etas64.end());
    std::optional<double> c = c_flag > 0 ? std::optional<double>(c_flag) : std::nullopt;
    std::optional<uint64_t> pack = pack_flag > 0 ? std::optional<uint64_t>(pack_flag) : std::nullopt;

    Table2 t = reproduce_table2(beta, ns, etas, c, pack);

    RunDir dir = open_run_dir(out, "table2", seed);
    dir.write("table2.csv", t.to_csv());
    json params{{"beta", beta}, {"ns", ns}, {"etas", etas64}, {"seed", seed}};
    params["c"] = c ? json(*c) : json("eta");
    params["pack"] = pack ? json(*pack) : json("eta");
    json notes{{"interpretation",
                std::string("set separation c and drawing pack size both default to eta; "
                            "the expected-drawing count is inverted through the complete "
                            "(eta+1)-ary tree size to get the depth")}};
    write_manifest(dir, "table2", params, notes);
    std::cout << dir.path.string() << ":\n" << t.to_csv();
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"eta-adaptive diffusion laboratory"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "generate a k-growing graph and its histogram");
    uint64_t g_n = 0, g_k = 0, g_seed = 1;
    std::string g_out;
    gen->add_option("--n", g_n, "node count")->required();
    gen->add_option("--k", g_k, "edges per joining node")->required();
    gen->add_option("--seed", g_seed, "generation seed");
    gen->add_option("--out", g_out, "output directory");

    // fit
    auto* fit = app.add_subcommand("fit", "fit distance distributions and estimator constants");
    std::string f_grid, f_model = "M2", f_out;
    uint64_t f_seed = 1;
    fit->add_option("--grid", f_grid, "grid, e.g. n=500,1000;k=2,4,6;seeds=3");
    fit->add_option("--model", f_model, "M1|M2|M3|M4|S");
    fit->add_option("--seed", f_seed, "base seed");
    fit->add_option("--out", f_out, "output directory");

    // schedule
    auto* sch = app.add_subcommand("schedule", "compute virtual-source pass probabilities");
    uint64_t s_n = 0, s_k = 0, s_T = 6, s_seed = 1;
    double s_eps = 1e-6;
    bool s_smooth = false, s_refined = false;
    std::string s_out;
    sch->add_option("--n", s_n, "node count")->required();
    sch->add_option("--k", s_k, "edges per joining node")->required();
    sch->add_option("--depth", s_T, "final step T");
    sch->add_option("--epsilon", s_eps, "tail truncation bound");
    sch->add_flag("--smooth", s_smooth, "adjust unreachable target states");
    sch->add_flag("--refined", s_refined, "keeper-conditioned combined probabilities");
    sch->add_option("--seed", s_seed, "seed recorded in outputs");
    sch->add_option("--out", s_out, "output directory");

    // simulate
    auto* sim = app.add_subcommand("simulate", "run one protocol broadcast");
    SimConfig sim_cfg;
    std::string sim_out, sim_config_file, sim_source = "smoothed";
    int64_t sim_origin = -1;
    sim->add_option("--config", sim_config_file, "JSON config file (overrides other flags)");
    sim->add_option("--n", sim_cfg.n, "node count");
    sim->add_option("--k", sim_cfg.k, "edges per joining node");
    sim->add_option("--eta", sim_cfg.eta, "spread parameter");
    sim->add_option("--depth", sim_cfg.depth, "maximum timestep before flooding (0 = auto)");
    sim->add_option("--origin", sim_origin, "originating node (-1 = uniform random)");
    sim->add_option("--schedule-source", sim_source, "ideal|smoothed|eq2|fixed");
    sim->add_option("--fixed-p", sim_cfg.fixed_p, "pass probability for the fixed source");
    sim->add_option("--epsilon", sim_cfg.epsilon, "tail truncation bound");
    sim->add_option("--latency-median", sim_cfg.latency_median, "median link latency (s)");
    sim->add_option("--latency-sigma", sim_cfg.latency_sigma, "latency shape (0 = fixed)");
    sim->add_option("--timeout-mult", sim_cfg.timeout_multiplier, "timeout over median latency");
    sim->add_option("--seed", sim_cfg.seed, "run seed");
    sim->add_option("--graph-seed", sim_cfg.graph_seed, "graph seed");
    sim->add_option("--out", sim_out, "output directory");

    // attack
    auto* atk = app.add_subcommand("attack", "paired source-estimation attack evaluation");
    uint64_t a_n = 1000, a_k = 6, a_eta = 3, a_depth = 4, a_runs = 100, a_seed = 1;
    double a_beta = 0.05;
    std::string a_out;
    atk->add_option("--n", a_n, "node count");
    atk->add_option("--k", a_k, "edges per joining node");
    atk->add_option("--eta", a_eta, "spread parameter");
    atk->add_option("--depth", a_depth, "privacy-phase depth");
    atk->add_option("--beta", a_beta, "attacker fraction");
    atk->add_option("--runs", a_runs, "paired runs");
    bool a_omni = false;
    atk->add_flag("--omnipresent", a_omni, "add an attacker adjacent to every node");
    atk->add_option("--seed", a_seed, "base seed");
    atk->add_option("--out", a_out, "output directory");

    // table2
    auto* tbl = app.add_subcommand("table2", "expected tree depth before deanonymization");
    double t_beta = 0.05, t_c = 0;
    std::string t_ns = "100,1000,10000", t_etas = "3,5,10", t_out;
    uint64_t t_pack = 0, t_seed = 1;
    tbl->add_option("--beta", t_beta, "attacker fraction");
    tbl->add_option("--ns", t_ns, "network sizes, comma separated");
    tbl->add_option("--etas", t_etas, "spread parameters, comma separated");
    tbl->add_option("--c", t_c, "set separation per attacker (0 = use eta)");
    tbl->add_option("--pack", t_pack, "drawing pack size (0 = use eta)");
    tbl->add_option("--seed", t_seed, "seed recorded in outputs");
    tbl->add_option("--out", t_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitParameter;
    }

    try {
        if (gen->parsed()) return cmd_generate(g_n, g_k, g_seed, g_out);
        if (fit->parsed()) return cmd_fit(parse_fit_grid(f_grid), f_model, f_seed, f_out);
        if (sch->parsed())
            return cmd_schedule(s_n, s_k, s_T, s_eps, s_smooth, s_refined, s_seed, s_out);
        if (sim->parsed()) {
            if (!sim_config_file.empty()) {
                std::ifstream in(sim_config_file);
                if (!in) throw parameter_error("cannot read config: " + sim_config_file);
                std::stringstream buf;
                buf << in.rdbuf();
                sim_cfg = SimConfig::from_json(buf.str());
            } else {
                sim_cfg.schedule_source = schedule_source_from_string(sim_source);
                if (sim_origin >= 0) sim_cfg.origin = static_cast<uint32_t>(sim_origin);
            }
            return cmd_simulate(sim_cfg, sim_out);
        }
        if (atk->parsed())
            return cmd_attack(a_n, a_k, a_eta, a_depth, a_beta, a_runs, a_omni, a_seed, a_out);
        if (tbl->parsed())
            return cmd_table2(t_beta, t_ns, t_etas, t_c, t_pack, t_seed, t_out);
    } catch (const parameter_error& e) {
        std::cerr << "parameter error: " << e.what() << "\n";
        return kExitParameter;
    } catch (const infeasible_discretization_error& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const config_error& e) {
        std::cerr << "infeasible configuration: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const fit_failure_error& e) {
        std::cerr << "fit failure: " << e.what() << "\n";
        return kExitFitFailure;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
