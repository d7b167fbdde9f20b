#include "groupop/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"

#include "groupop/analysis.hpp"
#include "groupop/moments.hpp"
#include "groupop/simulator.hpp"

namespace groupop::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kKinds{"simulate", "ensemble", "moments",  "accuracy",
                                   "sweep2g",  "sweep3g",  "emergence"};

/// Files are assembled in memory and written only once the run succeeded.
struct Output {
    std::vector<std::pair<fs::path, std::string>> files;

    std::ostringstream& open(const fs::path& name)
    {
        streams_.emplace_back(name, std::make_unique<std::ostringstream>());
        return *streams_.back().second;
    }

    void commit(const fs::path& dir)
    {
        for (auto& [name, s] : streams_)
            files.emplace_back(name, s->str());
        fs::create_directories(dir);
        for (const auto& [name, text] : files) {
            std::ofstream f(dir / name, std::ios::binary);
            f << text;
            if (!f)
                throw std::runtime_error("cannot write " + (dir / name).string());
        }
    }

private:
    std::vector<std::pair<fs::path, std::unique_ptr<std::ostringstream>>> streams_;
};

void write_row(std::ostream& os, const std::vector<double>& values)
{
    for (std::size_t c = 0; c < values.size(); ++c) {
        if (c)
            os << ',';
        os << format_number(values[c]);
    }
    os << '\n';
}

void write_header(std::ostream& os, const std::vector<std::string>& names)
{
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c)
            os << ',';
        os << names[c];
    }
    os << '\n';
}

std::vector<double> first_moment_values(const GroupAggregates& a)
{
    std::vector<double> v(a.x_self);
    v.insert(v.end(), a.x_cross.begin(), a.x_cross.end());
    return v;
}

std::vector<std::string> first_names(int ng)
{
    std::vector<std::string> names;
    for (int g = 0; g < ng; ++g)
        names.push_back(self_moment_name(g));
    for (int j = 0; j < ng; ++j)
        for (int i = 0; i < ng; ++i)
            names.push_back(cross_moment_name(j, i));
    return names;
}

void write_heatmap(std::ostream& os, const OpinionMatrix& m, const GroupLayout& layout)
{
    if (m.side() != layout.agents())
        throw ParameterError("heatmap: matrix and layout sizes differ");
    os << "i,j,a_ij,group_i,group_j\n";
    for (int i = 0; i < layout.agents(); ++i)
        for (int j = 0; j < layout.agents(); ++j)
            os << i << ',' << j << ',' << format_number(m(i, j)) << ',' << layout.group_of(i)
               << ',' << layout.group_of(j) << '\n';
}

template <class Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn)
{
    const int workers = std::max(1, std::min<int>(resolve_threads(threads), static_cast<int>(n)));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex m;
    auto body = [&] {
        try {
            for (std::size_t i; (i = next.fetch_add(1)) < n;)
                fn(i);
        } catch (...) {
            std::lock_guard lock(m);
            if (!failure)
                failure = std::current_exception();
            next = n;
        }
    };
    if (workers == 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back(body);
        for (auto& t : pool)
            t.join();
    }
    if (failure)
        std::rethrow_exception(failure);
}

// ---- experiments -----------------------------------------------------------

void run_simulate(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    const auto init = c.initial_condition();
    Simulation sim(c.params, init, c.seed);
    auto& csv = o.open("trajectory.csv");
    auto names = first_names(c.params.n_groups);
    names.insert(names.begin(), "step");
    write_header(csv, names);
    auto record = [&] {
        auto v = first_moment_values(sim.aggregates({}, false));
        v.insert(v.begin(), static_cast<double>(sim.step_count()));
        write_row(csv, v);
    };
    record();
    for (std::int64_t t = 1; t <= c.steps; ++t) {
        sim.step();
        if (t % c.sample_every == 0 || t == c.steps)
            record();
    }
    const auto m = sim.opinions();
    for (double v : m.values())
        if (!std::isfinite(v))
            throw NumericalError("simulation produced a non-finite opinion", c.steps);
    write_heatmap(o.open("matrix.csv"), m, sim.layout());
    const auto last = sim.aggregates({}, false);
    out << "simulate: " << c.steps << " steps, seed " << c.seed << "\n";
    for (int g = 0; g < c.params.n_groups; ++g)
        out << "  " << self_moment_name(g) << " = " << format_number(last.self(g)) << "\n";
}

void run_ensemble_kind(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    EnsembleOptions opt;
    opt.sample_every = c.sample_every;
    opt.deviations = c.deviations;
    opt.threads = c.threads;
    if (c.second_moments) {
        const MomentSystem sys(c.params);
        opt.second_keys.assign(sys.catalog().begin(), sys.catalog().end());
    }
    const auto st = run_ensemble(c.params, c.initial_condition(), c.steps, c.runs, c.seed, opt);
    auto& csv = o.open("ensemble.csv");
    std::vector<std::string> names{"step"};
    names.insert(names.end(), st.names.begin(), st.names.end());
    for (const auto& n : st.names)
        names.push_back(n + "_se");
    write_header(csv, names);
    for (std::size_t t = 0; t < st.times.size(); ++t) {
        std::vector<double> row{static_cast<double>(st.times[t])};
        for (std::size_t v = 0; v < st.n_vars(); ++v)
            row.push_back(st.mean_at(t, v));
        for (std::size_t v = 0; v < st.n_vars(); ++v)
            row.push_back(st.error_at(t, v));
        write_row(csv, row);
    }
    out << "ensemble: " << c.runs << " runs of " << c.steps << " steps, " << st.times.size()
        << " samples\n";
}

void run_moments(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    const MomentEngine eng(c.params);
    const auto tr = eng.integrate(c.initial_condition(), c.steps, c.sample_every);
    auto& first = o.open("moments.csv");
    auto& second = o.open("moments_second.csv");
    auto& eq = o.open("equilibrium.csv");
    std::vector<std::string> fn{"step"}, sn{"step"}, en{"step"};
    for (const auto& n : eng.first_moment_names())
        fn.push_back(n);
    for (const auto& n : eng.second_moment_names())
        sn.push_back(n);
    for (int g = 0; g < c.params.n_groups; ++g)
        en.push_back("e_" + std::to_string(g));
    write_header(first, fn);
    write_header(second, sn);
    write_header(eq, en);
    for (const auto& s : tr) {
        std::vector<double> a{s.t}, b{s.t}, e{s.t};
        a.insert(a.end(), s.x_self.begin(), s.x_self.end());
        a.insert(a.end(), s.x_cross.begin(), s.x_cross.end());
        b.insert(b.end(), s.second.begin(), s.second.end());
        const auto ev = equilibrium(s, eng).e;
        e.insert(e.end(), ev.begin(), ev.end());
        write_row(first, a);
        write_row(second, b);
        write_row(eq, e);
    }
    out << "moments: " << tr.size() << " records, " << eng.system().catalog().size()
        << " second moments\n";
    const auto ev = equilibrium(tr.back(), eng).e;
    for (int g = 0; g < c.params.n_groups; ++g)
        out << "  e_" << g << "(" << c.steps << ") = " << format_number(ev[g]) << "\n";
}

void run_accuracy(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    auto& summary = o.open("accuracy.csv");
    summary << "k,variable,class,rrmse\n";
    std::map<int, double> first_order_mean;
    for (int k : c.compare_gossip) {
        ModelParams p = c.params;
        p.gossip = k;
        require_valid(p);
        const MomentEngine eng(p);
        const auto tr = eng.integrate(c.initial_condition(), c.steps, c.sample_every);
        EnsembleOptions opt;
        opt.sample_every = c.sample_every;
        opt.deviations = true;
        opt.threads = c.threads;
        if (c.second_moments)
            opt.second_keys.assign(eng.system().catalog().begin(), eng.system().catalog().end());
        const auto st = run_ensemble(p, c.initial_condition(), c.steps, c.runs, c.seed, opt);

        const int ng = p.n_groups;
        auto engine_value = [&](const MomentState& s, std::size_t v) {
            if (v < static_cast<std::size_t>(ng))
                return s.x_self[v];
            if (v < static_cast<std::size_t>(ng + ng * ng))
                return s.x_cross[v - ng];
            return s.second[v - ng - ng * ng];
        };
        auto& series = o.open("accuracy_k" + std::to_string(k) + ".csv");
        std::vector<std::string> header{"step"};
        for (const auto& n : st.names) {
            header.push_back("engine_" + n);
            header.push_back("mc_" + n);
            header.push_back("mc_" + n + "_se");
        }
        write_header(series, header);
        for (std::size_t t = 0; t < st.times.size(); ++t) {
            std::vector<double> row{static_cast<double>(st.times[t])};
            for (std::size_t v = 0; v < st.n_vars(); ++v) {
                row.push_back(engine_value(tr[t], v));
                row.push_back(st.mean_at(t, v));
                row.push_back(st.error_at(t, v));
            }
            write_row(series, row);
        }

        std::map<std::string, std::vector<double>> by_class;
        for (std::size_t v = 0; v < st.n_vars(); ++v) {
            std::vector<double> a, r;
            for (std::size_t t = 1; t < st.times.size(); ++t) {
                a.push_back(engine_value(tr[t], v));
                r.push_back(st.mean_at(t, v));
            }
            if (r.empty() || std::all_of(r.begin(), r.end(), [](double x) { return x == 0.0; }))
                continue;
            const double e = rrmse(a, r, c.mean_normalised);
            const std::string cls = v < static_cast<std::size_t>(ng)                ? "x_II"
                                    : v < static_cast<std::size_t>(ng + ng * ng) ? "x_JI"
                                                                                   : "x2";
            by_class[cls].push_back(e);
            summary << k << ',' << st.names[v] << ',' << cls << ',' << format_number(e) << '\n';
        }
        out << "accuracy k=" << k << " (" << c.runs << " runs, T=" << c.steps << "):\n";
        double total = 0.0;
        std::size_t count = 0;
        for (const auto& [cls, values] : by_class) {
            double m = 0.0;
            for (double v : values)
                m += v;
            m /= static_cast<double>(values.size());
            out << "  mean RRMSE " << cls << " = " << format_number(m) << " over "
                << values.size() << " variables\n";
            if (cls != "x2") {
                total += m * static_cast<double>(values.size());
                count += values.size();
            }
        }
        first_order_mean[k] = count ? total / static_cast<double>(count) : 0.0;
    }
    if (first_order_mean.size() >= 2) {
        const auto lo = first_order_mean.begin();
        const auto hi = std::prev(first_order_mean.end());
        out << "error with k=" << lo->first << " below error with k=" << hi->first << ": "
            << (lo->second < hi->second ? "yes" : "no") << "\n";
    }
}

void run_sweep(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    const int ng = c.params.n_groups;
    const auto profile = c.kind == "sweep2g" ? GapProfile::two_groups : GapProfile::evenly_spaced;
    const auto gaps = gap_grid(c.gap_first, c.gap_last, c.gap_step);
    const auto r = sweep_initial_gap(c.params, gaps, profile, c.t_star, c.threads);
    auto& csv = o.open("sweep.csv");
    std::vector<std::string> h{"gap"};
    for (const char* part : {"trend", "pos_bias_in", "pos_bias_out", "neg_bias_in",
                             "neg_bias_out", "gossip"})
        for (int g = 0; g < ng; ++g)
            h.push_back(std::string(part) + "_g" + std::to_string(g));
    for (int i = 0; i < ng; ++i)
        for (int j = 0; j < ng; ++j)
            h.push_back("weight_" + std::to_string(i) + "_" + std::to_string(j));
    write_header(csv, h);
    for (const auto& row : r.rows) {
        std::vector<double> v{row.gap};
        for (const auto* part :
             {&row.trend, &row.pos_in, &row.pos_out, &row.neg_in, &row.neg_out, &row.gossip})
            v.insert(v.end(), part->begin(), part->end());
        v.insert(v.end(), row.weights.begin(), row.weights.end());
        write_row(csv, v);
    }
    out << c.kind << ": " << gaps.size() << " gaps, t* = " << c.t_star << "\n";
    for (int g = 0; g < ng; ++g) {
        const auto s = sign_change(r, g);
        out << "  group " << g << " trend sign change: "
            << (s ? format_number(*s) : std::string("none")) << "\n";
    }
}

void run_emergence(const ExperimentConfig& c, Output& o, std::ostream& out)
{
    const int ng = c.params.n_groups;
    const auto init = c.initial_condition();
    const std::int64_t stride =
        c.sample_every > 1 ? c.sample_every : std::max<std::int64_t>(1, c.steps / 1000);
    struct Result {
        std::vector<double> reputation;
        OpinionMatrix final;
        std::vector<std::vector<double>> trajectory;
    };
    const std::vector<int> arms{c.params.gossip, 0};
    auto& csv = o.open("emergence.csv");
    std::vector<std::string> h{"k", "seed"};
    for (int g = 0; g < ng; ++g)
        h.push_back("reputation_g" + std::to_string(g));
    h.insert(h.end(), {"spread", "hierarchy", "flat"});
    write_header(csv, h);

    std::vector<double> fraction;
    for (int k : arms) {
        ModelParams p = c.params;
        p.gossip = k;
        std::vector<Result> res(static_cast<std::size_t>(c.seeds));
        parallel_for(res.size(), c.threads, [&](std::size_t s) {
            Simulation sim(p, init, run_seed(c.seed, s));
            std::vector<double> xs(ng), xc(ng * ng);
            auto reputation = [&] {
                sim.first_moments(xs, xc);
                std::vector<double> r(ng, 0.0);
                for (int t = 0; t < ng; ++t) {
                    for (int holder = 0; holder < ng; ++holder)
                        r[t] += xc[holder * ng + t];
                    r[t] /= ng;
                }
                return r;
            };
            auto& out_res = res[s];
            for (std::int64_t t = 1; t <= c.steps; ++t) {
                sim.step();
                if (s == 0 && (t % stride == 0 || t == c.steps)) {
                    auto v = first_moment_values(sim.aggregates({}, false));
                    v.insert(v.begin(), static_cast<double>(t));
                    out_res.trajectory.push_back(std::move(v));
                }
            }
            out_res.reputation = reputation();
            if (s == 0)
                out_res.final = sim.opinions();
            for (double v : out_res.reputation)
                if (!std::isfinite(v))
                    throw NumericalError("emergence run produced a non-finite opinion", c.steps);
        });
        int hier = 0, flat = 0;
        for (std::size_t s = 0; s < res.size(); ++s) {
            const auto& r = res[s].reputation;
            const double hi = *std::max_element(r.begin(), r.end());
            const double lo = *std::min_element(r.begin(), r.end());
            const bool is_hier = hi - lo > c.hierarchy_gap && lo < 0.0;
            const bool is_flat = lo > 0.0 && hi - lo < c.flat_gap;
            hier += is_hier;
            flat += is_flat;
            std::vector<double> row{static_cast<double>(k), static_cast<double>(s)};
            row.insert(row.end(), r.begin(), r.end());
            row.insert(row.end(), {hi - lo, is_hier ? 1.0 : 0.0, is_flat ? 1.0 : 0.0});
            write_row(csv, row);
        }
        const std::string tag = "k" + std::to_string(k);
        if (!res.empty()) {
            write_heatmap(o.open("matrix_" + tag + ".csv"), res[0].final, GroupLayout(p));
            auto& traj = o.open("trajectory_" + tag + ".csv");
            auto names = first_names(ng);
            names.insert(names.begin(), "step");
            write_header(traj, names);
            for (const auto& row : res[0].trajectory)
                write_row(traj, row);
        }
        const double n = static_cast<double>(c.seeds);
        out << "emergence k=" << k << ": hierarchy in " << hier << "/" << c.seeds
            << ", flat in " << flat << "/" << c.seeds << "\n";
        fraction.push_back(k > 0 ? hier / n : flat / n);
    }
    out << "gossip produces a hierarchy in at least " << 100.0 * c.seed_fraction << "%"
        << " of seeds: " << (fraction[0] >= c.seed_fraction ? "yes" : "no") << "\n";
    out << "without gossip reputations stay close and positive in at least "
        << 100.0 * c.seed_fraction << "%"
        << " of seeds: " << (fraction[1] >= c.seed_fraction ? "yes" : "no") << "\n";
}

// ---- config parsing ----------------------------------------------------------

template <class T>
T get_as(const json& j, const char* key)
{
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        throw ConfigError(std::string("config: wrong type for \"") + key + "\"");
    }
}

}  // namespace

InitialCondition ExperimentConfig::initial_condition() const
{
    if (init.empty())
        return InitialCondition(params.n_groups, 0.0);
    if (init.size() == static_cast<std::size_t>(params.n_groups))
        return InitialCondition::shared_levels(init);
    return InitialCondition(params.n_groups, init);
}

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig c)
{
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!j.is_object())
        throw ConfigError("config: top level must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        const json& v = it.value();
        const char* key = k.c_str();
        if (k == "kind")
            c.kind = get_as<std::string>(v, key);
        else if (k == "n_groups")
            c.params.n_groups = get_as<int>(v, key);
        else if (k == "group_size")
            c.params.group_size = get_as<int>(v, key);
        else if (k == "delta")
            c.params.delta = get_as<double>(v, key);
        else if (k == "sigma")
            c.params.sigma = get_as<double>(v, key);
        else if (k == "mu")
            c.params.mu = get_as<double>(v, key);
        else if (k == "k" || k == "gossip")
            c.params.gossip = get_as<int>(v, key);
        else if (k == "clamp")
            c.params.clamp_opinions = get_as<bool>(v, key);
        else if (k == "init") {
            // either levels per target group or a full n_g x n_g table
            c.init.clear();
            if (!v.is_array())
                throw ConfigError("config: \"init\" must be an array");
            for (const auto& e : v) {
                if (e.is_array())
                    for (const auto& x : e)
                        c.init.push_back(get_as<double>(x, key));
                else
                    c.init.push_back(get_as<double>(e, key));
            }
        } else if (k == "steps")
            c.steps = get_as<std::int64_t>(v, key);
        else if (k == "runs")
            c.runs = get_as<std::int64_t>(v, key);
        else if (k == "seed")
            c.seed = get_as<std::uint64_t>(v, key);
        else if (k == "sample_every")
            c.sample_every = get_as<std::int64_t>(v, key);
        else if (k == "out")
            c.out = get_as<std::string>(v, key);
        else if (k == "deviations")
            c.deviations = get_as<bool>(v, key);
        else if (k == "threads")
            c.threads = get_as<int>(v, key);
        else if (k == "compare_gossip")
            c.compare_gossip = get_as<std::vector<int>>(v, key);
        else if (k == "second_moments")
            c.second_moments = get_as<bool>(v, key);
        else if (k == "mean_normalised")
            c.mean_normalised = get_as<bool>(v, key);
        else if (k == "gap_first")
            c.gap_first = get_as<double>(v, key);
        else if (k == "gap_last")
            c.gap_last = get_as<double>(v, key);
        else if (k == "gap_step")
            c.gap_step = get_as<double>(v, key);
        else if (k == "t_star")
            c.t_star = get_as<std::int64_t>(v, key);
        else if (k == "seeds")
            c.seeds = get_as<int>(v, key);
        else if (k == "hierarchy_gap")
            c.hierarchy_gap = get_as<double>(v, key);
        else if (k == "flat_gap")
            c.flat_gap = get_as<double>(v, key);
        else if (k == "seed_fraction")
            c.seed_fraction = get_as<double>(v, key);
        else
            throw ConfigError("config: unknown key \"" + k + "\"");
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base)
{
    std::ifstream f(path);
    if (!f)
        throw ConfigError("cannot read config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

std::vector<std::string> check_config(const ExperimentConfig& c)
{
    std::vector<std::string> errors;
    if (!kKinds.count(c.kind))
        errors.push_back("unknown experiment kind \"" + c.kind + "\"");
    const auto report = validate(c.params);
    errors.insert(errors.end(), report.errors.begin(), report.errors.end());
    const auto ng = static_cast<std::size_t>(std::max(c.params.n_groups, 0));
    if (!c.init.empty() && c.init.size() != ng && c.init.size() != ng * ng)
        errors.push_back("init needs n_groups levels or n_groups^2 entries");
    for (double v : c.init)
        if (!(v >= -1.0 && v <= 1.0))
            errors.push_back("initial opinions must lie in [-1, 1]");
    if (c.steps < 0)
        errors.push_back("steps must be non-negative");
    if (c.sample_every < 1)
        errors.push_back("sample_every must be at least 1");
    if ((c.kind == "ensemble" || c.kind == "accuracy") && c.runs < 1)
        errors.push_back("runs must be at least 1");
    if (c.kind == "moments" || c.kind == "accuracy") {
        if (!c.init.empty() && c.init.size() == ng * ng && ng > 1) {
            bool shared = true;
            for (std::size_t i = 0; i < ng; ++i)
                for (std::size_t j = 0; j < ng; ++j)
                    shared = shared && c.init[i * ng + j] == c.init[j];
            if (!shared)
                errors.push_back("the moment engine needs initial opinions shared by all holders");
        }
    }
    if (c.kind == "accuracy") {
        if (c.compare_gossip.empty())
            errors.push_back("compare_gossip must list at least one k");
        for (int k : c.compare_gossip) {
            ModelParams p = c.params;
            p.gossip = k;
            if (!validate(p).ok())
                errors.push_back("compare_gossip value " + std::to_string(k) + " is invalid");
        }
    }
    if (c.kind == "sweep2g" && c.params.n_groups != 2)
        errors.push_back("sweep2g needs n_groups = 2");
    if (c.kind == "sweep3g" && c.params.n_groups < 2)
        errors.push_back("sweep3g needs at least two groups");
    if (c.kind == "sweep2g" || c.kind == "sweep3g") {
        if (!(c.gap_step > 0.0) || c.gap_last < c.gap_first || c.gap_first < 0.0)
            errors.push_back("gap grid needs 0 <= gap_first <= gap_last and gap_step > 0");
        if (c.gap_last > 2.0)
            errors.push_back("gap_last above 2 puts initial opinions outside [-1, 1]");
        if (c.t_star < 1)
            errors.push_back("t_star must be at least 1");
    }
    if (c.kind == "emergence") {
        if (c.seeds < 1)
            errors.push_back("seeds must be at least 1");
        if (c.params.gossip < 1)
            errors.push_back("emergence compares k > 0 against k = 0; set k >= 1");
        if (!(c.seed_fraction >= 0.0 && c.seed_fraction <= 1.0))
            errors.push_back("seed_fraction must lie in [0, 1]");
    }
    if (c.threads < 0)
        errors.push_back("threads must be non-negative");
    return errors;
}

int run(const ExperimentConfig& c, std::ostream& out, std::ostream& err)
{
    const auto errors = check_config(c);
    if (!errors.empty()) {
        for (const auto& e : errors)
            err << "error: " << e << "\n";
        return 1;
    }
    for (const auto& w : validate(c.params).warnings)
        err << "warning: " << w << "\n";
    Output o;
    std::ostringstream summary;
    try {
        if (c.kind == "simulate")
            run_simulate(c, o, summary);
        else if (c.kind == "ensemble")
            run_ensemble_kind(c, o, summary);
        else if (c.kind == "moments")
            run_moments(c, o, summary);
        else if (c.kind == "accuracy")
            run_accuracy(c, o, summary);
        else if (c.kind == "sweep2g" || c.kind == "sweep3g")
            run_sweep(c, o, summary);
        else
            run_emergence(c, o, summary);
        o.commit(c.out);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const ParameterError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    out << summary.str();
    for (const auto& [name, text] : o.files)
        out << "wrote " << (c.out / name).string() << "\n";
    return 0;
}

int main_entry(int argc, char** argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Group opinion dynamics: agent simulation, moment approximation, sweeps"};
    std::string kind;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::int64_t> steps, runs, sample_every, t_star;
    std::optional<int> k, n_groups, group_size, seeds, threads;
    std::optional<double> delta, sigma, mu;
    std::optional<std::string> out_dir;
    std::vector<double> init;
    bool second = false, absolute = false, no_clamp = false;

    app.add_option("kind", kind, "Experiment (may come from --config instead)")
        ->check(CLI::IsMember(std::vector<std::string>(kKinds.begin(), kKinds.end())));
    app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Base seed");
    app.add_option("--steps", steps, "Number of steps T");
    app.add_option("--runs", runs, "Ensemble size");
    app.add_option("--k", k, "Gossip targets per interaction");
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--sample-every", sample_every, "Recording stride");
    app.add_option("--n-groups", n_groups, "Number of groups");
    app.add_option("--group-size", group_size, "Agents per group");
    app.add_option("--delta", delta, "Noise half-width");
    app.add_option("--sigma", sigma, "Influence softness");
    app.add_option("--mu", mu, "Attraction retention");
    app.add_option("--init", init, "Initial levels per target group, or a full table")
        ->delimiter(',');
    app.add_option("--t-star", t_star, "Trend time for sweeps");
    app.add_option("--seeds", seeds, "Seeds for emergence");
    app.add_option("--threads", threads, "Worker threads (default: GROUPOP_THREADS or all cores)");
    app.add_flag("--second-moments", second, "Also track second moments in ensembles");
    app.add_flag("--absolute", absolute, "Ensemble of absolute opinions rather than deviations");
    app.add_flag("--no-clamp", no_clamp, "Do not clamp opinions to [-1, 1]");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 1;
    }

    ExperimentConfig c;
    try {
        // kind decides the defaults, so learn it before applying the file
        if (kind.empty() && !config_path.empty())
            kind = load_config(config_path).kind;
        if (kind.empty()) {
            err << "error: no experiment kind given\n";
            return 1;
        }
        c.kind = kind;
        if (kind == "emergence") {
            c.params.gossip = 2;
            c.steps = 2000000;
        }
        if (!config_path.empty())
            c = load_config(config_path, c);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    c.kind = kind;
    if (seed) c.seed = *seed;
    if (steps) c.steps = *steps;
    if (runs) c.runs = *runs;
    if (k) c.params.gossip = *k;
    if (out_dir) c.out = *out_dir;
    if (sample_every) c.sample_every = *sample_every;
    if (n_groups) c.params.n_groups = *n_groups;
    if (group_size) c.params.group_size = *group_size;
    if (delta) c.params.delta = *delta;
    if (sigma) c.params.sigma = *sigma;
    if (mu) c.params.mu = *mu;
    if (!init.empty()) c.init = init;
    if (t_star) c.t_star = *t_star;
    if (seeds) c.seeds = *seeds;
    if (threads) c.threads = *threads;
    if (second) c.second_moments = true;
    if (absolute) c.deviations = false;
    if (no_clamp) c.params.clamp_opinions = false;
    return run(c, out, err);
}

void emit_matrix_heatmap_data(const OpinionMatrix& m, const GroupLayout& layout,
                              const fs::path& path)
{
    std::ostringstream text;
    write_heatmap(text, m, layout);
    std::ofstream f(path);
    f << text.str();
    if (!f)
        throw std::runtime_error("cannot write " + path.string());
}

Table read_csv(const fs::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw std::runtime_error("cannot read " + path.string());
    Table t;
    std::string line;
    if (!std::getline(f, line))
        return t;
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');)
        t.header.push_back(cell);
    while (std::getline(f, line)) {
        if (line.empty())
            continue;
        std::vector<double> row;
        std::stringstream ls(line);
        for (std::string cell; std::getline(ls, cell, ',');)
            row.push_back(std::strtod(cell.c_str(), nullptr));
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace groupop::cli
