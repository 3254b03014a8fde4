#pragma once

// Run configuration (JSON), command dispatch and result tables.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "recolat/asymptotics.hpp"
#include "recolat/continuous.hpp"
#include "recolat/forward.hpp"
#include "recolat/linear.hpp"
#include "recolat/lpp.hpp"
#include "recolat/measure.hpp"
#include "recolat/partition.hpp"

namespace recolat {

using json = nlohmann::ordered_json;

enum class Mode { discrete, continuous };

struct MigrationSpec {
    enum class Kind { backward, forward, generator };
    Kind kind = Kind::backward;
    Eigen::MatrixXd matrix;
    std::vector<double> sizes;  // forward only
};

// Per-location initial distribution: dense weights, or a product of one-site
// marginals.
struct InitialSpec {
    std::vector<double> dense;
    std::vector<std::vector<double>> product;

    bool is_product() const { return !product.empty(); }
};

struct RunOptions {
    std::optional<double> dt;               // ct-integrate step size
    std::optional<Partition> start;         // qld start state
    std::optional<std::size_t> record_every;  // ct-integrate output stride in steps
};

struct RunConfig {
    Mode mode = Mode::discrete;
    TypeSpace types;
    std::vector<std::string> location_names;
    WeightedPartitions<double> recombination;  // probabilities, or rates in continuous mode
    MigrationSpec migration;
    std::vector<InitialSpec> initial;
    std::optional<double> t;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
    RunOptions options;

    // Derived during parsing.
    std::optional<RecombinationModel> model;
    std::optional<CtModel> ct;
    Metapopulation mu0;

    int locations() const { return static_cast<int>(location_names.size()); }
};

namespace detail {

[[noreturn]] inline void config_error(const std::string& path, const std::string& message)
{
    throw ModelError("config " + path + ": " + message);
}

inline const json& field(const json& j, const std::string& key, const std::string& path)
{
    if (!j.is_object()) {
        config_error(path, "expected an object");
    }
    const auto it = j.find(key);
    if (it == j.end()) {
        config_error(path.empty() ? key : path + "." + key, "missing");
    }
    return *it;
}

inline std::string child(const std::string& path, const std::string& key)
{
    return path.empty() ? key : path + "." + key;
}

inline std::string child(const std::string& path, std::size_t i)
{
    return path + "[" + std::to_string(i) + "]";
}

inline const json& array(const json& j, const std::string& path)
{
    if (!j.is_array()) {
        config_error(path, "expected an array");
    }
    return j;
}

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number()) {
        config_error(path, "expected a number");
    }
    return j.get<double>();
}

inline long long integer(const json& j, const std::string& path)
{
    if (!j.is_number_integer()) {
        config_error(path, "expected an integer");
    }
    return j.get<long long>();
}

inline std::vector<double> numbers(const json& j, const std::string& path)
{
    std::vector<double> out;
    for (std::size_t i = 0; i < array(j, path).size(); ++i) {
        out.push_back(number(j[i], child(path, i)));
    }
    return out;
}

inline Eigen::MatrixXd matrix(const json& j, const std::string& path)
{
    const auto& rows = array(j, path);
    if (rows.empty()) {
        config_error(path, "matrix is empty");
    }
    const auto n = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto row = numbers(rows[static_cast<std::size_t>(i)], child(path, static_cast<std::size_t>(i)));
        if (static_cast<Eigen::Index>(row.size()) != n) {
            config_error(child(path, static_cast<std::size_t>(i)), "matrix must be square");
        }
        for (Eigen::Index k = 0; k < n; ++k) {
            M(i, k) = row[static_cast<std::size_t>(k)];
        }
    }
    return M;
}

inline json matrix_to_json(const Eigen::MatrixXd& M)
{
    json rows = json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index k = 0; k < M.cols(); ++k) {
            row.push_back(M(i, k));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace detail

// Partitions are written as arrays of blocks of 1-based site numbers.
inline Partition partition_from_json(const json& j, int sites, const std::string& path)
{
    std::vector<SiteSet> blocks;
    SiteSet seen;
    for (std::size_t b = 0; b < detail::array(j, path).size(); ++b) {
        const auto bpath = detail::child(path, b);
        SiteSet block;
        for (std::size_t k = 0; k < detail::array(j[b], bpath).size(); ++k) {
            const auto site = detail::integer(j[b][k], detail::child(bpath, k));
            if (site < 1 || site > sites) {
                detail::config_error(detail::child(bpath, k), "site " + std::to_string(site) + " does not exist");
            }
            const int s = static_cast<int>(site) - 1;
            if (seen.contains(s)) {
                detail::config_error(detail::child(bpath, k), "site " + std::to_string(site) + " appears twice");
            }
            seen.insert(s);
            block.insert(s);
        }
        if (block.empty()) {
            detail::config_error(bpath, "empty block");
        }
        blocks.push_back(block);
    }
    if (seen != SiteSet::first(sites)) {
        detail::config_error(path, "blocks must cover every site");
    }
    return Partition(std::move(blocks));
}

inline json partition_to_json(const Partition& p)
{
    json out = json::array();
    for (SiteSet b : p.blocks()) {
        json block = json::array();
        for (int s : b.sites()) {
            block.push_back(s + 1);
        }
        out.push_back(std::move(block));
    }
    return out;
}

inline json labelled_partition_to_json(const LabelledPartition& p, const std::vector<std::string>& names)
{
    json out = json::array();
    for (std::size_t i = 0; i < p.size(); ++i) {
        json block = json::array();
        for (int s : p.block(i).sites()) {
            block.push_back(s + 1);
        }
        out.push_back({{"sites", std::move(block)}, {"label", names.at(static_cast<std::size_t>(p.label(i)))}});
    }
    return out;
}

inline RunConfig parse_config(const json& doc)
{
    using namespace detail;
    RunConfig cfg;
    if (!doc.is_object()) {
        config_error("<root>", "expected an object");
    }

    const auto& mode = field(doc, "mode", "");
    if (mode == "discrete") {
        cfg.mode = Mode::discrete;
    } else if (mode == "continuous") {
        cfg.mode = Mode::continuous;
    } else {
        config_error("mode", "must be \"discrete\" or \"continuous\"");
    }

    std::vector<int> sizes;
    const auto& sites = field(doc, "sites", "");
    for (std::size_t i = 0; i < array(sites, "sites").size(); ++i) {
        const auto a = integer(sites[i], child("sites", i));
        if (a < 1) {
            config_error(child("sites", i), "alphabet size must be at least 1");
        }
        sizes.push_back(static_cast<int>(a));
    }
    if (sizes.empty() || sizes.size() > static_cast<std::size_t>(kMaxSites)) {
        config_error("sites", "need between 1 and " + std::to_string(kMaxSites) + " sites");
    }
    cfg.types = TypeSpace(sizes);
    const int n = static_cast<int>(sizes.size());

    const auto& locs = field(doc, "locations", "");
    for (std::size_t i = 0; i < array(locs, "locations").size(); ++i) {
        if (!locs[i].is_string()) {
            config_error(child("locations", i), "expected a string");
        }
        cfg.location_names.push_back(locs[i].get<std::string>());
    }
    if (cfg.location_names.empty()) {
        config_error("locations", "need at least one location");
    }
    const int L = cfg.locations();

    const char* weight_key = cfg.mode == Mode::discrete ? "p" : "rate";
    const auto& rec = field(doc, "recombination", "");
    for (std::size_t i = 0; i < array(rec, "recombination").size(); ++i) {
        const auto path = child("recombination", i);
        const auto delta = partition_from_json(field(rec[i], "blocks", path), n, child(path, "blocks"));
        const double w = number(field(rec[i], weight_key, path), child(path, weight_key));
        cfg.recombination.emplace_back(delta, w);
    }

    const auto& mig = field(doc, "migration", "");
    if (cfg.mode == Mode::continuous) {
        cfg.migration.kind = MigrationSpec::Kind::generator;
        cfg.migration.matrix = matrix(field(mig, "generator", "migration"), "migration.generator");
    } else if (mig.is_object() && mig.contains("backward")) {
        cfg.migration.kind = MigrationSpec::Kind::backward;
        cfg.migration.matrix = matrix(mig["backward"], "migration.backward");
    } else if (mig.is_object() && mig.contains("forward")) {
        cfg.migration.kind = MigrationSpec::Kind::forward;
        cfg.migration.matrix = matrix(mig["forward"], "migration.forward");
        cfg.migration.sizes = numbers(field(mig, "sizes", "migration"), "migration.sizes");
    } else {
        config_error("migration", "expected {backward: ...} or {forward: ..., sizes: ...}");
    }
    if (cfg.migration.matrix.rows() != L) {
        config_error("migration", "matrix size does not match the number of locations");
    }

    const auto& init = field(doc, "initial", "");
    if (array(init, "initial").size() != static_cast<std::size_t>(L)) {
        config_error("initial", "need one entry per location");
    }
    std::vector<Distribution> demes;
    for (std::size_t a = 0; a < init.size(); ++a) {
        const auto path = child("initial", a);
        InitialSpec spec;
        try {
            if (init[a].is_object() && init[a].contains("dense")) {
                spec.dense = numbers(init[a]["dense"], child(path, "dense"));
                demes.emplace_back(cfg.types, cfg.types.all_sites(), spec.dense);
            } else if (init[a].is_object() && init[a].contains("product")) {
                const auto& prod = array(init[a]["product"], child(path, "product"));
                if (prod.size() != static_cast<std::size_t>(n)) {
                    config_error(child(path, "product"), "need one marginal per site");
                }
                std::vector<Distribution> marginals;
                for (std::size_t i = 0; i < prod.size(); ++i) {
                    spec.product.push_back(numbers(prod[i], child(child(path, "product"), i)));
                    try {
                        marginals.emplace_back(cfg.types, SiteSet{static_cast<int>(i)}, spec.product.back());
                    } catch (const ModelError& e) {
                        config_error(child(child(path, "product"), i), e.what());
                    }
                }
                demes.push_back(tensor(marginals));
            } else {
                config_error(path, "expected {dense: [...]} or {product: [[...]]}");
            }
        } catch (const ModelError& e) {
            const std::string what = e.what();
            if (what.rfind("config ", 0) == 0) {
                throw;
            }
            config_error(path, what);
        }
        cfg.initial.push_back(std::move(spec));
    }
    cfg.mu0 = Metapopulation(std::move(demes));

    if (doc.contains("t")) {
        cfg.t = number(doc["t"], "t");
        if (*cfg.t < 0) {
            config_error("t", "must be non-negative");
        }
        if (cfg.mode == Mode::discrete && *cfg.t != std::floor(*cfg.t)) {
            config_error("t", "must be an integer in discrete mode");
        }
    }
    if (doc.contains("seed")) {
        const auto s = integer(doc["seed"], "seed");
        if (s < 0) {
            config_error("seed", "must be non-negative");
        }
        cfg.seed = static_cast<std::uint64_t>(s);
    }
    if (doc.contains("replicates")) {
        const auto r = integer(doc["replicates"], "replicates");
        if (r < 1) {
            config_error("replicates", "must be at least 1");
        }
        cfg.replicates = static_cast<std::size_t>(r);
    }
    if (doc.contains("options")) {
        const auto& opt = doc["options"];
        if (!opt.is_object()) {
            config_error("options", "expected an object");
        }
        if (opt.contains("dt")) {
            cfg.options.dt = number(opt["dt"], "options.dt");
            if (!(*cfg.options.dt > 0)) {
                config_error("options.dt", "must be positive");
            }
        }
        if (opt.contains("start")) {
            cfg.options.start = partition_from_json(opt["start"], n, "options.start");
        }
        if (opt.contains("record_every")) {
            const auto r = integer(opt["record_every"], "options.record_every");
            if (r < 1) {
                config_error("options.record_every", "must be at least 1");
            }
            cfg.options.record_every = static_cast<std::size_t>(r);
        }
    }

    try {
        if (cfg.mode == Mode::discrete) {
            Eigen::MatrixXd M = cfg.migration.matrix;
            if (cfg.migration.kind == MigrationSpec::Kind::forward) {
                M = backward_from_forward(cfg.migration.matrix, cfg.migration.sizes);
            }
            cfg.model.emplace(cfg.types, cfg.recombination, M);
        } else {
            cfg.ct.emplace(cfg.types, cfg.recombination, cfg.migration.matrix);
        }
    } catch (const ModelError& e) {
        config_error("model", e.what());
    }
    return cfg;
}

inline RunConfig parse_config(const std::string& text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ModelError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(doc);
}

inline json to_json(const RunConfig& cfg)
{
    json doc;
    doc["mode"] = cfg.mode == Mode::discrete ? "discrete" : "continuous";
    doc["sites"] = cfg.types.alphabet_sizes();
    doc["locations"] = cfg.location_names;
    json rec = json::array();
    for (const auto& [delta, w] : cfg.recombination) {
        rec.push_back({{"blocks", partition_to_json(delta)}, {cfg.mode == Mode::discrete ? "p" : "rate", w}});
    }
    doc["recombination"] = std::move(rec);
    switch (cfg.migration.kind) {
    case MigrationSpec::Kind::backward:
        doc["migration"] = {{"backward", detail::matrix_to_json(cfg.migration.matrix)}};
        break;
    case MigrationSpec::Kind::forward:
        doc["migration"] = {{"forward", detail::matrix_to_json(cfg.migration.matrix)},
                            {"sizes", cfg.migration.sizes}};
        break;
    case MigrationSpec::Kind::generator:
        doc["migration"] = {{"generator", detail::matrix_to_json(cfg.migration.matrix)}};
        break;
    }
    json init = json::array();
    for (const auto& spec : cfg.initial) {
        if (spec.is_product()) {
            init.push_back({{"product", spec.product}});
        } else {
            init.push_back({{"dense", spec.dense}});
        }
    }
    doc["initial"] = std::move(init);
    if (cfg.t) {
        if (cfg.mode == Mode::discrete) {
            doc["t"] = static_cast<long long>(*cfg.t);
        } else {
            doc["t"] = *cfg.t;
        }
    }
    if (cfg.seed) doc["seed"] = *cfg.seed;
    if (cfg.replicates) doc["replicates"] = *cfg.replicates;
    json opt = json::object();
    if (cfg.options.dt) opt["dt"] = *cfg.options.dt;
    if (cfg.options.start) opt["start"] = partition_to_json(*cfg.options.start);
    if (cfg.options.record_every) opt["record_every"] = *cfg.options.record_every;
    if (!opt.empty()) doc["options"] = std::move(opt);
    return doc;
}

struct ResultRow {
    std::string quantity;
    std::vector<std::string> labels;
    double value = 0.0;
    std::optional<double> standard_error;
};

struct ResultTable {
    std::string command;
    std::vector<std::string> label_names;
    std::vector<ResultRow> rows;
    std::vector<std::string> warnings;

    void add(std::string quantity, std::vector<std::string> labels, double value,
             std::optional<double> se = std::nullopt)
    {
        rows.push_back({std::move(quantity), std::move(labels), value, se});
    }
};

inline std::string format_csv_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline std::string to_csv(const ResultTable& table)
{
    std::ostringstream out;
    out << "quantity";
    for (const auto& l : table.label_names) {
        out << ',' << l;
    }
    out << ",value,stderr\n";
    for (const auto& row : table.rows) {
        out << row.quantity;
        for (std::size_t i = 0; i < table.label_names.size(); ++i) {
            out << ',' << (i < row.labels.size() ? row.labels[i] : "");
        }
        out << ',' << format_csv_number(row.value) << ',';
        if (row.standard_error) {
            out << format_csv_number(*row.standard_error);
        }
        out << '\n';
    }
    return out.str();
}

inline json to_json(const ResultTable& table)
{
    json rows = json::array();
    for (const auto& row : table.rows) {
        json r;
        r["quantity"] = row.quantity;
        for (std::size_t i = 0; i < table.label_names.size(); ++i) {
            r[table.label_names[i]] = i < row.labels.size() ? row.labels[i] : "";
        }
        r["value"] = row.value;
        if (row.standard_error) {
            r["stderr"] = *row.standard_error;
        }
        rows.push_back(std::move(r));
    }
    json doc;
    doc["command"] = table.command;
    doc["rows"] = std::move(rows);
    if (!table.warnings.empty()) {
        doc["warnings"] = table.warnings;
    }
    return doc;
}

struct Overrides {
    std::optional<double> t;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> replicates;
};

namespace detail {

inline std::string format_sequence(const std::vector<int>& letters)
{
    std::string s;
    for (std::size_t i = 0; i < letters.size(); ++i) {
        if (i > 0) {
            s += '.';
        }
        s += std::to_string(letters[i]);
    }
    return s;
}

inline void add_population(ResultTable& table, const std::string& quantity, const std::string& time,
                           const Metapopulation& mu, const std::vector<std::string>& names)
{
    for (std::size_t a = 0; a < mu.size(); ++a) {
        for (std::size_t x = 0; x < mu[a].size(); ++x) {
            table.add(quantity, {time, names[a], format_sequence(mu[a].letters_of(x))}, mu[a][x]);
        }
    }
}

inline const RecombinationModel& discrete_model(const RunConfig& cfg, const std::string& command)
{
    require(cfg.mode == Mode::discrete && cfg.model, "command '" + command + "' needs a discrete-mode config");
    return *cfg.model;
}

inline const CtModel& continuous_model(const RunConfig& cfg, const std::string& command)
{
    require(cfg.mode == Mode::continuous && cfg.ct, "command '" + command + "' needs a continuous-mode config");
    return *cfg.ct;
}

inline int discrete_horizon(const std::optional<double>& t)
{
    require(t.has_value(), "horizon t is required");
    require(*t >= 0 && *t == std::floor(*t), "horizon t must be a non-negative integer");
    return static_cast<int>(*t);
}

inline std::string time_label(double t)
{
    std::ostringstream s;
    s << t;
    return s.str();
}

}  // namespace detail

inline const std::vector<std::string>& command_names()
{
    static const std::vector<std::string> names{"iterate", "limit", "linear", "simulate",
                                                "qld",     "ct-solve", "ct-integrate", "export-T"};
    return names;
}

inline ResultTable run(const std::string& command, const RunConfig& cfg, const Overrides& over = {})
{
    using namespace detail;
    ResultTable table;
    table.command = command;
    const auto& names = cfg.location_names;
    const auto t = over.t ? over.t : cfg.t;
    const auto seed = over.seed ? over.seed : cfg.seed;
    const auto replicates = over.replicates ? over.replicates : cfg.replicates;

    if (cfg.model && cfg.model->has_multiparent_partitions()) {
        table.warnings.push_back("recombination includes partitions with more than two blocks");
    }

    if (command == "iterate" || command == "linear") {
        const auto& model = discrete_model(cfg, command);
        const int T = discrete_horizon(t);
        table.label_names = {"t", "location", "sequence"};
        if (command == "iterate") {
            const auto states = iterate(cfg.mu0, model, T);
            for (int s = 0; s <= T; ++s) {
                add_population(table, "mu", std::to_string(s), states[static_cast<std::size_t>(s)], names);
            }
        } else {
            const auto sys = build_T(model);
            for (int s = 0; s <= T; ++s) {
                add_population(table, "mu", std::to_string(s), solve_linear(cfg.mu0, sys, s), names);
            }
        }
    } else if (command == "simulate") {
        const auto& model = discrete_model(cfg, command);
        const int T = discrete_horizon(t);
        table.label_names = {"t", "location", "sequence"};
        const auto N = replicates.value_or(10000);
        const auto sd = seed.value_or(0);
        for (Location a = 0; a < model.locations(); ++a) {
            // Distinct key per location.
            const auto est = duality_estimate(a, static_cast<std::size_t>(T), cfg.mu0, model, N,
                                              sd + static_cast<std::uint64_t>(a) * 0x9E3779B97F4A7C15ULL);
            for (std::size_t x = 0; x < est.mean.size(); ++x) {
                table.add("mu_hat", {std::to_string(T), names[static_cast<std::size_t>(a)],
                                     format_sequence(est.mean.letters_of(x))},
                          est.mean[x], est.standard_error[x]);
            }
        }
    } else if (command == "limit") {
        const auto& model = discrete_model(cfg, command);
        table.label_names = {"location", "sequence"};
        const auto q = stationary_q(model.backward()).q;
        for (Eigen::Index a = 0; a < q.size(); ++a) {
            table.add("q", {names[static_cast<std::size_t>(a)], ""}, q(a));
        }
        const auto lim = mu_infinity(cfg.mu0, model);
        const auto& nu = lim[0];
        for (std::size_t x = 0; x < nu.size(); ++x) {
            table.add("mu_inf", {"", format_sequence(nu.letters_of(x))}, nu[x]);
        }
        if (t) {
            const int T = discrete_horizon(t);
            const auto states = iterate(cfg.mu0, model, T);
            table.add("error", {"", ""}, max_abs_diff(states.back(), lim));
        }
    } else if (command == "qld") {
        const auto& model = discrete_model(cfg, command);
        table.label_names = {"state"};
        const auto rep = qld(model, cfg.options.start);
        if (!rep.start_is_coarsest) {
            table.warnings.push_back("quasi-limit from a start other than the single-block partition");
        }
        table.add("eta", {""}, rep.eta);
        for (const auto& [delta, p] : rep.sojourn) {
            table.add("sojourn", {to_string(delta)}, p);
        }
        for (const auto& [delta, p] : rep.P_qlim) {
            table.add("P_qlim", {to_string(delta)}, p);
        }
        for (const auto& [bdelta, p] : rep.labelled_qlim) {
            table.add("labelled_qlim", {to_string(bdelta, names)}, p);
        }
    } else if (command == "ct-solve" || command == "ct-integrate") {
        const auto& ct = continuous_model(cfg, command);
        require(t.has_value(), "horizon t is required");
        table.label_names = {"t", "location", "sequence"};
        if (command == "ct-solve") {
            add_population(table, "omega", time_label(*t), ct_solve_dual(cfg.mu0, ct, *t), names);
        } else {
            const double dt = cfg.options.dt.value_or(1e-3);
            const auto traj = integrate(cfg.mu0, ct, *t, dt, cfg.options.record_every.value_or(0));
            for (std::size_t k = 0; k < traj.states.size(); ++k) {
                add_population(table, "omega", time_label(traj.times[k]), traj.states[k], names);
            }
            table.add("mass_drift", {"", "", ""}, traj.max_mass_drift);
        }
    } else if (command == "export-T") {
        table.label_names = {"from", "to"};
        const auto emit = [&](const StateIndex<LabelledPartition>& index, const Eigen::MatrixXd& A,
                              const std::string& quantity) {
            for (Eigen::Index i = 0; i < A.rows(); ++i) {
                for (Eigen::Index j = 0; j < A.cols(); ++j) {
                    if (A(i, j) != 0.0) {
                        table.add(quantity,
                                  {to_string(index[static_cast<std::size_t>(i)], names),
                                   to_string(index[static_cast<std::size_t>(j)], names)},
                                  A(i, j));
                    }
                }
            }
        };
        if (cfg.mode == Mode::discrete) {
            const auto sys = build_T(*cfg.model);
            emit(sys.index, sys.T, "T");
        } else {
            const auto gen = build_Q(*cfg.ct);
            emit(gen.index, gen.Q, "Q");
        }
    } else {
        throw std::invalid_argument("unknown command '" + command + "'");
    }
    return table;
}

}  // namespace recolat
