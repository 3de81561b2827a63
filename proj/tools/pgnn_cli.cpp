// pgnn command-line front end: generate, train, experiment, size-sweep, profile.
//
// Exit codes: 0 ok, 1 configuration error, 2 data error, 3 numerical failure.

#include "pgnn/pgnn.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#ifndef PGNN_VERSION
#define PGNN_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

bool g_quiet = false;

void note(const std::string& msg) {
    if (!g_quiet) std::cerr << msg << '\n';
}

void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec || !fs::is_directory(p)) throw pgnn::DataError("cannot create directory '" + p.string() + "'");
}

template <class Fn>
void write_file(const fs::path& p, Fn&& body) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw pgnn::DataError("cannot write '" + p.string() + "'");
    body(out);
    out.flush();
    if (!out) throw pgnn::DataError("write failed for '" + p.string() + "'");
}

json scenario_json(const pgnn::LakeScenario& s) {
    std::ostringstream os;
    pgnn::write_scenario(os, s);
    std::istringstream is(os.str());
    json j = json::object();
    for (const auto& [k, v] : pgnn::parse_key_values(is)) j[k] = v;
    return j;
}

json settings_json(const pgnn::RunSettings& r) {
    json j = json::object();
    for (const auto& [k, v] : pgnn::to_key_values(r)) j[k] = v;
    return j;
}

// No timestamps or host data: reruns produce identical manifests.
void write_manifest(const fs::path& dir, const std::string& command, json config, const std::vector<std::string>& outputs,
                    json extra = json::object()) {
    json m;
    m["tool"] = "pgnn";
    m["version"] = PGNN_VERSION;
    m["command"] = command;
    m["config"] = std::move(config);
    for (auto& [k, v] : extra.items()) m[k] = v;
    m["outputs"] = outputs;
    write_file(dir / "manifest.json", [&](std::ostream& os) { os << m.dump(2) << '\n'; });
}

// Scenario / experiment overrides given on the command line. Each option is
// optional; only options actually passed override the config file.
struct Overrides {
    std::map<std::string, std::string> values;
    std::vector<std::string> sets;

    void add(CLI::App* app, const std::string& key, const std::string& help) {
        std::string flag = "--" + key;
        for (auto& ch : flag) {
            if (ch == '_') ch = '-';
        }
        app->add_option_function<std::string>(flag, [this, key](const std::string& v) { values[key] = v; }, help);
    }

    pgnn::KeyValues merged(const std::string& config_path) const {
        pgnn::KeyValues kv;
        if (!config_path.empty()) kv = pgnn::read_key_values(config_path);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw pgnn::ConfigError("--set expects key=value, got '" + s + "'");
            kv[pgnn::trim(s.substr(0, eq))] = pgnn::trim(s.substr(eq + 1));
        }
        for (const auto& [k, v] : values) kv[k] = v;
        return kv;
    }
};

void add_experiment_flags(CLI::App* app, Overrides& o) {
    o.add(app, "models", "comma list of PHY,NN,PGNN0,PGNN");
    o.add(app, "n_train", "labeled training rows (default 3000)");
    o.add(app, "seeds", "comma list or range a..b (default 0..9)");
    o.add(app, "batch_size", "mini-batch size");
    o.add(app, "max_epochs", "epoch limit");
    o.add(app, "patience", "early-stopping patience");
    o.add(app, "val_fraction", "validation fraction");
    o.add(app, "clip_norm", "gradient clipping norm");
    o.add(app, "unlabeled_batch_size", "grid cells per step for the physics term (0 = batch_size)");
    o.add(app, "phys_full_grid", "use the whole grid for the physics term");
    o.add(app, "hidden_layers", "hidden layer count");
    o.add(app, "hidden_width", "hidden layer width");
    o.add(app, "activation", "tanh or relu");
    o.add(app, "lambda_l1", "L1 weight");
    o.add(app, "lambda_l2", "L2 weight");
    o.add(app, "lambda_phy", "physics weight, or auto");
    o.add(app, "lambda_phy_scale", "multiplier on the derived physics weight");
    o.add(app, "lambda_phy_rule", "variance or sd-of-squares");
    o.add(app, "tolerance", "inconsistency tolerance (kg/m^3)");
    o.add(app, "jobs", "worker threads");
    app->add_option("--set", o.sets, "extra key=value overrides");
}

struct LoadedData {
    pgnn::LabeledDataset labeled;
    pgnn::UnlabeledGrid grid;
};

LoadedData load_data(const fs::path& dir) {
    return {pgnn::load_dataset((dir / "labeled.csv").string()), pgnn::load_grid((dir / "grid.csv").string())};
}

std::string run_tag(const pgnn::RunMetrics& m) {
    return "n" + std::to_string(m.n_train) + "_" + m.model + "_seed" + std::to_string(m.seed);
}

// Metrics CSV, per-run logs and checkpoints.
std::vector<std::string> write_results(const fs::path& out, const pgnn::ExperimentResult& r) {
    std::vector<std::string> files{"metrics.csv"};
    const auto metrics = r.metrics();
    write_file(out / "metrics.csv", [&](std::ostream& os) { pgnn::write_metrics_csv(os, metrics, r.aggregates); });
    bool dirs = false;
    for (const auto& run : r.runs) {
        if (!run.checkpoint) continue;
        if (!dirs) {
            ensure_dir(out / "logs");
            ensure_dir(out / "checkpoints");
            dirs = true;
        }
        const std::string tag = run_tag(run.metrics);
        write_file(out / "logs" / (tag + ".csv"), [&](std::ostream& os) { pgnn::write_train_log_csv(os, run.log); });
        write_file(out / "checkpoints" / (tag + ".ckpt"),
                   [&](std::ostream& os) { pgnn::write_checkpoint(os, *run.checkpoint); });
        files.push_back("logs/" + tag + ".csv");
        files.push_back("checkpoints/" + tag + ".ckpt");
    }
    return files;
}

void print_aggregates(const pgnn::ExperimentResult& r) {
    if (g_quiet) return;
    for (const auto& a : r.aggregates) {
        std::fprintf(stderr, "n=%-5zu %-6s rmse %.3f (sd %.3f)  inconsistency %.3f (sd %.3f)\n", a.n_train,
                     a.model.c_str(), a.rmse_mean, a.rmse_sd, a.inconsistency_mean, a.inconsistency_sd);
    }
}

std::size_t find_day(const pgnn::UnlabeledGrid& g, const std::string& date) {
    for (std::size_t t = 0; t < g.shape.n_times; ++t) {
        if (g.at(0, t).date == date) return t;
    }
    throw pgnn::DataError("date " + date + " is not in the grid");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physics-guided neural networks for lake temperature"};
    app.set_version_flag("--version", std::string(PGNN_VERSION));
    app.require_subcommand(1);
    app.add_flag("-q,--quiet", g_quiet, "suppress progress output");

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic lake dataset and grid");
    std::string gen_config, gen_out;
    Overrides gen_o;
    gen->add_option("-c,--config", gen_config, "scenario key=value file");
    gen->add_option("-o,--out", gen_out, "output directory")->required();
    gen->add_option("--set", gen_o.sets, "scenario key=value overrides");
    for (const char* k : {"n_days", "start_year", "max_depth", "depth_step", "n_obs", "seed", "obs_noise_sd", "phy_bias"}) {
        gen_o.add(gen, k, std::string("scenario ") + k);
    }

    // train
    auto* tr = app.add_subcommand("train", "train one model for one seed");
    std::string tr_data, tr_out, tr_config, tr_model = "PGNN";
    std::uint64_t tr_seed = 0;
    Overrides tr_o;
    tr->add_option("-d,--data", tr_data, "directory written by generate")->required();
    tr->add_option("-o,--out", tr_out, "output directory")->required();
    tr->add_option("-c,--config", tr_config, "experiment key=value file");
    tr->add_option("-m,--model", tr_model, "NN, PGNN0 or PGNN");
    tr->add_option("--seed", tr_seed, "training seed");
    add_experiment_flags(tr, tr_o);

    // experiment
    auto* ex = app.add_subcommand("experiment", "multi-seed comparison of PHY, NN, PGNN0 and PGNN");
    std::string ex_data, ex_out, ex_config;
    Overrides ex_o;
    ex->add_option("-d,--data", ex_data, "directory written by generate")->required();
    ex->add_option("-o,--out", ex_out, "output directory")->required();
    ex->add_option("-c,--config", ex_config, "experiment key=value file");
    add_experiment_flags(ex, ex_o);

    // size-sweep
    auto* sw = app.add_subcommand("size-sweep", "experiment repeated over training sizes");
    std::string sw_data, sw_out, sw_config;
    Overrides sw_o;
    sw->add_option("-d,--data", sw_data, "directory written by generate")->required();
    sw->add_option("-o,--out", sw_out, "output directory")->required();
    sw->add_option("-c,--config", sw_config, "experiment key=value file");
    add_experiment_flags(sw, sw_o);
    sw_o.add(sw, "sizes", "comma list of training sizes (default 800,1250,1500,2000,3000)");

    // profile
    auto* pr = app.add_subcommand("profile", "density profiles from checkpoints");
    std::string pr_data, pr_out;
    std::vector<std::string> pr_ckpts, pr_dates;
    bool pr_phy = false;
    pr->add_option("-d,--data", pr_data, "directory written by generate")->required();
    pr->add_option("-o,--out", pr_out, "output CSV file")->required();
    pr->add_option("-k,--checkpoint", pr_ckpts, "checkpoint file (repeatable)");
    pr->add_option("--date", pr_dates, "YYYY-MM-DD (repeatable)")->required();
    pr->add_flag("--phy", pr_phy, "include the simulated-temperature profile");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*gen) {
            pgnn::KeyValues kv = gen_o.merged(gen_config);
            const pgnn::LakeScenario s = pgnn::scenario_from_key_values(kv);
            const fs::path out(gen_out);
            ensure_dir(out);
            note("generating " + std::to_string(s.n_days) + " days, " + std::to_string(s.n_obs) + " observations");
            const auto labeled = pgnn::sample_observations(s, s.n_obs);
            const auto grid = pgnn::make_grid(s);
            write_file(out / "scenario.cfg", [&](std::ostream& os) { pgnn::write_scenario(os, s); });
            write_file(out / "labeled.csv", [&](std::ostream& os) { pgnn::write_dataset_csv(os, labeled); });
            write_file(out / "grid.csv", [&](std::ostream& os) { pgnn::write_grid_csv(os, grid); });
            json extra;
            extra["grid"] = {{"n_depths", grid.shape.n_depths}, {"n_times", grid.shape.n_times}};
            write_manifest(out, "generate", scenario_json(s), {"scenario.cfg", "labeled.csv", "grid.csv"}, extra);
            return 0;
        }

        if (*tr || *ex || *sw) {
            const bool is_train = tr->parsed();
            const bool is_sweep = sw->parsed();
            const Overrides& o = is_train ? tr_o : (is_sweep ? sw_o : ex_o);
            const std::string& cfg_path = is_train ? tr_config : (is_sweep ? sw_config : ex_config);
            pgnn::KeyValues kv = o.merged(cfg_path);
            if (is_train) {
                kv["models"] = tr_model;
                kv["seeds"] = std::to_string(tr_seed);
            }
            pgnn::RunSettings settings = pgnn::apply_key_values({}, kv);
            if (is_train && settings.experiment.models.front() == pgnn::ExperimentModel::PHY) {
                throw pgnn::ConfigError("train: PHY is not a trainable model");
            }
            const fs::path data_dir(is_train ? tr_data : (is_sweep ? sw_data : ex_data));
            const LoadedData data = load_data(data_dir);
            const fs::path out(is_train ? tr_out : (is_sweep ? sw_out : ex_out));
            ensure_dir(out);

            const auto& c = settings.experiment;
            pgnn::ExperimentResult r;
            if (is_sweep) {
                note("size sweep over " + std::to_string(settings.sizes.size()) + " sizes, " +
                     std::to_string(c.seeds.size()) + " seeds");
                r = pgnn::run_size_sweep(data.labeled, data.grid, c, settings.sizes);
            } else {
                note("n_train " + std::to_string(c.n_train) + ", " + std::to_string(c.models.size()) + " models x " +
                     std::to_string(c.seeds.size()) + " seeds");
                r = pgnn::run_experiment(data.labeled, data.grid, c);
            }
            print_aggregates(r);
            const auto files = write_results(out, r);
            json extra;
            extra["data"] = data_dir.string();
            json lam = json::array();
            for (const auto& run : r.runs) {
                if (run.checkpoint && run.checkpoint->kind == pgnn::ModelKind::PGNN) {
                    lam.push_back({{"n_train", run.metrics.n_train}, {"seed", run.metrics.seed},
                                   {"lambda_phy", run.log.lambda_phy}});
                }
            }
            if (!lam.empty()) extra["lambda_phy_used"] = lam;
            write_manifest(out, is_train ? "train" : (is_sweep ? "size-sweep" : "experiment"), settings_json(settings),
                           files, extra);
            return 0;
        }

        if (*pr) {
            if (pr_ckpts.empty() && !pr_phy) throw pgnn::ConfigError("profile: give --checkpoint and/or --phy");
            const auto grid = pgnn::load_grid((fs::path(pr_data) / "grid.csv").string());
            std::vector<pgnn::ProfileRow> rows;
            std::vector<std::size_t> days;
            for (const auto& d : pr_dates) days.push_back(find_day(grid, d));
            if (pr_phy) {
                const auto phy = grid.simulated();
                for (std::size_t i = 0; i < days.size(); ++i) {
                    for (const auto& p : pgnn::density_profile(phy, days[i])) rows.push_back({"PHY", pr_dates[i], p});
                }
            }
            const auto raw = grid.features();
            for (const auto& path : pr_ckpts) {
                std::ifstream in(path);
                if (!in) throw pgnn::DataError("cannot open checkpoint '" + path + "'");
                const auto ck = pgnn::read_checkpoint(in);
                const pgnn::UnlabeledBatch batch{ck.model_input(raw), grid.shape};
                for (std::size_t i = 0; i < days.size(); ++i) {
                    for (const auto& p : pgnn::density_profile(ck.params, batch, days[i])) {
                        rows.push_back({pgnn::to_string(ck.kind), pr_dates[i], p});
                    }
                }
            }
            write_file(pr_out, [&](std::ostream& os) { pgnn::write_profile_csv(os, rows); });
            return 0;
        }
    } catch (const pgnn::Error& e) {
        std::cerr << "pgnn: " << e.what() << '\n';
        switch (e.kind()) {
        case pgnn::ErrorKind::Config: return 1;
        case pgnn::ErrorKind::Numerical: return 3;
        default: return 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "pgnn: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
