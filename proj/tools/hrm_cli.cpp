#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hrm/aggregate.hpp"
#include "hrm/error.hpp"
#include "hrm/evaluation.hpp"
#include "hrm/generator.hpp"
#include "hrm/hierarchical.hpp"
#include "hrm/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

struct Options {
    std::string config, data, schema, model, out = ".", triangle;
    std::string layer = "size";
    std::uint64_t seed = kDefaultSeed;
    std::size_t paths = 1000;
    std::optional<int> horizon;
    int threads = 1;
    std::vector<double> quantiles{0.5, 0.75, 0.95, 0.995};
    double level = 0.95;
};

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw hrm::InputError("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// FNV-1a over the file bytes, enough to tell inputs apart in a manifest.
std::string fingerprint(const std::string& path) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : read_text(path)) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream s;
    s << std::hex << h;
    return s.str();
}

class Run {
public:
    Run(std::string command, const Options& o, std::vector<std::string> argv)
        : command_(std::move(command)), o_(o), argv_(std::move(argv)) {
        fs::create_directories(o_.out);
    }

    void input(const std::string& role, const std::string& path) {
        if (path.empty()) return;
        inputs_[role] = {{"path", path}, {"fnv1a64", fingerprint(path)}};
    }

    std::string write(const std::string& name, const std::string& contents) {
        auto path = (fs::path(o_.out) / name).string();
        std::ofstream out(path, std::ios::binary);
        if (!out) throw hrm::InputError("cannot write '" + path + "'");
        out << contents;
        outputs_.push_back(name);
        return path;
    }

    void finish(const json& settings) {
        json m{{"tool", "hrm"},          {"version", hrm::kVersion}, {"command", command_}, {"argv", argv_},
               {"inputs", inputs_},      {"settings", settings},     {"outputs", outputs_}};
        std::ofstream((fs::path(o_.out) / "manifest.json").string()) << m.dump(2) << '\n';
    }

private:
    std::string command_;
    const Options& o_;
    std::vector<std::string> argv_;
    json inputs_ = json::object();
    std::vector<std::string> outputs_;
};

int resolve_threads(int t) { return t == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency())) : t; }

hrm::Portfolio load_portfolio(const Options& o) {
    if (o.data.empty()) throw hrm::ConfigError("--data is required");
    hrm::SchemaConfig schema;
    if (!o.schema.empty()) schema = hrm::SchemaConfig::load(o.schema);
    auto p = hrm::ingest_csv(o.data, schema);
    hrm::apply_bins(p, schema);
    return p;
}

json load_json(const std::string& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw hrm::ConfigError(path + ": " + e.what());
    }
}

json common_settings(const Options& o) {
    json s{{"seed", o.seed}, {"threads", o.threads}};
    s["horizon"] = o.horizon ? json(*o.horizon) : json(nullptr);
    return s;
}

void cmd_generate(Run& run, const Options& o) {
    if (o.config.empty()) throw hrm::ConfigError("--config is required");
    run.input("config", o.config);
    auto cfg = hrm::GeneratorConfig::load(o.config);
    auto g = hrm::generate(cfg);
    run.write("portfolio.csv", g.csv);
    run.write("schema.json", g.schema.to_json().dump(2) + "\n");
    run.write("generator.json", cfg.to_json().dump(2) + "\n");
    if (cfg.multiplicative) {
        auto t = hrm::multiplicative_truth(cfg);
        run.write("truth.json", json{{"beta", t.beta}, {"alpha_tilde", t.alpha_tilde}, {"rbns", t.rbns}}.dump(2) + "\n");
    }
    std::cout << "claims " << g.portfolio.claims.size() << ", records " << g.portfolio.records.size() << '\n';
    run.finish({{"seed", cfg.seed}});
}

void cmd_fit(Run& run, const Options& o) {
    if (o.config.empty()) throw hrm::ConfigError("--config is required (model spec)");
    run.input("data", o.data);
    run.input("schema", o.schema);
    run.input("config", o.config);
    auto p = load_portfolio(o);
    auto spec = hrm::ModelSpec::from_json(load_json(o.config));
    auto model = hrm::fit_hrm(p, spec);
    run.write("model.json", model.to_json().dump(2) + "\n");
    auto ll = hrm::layer_logliks(model, p);
    json summary = json::array();
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        json layer{{"name", model.spec.layers[k].name},
                   {"engine", model.layers[k]->engine()},
                   {"weighted_loglik", ll[k]},
                   {"dispersion", model.layers[k]->dispersion()}};
        try {
            layer["importance"] = hrm::layer_importance(*model.layers[k]);
        } catch (const hrm::StateError&) {
        }
        summary.push_back(layer);
        std::cout << model.spec.layers[k].name << ": loglik " << ll[k] << '\n';
    }
    run.write("fit_summary.json", summary.dump(2) + "\n");
    run.finish(common_settings(o));
}

hrm::SimulationOptions sim_options(const Options& o) {
    if (o.paths == 0) throw hrm::ConfigError("--paths must be positive");
    hrm::SimulationOptions s;
    s.n_paths = o.paths;
    s.seed = o.seed;
    s.horizon = o.horizon;
    s.threads = resolve_threads(o.threads);
    return s;
}

void cmd_simulate(Run& run, const Options& o) {
    if (o.model.empty()) throw hrm::ConfigError("--model is required");
    run.input("data", o.data);
    run.input("schema", o.schema);
    run.input("model", o.model);
    auto p = load_portfolio(o);
    auto model = hrm::HierarchicalModel::load(o.model);
    auto paths = hrm::simulate_paths(model, p, sim_options(o));
    std::ostringstream csv;
    csv.precision(17);
    csv << "path,claim_id,dev_year,close,payment,size\n";
    for (const auto& path : paths) {
        for (const auto& r : path.records) {
            csv << path.path_id << ',' << p.claims[r.claim].claim_id << ',' << r.dev_year << ',' << r.close << ','
                << r.payment << ',' << r.size << '\n';
        }
    }
    run.write("paths.csv", csv.str());
    std::cout << "simulated " << paths.size() << " paths\n";
    auto s = common_settings(o);
    s["paths"] = o.paths;
    run.finish(s);
}

void cmd_reserve(Run& run, const Options& o) {
    if (o.model.empty()) throw hrm::ConfigError("--model is required");
    for (double q : o.quantiles) {
        if (!(q > 0.0 && q < 1.0)) throw hrm::ConfigError("quantile levels must lie in (0, 1)");
    }
    run.input("data", o.data);
    run.input("schema", o.schema);
    run.input("model", o.model);
    auto p = load_portfolio(o);
    auto model = hrm::HierarchicalModel::load(o.model);
    auto report = hrm::simulate_reserve(model, p, sim_options(o), o.quantiles);
    run.write("reserve.json", report.to_json().dump(2) + "\n");
    run.write("reserve.csv", report.to_csv());
    std::cout << "RBNS reserve " << report.point << '\n';
    for (std::size_t k = 0; k < report.levels.size(); ++k) {
        std::cout << "  q" << report.levels[k] << ' ' << report.quantiles[k] << '\n';
    }
    auto s = common_settings(o);
    s["paths"] = o.paths;
    s["quantiles"] = o.quantiles;
    run.finish(s);
}

hrm::Triangle triangle_input(Run& run, const Options& o) {
    if (!o.triangle.empty()) {
        run.input("triangle", o.triangle);
        return hrm::read_triangle_csv(o.triangle);
    }
    run.input("data", o.data);
    run.input("schema", o.schema);
    return hrm::build_triangle(load_portfolio(o), o.layer);
}

void cmd_triangle(Run& run, const Options& o) {
    run.input("data", o.data);
    run.input("schema", o.schema);
    auto p = load_portfolio(o);
    auto t = hrm::build_triangle(p, o.layer);
    std::cout << hrm::triangle_to_csv(t);
    run.write("triangle_" + o.layer + ".csv", hrm::triangle_to_csv(t));
    run.finish({{"layer", o.layer}});
}

void cmd_chainladder(Run& run, const Options& o) {
    auto t = triangle_input(run, o);
    auto cl = hrm::chain_ladder(t);
    json out = cl.to_json();
    std::cout << "factors";
    for (double f : cl.factors) std::cout << ' ' << f;
    std::cout << "\nreserve " << cl.total_reserve << '\n';
    if (o.horizon) {
        out["horizon_reserve"] = hrm::chain_ladder_reserve(cl, t, o.horizon);
        std::cout << "reserve within " << *o.horizon << " years " << out["horizon_reserve"].get<double>() << '\n';
    }
    if (t.rows() >= 3) {
        auto mack = hrm::mack_se(t, o.level);
        out["mack"] = mack.to_json();
        std::cout << "Mack s.e. " << mack.total_se << "  [" << mack.lower << ", " << mack.upper << "]\n";
    }
    run.write("chainladder.json", out.dump(2) + "\n");
    auto s = common_settings(o);
    s["level"] = o.level;
    run.finish(s);
}

void cmd_dcl(Run& run, const Options& o) {
    run.input("data", o.data);
    run.input("schema", o.schema);
    auto r = hrm::dcl_rbns(load_portfolio(o), o.horizon);
    std::cout << "DCL RBNS reserve " << r.reserve << '\n';
    run.write("dcl.json", r.to_json().dump(2) + "\n");
    run.finish(common_settings(o));
}

void cmd_crm(Run& run, const Options& o) {
    run.input("data", o.data);
    run.input("schema", o.schema);
    auto r = hrm::crm_rbns(load_portfolio(o), o.horizon);
    std::cout << "CRM RBNS reserve " << r.reserve << '\n';
    run.write("crm.json", r.to_json().dump(2) + "\n");
    run.finish(common_settings(o));
}

void cmd_evaluate(Run& run, const Options& o) {
    if (o.config.empty()) throw hrm::ConfigError("--config is required (evaluation config)");
    run.input("data", o.data);
    run.input("schema", o.schema);
    run.input("config", o.config);
    auto p = load_portfolio(o);
    auto cfg = hrm::EvaluationConfig::from_json(load_json(o.config));
    cfg.threads = o.threads;
    if (o.horizon) cfg.horizon = *o.horizon;
    auto result = hrm::moving_window_eval(p, cfg);
    run.write("evaluation.csv", result.to_csv());
    auto summary = hrm::summary_json(result);
    json out{{"summary", summary}, {"run", result.to_json()}};
    run.write("evaluation.json", out.dump(2) + "\n");
    for (const auto& s : summary) {
        std::cout << s["model"].get<std::string>() << ": mean PE " << s["mean_pe"].get<double>() << ", mean |PE| "
                  << s["mean_abs_pe"].get<double>() << " (" << s["excluded"].get<std::size_t>() << " excluded)\n";
    }
    run.finish({{"threads", o.threads}, {"horizon", cfg.horizon}});
}

void cmd_bridge_test(Run& run, const Options& o) {
    if (o.config.empty()) throw hrm::ConfigError("--config is required (bridge layers)");
    run.input("data", o.data);
    run.input("schema", o.schema);
    run.input("config", o.config);
    auto p = load_portfolio(o);
    auto cfg = load_json(o.config);
    std::vector<hrm::LrtResult> tests;
    json out{{"layers", json::array()}};
    try {
        for (const auto& l : cfg.at("layers")) {
            hrm::BridgeLayer b;
            b.response = l.at("response").get<std::string>();
            b.family = hrm::family_from_string(l.value("family", std::string(b.response == "size" ? "gamma" : "bernoulli")));
            b.filter = l.value("filter", std::string());
            b.extra_covariates = l.at("extra_covariates").get<std::vector<std::string>>();
            auto r = hrm::bridge_test(p, b);
            tests.push_back(r);
            auto j = r.to_json();
            j["response"] = b.response;
            out["layers"].push_back(j);
            std::cout << b.response << ": LR " << r.statistic << " on " << r.dof << " df, p = " << r.p_value << '\n';
        }
    } catch (const json::exception& e) {
        throw hrm::ConfigError(std::string("bridge config: ") + e.what());
    }
    auto joint = hrm::joint_lrt(tests);
    out["joint"] = joint.to_json();
    std::cout << "joint: LR " << joint.statistic << " on " << joint.dof << " df, p = " << joint.p_value << '\n';
    run.write("bridge_test.json", out.dump(2) + "\n");
    run.finish(json::object());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical reserving models for individual claims"};
    app.set_version_flag("--version", hrm::kVersion);
    app.require_subcommand(1);
    Options o;
    std::vector<std::string> args(argv, argv + argc);

    auto add_data = [&](CLI::App* c) {
        c->add_option("--data", o.data, "portfolio CSV")->check(CLI::ExistingFile);
        c->add_option("--schema", o.schema, "schema JSON")->check(CLI::ExistingFile);
    };
    auto add_out = [&](CLI::App* c) { c->add_option("--out", o.out, "output directory"); };
    auto add_sim = [&](CLI::App* c) {
        c->add_option("--model", o.model, "fitted model JSON")->check(CLI::ExistingFile);
        c->add_option("--seed", o.seed, "random seed")->capture_default_str();
        c->add_option("--paths", o.paths, "simulated paths")->capture_default_str();
        c->add_option("--threads", o.threads, "worker threads, 0 = auto")->capture_default_str();
    };
    auto add_horizon = [&](CLI::App* c) {
        c->add_option("--horizon", o.horizon, "future development years")->check(CLI::PositiveNumber);
    };

    auto* gen = app.add_subcommand("generate", "generate a synthetic portfolio");
    gen->add_option("--config", o.config, "generator JSON")->required()->check(CLI::ExistingFile);
    add_out(gen);

    auto* fit = app.add_subcommand("fit", "fit a hierarchical model");
    fit->add_option("--config", o.config, "model spec JSON")->required()->check(CLI::ExistingFile);
    add_data(fit);
    add_out(fit);
    fit->add_option("--threads", o.threads, "worker threads, 0 = auto");

    auto* sim = app.add_subcommand("simulate", "simulate future development paths");
    add_data(sim);
    add_sim(sim);
    add_horizon(sim);
    add_out(sim);

    auto* res = app.add_subcommand("reserve", "RBNS reserve distribution by simulation");
    add_data(res);
    add_sim(res);
    add_horizon(res);
    add_out(res);
    res->add_option("--quantiles", o.quantiles, "quantile levels")->delimiter(',');

    auto* tri = app.add_subcommand("triangle", "aggregate a layer into a runoff triangle");
    add_data(tri);
    tri->add_option("--layer", o.layer, "close, payment or size")->check(CLI::IsMember({"close", "payment", "size"}));
    add_out(tri);

    auto* cl = app.add_subcommand("chainladder", "chain ladder with Mack standard errors");
    cl->add_option("--triangle", o.triangle, "incremental triangle CSV")->check(CLI::ExistingFile);
    add_data(cl);
    cl->add_option("--layer", o.layer, "layer when building from --data")->check(CLI::IsMember({"close", "payment", "size"}));
    cl->add_option("--level", o.level, "interval level")->check(CLI::Range(0.0, 1.0));
    add_horizon(cl);
    add_out(cl);

    auto* dcl = app.add_subcommand("dcl", "double chain ladder RBNS reserve");
    add_data(dcl);
    add_horizon(dcl);
    add_out(dcl);

    auto* crm = app.add_subcommand("crm", "collective reserving model RBNS reserve");
    add_data(crm);
    add_horizon(crm);
    add_out(crm);

    auto* ev = app.add_subcommand("evaluate", "moving-window out-of-time evaluation");
    ev->add_option("--config", o.config, "evaluation JSON")->required()->check(CLI::ExistingFile);
    add_data(ev);
    add_horizon(ev);
    ev->add_option("--threads", o.threads, "worker threads, 0 = auto");
    add_out(ev);

    auto* br = app.add_subcommand("bridge-test", "likelihood ratio test against the multiplicative model");
    br->add_option("--config", o.config, "bridge layers JSON")->required()->check(CLI::ExistingFile);
    add_data(br);
    add_out(br);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    auto* chosen = app.get_subcommands().front();
    const std::string name = chosen->get_name();
    try {
        if (o.threads < 0) throw hrm::ConfigError("--threads must be nonnegative");
        if (name == "chainladder" && o.triangle.empty() && o.data.empty()) {
            throw hrm::ConfigError("chainladder needs --triangle or --data");
        }
        Run run(name, o, args);
        if (name == "generate") cmd_generate(run, o);
        else if (name == "fit") cmd_fit(run, o);
        else if (name == "simulate") cmd_simulate(run, o);
        else if (name == "reserve") cmd_reserve(run, o);
        else if (name == "triangle") cmd_triangle(run, o);
        else if (name == "chainladder") cmd_chainladder(run, o);
        else if (name == "dcl") cmd_dcl(run, o);
        else if (name == "crm") cmd_crm(run, o);
        else if (name == "evaluate") cmd_evaluate(run, o);
        else if (name == "bridge-test") cmd_bridge_test(run, o);
    } catch (const hrm::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const hrm::SchemaError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
