#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "boo/harness.hpp"
#include "boo/theory_checks.hpp"

namespace {

nlohmann::json load_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw boo::contract_error("cannot open config file: " + path);
    nlohmann::json j;
    is >> j;
    return j;
}

struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<long> reps;
    std::optional<std::string> out;
    std::optional<std::string> format;
    std::optional<int> threads;
};

void apply_overrides(boo::harness::ExperimentConfig& cfg, const Overrides& ov) {
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.reps) cfg.repetitions = *ov.reps;
    if (ov.out) cfg.output_path = *ov.out;
    if (ov.format) cfg.output_format = *ov.format;
    if (ov.threads) cfg.threads = *ov.threads;
}

void emit_or_print(const boo::harness::ExperimentResult& res, const std::string& format,
                   const std::string& path) {
    if (path.empty()) {
        if (format == "csv")
            boo::harness::write_csv(std::cout, res);
        else
            std::cout << boo::harness::result_to_json(res).dump(2) << "\n";
        return;
    }
    boo::harness::emit(res, format, path);
    std::cerr << "wrote " << path << "\n";
}

std::string sweep_point_path(const std::string& base, std::size_t index) {
    auto dot = base.find_last_of('.');
    if (dot == std::string::npos || base.find('/', dot) != std::string::npos)
        return base + ".point" + std::to_string(index);
    return base.substr(0, dot) + ".point" + std::to_string(index) + base.substr(dot);
}

int run_checks(std::uint64_t seed, const std::string& out_path) {
    using boo::glm::Link;
    nlohmann::json records = nlohmann::json::array();
    bool all_ok = true;

    for (Link link : {Link::Logistic, Link::Poisson}) {
        for (long p : {1L, 3L, 10L}) {
            boo::datagen::DesignSpec design;
            design.p = p;
            design.n = 600;
            design.model = link;
            design.covariate_style = link == Link::Poisson
                                         ? boo::datagen::CovariateStyle::NormalizedGaussian
                                         : boo::datagen::CovariateStyle::GaussianIdentity;
            design.seed = boo::derive_seed(seed, static_cast<std::uint64_t>(p) * 7
                                                     + (link == Link::Poisson ? 1 : 0));
            boo::datagen::TruthSpec truth;
            truth.theta_star = boo::datagen::make_theta_star(p);
            auto stream = boo::datagen::sample_stream(design, truth);
            long t0 = boo::posterior::default_t0(p, 5.0, 1.0);

            auto rec = boo::checks::check_recursion_identity(link, stream, t0,
                                                             truth.theta_star);
            auto rec_json = boo::checks::to_json(rec);
            rec_json["model"] = link == Link::Poisson ? "poisson" : "logistic";
            rec_json["p"] = p;
            all_ok = all_ok && rec_json.at("holds").get<bool>();
            records.push_back(rec_json);

            auto ell = boo::checks::check_elliptic_potential(link, stream, t0);
            auto ell_json = boo::checks::to_json(ell);
            ell_json["model"] = rec_json["model"];
            ell_json["p"] = p;
            all_ok = all_ok && ell.holds;
            records.push_back(ell_json);
        }
    }

    {
        // Dyadic bound on a synthetic tight sequence: a_t spends the full
        // D1 s^{-1/2} budget, b pushes to the H2 envelope at a few points.
        long tau0 = 10, horizon = 2000, p = 2;
        double x = 1.0;
        boo::checks::DyadicConstants c{1.0, 0.5, 0.5, 0.5};
        std::vector<double> xs{c.d0 * (static_cast<double>(p) + x)};
        std::vector<double> as, bs;
        for (long t = tau0; t < horizon; ++t) {
            double td = static_cast<double>(t);
            as.push_back(c.d1 * (1.0 / std::sqrt(td) - 1.0 / std::sqrt(td + 1.0)));
            bs.push_back(c.d2 * static_cast<double>(p) / (td + 1.0)
                         + c.d3 / (td + 1.0)); // integrates to ~ (D2 p + D3) log t
        }
        for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(horizon - tau0) + 1; ++i) {
            double prev = xs.back();
            xs.push_back(prev + as[i] * prev * std::sqrt(prev) + bs[i]);
        }
        auto rep = boo::checks::check_dyadic_bound(xs, as, bs, tau0, p, x, c);
        auto j = boo::checks::to_json(rep);
        j["scenario"] = "synthetic_tight";
        bool ok = rep.premise_ok && rep.h0_ok && rep.h1_ok && rep.h2_ok && rep.conclusion_ok;
        all_ok = all_ok && ok;
        records.push_back(j);
    }

    {
        boo::datagen::DesignSpec design;
        design.p = 5;
        design.n = 400;
        design.model = Link::Logistic;
        design.covariate_style = boo::datagen::CovariateStyle::NormalizedGaussian;
        design.seed = boo::derive_seed(seed, 99);
        boo::datagen::TruthSpec truth;
        truth.theta_star = boo::datagen::make_theta_star(5);
        auto stream = boo::datagen::sample_stream(design, truth);
        std::vector<boo::Vector> xs;
        xs.reserve(stream.size());
        for (const auto& o : stream) xs.push_back(o.x);
        auto rep = boo::checks::check_logistic_regularity(xs, truth.theta_star, 1.0,
                                                          boo::derive_seed(seed, 100));
        auto j = boo::checks::to_json(rep);
        bool ok = rep.sandwich_ok && rep.hessian_opnorm_max <= rep.hessian_opnorm_cap + 1e-12
                  && rep.lipschitz_ratio_max <= rep.lipschitz_cap + 1e-12;
        j["holds"] = ok;
        all_ok = all_ok && ok;
        records.push_back(j);
    }

    nlohmann::json out{{"all_passed", all_ok}, {"records", records}};
    if (out_path.empty()) {
        std::cout << out.dump(2) << "\n";
    } else {
        std::ofstream os(out_path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open " + out_path + " for writing");
        os << out.dump(2) << "\n";
        std::cerr << "wrote " << out_path << "\n";
    }
    return all_ok ? 0 : 2;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming GLM estimation benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_path, format = "csv";
    std::uint64_t seed = 0;
    long reps = 0;
    int threads = 0;
    bool seed_set = false, reps_set = false, out_set = false, format_set = false,
         threads_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "experiment seed")->each([&](const std::string&) {
            seed_set = true;
        });
        sub->add_option("--reps", reps, "repetitions")->each([&](const std::string&) {
            reps_set = true;
        });
        sub->add_option("--out", out_path, "output path")->each([&](const std::string&) {
            out_set = true;
        });
        sub->add_option("--format", format, "csv or json")->each([&](const std::string&) {
            format_set = true;
        });
        sub->add_option("--threads", threads, "worker threads (0 = auto)")
            ->each([&](const std::string&) { threads_set = true; });
    };

    auto* sim = app.add_subcommand("simulate", "generate one stream and write it as CSV");
    std::string sim_model = "logistic", sim_design = "identity";
    long sim_p = 10, sim_n = 1000;
    sim->add_option("--model", sim_model, "logistic or poisson");
    sim->add_option("--p", sim_p, "dimension");
    sim->add_option("--n", sim_n, "stream length");
    sim->add_option("--design", sim_design,
                    "identity|normalized|correlated|normalized_correlated");
    add_common(sim);

    auto* run = app.add_subcommand("run", "run an experiment from a config");
    add_common(run);

    auto* sweep = app.add_subcommand("sweep", "sensitivity sweep from a config");
    add_common(sweep);

    auto* check = app.add_subcommand("check", "run the numerical theory-check suite");
    add_common(check);

    auto* t0cmd = app.add_subcommand("t0", "print the default warm-start length");
    long t0_p = 1;
    double t0_x = 5.0, t0_m = 1.0;
    t0cmd->add_option("--p", t0_p, "dimension")->required();
    t0cmd->add_option("--x", t0_x, "confidence parameter x");
    t0cmd->add_option("--M", t0_m, "warm-start multiplier M");

    try {
        app.parse(argc, argv);

        Overrides ov;
        if (seed_set) ov.seed = seed;
        if (reps_set) ov.reps = reps;
        if (out_set) ov.out = out_path;
        if (format_set) ov.format = format;
        if (threads_set) ov.threads = threads;

        if (t0cmd->parsed()) {
            std::cout << boo::posterior::default_t0(t0_p, t0_x, t0_m) << "\n";
            return 0;
        }

        if (sim->parsed()) {
            boo::harness::ExperimentConfig cfg;
            if (!config_path.empty()) cfg = boo::harness::config_from_json(load_json_file(config_path));
            if (sim->count("--model")) {
                if (sim_model == "logistic") cfg.design.model = boo::glm::Link::Logistic;
                else if (sim_model == "poisson") cfg.design.model = boo::glm::Link::Poisson;
                else throw boo::contract_error("model must be logistic or poisson");
            }
            if (sim->count("--p")) cfg.design.p = sim_p;
            if (sim->count("--n")) cfg.design.n = sim_n;
            if (sim->count("--design")) cfg.design_token = sim_design;
            apply_overrides(cfg, ov);
            boo::harness::resolve_config(cfg);
            auto design = cfg.design;
            design.seed = boo::derive_seed(cfg.seed, 0);
            auto stream = boo::datagen::sample_stream(design, cfg.truth);
            if (cfg.output_path.empty()) {
                boo::datagen::write_stream_csv(std::cout, stream);
            } else {
                std::ofstream os(cfg.output_path, std::ios::binary);
                if (!os)
                    throw std::runtime_error("cannot open " + cfg.output_path + " for writing");
                boo::datagen::write_stream_csv(os, stream);
                std::cerr << "wrote " << cfg.output_path << "\n";
            }
            return 0;
        }

        if (run->parsed()) {
            if (config_path.empty()) throw boo::contract_error("run: --config is required");
            auto cfg = boo::harness::config_from_json(load_json_file(config_path));
            apply_overrides(cfg, ov);
            auto res = boo::harness::run_experiment(cfg);
            emit_or_print(res, cfg.output_format, cfg.output_path);
            return 0;
        }

        if (sweep->parsed()) {
            if (config_path.empty()) throw boo::contract_error("sweep: --config is required");
            auto json = load_json_file(config_path);
            auto cfg = boo::harness::config_from_json(json);
            apply_overrides(cfg, ov);
            auto spec = boo::harness::sweep_from_json(json);
            auto results = boo::harness::sensitivity_sweep(cfg, spec.kind, spec.values);
            for (std::size_t i = 0; i < results.size(); ++i) {
                if (cfg.output_path.empty()) {
                    std::cout << "# sweep point " << i << " (value "
                              << spec.values[i] << ")\n";
                    emit_or_print(results[i], cfg.output_format, "");
                } else {
                    boo::harness::emit(results[i], cfg.output_format,
                                       sweep_point_path(cfg.output_path, i));
                }
            }
            if (!cfg.output_path.empty())
                std::cerr << "wrote " << results.size() << " sweep point files\n";
            return 0;
        }

        if (check->parsed()) return run_checks(seed_set ? seed : 1, out_set ? out_path : "");

        throw boo::contract_error("no subcommand selected");
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    } catch (const boo::numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const boo::contract_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
