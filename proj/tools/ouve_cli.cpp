#include <cstdlib>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ouve/cli_ops.hpp"
#include "ouve/errors.hpp"
#include "ouve/sampler.hpp"
#include "ouve/score.hpp"
#include "ouve/sde.hpp"

namespace {

constexpr const char* kVersion = "1.0.0";

// Precedence: built-in defaults < config file < command-line flags / env seed.
struct CommonFlags {
    std::string config_path;
    std::vector<std::string> sets;  // repeated --set key=value
    bool seed_given = false;
    std::uint64_t seed = 0;
};

void add_common(CLI::App* app, CommonFlags& flags) {
    app->add_option("--config", flags.config_path, "key = value configuration file");
    app->add_option("--set", flags.sets,
                    "override one configuration key, e.g. --set gamma=2.0 (repeatable)");
    app->add_option("--seed", flags.seed, "root RNG seed (overrides OUVE_SEED)")
        ->each([&flags](const std::string&) { flags.seed_given = true; });
}

ouve::cli::RunConfig resolve_config(const CommonFlags& flags) {
    ouve::cli::RunConfig cfg;
    if (const char* env = std::getenv("OUVE_SEED")) {
        ouve::cli::apply_key_value(cfg, "seed", env);
    }
    if (!flags.config_path.empty()) ouve::cli::apply_config_file(cfg, flags.config_path);
    for (const auto& kv : flags.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw ouve::DataError("--set expects key=value, got '" + kv + "'");
        ouve::cli::apply_key_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (flags.seed_given) {
        cfg.seed = flags.seed;
        cfg.sampler.seed = flags.seed;
    }
    ouve::sde::validate(cfg.sde);
    ouve::spectral::validate(cfg.transform);
    ouve::sampler::validate(cfg.sampler);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ouve — conditional diffusion speech enhancement on synthetic audio"};
    app.require_subcommand(1);
    app.set_version_flag("--version",
                         [] {
                             return std::string("ouve ") + kVersion + " (weights format v" +
                                    std::to_string(ouve::score::kWeightsFormatVersion) +
                                    ")\ndefaults:\n" + ouve::cli::config_defaults_text();
                         });

    // simulate
    auto* sim = app.add_subcommand("simulate", "scalar-process curves and sample paths");
    CommonFlags sim_flags;
    ouve::cli::SimulateOptions sim_opt;
    add_common(sim, sim_flags);
    sim->add_option("--out", sim_opt.out_dir, "output directory")->required();
    sim->add_option("--gammas", sim_opt.gammas, "stiffness values to sweep");
    sim->add_option("--paths", sim_opt.n_paths, "sample paths per gamma");
    sim->add_option("--grid", sim_opt.n_grid, "points on the t grid");

    // mix
    auto* mix = app.add_subcommand("mix", "realize a manifest into wav pairs");
    CommonFlags mix_flags;
    std::string mix_manifest, mix_out;
    add_common(mix, mix_flags);
    mix->add_option("--manifest", mix_manifest, "dataset manifest csv")->required();
    mix->add_option("--out", mix_out, "output directory")->required();

    // train
    auto* train = app.add_subcommand("train", "train the tiny score network");
    CommonFlags train_flags;
    std::string train_manifest, train_weights;
    int train_steps = 500;
    add_common(train, train_flags);
    train->add_option("--manifest", train_manifest, "dataset manifest csv")->required();
    train->add_option("--steps", train_steps, "optimizer steps");
    train->add_option("--weights", train_weights, "output weights file")->required();

    // enhance
    auto* enh = app.add_subcommand("enhance", "run reverse diffusion on a wav file");
    CommonFlags enh_flags;
    std::string enh_in, enh_out, enh_weights, enh_oracle;
    add_common(enh, enh_flags);
    enh->add_option("--in", enh_in, "input (corrupted) wav")->required();
    enh->add_option("--out", enh_out, "output wav")->required();
    enh->add_option("--weights", enh_weights, "trained weights file");
    enh->add_option("--oracle-x0", enh_oracle,
                    "clean reference wav; uses the analytic oracle score instead of weights");

    // eval
    auto* ev = app.add_subcommand("eval", "score estimates against references");
    CommonFlags ev_flags;
    std::string ev_est, ev_ref, ev_noise, ev_out;
    add_common(ev, ev_flags);
    ev->add_option("--est", ev_est, "directory of estimate wavs")->required();
    ev->add_option("--ref", ev_ref, "directory of reference wavs")->required();
    ev->add_option("--noise", ev_noise, "directory of noise-reference wavs (enables SIR/SAR)");
    ev->add_option("--out", ev_out, "output csv")->required();

    // bench
    auto* bench = app.add_subcommand("bench", "sweep sampler settings over a manifest");
    CommonFlags bench_flags;
    std::string bench_manifest, bench_out, bench_weights;
    add_common(bench, bench_flags);
    bench->add_option("--manifest", bench_manifest, "dataset manifest csv")->required();
    bench->add_option("--out", bench_out, "output csv")->required();
    bench->add_option("--weights", bench_weights,
                      "trained weights file (default: analytic oracle per file)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) {
            ouve::cli::cmd_simulate(sim_opt, resolve_config(sim_flags));
        } else if (mix->parsed()) {
            ouve::cli::cmd_mix(mix_manifest, mix_out, resolve_config(mix_flags));
        } else if (train->parsed()) {
            ouve::cli::cmd_train(train_manifest, train_steps, train_weights,
                                 resolve_config(train_flags));
        } else if (enh->parsed()) {
            ouve::cli::cmd_enhance(enh_in, enh_weights, enh_oracle, enh_out,
                                   resolve_config(enh_flags));
        } else if (ev->parsed()) {
            ouve::cli::cmd_eval(ev_est, ev_ref, ev_noise, ev_out);
        } else if (bench->parsed()) {
            ouve::cli::cmd_bench(bench_manifest, bench_out, resolve_config(bench_flags),
                                 bench_weights);
        }
    } catch (const ouve::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const ouve::DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
