#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ouve/sampler.hpp"
#include "ouve/score.hpp"
#include "ouve/sde.hpp"
#include "ouve/spectral.hpp"

namespace ouve::cli {

// Merged run configuration: defaults follow the reference hyperparameters,
// overridden by a key=value config file, overridden by command-line flags.
struct RunConfig {
    sde::SdeParams sde;
    spectral::TransformParams transform;
    sampler::SamplerConfig sampler;
    std::uint64_t seed = 0;
    // training
    double lr = 3e-3;
    int batch_size = 2;
    int crop_frames = 32;
};

// `key = value` lines, '#' comments. Unknown keys are an error.
void apply_config_file(RunConfig& cfg, const std::string& path);
void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value);

std::string config_defaults_text();

struct SimulateOptions {
    std::vector<double> gammas{0.5, 1.5, 5.0};
    int n_paths = 5;
    int n_grid = 101;
    std::string out_dir;
};

// Scalar-process illustration: per gamma, mean/std envelopes with the
// SNR-of-mean curve, forward sample paths, and reverse paths driven by the
// analytic oracle.
void cmd_simulate(const SimulateOptions& opt, const RunConfig& cfg);

void cmd_mix(const std::string& manifest_path, const std::string& out_dir, const RunConfig& cfg);

struct TrainResult {
    double initial_smoothed_loss = 0.0;
    double final_smoothed_loss = 0.0;
    std::size_t parameter_count = 0;
};

// Core training loop over precomputed compressed spectrograms with random
// frame crops per step.
TrainResult train_loop(score::TinyScoreNet& net, const std::vector<score::TrainItem>& dataset,
                       int steps, const RunConfig& cfg, Rng& rng, bool verbose);

TrainResult cmd_train(const std::string& manifest_path, int steps, const std::string& out_weights,
                      const RunConfig& cfg);

struct EnhanceResult {
    sampler::SolveStats stats;
};

// oracle_x0_path empty: load weights; otherwise run the analytic oracle
// against the given clean reference (validation mode).
EnhanceResult cmd_enhance(const std::string& in_wav, const std::string& weights_path,
                          const std::string& oracle_x0_path, const std::string& out_wav,
                          const RunConfig& cfg);

void cmd_eval(const std::string& est_dir, const std::string& ref_dir, const std::string& noise_dir,
              const std::string& out_csv);

// Sweeps the PC corrector counts {0,1,2} and the two reference ODE tolerance
// pairs over a manifest-defined dataset; one CSV row per (config, file).
void cmd_bench(const std::string& manifest_path, const std::string& out_csv, const RunConfig& cfg,
               const std::string& weights_path);

}  // namespace ouve::cli
