#include "ouve/cli_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ouve/audio.hpp"
#include "ouve/errors.hpp"
#include "ouve/metrics.hpp"

namespace fs = std::filesystem;

namespace ouve::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DataError("config: value for '" + key + "' is not a number: '" + value + "'");
    }
}

long to_long(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw DataError("config: value for '" + key + "' is not an integer: '" + value + "'");
    }
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream f(p);
    if (!f) throw DataError("cannot open output file: " + p.string());
    f << std::setprecision(12);
    return f;
}

ComplexGrid crop_cols(const ComplexGrid& g, std::size_t col0, std::size_t ncols) {
    ComplexGrid out(g.rows, ncols);
    out.compressed = g.compressed;
    std::copy(g.data.begin() + static_cast<std::ptrdiff_t>(col0 * g.rows),
              g.data.begin() + static_cast<std::ptrdiff_t>((col0 + ncols) * g.rows),
              out.data.begin());
    return out;
}

score::TrainItem make_item(const audio::DatasetPair& pair, const spectral::TransformParams& tp) {
    return score::TrainItem{spectral::compress(spectral::stft(pair.clean), tp),
                            spectral::compress(spectral::stft(pair.corrupted), tp)};
}

std::string gamma_tag(double g) {
    std::ostringstream os;
    os << g;
    std::string s = os.str();
    std::replace(s.begin(), s.end(), '.', 'p');
    return s;
}

}  // namespace

void apply_key_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "gamma") cfg.sde.gamma = to_double(key, value);
    else if (key == "sigma_min") cfg.sde.sigma_min = to_double(key, value);
    else if (key == "sigma_max") cfg.sde.sigma_max = to_double(key, value);
    else if (key == "t_eps") cfg.sde.t_eps = to_double(key, value);
    else if (key == "t_horizon") cfg.sde.t_horizon = to_double(key, value);
    else if (key == "alpha") cfg.transform.alpha = to_double(key, value);
    else if (key == "beta") cfg.transform.beta = to_double(key, value);
    else if (key == "sampler") {
        if (value == "pc") cfg.sampler.kind = sampler::SamplerKind::PC;
        else if (value == "ode") cfg.sampler.kind = sampler::SamplerKind::ODE;
        else throw DataError("config: sampler must be 'pc' or 'ode', got '" + value + "'");
    } else if (key == "n_steps") cfg.sampler.n_steps = static_cast<int>(to_long(key, value));
    else if (key == "corrector_steps")
        cfg.sampler.corrector_steps = static_cast<int>(to_long(key, value));
    else if (key == "snr_r") cfg.sampler.snr_r = to_double(key, value);
    else if (key == "atol") cfg.sampler.atol = to_double(key, value);
    else if (key == "rtol") cfg.sampler.rtol = to_double(key, value);
    else if (key == "ode_half_factor") {
        if (value == "true" || value == "1") cfg.sampler.ode_half_factor = true;
        else if (value == "false" || value == "0") cfg.sampler.ode_half_factor = false;
        else throw DataError("config: ode_half_factor must be true/false, got '" + value + "'");
    } else if (key == "noise_convention") {
        if (value == "split_half") cfg.sampler.noise_convention = NoiseConvention::SplitHalf;
        else if (value == "per_part_unit")
            cfg.sampler.noise_convention = NoiseConvention::PerPartUnit;
        else
            throw DataError("config: noise_convention must be split_half or per_part_unit, got '" +
                            value + "'");
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(to_long(key, value));
        cfg.sampler.seed = cfg.seed;
    } else if (key == "lr") cfg.lr = to_double(key, value);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(to_long(key, value));
    else if (key == "crop_frames") cfg.crop_frames = static_cast<int>(to_long(key, value));
    else throw DataError("config: unknown key '" + key + "'");
}

void apply_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError("config: line " + std::to_string(lineno) +
                            " is not of the form key = value");
        apply_key_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

std::string config_defaults_text() {
    RunConfig c;
    std::ostringstream os;
    os << "gamma = " << c.sde.gamma << "\n"
       << "sigma_min = " << c.sde.sigma_min << "\n"
       << "sigma_max = " << c.sde.sigma_max << "\n"
       << "t_eps = " << c.sde.t_eps << "\n"
       << "t_horizon = " << c.sde.t_horizon << "\n"
       << "alpha = " << c.transform.alpha << "\n"
       << "beta = " << c.transform.beta << "\n"
       << "sampler = pc\n"
       << "n_steps = " << c.sampler.n_steps << "\n"
       << "corrector_steps = " << c.sampler.corrector_steps << "\n"
       << "snr_r = " << c.sampler.snr_r << "\n"
       << "atol = " << c.sampler.atol << "\n"
       << "rtol = " << c.sampler.rtol << "\n"
       << "ode_half_factor = true\n"
       << "noise_convention = split_half\n"
       << "seed = " << c.seed << "\n"
       << "lr = " << c.lr << "\n"
       << "batch_size = " << c.batch_size << "\n"
       << "crop_frames = " << c.crop_frames << "\n";
    return os.str();
}

void cmd_simulate(const SimulateOptions& opt, const RunConfig& cfg) {
    if (opt.out_dir.empty()) throw DataError("simulate: output directory is required");
    if (opt.n_grid < 2) throw DataError("simulate: grid must have at least 2 points");
    fs::create_directories(opt.out_dir);

    // One fixed synthetic mixture drives every SNR curve so the gamma sweep
    // is directly comparable.
    const auto clean = audio::synth_clean(audio::CleanKind::Harmonic, 1.0,
                                          substream_seed(cfg.seed, "simulate-clean"));
    const auto noise = audio::synth_noise(audio::NoiseKind::White, 1.0,
                                          substream_seed(cfg.seed, "simulate-noise"));
    const auto mix = audio::mix_at_snr(clean, noise, 5.0);

    std::vector<double> t_grid(static_cast<std::size_t>(opt.n_grid));
    for (int i = 0; i < opt.n_grid; ++i)
        t_grid[static_cast<std::size_t>(i)] =
            cfg.sde.t_horizon * static_cast<double>(i) / (opt.n_grid - 1);

    for (double g : opt.gammas) {
        sde::SdeParams p = cfg.sde;
        p.gamma = g;
        sde::validate(p);
        const auto curve = sde::snr_of_mean(mix.clean, mix.mixture, t_grid, p, cfg.transform);

        // Scalar illustration of the same process: x0 = 1, y = 0.
        auto f = open_out(fs::path(opt.out_dir) / ("curve_gamma_" + gamma_tag(g) + ".csv"));
        f << "t,mean_real,mean_imag,std,snr_db,gamma\n";
        for (std::size_t i = 0; i < t_grid.size(); ++i) {
            const double t = t_grid[i];
            f << t << ',' << std::exp(-g * t) << ",0," << sde::std_dev(t, p) << ','
              << curve[i].snr_db << ',' << g << '\n';
        }

        // Forward sample paths of the scalar process (Euler-Maruyama).
        {
            Rng rng = substream(cfg.seed, "simulate-forward");
            const int n_sub = 200;
            const double dt = cfg.sde.t_horizon / n_sub;
            ComplexGrid x0g(1, 1), yg(1, 1);
            x0g.data[0] = {1.0, 0.0};
            std::vector<ComplexGrid> xs(static_cast<std::size_t>(opt.n_paths), x0g);
            auto pf = open_out(fs::path(opt.out_dir) / ("forward_gamma_" + gamma_tag(g) + ".csv"));
            pf << "t";
            for (int k = 0; k < opt.n_paths; ++k) pf << ",path_" << k;
            pf << '\n';
            for (int s = 0; s <= n_sub; ++s) {
                const double t = s * dt;
                pf << t;
                for (auto& x : xs) pf << ',' << x.data[0].real();
                pf << '\n';
                if (s == n_sub) break;
                for (auto& x : xs) {
                    const auto dr = sde::drift(x, yg, p);
                    const double gt = sde::diffusion_coeff(t, p);
                    const auto z = sde::sample_complex_gaussian(1, 1, 1.0, rng,
                                                               cfg.sampler.noise_convention);
                    x.data[0] += dt * dr.data[0] + gt * std::sqrt(dt) * z.data[0];
                }
            }
        }

        // Reverse paths under the analytic oracle (predictor only): each one
        // should land near x0 = 1 at t_eps.
        {
            ComplexGrid x0g(1, 1), yg(1, 1);
            x0g.data[0] = {1.0, 0.0};
            const score::AnalyticOracle oracle(x0g, p);
            const int n_sub = 200;
            const double dt = (p.t_horizon - p.t_eps) / n_sub;
            auto pr = open_out(fs::path(opt.out_dir) / ("reverse_gamma_" + gamma_tag(g) + ".csv"));
            pr << "t";
            for (int k = 0; k < opt.n_paths; ++k) pr << ",path_" << k;
            pr << '\n';
            std::vector<ComplexGrid> xs;
            Rng rng = substream(cfg.seed, "simulate-reverse");
            for (int k = 0; k < opt.n_paths; ++k)
                xs.push_back(sde::sample_prior(yg, p, rng, cfg.sampler.noise_convention));
            for (int s = 0; s <= n_sub; ++s) {
                const double t = p.t_horizon - s * dt;
                pr << t;
                for (auto& x : xs) pr << ',' << x.data[0].real();
                pr << '\n';
                if (s == n_sub) break;
                for (auto& x : xs)
                    x = sampler::em_predictor_step(x, yg, t, dt, oracle, p, rng,
                                                   cfg.sampler.noise_convention);
            }
        }
    }
    std::cout << "simulate: wrote " << 3 * opt.gammas.size() << " CSV files to " << opt.out_dir
              << "\n";
}

void cmd_mix(const std::string& manifest_path, const std::string& out_dir, const RunConfig&) {
    const auto entries = audio::read_manifest(manifest_path);
    fs::create_directories(out_dir);
    auto idx = open_out(fs::path(out_dir) / "pairs.csv");
    idx << "index,seed,clean,mixture,noise\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto pair = audio::realize(entries[i]);
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu", i);
        const std::string cn = std::string("clean_") + name + ".wav";
        const std::string mn = std::string("mix_") + name + ".wav";
        const std::string nn = std::string("noise_") + name + ".wav";
        audio::write_wav((fs::path(out_dir) / cn).string(), pair.clean);
        audio::write_wav((fs::path(out_dir) / mn).string(), pair.corrupted);
        audio::write_wav((fs::path(out_dir) / nn).string(), pair.interference);
        idx << i << ',' << entries[i].seed << ',' << cn << ',' << mn << ',' << nn << '\n';
    }
    std::cout << "mix: wrote " << entries.size() << " pairs to " << out_dir << "\n";
}

TrainResult train_loop(score::TinyScoreNet& net, const std::vector<score::TrainItem>& dataset,
                       int steps, const RunConfig& cfg, Rng& rng, bool verbose) {
    if (dataset.empty()) throw DataError("train: dataset is empty");
    if (steps < 1) throw DataError("train: steps must be positive");
    const auto crop = static_cast<std::size_t>(std::max(1, cfg.crop_frames));
    std::vector<double> losses;
    losses.reserve(static_cast<std::size_t>(steps));
    for (int s = 0; s < steps; ++s) {
        std::vector<score::TrainItem> batch;
        for (int b = 0; b < std::max(1, cfg.batch_size); ++b) {
            const auto& item =
                dataset[static_cast<std::size_t>(rng.next_u64() % dataset.size())];
            const std::size_t cols = item.x0.cols;
            if (cols <= crop) {
                batch.push_back(item);
            } else {
                const auto col0 = static_cast<std::size_t>(rng.next_u64() % (cols - crop + 1));
                batch.push_back({crop_cols(item.x0, col0, crop), crop_cols(item.y, col0, crop)});
            }
        }
        const double loss = score::training_step(net, batch, cfg.sde, rng, cfg.lr,
                                                 cfg.sampler.noise_convention);
        losses.push_back(loss);
        if (verbose && (s % 50 == 0 || s == steps - 1))
            std::cout << "step " << s << "  loss " << loss << "\n";
    }
    const auto window = std::max<std::size_t>(1, std::min<std::size_t>(25, losses.size() / 2));
    const auto mean_of = [&](std::size_t b, std::size_t e) {
        double acc = 0.0;
        for (std::size_t i = b; i < e; ++i) acc += losses[i];
        return acc / static_cast<double>(e - b);
    };
    return {mean_of(0, window), mean_of(losses.size() - window, losses.size()),
            net.parameter_count()};
}

TrainResult cmd_train(const std::string& manifest_path, int steps, const std::string& out_weights,
                      const RunConfig& cfg) {
    const auto entries = audio::read_manifest(manifest_path);
    std::vector<score::TrainItem> dataset;
    dataset.reserve(entries.size());
    for (const auto& e : entries) dataset.push_back(make_item(audio::realize(e), cfg.transform));

    score::TinyScoreNet net(cfg.sde, substream_seed(cfg.seed, "init"));
    Rng rng = substream(cfg.seed, "train");
    const auto result = train_loop(net, dataset, steps, cfg, rng, true);
    if (!out_weights.empty()) score::save_weights(net, out_weights);
    std::cout << "train: smoothed loss " << result.initial_smoothed_loss << " -> "
              << result.final_smoothed_loss << " over " << steps << " steps ("
              << result.parameter_count << " parameters)\n";
    return result;
}

EnhanceResult cmd_enhance(const std::string& in_wav, const std::string& weights_path,
                          const std::string& oracle_x0_path, const std::string& out_wav,
                          const RunConfig& cfg) {
    const auto y = audio::read_wav(in_wav);
    std::unique_ptr<score::ScoreModel> model;
    if (!oracle_x0_path.empty()) {
        const auto x0 = audio::read_wav(oracle_x0_path);
        model = std::make_unique<score::AnalyticOracle>(
            spectral::compress(spectral::stft(x0), cfg.transform), cfg.sde);
        std::cout << "enhance: using oracle score (clean reference supplied); "
                     "results are a solver validation, not fair enhancement\n";
    } else {
        if (weights_path.empty())
            throw DataError("enhance: either --weights or --oracle-x0 is required");
        model = std::make_unique<score::TinyScoreNet>(score::load_weights(weights_path, cfg.sde));
    }
    auto [est, stats] = sampler::enhance(y, *model, cfg.sampler, cfg.sde, cfg.transform);
    audio::write_wav(out_wav, est);
    std::cout << "enhance: " << in_wav << " -> " << out_wav << "  nfe=" << stats.nfe
              << "  rtf=" << stats.rtf << "\n";
    return {stats};
}

void cmd_eval(const std::string& est_dir, const std::string& ref_dir, const std::string& noise_dir,
              const std::string& out_csv) {
    std::vector<fs::path> files;
    if (!fs::is_directory(est_dir)) throw DataError("eval: not a directory: " + est_dir);
    for (const auto& e : fs::directory_iterator(est_dir))
        if (e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DataError("eval: no .wav files in " + est_dir);

    auto csv = open_out(out_csv);
    csv << "file,si_sdr,snr,si_sir,si_sar\n";
    for (const auto& f : files) {
        const auto est = audio::read_wav(f.string());
        const fs::path ref_path = fs::path(ref_dir) / f.filename();
        if (!fs::exists(ref_path))
            throw DataError("eval: missing reference for " + f.filename().string());
        const auto ref = audio::read_wav(ref_path.string());
        std::optional<Waveform> noise;
        if (!noise_dir.empty()) {
            const fs::path np = fs::path(noise_dir) / f.filename();
            if (!fs::exists(np))
                throw DataError("eval: missing noise reference for " + f.filename().string());
            noise = audio::read_wav(np.string());
        }
        const auto rep = metrics::report(est, ref, noise ? &*noise : nullptr);
        csv << f.filename().string() << ',' << rep.si_sdr << ',' << rep.snr << ',';
        if (rep.si_sir) csv << *rep.si_sir;
        csv << ',';
        if (rep.si_sar) csv << *rep.si_sar;
        csv << '\n';
    }
    std::cout << "eval: wrote " << files.size() << " rows to " << out_csv << "\n";
}

void cmd_bench(const std::string& manifest_path, const std::string& out_csv, const RunConfig& cfg,
               const std::string& weights_path) {
    const auto entries = audio::read_manifest(manifest_path);
    if (entries.empty()) throw DataError("bench: manifest is empty");

    struct BenchConfig {
        std::string sampler;
        std::string settings;
        sampler::SamplerConfig cfg;
    };
    std::vector<BenchConfig> configs;
    for (int c : {0, 1, 2}) {
        sampler::SamplerConfig sc = cfg.sampler;
        sc.kind = sampler::SamplerKind::PC;
        sc.corrector_steps = c;
        configs.push_back({"pc", "N=" + std::to_string(sc.n_steps) + ";C=" + std::to_string(c), sc});
    }
    for (auto [atol, rtol] : {std::pair{1e-1, 1e-1}, std::pair{1e-6, 1e-3}}) {
        sampler::SamplerConfig sc = cfg.sampler;
        sc.kind = sampler::SamplerKind::ODE;
        sc.atol = atol;
        sc.rtol = rtol;
        std::ostringstream tag;
        tag << "atol=" << atol << ";rtol=" << rtol;
        configs.push_back({"ode", tag.str(), sc});
    }

    auto csv = open_out(out_csv);
    csv << "sampler,settings,nfe,rtf,si_sdr,si_sir,si_sar\n";
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto pair = audio::realize(entries[i]);
        std::unique_ptr<score::ScoreModel> model;
        if (weights_path.empty())
            model = std::make_unique<score::AnalyticOracle>(
                spectral::compress(spectral::stft(pair.clean), cfg.transform), cfg.sde);
        else
            model =
                std::make_unique<score::TinyScoreNet>(score::load_weights(weights_path, cfg.sde));
        for (const auto& bc : configs) {
            auto [est, stats] = sampler::enhance(pair.corrupted, *model, bc.cfg, cfg.sde,
                                                 cfg.transform);
            const auto rep = metrics::report(est, pair.clean, &pair.interference);
            csv << bc.sampler << ',' << bc.settings << ',' << stats.nfe << ',' << stats.rtf << ','
                << rep.si_sdr << ',' << *rep.si_sir << ',' << *rep.si_sar << '\n';
        }
    }
    std::cout << "bench: wrote " << entries.size() * configs.size() << " rows to " << out_csv
              << "\n";
}

}  // namespace ouve::cli
