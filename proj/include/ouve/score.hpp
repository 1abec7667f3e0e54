#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ouve/grid.hpp"
#include "ouve/rng.hpp"
#include "ouve/sde.hpp"

namespace ouve::score {

// s_theta(x_t, y, t): maps the process state, the corrupted observation and
// the process time to a score estimate of the same shape. Evaluation count is
// tracked so solvers can report NFE.
class ScoreModel {
  public:
    ScoreModel() = default;
    ScoreModel(const ScoreModel& o) : nfe_(o.nfe()) {}
    ScoreModel& operator=(const ScoreModel& o) {
        nfe_.store(o.nfe(), std::memory_order_relaxed);
        return *this;
    }
    virtual ~ScoreModel() = default;

    ComplexGrid evaluate(const ComplexGrid& x_t, const ComplexGrid& y, double t) const {
        nfe_.fetch_add(1, std::memory_order_relaxed);
        return eval_impl(x_t, y, t);
    }

    long nfe() const { return nfe_.load(std::memory_order_relaxed); }

  private:
    virtual ComplexGrid eval_impl(const ComplexGrid& x_t, const ComplexGrid& y, double t) const = 0;

    mutable std::atomic<long> nfe_{0};
};

// Ground-truth conditional score. Sees the hidden clean target, so it is only
// valid for validating solvers, never for fair enhancement.
class AnalyticOracle final : public ScoreModel {
  public:
    AnalyticOracle(ComplexGrid x0_ref, sde::SdeParams p);

  private:
    ComplexGrid eval_impl(const ComplexGrid& x_t, const ComplexGrid& y, double t) const override;

    ComplexGrid x0_ref_;
    sde::SdeParams sde_;
};

// Returns an all-zero score; used as an NFE-accounting stub.
class ZeroScore final : public ScoreModel {
  private:
    ComplexGrid eval_impl(const ComplexGrid& x_t, const ComplexGrid&, double) const override {
        return ComplexGrid(x_t.rows, x_t.cols);
    }
};

inline constexpr std::uint32_t kWeightsFormatVersion = 1;

// Small convolutional score net: a shared MLP applied at every T-F bin over a
// 5x5 patch of (x_t, y) real/imag values plus a sinusoidal embedding of t.
// The raw output is divided by sigma(t)^2, so the network's natural target is
// the mean shift mu - x_t — nearly linear in the patch inputs — mirroring the
// noise conditioning used by VE-schedule score networks.
class TinyScoreNet final : public ScoreModel {
  public:
    static constexpr int kPatch = 5;
    static constexpr int kTimeEmbed = 32;
    static constexpr int kInputDim = 4 * kPatch * kPatch + kTimeEmbed;
    static constexpr int kHidden = 128;

    enum class Activation { Tanh, Identity };

    TinyScoreNet(sde::SdeParams p, std::uint64_t init_seed,
                 Activation act = Activation::Tanh);

    std::size_t parameter_count() const { return params_.size(); }
    const std::vector<double>& parameters() const { return params_; }
    std::vector<double>& parameters() { return params_; }
    std::vector<std::uint32_t> layer_sizes() const;
    Activation activation() const { return act_; }
    const sde::SdeParams& sde_params() const { return sde_; }

    // Loss and parameter gradient of the DSM objective for one (x_t, y, t, z)
    // sample; grad is accumulated (scaled by weight) into grad_out.
    double loss_and_grad(const ComplexGrid& x_t, const ComplexGrid& y, double t,
                         const ComplexGrid& z, std::vector<double>& grad_out,
                         double weight) const;

    // One Adam update from an already accumulated gradient.
    void apply_adam(const std::vector<double>& grad, double lr);

    void reset_optimizer_state();

  private:
    ComplexGrid eval_impl(const ComplexGrid& x_t, const ComplexGrid& y, double t) const override;

    sde::SdeParams sde_;
    Activation act_;
    std::vector<double> params_;

    // Adam state
    std::vector<double> adam_m_;
    std::vector<double> adam_v_;
    long adam_step_ = 0;

    friend TinyScoreNet load_weights(const std::string& path, const sde::SdeParams& p);
};

// || s(x_t, y, t) + z / sigma(t) ||^2 averaged over concatenated real/imag
// components. z must be the unit draw that produced x_t.
double dsm_loss(const ScoreModel& model, const ComplexGrid& x0, const ComplexGrid& y, double t,
                const ComplexGrid& z, const sde::SdeParams& p);

struct TrainItem {
    ComplexGrid x0;
    ComplexGrid y;
};

// One SGD step over a batch: sample t ~ U[t_eps, T] per item, perturb, take
// an Adam step on the mean DSM loss. Returns the batch loss.
double training_step(TinyScoreNet& net, const std::vector<TrainItem>& batch,
                     const sde::SdeParams& p, Rng& rng, double lr,
                     NoiseConvention conv = NoiseConvention::SplitHalf);

// Max relative error of the analytic gradient against central differences on
// n_params randomly chosen parameters.
double gradient_check(TinyScoreNet& net, const ComplexGrid& x0, const ComplexGrid& y,
                      const sde::SdeParams& p, Rng& rng, double eps, int n_params = 20);

void save_weights(const TinyScoreNet& net, const std::string& path);
TinyScoreNet load_weights(const std::string& path, const sde::SdeParams& p);

}  // namespace ouve::score
