#include "ouve/score.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>

#include "ouve/errors.hpp"

namespace ouve::score {

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

constexpr double kSigmaGuard = 1e-8;
constexpr int kIn = TinyScoreNet::kInputDim;
constexpr int kH = TinyScoreNet::kHidden;
constexpr int kPatch = TinyScoreNet::kPatch;
constexpr int kEmb = TinyScoreNet::kTimeEmbed;

// Parameter layout: W1 (kH x kIn), b1, W2 (kH x kH), b2, W3 (2 x kH), b3.
constexpr std::size_t kOffW1 = 0;
constexpr std::size_t kOffB1 = kOffW1 + std::size_t(kH) * kIn;
constexpr std::size_t kOffW2 = kOffB1 + kH;
constexpr std::size_t kOffB2 = kOffW2 + std::size_t(kH) * kH;
constexpr std::size_t kOffW3 = kOffB2 + kH;
constexpr std::size_t kOffB3 = kOffW3 + std::size_t(2) * kH;
constexpr std::size_t kNumParams = kOffB3 + 2;

void time_embedding(double t, double* out) {
    // Geometric frequency ladder, 1..~50 cycles over the unit horizon.
    constexpr int half = kEmb / 2;
    for (int k = 0; k < half; ++k) {
        const double w = 2.0 * std::numbers::pi *
                         std::exp(std::log(50.0) * static_cast<double>(k) / (half - 1));
        out[2 * k] = std::sin(w * t);
        out[2 * k + 1] = std::cos(w * t);
    }
}

// Compressed STFT coefficients live at ~0.05 RMS while the time embedding
// lives at ~0.7 RMS; without rescaling, the first layer is dominated by the
// embedding and the signal pathway trains an order of magnitude slower.
constexpr double kFeatureScale = 8.0;

// im2col over a kPatch x kPatch neighborhood of (x_t, y), zero-padded at the
// grid edges, plus the time embedding. One row per T-F position.
Mat build_inputs(const ComplexGrid& x_t, const ComplexGrid& y, double t) {
    const int F = static_cast<int>(x_t.rows);
    const int T = static_cast<int>(x_t.cols);
    const int n = F * T;
    constexpr int pp = kPatch * kPatch;
    constexpr int r = kPatch / 2;

    double emb[kEmb];
    time_embedding(t, emb);

    Mat X(n, kIn);
    for (int tt = 0; tt < T; ++tt) {
        for (int ff = 0; ff < F; ++ff) {
            double* row = X.data() + std::size_t(tt * F + ff) * kIn;
            int idx = 0;
            for (int dt = -r; dt <= r; ++dt) {
                for (int df = -r; df <= r; ++df) {
                    const int f2 = ff + df, t2 = tt + dt;
                    if (f2 < 0 || f2 >= F || t2 < 0 || t2 >= T) {
                        row[idx] = row[idx + pp] = row[idx + 2 * pp] = row[idx + 3 * pp] = 0.0;
                    } else {
                        const cplx& a = x_t.at(f2, t2);
                        const cplx& b = y.at(f2, t2);
                        row[idx] = kFeatureScale * a.real();
                        row[idx + pp] = kFeatureScale * a.imag();
                        row[idx + 2 * pp] = kFeatureScale * b.real();
                        row[idx + 3 * pp] = kFeatureScale * b.imag();
                    }
                    ++idx;
                }
            }
            std::memcpy(row + 4 * pp, emb, sizeof(emb));
        }
    }
    return X;
}

struct Forward {
    Mat X, A1, H1, A2, H2, O;
};

void run_forward(const std::vector<double>& params, TinyScoreNet::Activation act,
                 const ComplexGrid& x_t, const ComplexGrid& y, double t, Forward& fw) {
    Eigen::Map<const Mat> W1(params.data() + kOffW1, kH, kIn);
    Eigen::Map<const Vec> b1(params.data() + kOffB1, kH);
    Eigen::Map<const Mat> W2(params.data() + kOffW2, kH, kH);
    Eigen::Map<const Vec> b2(params.data() + kOffB2, kH);
    Eigen::Map<const Mat> W3(params.data() + kOffW3, 2, kH);
    Eigen::Map<const Vec> b3(params.data() + kOffB3, 2);

    fw.X = build_inputs(x_t, y, t);
    fw.A1 = (fw.X * W1.transpose()).rowwise() + b1.transpose();
    fw.H1 = act == TinyScoreNet::Activation::Tanh ? fw.A1.array().tanh().matrix() : fw.A1;
    fw.A2 = (fw.H1 * W2.transpose()).rowwise() + b2.transpose();
    fw.H2 = act == TinyScoreNet::Activation::Tanh ? fw.A2.array().tanh().matrix() : fw.A2;
    fw.O = (fw.H2 * W3.transpose()).rowwise() + b3.transpose();
}

}  // namespace

AnalyticOracle::AnalyticOracle(ComplexGrid x0_ref, sde::SdeParams p)
    : x0_ref_(std::move(x0_ref)), sde_(p) {
    sde::validate(sde_);
}

ComplexGrid AnalyticOracle::eval_impl(const ComplexGrid& x_t, const ComplexGrid& y,
                                      double t) const {
    return sde::kernel_score(x_t, x0_ref_, y, t, sde_);
}

TinyScoreNet::TinyScoreNet(sde::SdeParams p, std::uint64_t init_seed, Activation act)
    : sde_(p), act_(act), params_(kNumParams, 0.0) {
    sde::validate(sde_);
    Rng rng(init_seed);
    auto init_layer = [&](std::size_t off, int rows, int cols) {
        const double s = 1.0 / std::sqrt(static_cast<double>(cols));
        for (int i = 0; i < rows * cols; ++i) params_[off + i] = s * rng.normal();
    };
    init_layer(kOffW1, kH, kIn);
    init_layer(kOffW2, kH, kH);
    init_layer(kOffW3, 2, kH);
    adam_m_.assign(kNumParams, 0.0);
    adam_v_.assign(kNumParams, 0.0);
}

std::vector<std::uint32_t> TinyScoreNet::layer_sizes() const {
    return {kIn, kH, kH, 2};
}

ComplexGrid TinyScoreNet::eval_impl(const ComplexGrid& x_t, const ComplexGrid& y,
                                    double t) const {
    require_same_shape(x_t, y, "TinyScoreNet::evaluate");
    const double sigma = sde::std_dev(t, sde_);
    if (sigma < kSigmaGuard)
        throw NumericalError("TinyScoreNet: sigma(t) below guard at t = " + std::to_string(t));

    Forward fw;
    run_forward(params_, act_, x_t, y, t, fw);

    ComplexGrid out(x_t.rows, x_t.cols);
    out.compressed = x_t.compressed;
    const double inv_var = 1.0 / (sigma * sigma);
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = cplx{fw.O(i, 0) * inv_var, fw.O(i, 1) * inv_var};
    return out;
}

double TinyScoreNet::loss_and_grad(const ComplexGrid& x_t, const ComplexGrid& y, double t,
                                   const ComplexGrid& z, std::vector<double>& grad_out,
                                   double weight) const {
    require_same_shape(x_t, y, "TinyScoreNet::loss_and_grad");
    require_same_shape(x_t, z, "TinyScoreNet::loss_and_grad");
    if (grad_out.size() != kNumParams) grad_out.assign(kNumParams, 0.0);
    const double sigma = sde::std_dev(t, sde_);
    if (sigma < kSigmaGuard)
        throw NumericalError("TinyScoreNet: sigma(t) below guard at t = " + std::to_string(t));

    Forward fw;
    run_forward(params_, act_, x_t, y, t, fw);

    const auto n = static_cast<Eigen::Index>(x_t.size());
    const double d = 2.0 * static_cast<double>(n);
    const double inv_var = 1.0 / (sigma * sigma);

    // residual r = O/sigma^2 + z/sigma; L = sum r^2 / d
    Mat R(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
        R(i, 0) = (fw.O(i, 0) + sigma * z.data[i].real()) * inv_var;
        R(i, 1) = (fw.O(i, 1) + sigma * z.data[i].imag()) * inv_var;
    }
    const double loss = R.squaredNorm() / d;
    if (!std::isfinite(loss))
        throw NumericalError("TinyScoreNet: non-finite DSM loss at t = " + std::to_string(t) +
                             ", sigma = " + std::to_string(sigma));

    Eigen::Map<const Mat> W2(params_.data() + kOffW2, kH, kH);
    Eigen::Map<const Mat> W3(params_.data() + kOffW3, 2, kH);

    Mat dO = (2.0 / (d * sigma * sigma)) * R;
    Mat dA2 = dO * W3;
    if (act_ == Activation::Tanh)
        dA2 = dA2.cwiseProduct((1.0 - fw.H2.array().square()).matrix());
    Mat dA1 = dA2 * W2;
    if (act_ == Activation::Tanh)
        dA1 = dA1.cwiseProduct((1.0 - fw.H1.array().square()).matrix());

    Eigen::Map<Mat> gW1(grad_out.data() + kOffW1, kH, kIn);
    Eigen::Map<Vec> gb1(grad_out.data() + kOffB1, kH);
    Eigen::Map<Mat> gW2(grad_out.data() + kOffW2, kH, kH);
    Eigen::Map<Vec> gb2(grad_out.data() + kOffB2, kH);
    Eigen::Map<Mat> gW3(grad_out.data() + kOffW3, 2, kH);
    Eigen::Map<Vec> gb3(grad_out.data() + kOffB3, 2);

    gW3 += weight * (dO.transpose() * fw.H2);
    gb3 += weight * dO.colwise().sum().transpose();
    gW2 += weight * (dA2.transpose() * fw.H1);
    gb2 += weight * dA2.colwise().sum().transpose();
    gW1 += weight * (dA1.transpose() * fw.X);
    gb1 += weight * dA1.colwise().sum().transpose();

    return loss;
}

void TinyScoreNet::apply_adam(const std::vector<double>& grad, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++adam_step_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_step_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_step_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        adam_m_[i] = beta1 * adam_m_[i] + (1.0 - beta1) * grad[i];
        adam_v_[i] = beta2 * adam_v_[i] + (1.0 - beta2) * grad[i] * grad[i];
        params_[i] -= lr * (adam_m_[i] / c1) / (std::sqrt(adam_v_[i] / c2) + eps);
    }
}

void TinyScoreNet::reset_optimizer_state() {
    adam_m_.assign(params_.size(), 0.0);
    adam_v_.assign(params_.size(), 0.0);
    adam_step_ = 0;
}

double dsm_loss(const ScoreModel& model, const ComplexGrid& x0, const ComplexGrid& y, double t,
                const ComplexGrid& z, const sde::SdeParams& p) {
    require_same_shape(x0, y, "dsm_loss");
    require_same_shape(x0, z, "dsm_loss");
    const double sigma = sde::std_dev(t, p);
    if (sigma < kSigmaGuard)
        throw NumericalError("dsm_loss: sigma(t) below guard at t = " + std::to_string(t));
    const ComplexGrid x_t = axpy(sde::mean(x0, y, t, p), sigma, z);
    const ComplexGrid s = model.evaluate(x_t, y, t);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
        const cplx r = s.data[i] + z.data[i] / sigma;
        acc += std::norm(r);
    }
    return acc / (2.0 * static_cast<double>(s.size()));
}

double training_step(TinyScoreNet& net, const std::vector<TrainItem>& batch,
                     const sde::SdeParams& p, Rng& rng, double lr, NoiseConvention conv) {
    if (batch.empty()) throw std::invalid_argument("training_step: empty batch");
    std::vector<double> grad(net.parameter_count(), 0.0);
    const double w = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    for (const TrainItem& item : batch) {
        const double t = rng.uniform(p.t_eps, p.t_horizon);
        const sde::Perturbed pt = sde::perturb(item.x0, item.y, t, p, rng, conv);
        // The reported loss is the unweighted objective; the gradient is
        // sigma(t)^4-weighted, which cancels the 1/sigma^2 output scaling and
        // keeps the per-sample gradient magnitude flat across t.
        const double gw = std::pow(sde::variance(t, p), 2);
        loss += w * net.loss_and_grad(pt.x_t, item.y, t, pt.z, grad, w * gw);
    }
    net.apply_adam(grad, lr);
    return loss;
}

double gradient_check(TinyScoreNet& net, const ComplexGrid& x0, const ComplexGrid& y,
                      const sde::SdeParams& p, Rng& rng, double eps, int n_params) {
    if (!(eps >= 1e-6 && eps <= 1e-3))
        throw std::invalid_argument("gradient_check: eps outside [1e-6, 1e-3]");

    const double t = rng.uniform(0.2, p.t_horizon);  // moderate sigma
    const sde::Perturbed pt = sde::perturb(x0, y, t, p, rng, NoiseConvention::SplitHalf);

    std::vector<double> grad(net.parameter_count(), 0.0);
    std::vector<double> scratch(net.parameter_count(), 0.0);
    net.loss_and_grad(pt.x_t, y, t, pt.z, grad, 1.0);

    double worst = 0.0;
    for (int k = 0; k < n_params; ++k) {
        const std::size_t i = rng.next_u64() % net.parameter_count();
        const double orig = net.parameters()[i];
        net.parameters()[i] = orig + eps;
        std::fill(scratch.begin(), scratch.end(), 0.0);
        const double lp = net.loss_and_grad(pt.x_t, y, t, pt.z, scratch, 0.0);
        net.parameters()[i] = orig - eps;
        std::fill(scratch.begin(), scratch.end(), 0.0);
        const double lm = net.loss_and_grad(pt.x_t, y, t, pt.z, scratch, 0.0);
        net.parameters()[i] = orig;
        const double fd = (lp - lm) / (2.0 * eps);
        const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
        worst = std::max(worst, std::abs(fd - grad[i]) / denom);
    }
    return worst;
}

namespace {

template <typename T>
void put(std::string& buf, const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw DataError("weights file: truncated");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}

}  // namespace

void save_weights(const TinyScoreNet& net, const std::string& path) {
    std::string payload;
    const auto sizes = net.layer_sizes();
    put(payload, static_cast<std::uint32_t>(sizes.size()));
    for (std::uint32_t s : sizes) put(payload, s);
    for (double v : net.parameters()) put(payload, v);
    const std::uint64_t checksum = fnv1a64(payload.data(), payload.size());

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_weights: cannot open " + path);
    f.write("OUVE", 4);
    const std::uint32_t version = kWeightsFormatVersion;
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    f.write(reinterpret_cast<const char*>(&checksum), sizeof(checksum));
    if (!f) throw DataError("save_weights: write failed for " + path);
}

TinyScoreNet load_weights(const std::string& path, const sde::SdeParams& p) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_weights: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    std::size_t pos = 0;
    if (buf.size() < 8 || buf.compare(0, 4, "OUVE") != 0)
        throw DataError("load_weights: bad magic bytes in " + path);
    pos = 4;
    const auto version = take<std::uint32_t>(buf, pos);
    if (version != kWeightsFormatVersion)
        throw DataError("load_weights: format version " + std::to_string(version) +
                        " not supported (expected " + std::to_string(kWeightsFormatVersion) + ")");

    const std::size_t payload_start = pos;
    const auto layer_count = take<std::uint32_t>(buf, pos);
    std::vector<std::uint32_t> sizes(layer_count);
    for (auto& s : sizes) s = take<std::uint32_t>(buf, pos);

    TinyScoreNet net(p, 0);
    if (sizes != net.layer_sizes())
        throw DataError("load_weights: architecture descriptor mismatch in " + path);

    for (double& v : net.params_) v = take<double>(buf, pos);
    const std::size_t payload_end = pos;
    const auto stored = take<std::uint64_t>(buf, pos);
    if (pos != buf.size()) throw DataError("load_weights: trailing bytes in " + path);
    const std::uint64_t computed =
        fnv1a64(buf.data() + payload_start, payload_end - payload_start);
    if (stored != computed) throw DataError("load_weights: checksum mismatch in " + path);
    net.reset_optimizer_state();
    return net;
}

}  // namespace ouve::score
