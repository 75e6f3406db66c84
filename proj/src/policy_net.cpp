#include "exsim/policy_net.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "exsim/rng.hpp"

namespace exsim::policy {

namespace {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double floored(double volume) { return volume < 1.0 ? 1.0 : volume; }

std::array<std::ptrdiff_t, 9> layout(NetDims d) {
    const std::ptrdiff_t G = d.gates();
    std::array<std::ptrdiff_t, 9> off{};
    off[0] = 0;                       // w1: G x input
    off[1] = off[0] + G * d.input;    // u1: G x hidden
    off[2] = off[1] + G * d.hidden;   // b1: G
    off[3] = off[2] + G;              // w2: G x hidden
    off[4] = off[3] + G * d.hidden;   // u2: G x hidden
    off[5] = off[4] + G * d.hidden;   // b2: G
    off[6] = off[5] + G;              // head_w: hidden
    off[7] = off[6] + d.hidden;       // head_b: 1
    off[8] = off[7] + 1;
    return off;
}

}  // namespace

PolicyWeights::PolicyWeights(NetDims dims) : dims_(dims) {
    const auto off = layout(dims);
    std::copy(off.begin(), off.begin() + 8, offsets_.begin());
    flat_ = Eigen::VectorXd::Zero(off[8]);
}

PolicyWeights PolicyWeights::init(NetDims dims, std::uint64_t seed) {
    PolicyWeights w(dims);
    const auto off = layout(dims);
    const int G = dims.gates();
    struct Block {
        std::ptrdiff_t begin, size;
        int fan_in;
    };
    const Block blocks[] = {
        {off[0], G * dims.input, dims.input},   // w1
        {off[1], G * dims.hidden, dims.hidden}, // u1
        {off[3], G * dims.hidden, dims.hidden}, // w2
        {off[4], G * dims.hidden, dims.hidden}, // u2
        {off[6], dims.hidden, dims.hidden},     // head_w
    };
    std::uint64_t counter = 0;
    for (const auto& b : blocks) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
        for (std::ptrdiff_t k = 0; k < b.size; ++k) {
            const double u = rng::uniform01(rng::key(seed, 0x77696e6974ULL, counter++));
            w.flat_[b.begin + k] = (2.0 * u - 1.0) * scale;
        }
    }
    return w;
}

std::string PolicyWeights::shape_census() const {
    const int G = dims_.gates();
    std::ostringstream os;
    os << "w1 " << G << "x" << dims_.input
       << ", u1 " << G << "x" << dims_.hidden
       << ", b1 " << G
       << ", w2 " << G << "x" << dims_.hidden
       << ", u2 " << G << "x" << dims_.hidden
       << ", b2 " << G
       << ", head " << dims_.hidden << "+1"
       << "; total " << parameter_count();
    return os.str();
}

RecurrentState RecurrentState::zeros(int hidden) {
    RecurrentState s;
    s.h1 = Eigen::VectorXd::Zero(hidden);
    s.c1 = Eigen::VectorXd::Zero(hidden);
    s.h2 = Eigen::VectorXd::Zero(hidden);
    s.c2 = Eigen::VectorXd::Zero(hidden);
    return s;
}

namespace {

// Single gated-unit step: consumes the pre-activation z (4H), updates h and c.
inline void apply_gates(const Eigen::VectorXd& z, Eigen::VectorXd& h, Eigen::VectorXd& c) {
    const int H = static_cast<int>(h.size());
    for (int k = 0; k < H; ++k) {
        const double ig = sigmoid(z[k]);
        const double fg = sigmoid(z[H + k]);
        const double gg = std::tanh(z[2 * H + k]);
        const double og = sigmoid(z[3 * H + k]);
        const double cc = fg * c[k] + ig * gg;
        c[k] = cc;
        h[k] = og * std::tanh(cc);
    }
}

struct LayerCache {
    Eigen::MatrixXd zx;                  // W*X + b, reused as scratch
    Eigen::MatrixXd ig, fg, gg, og;      // gate activations, H x N
    Eigen::MatrixXd c, tc, h;            // cell, tanh(cell), output, H x N

    void resize(int H, int N) {
        zx.resize(4 * H, N);
        ig.resize(H, N); fg.resize(H, N); gg.resize(H, N); og.resize(H, N);
        c.resize(H, N); tc.resize(H, N); h.resize(H, N);
    }
};

void layer_forward(PolicyWeights::ConstMatMap W, PolicyWeights::ConstMatMap U,
                   PolicyWeights::ConstVecMap b, const Eigen::MatrixXd& X, LayerCache& L,
                   Eigen::VectorXd& h, Eigen::VectorXd& c, Eigen::VectorXd& z) {
    const int H = static_cast<int>(U.cols());
    const int N = static_cast<int>(X.cols());
    L.resize(H, N);
    L.zx.noalias() = W * X;
    L.zx.colwise() += b;
    h.setZero(H);
    c.setZero(H);
    for (int t = 0; t < N; ++t) {
        z = L.zx.col(t);
        z.noalias() += U * h;
        for (int k = 0; k < H; ++k) {
            const double ig = sigmoid(z[k]);
            const double fg = sigmoid(z[H + k]);
            const double gg = std::tanh(z[2 * H + k]);
            const double og = sigmoid(z[3 * H + k]);
            const double cc = fg * c[k] + ig * gg;
            const double tc = std::tanh(cc);
            c[k] = cc;
            h[k] = og * tc;
            L.ig(k, t) = ig;
            L.fg(k, t) = fg;
            L.gg(k, t) = gg;
            L.og(k, t) = og;
            L.c(k, t) = cc;
            L.tc(k, t) = tc;
            L.h(k, t) = h[k];
        }
    }
}

// Reverse pass over one layer. dH holds dL/dh_t on entry. Parameter
// gradients are accumulated; dX (optional) receives dL/dX.
void layer_backward(PolicyWeights::ConstMatMap W, PolicyWeights::ConstMatMap U,
                    const Eigen::MatrixXd& X, const LayerCache& L, const Eigen::MatrixXd& dH,
                    PolicyWeights::MatMap gW, PolicyWeights::MatMap gU, PolicyWeights::VecMap gb,
                    Eigen::MatrixXd* dX, Eigen::MatrixXd& DZ) {
    const int H = static_cast<int>(U.cols());
    const int N = static_cast<int>(X.cols());
    DZ.resize(4 * H, N);
    Eigen::VectorXd dh_rec = Eigen::VectorXd::Zero(H);
    Eigen::VectorXd dc = Eigen::VectorXd::Zero(H);
    for (int t = N - 1; t >= 0; --t) {
        for (int k = 0; k < H; ++k) {
            const double dht = dH(k, t) + dh_rec[k];
            const double og = L.og(k, t);
            const double tc = L.tc(k, t);
            const double dO = dht * tc;
            const double dck = dc[k] + dht * og * (1.0 - tc * tc);
            const double ig = L.ig(k, t);
            const double fg = L.fg(k, t);
            const double gg = L.gg(k, t);
            const double cprev = t > 0 ? L.c(k, t - 1) : 0.0;
            DZ(k, t) = dck * gg * ig * (1.0 - ig);
            DZ(H + k, t) = dck * cprev * fg * (1.0 - fg);
            DZ(2 * H + k, t) = dck * ig * (1.0 - gg * gg);
            DZ(3 * H + k, t) = dO * og * (1.0 - og);
            dc[k] = dck * fg;
        }
        dh_rec.noalias() = U.transpose() * DZ.col(t);
    }
    gW.noalias() += DZ * X.transpose();
    if (N > 1) gU.noalias() += DZ.rightCols(N - 1) * L.h.leftCols(N - 1).transpose();
    gb += DZ.rowwise().sum();
    if (dX) dX->noalias() = W.transpose() * DZ;
}

struct EpisodeWorkspace {
    LayerCache l1, l2;
    Eigen::RowVectorXd ypre, y, dp;
    Eigen::MatrixXd dh2, dh1, dz;
    Eigen::VectorXd h, c, z;
};

EpisodeWorkspace& workspace() {
    thread_local EpisodeWorkspace ws;
    return ws;
}

void episode_forward(const PolicyWeights& w, const Eigen::MatrixXd& X, EpisodeWorkspace& ws) {
    if (X.rows() != w.dims().input)
        throw ConfigError("episode: feature rows do not match the network input size");
    layer_forward(w.w1(), w.u1(), w.b1(), X, ws.l1, ws.h, ws.c, ws.z);
    layer_forward(w.w2(), w.u2(), w.b2(), ws.l1.h, ws.l2, ws.h, ws.c, ws.z);
    ws.ypre.noalias() = w.head_w().transpose() * ws.l2.h;
    ws.ypre.array() += w.head_b();
    const int N = static_cast<int>(X.cols());
    ws.y.resize(N);
    for (int t = 0; t < N; ++t) {
        const double v = sigmoid(ws.ypre[t]);
        if (!std::isfinite(v))
            throw NumericalError("non-finite head output at minute " + std::to_string(t + 1));
        ws.y[t] = v;
    }
}

struct TradeGrid {
    int day_minutes;
    int interval;
    int trades;
};

TradeGrid validate_episode(const Eigen::MatrixXd& features, std::span<const double> prices,
                           std::span<const double> volumes, int interval) {
    const int D = static_cast<int>(prices.size());
    if (volumes.size() != prices.size())
        throw ConfigError("episode: prices and volumes must have the same length");
    if (interval < 1 || D < interval || D % interval != 0)
        throw ConfigError("episode: day length must be a positive multiple of the trade interval");
    if (features.cols() != D - 1)
        throw ConfigError("episode: need one feature column per minute 1..D-1");
    return {D, interval, D / interval};
}

// Shared trade-cost accounting. dY (optional) receives dL/dy at trade columns.
double loss_from_outputs(const Eigen::RowVectorXd& y, std::span<const double> prices,
                         std::span<const double> volumes, const LossSpec& spec,
                         const TradeGrid& grid, Eigen::RowVectorXd* dY) {
    const int T = grid.trades;
    const int K = grid.interval;
    const auto& p = spec.params;
    double loss = 0.0;
    std::vector<double> deriv(T + 1, 0.0);  // d cost_l / d delta_l, l = 1..T
    double x_prev = spec.x0;
    for (int l = 1; l <= T; ++l) {
        const int m = K * l;  // trade minute
        const double x_now = l == T ? 0.0 : spec.x0 * y[m - 1];
        const double delta = x_now - x_prev;
        const double S = prices[m - 1];
        const double V = floored(volumes[m - 1]);
        loss += impact::walk_cost(S, V, delta, p);
        if (dY) deriv[l] = trade_cost_derivative(S, V, delta, p);
        x_prev = x_now;
    }
    if (dY) {
        dY->setZero(static_cast<int>(y.size()));
        for (int l = 1; l < T; ++l) (*dY)[K * l - 1] = spec.x0 * (deriv[l] - deriv[l + 1]);
    }
    return loss;
}

}  // namespace

double trade_cost_derivative(double price, double volume, double delta,
                             const impact::ImpactParams& params) {
    if (delta == 0.0) return 0.0;  // exponent > 1, so the kink has zero slope
    const double p = params.cost_power();
    const double mag = params.c_coeff * price * std::pow(floored(volume), params.volume_power()) *
                       p * std::pow(std::fabs(delta), p - 1.0);
    return delta > 0.0 ? mag : -mag;
}

double forward(const PolicyWeights& w, RecurrentState& state, const Eigen::VectorXd& features) {
    if (features.size() != w.dims().input)
        throw ConfigError("forward: feature length does not match the network input size");
    Eigen::VectorXd z = w.w1() * features + w.u1() * state.h1 + w.b1();
    apply_gates(z, state.h1, state.c1);
    z = w.w2() * state.h1 + w.u2() * state.h2 + w.b2();
    apply_gates(z, state.h2, state.c2);
    const double pre = w.head_w().dot(state.h2) + w.head_b();
    const double out = sigmoid(pre);
    if (!std::isfinite(out)) throw NumericalError("forward: non-finite head output");
    return out;
}

double episode_loss(const PolicyWeights& w, const Eigen::MatrixXd& features,
                    std::span<const double> prices, std::span<const double> volumes,
                    const LossSpec& spec) {
    const TradeGrid grid = validate_episode(features, prices, volumes, spec.trade_interval);
    auto& ws = workspace();
    episode_forward(w, features, ws);
    return loss_from_outputs(ws.y, prices, volumes, spec, grid, nullptr);
}

double episode_gradient(const PolicyWeights& w, const Eigen::MatrixXd& features,
                        std::span<const double> prices, std::span<const double> volumes,
                        const LossSpec& spec, Eigen::VectorXd& grad) {
    const TradeGrid grid = validate_episode(features, prices, volumes, spec.trade_interval);
    auto& ws = workspace();
    episode_forward(w, features, ws);

    Eigen::RowVectorXd dY;
    const double loss = loss_from_outputs(ws.y, prices, volumes, spec, grid, &dY);

    const NetDims dims = w.dims();
    const auto off = layout(dims);
    grad.setZero(off[8]);
    PolicyWeights::MatMap gW1(grad.data() + off[0], dims.gates(), dims.input);
    PolicyWeights::MatMap gU1(grad.data() + off[1], dims.gates(), dims.hidden);
    PolicyWeights::VecMap gb1(grad.data() + off[2], dims.gates());
    PolicyWeights::MatMap gW2(grad.data() + off[3], dims.gates(), dims.hidden);
    PolicyWeights::MatMap gU2(grad.data() + off[4], dims.gates(), dims.hidden);
    PolicyWeights::VecMap gb2(grad.data() + off[5], dims.gates());
    PolicyWeights::VecMap gHw(grad.data() + off[6], dims.hidden);
    double& gHb = grad[off[7]];

    // Head: y = sigmoid(head_w . h2 + head_b)
    const int N = static_cast<int>(features.cols());
    ws.dp.resize(N);
    for (int t = 0; t < N; ++t) ws.dp[t] = dY[t] * ws.y[t] * (1.0 - ws.y[t]);
    gHw.noalias() = ws.l2.h * ws.dp.transpose();
    gHb = ws.dp.sum();
    ws.dh2.noalias() = w.head_w() * ws.dp;

    layer_backward(w.w2(), w.u2(), ws.l1.h, ws.l2, ws.dh2, gW2, gU2, gb2, &ws.dh1, ws.dz);
    layer_backward(w.w1(), w.u1(), features, ws.l1, ws.dh1, gW1, gU1, gb1, nullptr, ws.dz);
    return loss;
}

std::vector<double> policy_inventory(const PolicyWeights& w, const Eigen::MatrixXd& features,
                                     double x0, int trade_interval) {
    const int D = static_cast<int>(features.cols()) + 1;
    if (trade_interval < 1 || D % trade_interval != 0)
        throw ConfigError("policy_inventory: day length must be a multiple of the trade interval");
    auto& ws = workspace();
    episode_forward(w, features, ws);
    const int T = D / trade_interval;
    std::vector<double> inventory(T);
    for (int l = 1; l < T; ++l) inventory[l - 1] = x0 * ws.y[trade_interval * l - 1];
    inventory[T - 1] = 0.0;  // forced close
    return inventory;
}

// ---------------------------------------------------------------------------
// Features

std::vector<int> FoldContext::train_day_list() const {
    std::vector<int> out;
    for (int d = fold.train_begin; d < fold.train_end; ++d) out.push_back(d);
    return out;
}

std::vector<int> FoldContext::test_day_list() const {
    std::vector<int> out;
    for (int d = fold.test_begin; d < fold.test_end; ++d) out.push_back(d);
    return out;
}

Eigen::VectorXd raw_features(const FoldContext& ctx, int day, int minute) {
    const auto& panel = *ctx.panel;
    const int n = panel.n_tickers();
    const int D = panel.minutes;
    if (minute < 1 || minute > D) throw DomainError("raw_features: minute outside trading day");
    Eigen::VectorXd f(1 + 4 * n);
    f[0] = static_cast<double>(minute) / D;
    const int lag = minute > 1 ? minute - 1 : 1;  // minute-0 proxy is the opening bar
    for (int i = 0; i < n; ++i) {
        f[1 + i] = panel.price(i, day, lag);
        f[1 + n + i] = panel.volume(i, day, lag);
        f[1 + 2 * n + i] = ctx.bench[i].vwap_path[minute - 1];
        f[1 + 3 * n + i] = ctx.bench[i].twap_path[minute - 1];
    }
    return f;
}

Eigen::MatrixXd feature_matrix(const FoldContext& ctx, int day) {
    const int D = ctx.day_minutes();
    const int rows = ctx.input_dim();
    Eigen::MatrixXd F(rows, D - 1);
    for (int t = 1; t < D; ++t) F.col(t - 1) = raw_features(ctx, day, t);
    F.colwise() -= ctx.stats.mean;
    F.array().colwise() /= ctx.stats.stddev.array();
    return F;
}

Eigen::VectorXd build_features(const FoldContext& ctx, int day, int minute) {
    Eigen::VectorXd f = raw_features(ctx, day, minute);
    return (f - ctx.stats.mean).cwiseQuotient(ctx.stats.stddev);
}

FoldContext make_fold_context(const market::Panel& panel, const market::FoldSpec& fold,
                              const InventoryRule& rule, double beta, int trade_interval) {
    FoldContext ctx;
    ctx.panel = &panel;
    ctx.fold = fold;
    ctx.trade_interval = trade_interval;

    const auto train_days = ctx.train_day_list();
    if (train_days.empty()) throw ConfigError("fold has no training days");

    const int n = panel.n_tickers();
    ctx.x0.resize(n);
    for (int i = 0; i < n; ++i) {
        if (rule.kind == InventoryRule::Kind::fixed) {
            ctx.x0[i] = rule.value;
        } else {
            double adv = 0.0;
            for (int d : train_days) {
                const auto v = panel.day_volumes(i, d);
                double day_total = 0.0;
                for (double x : v) day_total += x;
                adv += day_total;
            }
            adv /= static_cast<double>(train_days.size());
            ctx.x0[i] = rule.value * adv;
        }
    }

    ctx.profiles.reserve(n);
    ctx.bench.reserve(n);
    for (int i = 0; i < n; ++i) {
        ctx.profiles.push_back(market::estimate_volume_profile(panel, i, train_days, beta));
        ctx.bench.push_back(strategies::benchmark_inventories(ctx.x0[i], ctx.profiles[i]));
    }

    // Standardization statistics over the training fold (two-pass).
    const int rows = ctx.input_dim();
    const int D = panel.minutes;
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(rows);
    std::size_t count = 0;
    for (int d : train_days)
        for (int t = 1; t < D; ++t) {
            sum += raw_features(ctx, d, t);
            ++count;
        }
    ctx.stats.mean = sum / static_cast<double>(count);
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(rows);
    for (int d : train_days)
        for (int t = 1; t < D; ++t) {
            const Eigen::VectorXd delta = raw_features(ctx, d, t) - ctx.stats.mean;
            ss += delta.cwiseProduct(delta);
        }
    ctx.stats.stddev = (ss / static_cast<double>(count)).cwiseSqrt().cwiseMax(1e-12);
    return ctx;
}

// ---------------------------------------------------------------------------
// Optimizer

AdamState AdamState::zeros(Eigen::Index n) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Zero(n);
    return s;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               const AdamConfig& cfg) {
    if (grad.size() != params.size() || state.m.size() != params.size())
        throw ConfigError("adam_step: shape mismatch");
    state.step += 1;
    state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
    state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    params.array() -=
        cfg.lr * (state.m.array() / bc1) / ((state.v.array() / bc2).sqrt() + cfg.eps);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const FoldContext& ctx, int ticker, const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    TrainResult r;
    r.weights = PolicyWeights::init({ctx.input_dim(), 50}, rng::key(cfg.seed, 0x696e6974ULL, ticker));
    r.stats = ctx.stats;
    r.opt = AdamState::zeros(static_cast<Eigen::Index>(r.weights.parameter_count()));
    train_more(ctx, ticker, cfg, r);
    return r;
}

void train_more(const FoldContext& ctx, int ticker, const TrainConfig& cfg, TrainResult& r) {
    const auto days = ctx.train_day_list();
    std::vector<Eigen::MatrixXd> features;
    features.reserve(days.size());
    for (int d : days) features.push_back(feature_matrix(ctx, d));

    const LossSpec spec{cfg.params, ctx.x0[ticker], ctx.trade_interval};
    const auto& panel = *ctx.panel;
    Eigen::VectorXd grad(static_cast<Eigen::Index>(r.weights.parameter_count()));
    Eigen::VectorXd acc(grad.size());

    for (int epoch = r.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
        double epoch_loss = 0.0;
        try {
            if (!cfg.batch_days) {
                for (std::size_t di = 0; di < days.size(); ++di) {
                    const int d = days[di];
                    const double loss =
                        episode_gradient(r.weights, features[di], panel.day_prices(ticker, d),
                                         panel.day_volumes(ticker, d), spec, grad);
                    if (!std::isfinite(loss))
                        throw NumericalError("non-finite episode loss on day " + panel.days[d]);
                    epoch_loss += loss;
                    adam_step(r.weights.flat(), grad, r.opt, cfg.adam);
                }
            } else {
                acc.setZero();
                for (std::size_t di = 0; di < days.size(); ++di) {
                    const int d = days[di];
                    const double loss =
                        episode_gradient(r.weights, features[di], panel.day_prices(ticker, d),
                                         panel.day_volumes(ticker, d), spec, grad);
                    if (!std::isfinite(loss))
                        throw NumericalError("non-finite episode loss on day " + panel.days[d]);
                    epoch_loss += loss;
                    acc += grad;
                }
                acc /= static_cast<double>(days.size());
                adam_step(r.weights.flat(), acc, r.opt, cfg.adam);
            }
        } catch (const NumericalError& e) {
            throw NumericalError("training aborted at epoch " + std::to_string(epoch) + ": " +
                                 e.what());
        }
        r.curve.push_back(epoch_loss / static_cast<double>(days.size()));
        r.epochs_done = epoch;
    }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kCkptMagic[4] = {'E', 'X', 'P', 'W'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t get_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::uint64_t get_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
void put_vec(std::ostream& out, const Eigen::VectorXd& v) {
    put_u64(out, static_cast<std::uint64_t>(v.size()));
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * sizeof(double)));
}
Eigen::VectorXd get_vec(std::istream& in) {
    const std::uint64_t n = get_u64(in);
    if (n > (1ULL << 28)) throw DataError("checkpoint: implausible array length");
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return v;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(kCkptMagic, 4);
    put_u32(out, kCkptVersion);
    put_u32(out, static_cast<std::uint32_t>(ckpt.ticker.size()));
    out.write(ckpt.ticker.data(), static_cast<std::streamsize>(ckpt.ticker.size()));
    put_u32(out, ckpt.fold_index);
    put_u64(out, ckpt.config_hash);
    put_u32(out, static_cast<std::uint32_t>(ckpt.weights.dims().input));
    put_u32(out, static_cast<std::uint32_t>(ckpt.weights.dims().hidden));
    put_u32(out, static_cast<std::uint32_t>(ckpt.epochs_done));
    put_vec(out, ckpt.weights.flat());
    put_vec(out, ckpt.stats.mean);
    put_vec(out, ckpt.stats.stddev);
    put_u32(out, ckpt.opt.has_value() ? 1u : 0u);
    if (ckpt.opt) {
        put_u64(out, static_cast<std::uint64_t>(ckpt.opt->step));
        put_vec(out, ckpt.opt->m);
        put_vec(out, ckpt.opt->v);
    }
    if (!out) throw DataError("short write to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
        throw DataError(path + " is not a policy checkpoint");
    if (get_u32(in) != kCkptVersion) throw DataError("unsupported checkpoint version");
    Checkpoint ckpt;
    const std::uint32_t name_len = get_u32(in);
    if (name_len > 4096) throw DataError("checkpoint: implausible ticker length");
    ckpt.ticker.resize(name_len);
    in.read(ckpt.ticker.data(), name_len);
    ckpt.fold_index = get_u32(in);
    ckpt.config_hash = get_u64(in);
    NetDims dims;
    dims.input = static_cast<int>(get_u32(in));
    dims.hidden = static_cast<int>(get_u32(in));
    ckpt.epochs_done = static_cast<int>(get_u32(in));
    ckpt.weights = PolicyWeights(dims);
    Eigen::VectorXd flat = get_vec(in);
    if (flat.size() != ckpt.weights.flat().size())
        throw DataError("checkpoint: weight vector does not match its shape table");
    ckpt.weights.flat() = flat;
    ckpt.stats.mean = get_vec(in);
    ckpt.stats.stddev = get_vec(in);
    if (get_u32(in) == 1u) {
        AdamState opt;
        opt.step = static_cast<long>(get_u64(in));
        opt.m = get_vec(in);
        opt.v = get_vec(in);
        ckpt.opt = std::move(opt);
    }
    if (!in) throw DataError("truncated checkpoint " + path);
    return ckpt;
}

}  // namespace exsim::policy
