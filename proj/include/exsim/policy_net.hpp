#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "exsim/errors.hpp"
#include "exsim/impact.hpp"
#include "exsim/market_data.hpp"
#include "exsim/strategies.hpp"

// Gated recurrent execution policy: two LSTM layers of 50 units, a sigmoid
// head that emits the remaining-inventory fraction each minute, exact
// gradients through the unrolled day, and the per-episode Adam training loop.

namespace exsim::policy {

struct NetDims {
    int input = 401;
    int hidden = 50;

    int gates() const { return 4 * hidden; }
};

// All parameters live in one flat vector; the named blocks are views.
// Gate row order within each 4H block: input, forget, candidate, output.
class PolicyWeights {
  public:
    PolicyWeights() = default;
    explicit PolicyWeights(NetDims dims);

    static PolicyWeights init(NetDims dims, std::uint64_t seed);  // uniform +-1/sqrt(fan_in)

    NetDims dims() const { return dims_; }
    std::size_t parameter_count() const { return static_cast<std::size_t>(flat_.size()); }

    Eigen::VectorXd& flat() { return flat_; }
    const Eigen::VectorXd& flat() const { return flat_; }

    using MatMap = Eigen::Map<Eigen::MatrixXd>;
    using VecMap = Eigen::Map<Eigen::VectorXd>;
    using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
    using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

    MatMap w1() { return block(0, dims_.gates(), dims_.input); }
    MatMap u1() { return block(1, dims_.gates(), dims_.hidden); }
    VecMap b1() { return vec(2, dims_.gates()); }
    MatMap w2() { return block(3, dims_.gates(), dims_.hidden); }
    MatMap u2() { return block(4, dims_.gates(), dims_.hidden); }
    VecMap b2() { return vec(5, dims_.gates()); }
    VecMap head_w() { return vec(6, dims_.hidden); }
    double& head_b() { return flat_[offsets_[7]]; }

    ConstMatMap w1() const { return block(0, dims_.gates(), dims_.input); }
    ConstMatMap u1() const { return block(1, dims_.gates(), dims_.hidden); }
    ConstVecMap b1() const { return vec(2, dims_.gates()); }
    ConstMatMap w2() const { return block(3, dims_.gates(), dims_.hidden); }
    ConstMatMap u2() const { return block(4, dims_.gates(), dims_.hidden); }
    ConstVecMap b2() const { return vec(5, dims_.gates()); }
    ConstVecMap head_w() const { return vec(6, dims_.hidden); }
    double head_b() const { return flat_[offsets_[7]]; }

    // Human-readable shape census (the paper's parameter count is ambiguous,
    // so we report ours instead of asserting it).
    std::string shape_census() const;

  private:
    MatMap block(int slot, int rows, int cols) {
        return MatMap(flat_.data() + offsets_[slot], rows, cols);
    }
    ConstMatMap block(int slot, int rows, int cols) const {
        return ConstMatMap(flat_.data() + offsets_[slot], rows, cols);
    }
    VecMap vec(int slot, int n) { return VecMap(flat_.data() + offsets_[slot], n); }
    ConstVecMap vec(int slot, int n) const { return ConstVecMap(flat_.data() + offsets_[slot], n); }

    NetDims dims_;
    Eigen::VectorXd flat_;
    std::array<std::ptrdiff_t, 8> offsets_{};
};

struct RecurrentState {
    Eigen::VectorXd h1, c1, h2, c2;

    static RecurrentState zeros(int hidden);
};

// One step of the two-layer recursion plus the sigmoid head.
// Returns the remaining-inventory fraction in (0,1) and advances the state.
double forward(const PolicyWeights& w, RecurrentState& state, const Eigen::VectorXd& features);

// ---------------------------------------------------------------------------
// Features

struct FeatureStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd stddev;  // floored at 1e-12
};

struct InventoryRule {
    enum class Kind { fixed, adv_fraction };
    Kind kind = Kind::fixed;
    double value = 1e6;  // share count, or fraction of average daily volume
};

// Everything needed to feed the network for one fold: the benchmark
// inventory paths per ticker, per-ticker initial inventories, the trade
// grid, and standardization statistics fit on the training days only.
struct FoldContext {
    const market::Panel* panel = nullptr;
    market::FoldSpec fold;
    int trade_interval = 5;
    std::vector<double> x0;                                // per ticker
    std::vector<market::VolumeProfile> profiles;           // per ticker, training-estimated
    std::vector<strategies::BenchmarkInventories> bench;   // per ticker
    FeatureStats stats;

    int input_dim() const { return 1 + 4 * panel->n_tickers(); }
    int day_minutes() const { return panel->minutes; }
    std::vector<int> train_day_list() const;
    std::vector<int> test_day_list() const;
};

FoldContext make_fold_context(const market::Panel& panel, const market::FoldSpec& fold,
                              const InventoryRule& rule, double beta, int trade_interval = 5);

// Raw feature vector for minute t of a day: [t scaled, prices, volumes,
// VWAP inventories, TWAP inventories], everything observed at t-1.
Eigen::VectorXd raw_features(const FoldContext& ctx, int day, int minute);

// Standardized features for the whole day, one column per minute 1..D-1.
Eigen::MatrixXd feature_matrix(const FoldContext& ctx, int day);

Eigen::VectorXd build_features(const FoldContext& ctx, int day, int minute);  // standardized

// ---------------------------------------------------------------------------
// Episode loss and gradient

struct LossSpec {
    impact::ImpactParams params;
    double x0 = 1e6;
    int trade_interval = 5;
};

// Transaction cost of running the policy over one day. `features` has one
// column per minute 1..D-1; prices/volumes cover minutes 1..D. Inventory is
// x0 times the head output at trade minutes, forced to zero at the close.
double episode_loss(const PolicyWeights& w, const Eigen::MatrixXd& features,
                    std::span<const double> prices, std::span<const double> volumes,
                    const LossSpec& spec);

// Loss plus the exact reverse-mode gradient (same layout as the flat weights).
double episode_gradient(const PolicyWeights& w, const Eigen::MatrixXd& features,
                        std::span<const double> prices, std::span<const double> volumes,
                        const LossSpec& spec, Eigen::VectorXd& grad);

// Inventory path at trade times: x0 * head output, with the forced close.
std::vector<double> policy_inventory(const PolicyWeights& w, const Eigen::MatrixXd& features,
                                     double x0, int trade_interval);

// Derivative of one cost term w.r.t. the trade size (0 at zero, power > 1).
double trade_cost_derivative(double price, double volume, double delta,
                             const impact::ImpactParams& params);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Eigen::VectorXd m, v;
    long step = 0;

    static AdamState zeros(Eigen::Index n);
};

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state,
               const AdamConfig& cfg);

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    int epochs = 10000;
    AdamConfig adam;
    impact::ImpactParams params = impact::ImpactParams::make(0.003, 0.67);
    std::uint64_t seed = 0;
    bool batch_days = false;  // true: one update per epoch on the day-averaged gradient
};

struct TrainResult {
    PolicyWeights weights;
    FeatureStats stats;
    std::vector<double> curve;  // mean pre-update training loss per epoch
    AdamState opt;
    int epochs_done = 0;
};

TrainResult train(const FoldContext& ctx, int ticker, const TrainConfig& cfg);

// Continue a run from a saved state (same data order, same updates).
void train_more(const FoldContext& ctx, int ticker, const TrainConfig& cfg, TrainResult& state);

// ---------------------------------------------------------------------------
// Checkpoints (magic EXPW): weights, feature statistics, optimizer state.

struct Checkpoint {
    std::string ticker;
    std::uint32_t fold_index = 0;
    std::uint64_t config_hash = 0;
    PolicyWeights weights;
    FeatureStats stats;
    std::optional<AdamState> opt;
    int epochs_done = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace exsim::policy
