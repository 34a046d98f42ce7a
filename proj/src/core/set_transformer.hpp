#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include "core/dvl.hpp"
#include "core/frames.hpp"
#include "core/strapdown.hpp"
#include "core/tensor.hpp"

namespace stnav {
namespace st {

// Network and training hyperparameters. The IMU branch follows the standard
// configuration (kernel 200, stride 100, latent 128, 16 SABs, 2 heads,
// feed-forward expansion 256, 3 pooling seeds); the DVL branch embeds its
// length-3 history as a single patch.
struct StHyperParams {
    long imu_kernel = 200;     // patch width over the IMU stream
    long imu_stride = 100;
    long dvl_kernel = 3;       // one patch covering the DVL history
    long dvl_stride = 1;
    long patch_size = 1;       // temporal grouping per input column
    long latent_dim = 128;     // D
    long sab_count = 16;       // encoder depth per branch
    long heads = 2;
    long ff_expansion = 256;
    long pool_vectors = 3;     // PMA seed count k
    double dropout_p = 0.2;
    double learning_rate = 1e-3;
    double momentum = 0.9;
    long batch_size = 128;
    long epochs = 500;
    long imu_channels = 6;
    long dvl_channels = 3;
    long imu_window = 400;     // m samples
    long dvl_window = 3;       // n past velocities

    static StHyperParams paper_preset();
    static StHyperParams toy_preset();
    void validate() const;
};

// One supervised example: n past DVL body velocities, m IMU samples whose
// final second lines up with the withheld DVL epoch, and that withheld
// velocity as the target.
struct TrainingWindow {
    ad::Tensor dvl_past;   // [n, 3]
    ad::Tensor imu_past;   // [m, 6], columns fx,fy,fz,wx,wy,wz
    Vec3 target = Vec3::Zero();
    double t_target = 0.0;
};

// Named parameter tensors for both branches plus the FC head. Map order is
// the canonical iteration order for optimizers and persistence.
struct StWeights {
    StHyperParams hp;
    std::uint64_t seed = 0;
    std::map<std::string, ad::Tensor> params;

    ad::Tensor& at(const std::string& name);
    const ad::Tensor& at(const std::string& name) const;
    StWeights clone() const;
};

StWeights init_weights(const StHyperParams& hp, std::uint64_t seed);

// Strided-conv patch embedding: x [L, C] -> [P, D].
ad::Tensor patch_embed(const ad::Tensor& x, const ad::Tensor& w,
                       const ad::Tensor& b, long stride);

// Set Attention Block: MAB(X, X). Permutation-equivariant in the rows.
ad::Tensor sab(const ad::Tensor& x, const StWeights& w,
               const std::string& prefix, long heads);

// Pooling by Multihead Attention with k trainable seed queries.
// Permutation-invariant in the rows of z.
ad::Tensor pma(const ad::Tensor& z, const StWeights& w,
               const std::string& prefix, long heads);

// Full two-branch forward pass to the 3-vector velocity output ([1, 3]).
ad::Tensor forward(const TrainingWindow& window, const StWeights& w,
                   bool training, Rng& rng);

// Convenience inference wrapper (no tape, dropout inert).
Vec3 predict(const TrainingWindow& window, const StWeights& w);

struct EpochStats {
    long epoch = 0;
    double train_mse = 0.0;
    double val_mse = 0.0;
};

struct TrainResult {
    StWeights best;                  // lowest validation MSE
    double best_val_mse = 0.0;
    std::vector<EpochStats> history;
};

// SGD-with-momentum MSE training over a shuffled 75:25 split. Fully
// deterministic for a fixed seed.
TrainResult train(const std::vector<TrainingWindow>& dataset,
                  const StHyperParams& hp, std::uint64_t seed);

// Recursive outage bridging: one prediction per 1 Hz epoch inside
// [t_init, t_init + t_duration), each appended to the history ring so later
// epochs consume predicted velocities. imu_stream is the full mission
// record at imu_rate_hz. past_dvl holds the hp.dvl_window most recent valid
// body velocities, oldest first.
std::vector<dvl::DvlMeasurement> predict_outage_sequence(
    std::deque<Vec3> past_dvl, const std::vector<ins::ImuSample>& imu_stream,
    double imu_rate_hz, const StWeights& w, const dvl::BeamGeometry& geom,
    double t_init, double t_duration);

// Versioned JSON persistence; value-exact round trip.
std::string weights_to_json(const StWeights& w, const std::string& config_hash);
StWeights weights_from_json(const std::string& text);
void save_weights(const StWeights& w, const std::string& path,
                  const std::string& config_hash);
StWeights load_weights(const std::string& path);

}  // namespace st
}  // namespace stnav
