#include "core/set_transformer.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "core/errors.hpp"

namespace stnav {
namespace st {

using ad::Tensor;
using nlohmann::json;

StHyperParams StHyperParams::paper_preset() { return StHyperParams{}; }

StHyperParams StHyperParams::toy_preset() {
    StHyperParams hp;
    hp.latent_dim = 16;
    hp.sab_count = 2;
    hp.heads = 2;
    hp.ff_expansion = 32;
    hp.pool_vectors = 2;
    hp.dropout_p = 0.1;
    hp.learning_rate = 2e-3;
    hp.batch_size = 32;
    hp.epochs = 50;
    return hp;
}

void StHyperParams::validate() const {
    if (latent_dim <= 0 || sab_count <= 0 || heads <= 0 || ff_expansion <= 0 ||
        pool_vectors <= 0 || batch_size <= 0 || epochs <= 0 || imu_kernel <= 0 ||
        imu_stride <= 0 || dvl_kernel <= 0 || dvl_stride <= 0) {
        throw UsageError("StHyperParams: all dimensions must be positive");
    }
    if (latent_dim % heads != 0) {
        throw UsageError("StHyperParams: latent_dim must be divisible by heads");
    }
    if (patch_size != 1) {
        throw UsageError("StHyperParams: only patch_size 1 is supported");
    }
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw UsageError("StHyperParams: dropout_p must lie in [0, 1)");
    }
    if (imu_window < imu_kernel || dvl_window < dvl_kernel) {
        throw UsageError("StHyperParams: window shorter than patch kernel");
    }
}

Tensor& StWeights::at(const std::string& name) {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("StWeights: unknown tensor " + name);
    return it->second;
}

const Tensor& StWeights::at(const std::string& name) const {
    auto it = params.find(name);
    if (it == params.end()) throw UsageError("StWeights: unknown tensor " + name);
    return it->second;
}

StWeights StWeights::clone() const {
    StWeights out;
    out.hp = hp;
    out.seed = seed;
    for (const auto& [name, t] : params) out.params.emplace(name, t.clone());
    return out;
}

namespace {

Tensor make_param(std::vector<long> shape, long fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return Tensor::uniform(std::move(shape), -bound, bound, rng, true);
}

void add_mab_params(StWeights& w, const std::string& prefix,
                    const StHyperParams& hp, Rng& rng) {
    const long d = hp.latent_dim;
    const long f = hp.ff_expansion;
    for (const char* n : {"wq", "wk", "wv", "wo"})
        w.params.emplace(prefix + n, make_param({d, d}, d, rng));
    for (const char* n : {"bq", "bk", "bv", "bo"})
        w.params.emplace(prefix + n, make_param({d}, d, rng));
    w.params.emplace(prefix + "ln0.g", Tensor::full({d}, 1.0, true));
    w.params.emplace(prefix + "ln0.b", Tensor::zeros({d}, true));
    w.params.emplace(prefix + "ln1.g", Tensor::full({d}, 1.0, true));
    w.params.emplace(prefix + "ln1.b", Tensor::zeros({d}, true));
    w.params.emplace(prefix + "ff.w1", make_param({d, f}, d, rng));
    w.params.emplace(prefix + "ff.b1", make_param({f}, d, rng));
    w.params.emplace(prefix + "ff.w2", make_param({f, d}, f, rng));
    w.params.emplace(prefix + "ff.b2", make_param({d}, f, rng));
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
    return ad::add_rowvec(ad::matmul(x, w), b);
}

// Multihead attention with query rows x and key/value rows y.
Tensor multihead(const Tensor& x, const Tensor& y, const StWeights& w,
                 const std::string& prefix, long heads) {
    const long d = w.hp.latent_dim;
    const long dk = d / heads;
    Tensor q = ad::split_heads(linear(x, w.at(prefix + "wq"), w.at(prefix + "bq")), heads);
    Tensor k = ad::split_heads(linear(y, w.at(prefix + "wk"), w.at(prefix + "bk")), heads);
    Tensor v = ad::split_heads(linear(y, w.at(prefix + "wv"), w.at(prefix + "bv")), heads);
    Tensor scores = ad::scale(ad::matmul(q, ad::transpose_last2(k)),
                              1.0 / std::sqrt(static_cast<double>(dk)));
    Tensor ctx = ad::merge_heads(ad::matmul(ad::softmax(scores), v));
    return linear(ctx, w.at(prefix + "wo"), w.at(prefix + "bo"));
}

// MAB(X, Y) = LN(H + rFF(H)), H = LN(X + Multihead(X, Y, Y)).
Tensor mab(const Tensor& x, const Tensor& y, const StWeights& w,
           const std::string& prefix, long heads) {
    Tensor h = ad::layer_norm(ad::add(x, multihead(x, y, w, prefix, heads)),
                              w.at(prefix + "ln0.g"), w.at(prefix + "ln0.b"));
    Tensor ff = linear(ad::relu(linear(h, w.at(prefix + "ff.w1"), w.at(prefix + "ff.b1"))),
                       w.at(prefix + "ff.w2"), w.at(prefix + "ff.b2"));
    return ad::layer_norm(ad::add(h, ff), w.at(prefix + "ln1.g"),
                          w.at(prefix + "ln1.b"));
}

}  // namespace

StWeights init_weights(const StHyperParams& hp, std::uint64_t seed) {
    hp.validate();
    StWeights w;
    w.hp = hp;
    w.seed = seed;
    Rng rng = Rng(seed).fork(0x57);
    const long d = hp.latent_dim;
    const long k = hp.pool_vectors;

    // Creation order is fixed; map iteration order (by name) drives the
    // optimizer and persistence.
    for (const std::string br : {"dvl", "imu"}) {
        const long ch = (br == "dvl") ? hp.dvl_channels : hp.imu_channels;
        const long kernel = (br == "dvl") ? hp.dvl_kernel : hp.imu_kernel;
        w.params.emplace(br + ".pe.w", make_param({d, ch, kernel}, ch * kernel, rng));
        w.params.emplace(br + ".pe.b", make_param({d}, ch * kernel, rng));
        for (long i = 0; i < hp.sab_count; ++i)
            add_mab_params(w, br + ".sab" + std::to_string(i) + ".", hp, rng);
        w.params.emplace(br + ".pma.pre.w", make_param({d, d}, d, rng));
        w.params.emplace(br + ".pma.pre.b", make_param({d}, d, rng));
        w.params.emplace(br + ".pma.seeds", make_param({k, d}, d, rng));
        add_mab_params(w, br + ".pma.", hp, rng);
        add_mab_params(w, br + ".dec.", hp, rng);
    }
    const long concat_dim = 2 * k * d;
    w.params.emplace("head.fc1.w", make_param({concat_dim, d}, concat_dim, rng));
    w.params.emplace("head.fc1.b", make_param({d}, concat_dim, rng));
    w.params.emplace("head.fc2.w", make_param({d, 3}, d, rng));
    w.params.emplace("head.fc2.b", make_param({3}, d, rng));
    return w;
}

Tensor patch_embed(const Tensor& x, const Tensor& w, const Tensor& b,
                   long stride) {
    // x arrives time-major [L, C]; the convolution runs channels-first.
    Tensor patches = ad::transpose2d(ad::conv1d(ad::transpose2d(x), w, stride));
    return ad::add_rowvec(patches, b);
}

Tensor sab(const Tensor& x, const StWeights& w, const std::string& prefix,
           long heads) {
    return mab(x, x, w, prefix, heads);
}

Tensor pma(const Tensor& z, const StWeights& w, const std::string& prefix,
           long heads) {
    Tensor processed = ad::relu(linear(z, w.at(prefix + "pre.w"), w.at(prefix + "pre.b")));
    return mab(w.at(prefix + "seeds"), processed, w, prefix, heads);
}

namespace {

Tensor branch_forward(const Tensor& input, const std::string& br,
                      const StWeights& w) {
    const StHyperParams& hp = w.hp;
    const long stride = (br == "dvl") ? hp.dvl_stride : hp.imu_stride;
    Tensor x = patch_embed(input, w.at(br + ".pe.w"), w.at(br + ".pe.b"), stride);
    for (long i = 0; i < hp.sab_count; ++i)
        x = sab(x, w, br + ".sab" + std::to_string(i) + ".", hp.heads);
    Tensor pooled = pma(x, w, br + ".pma.", hp.heads);
    Tensor decoded = sab(pooled, w, br + ".dec.", hp.heads);
    return ad::reshape(decoded, {1, hp.pool_vectors * hp.latent_dim});
}

}  // namespace

Tensor forward(const TrainingWindow& window, const StWeights& w, bool training,
               Rng& rng) {
    const long kd = w.hp.pool_vectors * w.hp.latent_dim;
    Tensor joint = ad::concat0({ad::reshape(branch_forward(window.dvl_past, "dvl", w), {kd}),
                                ad::reshape(branch_forward(window.imu_past, "imu", w), {kd})});
    Tensor flat = ad::reshape(joint, {1, 2 * kd});
    Tensor hidden = linear(flat, w.at("head.fc1.w"), w.at("head.fc1.b"));
    hidden = ad::tanh_op(ad::dropout(hidden, w.hp.dropout_p, training, rng));
    return linear(hidden, w.at("head.fc2.w"), w.at("head.fc2.b"));
}

Vec3 predict(const TrainingWindow& window, const StWeights& w) {
    ad::NoGradGuard guard;
    Rng unused(0);
    Tensor out = forward(window, w, false, unused);
    return Vec3(out.value(0), out.value(1), out.value(2));
}

TrainResult train(const std::vector<TrainingWindow>& dataset,
                  const StHyperParams& hp, std::uint64_t seed) {
    hp.validate();
    if (dataset.empty()) throw DataError("train: empty dataset");

    Rng rng = Rng(seed).fork(0x7e);
    std::vector<std::size_t> indices(dataset.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    rng.shuffle(indices);
    const std::size_t n_train =
        std::max<std::size_t>(1, (indices.size() * 3) / 4);
    std::vector<std::size_t> train_idx(indices.begin(), indices.begin() + static_cast<long>(n_train));
    std::vector<std::size_t> val_idx(indices.begin() + static_cast<long>(n_train), indices.end());
    if (val_idx.empty()) val_idx = train_idx;  // degenerate tiny datasets

    StWeights weights = init_weights(hp, seed);
    std::map<std::string, std::vector<double>> momentum;
    for (auto& [name, t] : weights.params)
        momentum.emplace(name, std::vector<double>(static_cast<std::size_t>(t.numel()), 0.0));

    auto eval_mse = [&](const std::vector<std::size_t>& idx) {
        ad::NoGradGuard guard;
        Rng quiet(0);
        double s = 0.0;
        for (std::size_t i : idx) {
            Tensor pred = forward(dataset[i], weights, false, quiet);
            Tensor tgt = Tensor::from_data(
                {1, 3}, {dataset[i].target.x(), dataset[i].target.y(), dataset[i].target.z()});
            s += ad::mse_loss(pred, tgt).scalar();
        }
        return s / static_cast<double>(idx.size());
    };

    TrainResult result;
    result.best_val_mse = std::numeric_limits<double>::infinity();
    for (long epoch = 0; epoch < hp.epochs; ++epoch) {
        rng.shuffle(train_idx);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < train_idx.size();
             start += static_cast<std::size_t>(hp.batch_size)) {
            const std::size_t stop =
                std::min(train_idx.size(), start + static_cast<std::size_t>(hp.batch_size));
            const double bsize = static_cast<double>(stop - start);
            for (auto& [name, t] : weights.params) t.zero_grad();
            for (std::size_t bi = start; bi < stop; ++bi) {
                const TrainingWindow& win = dataset[train_idx[bi]];
                Tensor pred = forward(win, weights, true, rng);
                Tensor tgt = Tensor::from_data(
                    {1, 3}, {win.target.x(), win.target.y(), win.target.z()});
                Tensor loss = ad::mse_loss(pred, tgt);
                ad::backward(loss);
                loss_sum += loss.scalar();
            }
            for (auto& [name, t] : weights.params) {
                double* g = t.grad_data();
                double* m = momentum[name].data();
                double* v = t.data();
                for (long i = 0; i < t.numel(); ++i) {
                    m[i] = hp.momentum * m[i] + g[i] / bsize;
                    v[i] -= hp.learning_rate * m[i];
                }
            }
        }
        EpochStats stats;
        stats.epoch = epoch;
        stats.train_mse = loss_sum / static_cast<double>(train_idx.size());
        stats.val_mse = eval_mse(val_idx);
        result.history.push_back(stats);
        if (stats.val_mse < result.best_val_mse) {
            result.best_val_mse = stats.val_mse;
            result.best = weights.clone();
        }
    }
    return result;
}

std::vector<dvl::DvlMeasurement> predict_outage_sequence(
    std::deque<Vec3> past_dvl, const std::vector<ins::ImuSample>& imu_stream,
    double imu_rate_hz, const StWeights& w, const dvl::BeamGeometry& geom,
    double t_init, double t_duration) {
    const StHyperParams& hp = w.hp;
    if (static_cast<long>(past_dvl.size()) != hp.dvl_window) {
        throw DataError("predict_outage_sequence: expected exactly " +
                        std::to_string(hp.dvl_window) + " past DVL velocities");
    }
    std::vector<dvl::DvlMeasurement> out;
    if (t_duration <= 0.0) return out;

    const long m = hp.imu_window;
    // 1 Hz epochs inside [t_init, t_init + t_duration).
    const long first_epoch = static_cast<long>(std::ceil(t_init - 1e-9));
    for (long epoch = first_epoch; static_cast<double>(epoch) < t_init + t_duration; ++epoch) {
        const long end_idx = static_cast<long>(std::llround(epoch * imu_rate_hz));
        const long begin_idx = end_idx - m;
        if (begin_idx < 0 || end_idx > static_cast<long>(imu_stream.size())) {
            throw DataError("predict_outage_sequence: insufficient IMU history at t=" +
                            std::to_string(epoch));
        }
        TrainingWindow win;
        {
            std::vector<double> dvl_data;
            dvl_data.reserve(static_cast<std::size_t>(hp.dvl_window) * 3);
            for (const Vec3& v : past_dvl) {
                dvl_data.push_back(v.x());
                dvl_data.push_back(v.y());
                dvl_data.push_back(v.z());
            }
            win.dvl_past = ad::Tensor::from_data({hp.dvl_window, 3}, std::move(dvl_data));
            std::vector<double> imu_data;
            imu_data.reserve(static_cast<std::size_t>(m) * 6);
            for (long i = begin_idx; i < end_idx; ++i) {
                const auto& s = imu_stream[static_cast<std::size_t>(i)];
                for (int c = 0; c < 3; ++c) imu_data.push_back(s.f_b(c));
                for (int c = 0; c < 3; ++c) imu_data.push_back(s.omega_b(c));
            }
            win.imu_past = ad::Tensor::from_data({m, 6}, std::move(imu_data));
        }
        const Vec3 v_pred = predict(win, w);
        past_dvl.pop_front();
        past_dvl.push_back(v_pred);

        dvl::DvlMeasurement meas;
        meas.t = static_cast<double>(epoch);
        meas.body_velocity = v_pred;
        meas.beams = geom.A * v_pred;
        meas.valid = true;
        meas.predicted = true;
        out.push_back(meas);
    }
    return out;
}

// --- persistence -----------------------------------------------------------

namespace {

json hp_to_json(const StHyperParams& hp) {
    return json{{"imu_kernel", hp.imu_kernel},
                {"imu_stride", hp.imu_stride},
                {"dvl_kernel", hp.dvl_kernel},
                {"dvl_stride", hp.dvl_stride},
                {"patch_size", hp.patch_size},
                {"latent_dim", hp.latent_dim},
                {"sab_count", hp.sab_count},
                {"heads", hp.heads},
                {"ff_expansion", hp.ff_expansion},
                {"pool_vectors", hp.pool_vectors},
                {"dropout_p", hp.dropout_p},
                {"learning_rate", hp.learning_rate},
                {"momentum", hp.momentum},
                {"batch_size", hp.batch_size},
                {"epochs", hp.epochs},
                {"imu_channels", hp.imu_channels},
                {"dvl_channels", hp.dvl_channels},
                {"imu_window", hp.imu_window},
                {"dvl_window", hp.dvl_window}};
}

StHyperParams hp_from_json(const json& j) {
    StHyperParams hp;
    hp.imu_kernel = j.at("imu_kernel").get<long>();
    hp.imu_stride = j.at("imu_stride").get<long>();
    hp.dvl_kernel = j.at("dvl_kernel").get<long>();
    hp.dvl_stride = j.at("dvl_stride").get<long>();
    hp.patch_size = j.at("patch_size").get<long>();
    hp.latent_dim = j.at("latent_dim").get<long>();
    hp.sab_count = j.at("sab_count").get<long>();
    hp.heads = j.at("heads").get<long>();
    hp.ff_expansion = j.at("ff_expansion").get<long>();
    hp.pool_vectors = j.at("pool_vectors").get<long>();
    hp.dropout_p = j.at("dropout_p").get<double>();
    hp.learning_rate = j.at("learning_rate").get<double>();
    hp.momentum = j.at("momentum").get<double>();
    hp.batch_size = j.at("batch_size").get<long>();
    hp.epochs = j.at("epochs").get<long>();
    hp.imu_channels = j.at("imu_channels").get<long>();
    hp.dvl_channels = j.at("dvl_channels").get<long>();
    hp.imu_window = j.at("imu_window").get<long>();
    hp.dvl_window = j.at("dvl_window").get<long>();
    return hp;
}

}  // namespace

std::string weights_to_json(const StWeights& w, const std::string& config_hash) {
    json doc;
    doc["format"] = "stnav-weights";
    doc["version"] = 1;
    doc["seed"] = w.seed;
    doc["config_hash"] = config_hash;
    doc["hyperparams"] = hp_to_json(w.hp);
    json tensors = json::array();
    for (const auto& [name, t] : w.params) {
        json entry;
        entry["name"] = name;
        entry["shape"] = t.shape();
        entry["data"] = std::vector<double>(t.data(), t.data() + t.numel());
        tensors.push_back(std::move(entry));
    }
    doc["tensors"] = std::move(tensors);
    return doc.dump();
}

StWeights weights_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw DataError(std::string("weights: invalid JSON: ") + e.what());
    }
    if (doc.value("format", "") != "stnav-weights" || doc.value("version", 0) != 1) {
        throw DataError("weights: unrecognized format or version");
    }
    StWeights w;
    w.hp = hp_from_json(doc.at("hyperparams"));
    w.seed = doc.at("seed").get<std::uint64_t>();
    for (const auto& entry : doc.at("tensors")) {
        const std::string name = entry.at("name").get<std::string>();
        auto shape = entry.at("shape").get<std::vector<long>>();
        auto data = entry.at("data").get<std::vector<double>>();
        w.params.emplace(name, ad::Tensor::from_data(std::move(shape), std::move(data)));
    }
    // Validate against a freshly initialized shape table.
    StWeights ref = init_weights(w.hp, 0);
    if (ref.params.size() != w.params.size()) {
        throw DataError("weights: tensor set does not match hyperparameters");
    }
    for (const auto& [name, t] : ref.params) {
        auto it = w.params.find(name);
        if (it == w.params.end() || it->second.shape() != t.shape()) {
            throw DataError("weights: missing or misshaped tensor " + name);
        }
    }
    return w;
}

void save_weights(const StWeights& w, const std::string& path,
                  const std::string& config_hash) {
    std::ofstream f(path);
    if (!f) throw DataError("weights: cannot open " + path + " for writing");
    f << weights_to_json(w, config_hash) << "\n";
}

StWeights load_weights(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DataError("weights: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)),
                     std::istreambuf_iterator<char>());
    return weights_from_json(text);
}

}  // namespace st
}  // namespace stnav
