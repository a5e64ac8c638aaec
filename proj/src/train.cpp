#include "uwno/train.hpp"

#include "uwno/metrics.hpp"
#include "uwno/rng.hpp"

#include <json.hpp>

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace fs = std::filesystem;

namespace uwno {

Tensor soft_dice_loss(const Tensor& probs, const Tensor& gt, float smooth) {
    if (probs.shape() != gt.shape()) {
        throw std::invalid_argument("soft_dice_loss: shape mismatch " +
                                    shape_str(probs.shape()) + " vs " + shape_str(gt.shape()));
    }
    if (smooth <= 0.0f) throw std::invalid_argument("soft_dice_loss: smooth must be positive");

    double inter = 0.0, psum = 0.0, gsum = 0.0;
    auto pv = probs.data();
    auto gv = gt.data();
    for (int i = 0; i < probs.numel(); ++i) {
        const float g = gv[static_cast<size_t>(i)];
        if (g != 0.0f && g != 1.0f) {
            throw std::invalid_argument("soft_dice_loss: reference mask is not binary");
        }
        inter += static_cast<double>(pv[static_cast<size_t>(i)]) * g;
        psum += pv[static_cast<size_t>(i)];
        gsum += g;
    }
    const double num = 2.0 * inter + smooth;
    const double den = psum + gsum + smooth;
    const float loss = static_cast<float>(1.0 - num / den);

    auto bw = [num, den](detail::TensorNode& self) {
        auto& pn = *self.parents[0];
        auto& gn = *self.parents[1];
        if (!pn.needs_grad) return;
        auto& dp = pn.grad_buffer();
        const float g0 = self.grad[0];
        const double inv_den2 = 1.0 / (den * den);
        for (size_t i = 0; i < dp.size(); ++i) {
            // d/dp_i [1 - num/den]: num' = 2*g_i, den' = 1
            const double d = (num - 2.0 * gn.value[i] * den) * inv_den2;
            dp[i] += g0 * static_cast<float>(d);
        }
    };
    return detail::make_op({1}, {loss}, {probs, gt}, std::move(bw), "soft_dice_loss");
}

void adam_step(std::vector<Tensor>& params, AdamState& state, float lr) {
    if (state.slots.empty()) {
        state.slots.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.slots[i].m.assign(static_cast<size_t>(params[i].numel()), 0.0f);
            state.slots[i].v.assign(static_cast<size_t>(params[i].numel()), 0.0f);
        }
    }
    if (state.slots.size() != params.size()) {
        throw std::logic_error("adam_step: parameter list changed between steps");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1), state.step_count);
    const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2), state.step_count);

    for (size_t i = 0; i < params.size(); ++i) {
        Tensor& p = params[i];
        if (!p.has_grad()) {
            throw std::logic_error("adam_step: parameter " + std::to_string(i) +
                                   " has no gradient");
        }
        auto& slot = state.slots[i];
        if (slot.m.size() != static_cast<size_t>(p.numel())) {
            throw std::logic_error("adam_step: parameter " + std::to_string(i) +
                                   " changed shape");
        }
        auto g = p.grad();
        auto w = p.data();
        for (size_t j = 0; j < slot.m.size(); ++j) {
            slot.m[j] = state.beta1 * slot.m[j] + (1.0f - state.beta1) * g[j];
            slot.v[j] = state.beta2 * slot.v[j] + (1.0f - state.beta2) * g[j] * g[j];
            const float mhat = static_cast<float>(slot.m[j] / bc1);
            const float vhat = static_cast<float>(slot.v[j] / bc2);
            w[j] -= lr * mhat / (std::sqrt(vhat) + state.eps);
        }
    }
}

// ---- checkpoints -------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'U', 'W', 'N', 'O'};
constexpr uint32_t kVersion = 1;

[[noreturn]] void format_error(const std::string& path, const std::string& why, size_t offset) {
    throw std::runtime_error("checkpoint: " + path + ": " + why + " (offset " +
                             std::to_string(offset) + ")");
}

} // namespace

void save_checkpoint(UwnoParams& params, const std::string& path) {
    nlohmann::json header = nlohmann::json::array();
    std::vector<const Tensor*> order;
    size_t offset = 0;
    for_each_param(params, [&](const std::string& name, Tensor& t) {
        header.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
        order.push_back(&t);
        offset += static_cast<size_t>(t.numel()) * sizeof(float);
    });
    const std::string header_str = header.dump();

    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("checkpoint: cannot open " + path + " for writing");
    os.write(kMagic, 4);
    const uint32_t version = kVersion;
    os.write(reinterpret_cast<const char*>(&version), 4);
    const uint64_t header_len = header_str.size();
    os.write(reinterpret_cast<const char*>(&header_len), 8);
    os.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const Tensor* t : order) {
        os.write(reinterpret_cast<const char*>(t->data().data()),
                 static_cast<std::streamsize>(t->data().size() * sizeof(float)));
    }
    if (!os) throw std::runtime_error("checkpoint: write failed for " + path);
}

void load_checkpoint(UwnoParams& params, const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("checkpoint: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(is)),
                            std::istreambuf_iterator<char>());

    if (bytes.size() < 16) format_error(path, "truncated preamble", bytes.size());
    if (std::memcmp(bytes.data(), kMagic, 4) != 0) format_error(path, "bad magic", 0);
    uint32_t version = 0;
    std::memcpy(&version, bytes.data() + 4, 4);
    if (version != kVersion) {
        format_error(path, "unsupported version " + std::to_string(version), 4);
    }
    uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + 8, 8);
    if (16 + header_len > bytes.size()) format_error(path, "truncated header", 8);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + 16,
                                       bytes.begin() + 16 + static_cast<long>(header_len));
    } catch (const nlohmann::json::exception& e) {
        format_error(path, std::string("header is not valid JSON: ") + e.what(), 16);
    }
    if (!header.is_array()) format_error(path, "header is not a JSON array", 16);

    struct Entry {
        Shape shape;
        size_t offset = 0;
        bool used = false;
    };
    std::map<std::string, Entry> entries;
    for (const auto& item : header) {
        Entry e;
        e.shape = item.at("shape").get<Shape>();
        e.offset = item.at("offset").get<size_t>();
        entries[item.at("name").get<std::string>()] = std::move(e);
    }

    const size_t payload_start = 16 + header_len;
    const size_t payload_size = bytes.size() - payload_start;

    // validate everything before touching any parameter
    size_t expected = 0;
    for_each_param(params, [&](const std::string& name, Tensor& t) {
        auto it = entries.find(name);
        if (it == entries.end()) {
            throw std::runtime_error("checkpoint: " + path + ": missing tensor '" + name + "'");
        }
        if (it->second.shape != t.shape()) {
            throw std::runtime_error("checkpoint: " + path + ": tensor '" + name + "' has shape " +
                                     shape_str(it->second.shape) + ", model expects " +
                                     shape_str(t.shape()));
        }
        const size_t nbytes = static_cast<size_t>(t.numel()) * sizeof(float);
        if (it->second.offset + nbytes > payload_size) {
            format_error(path, "payload for '" + name + "' is truncated",
                         payload_start + it->second.offset);
        }
        it->second.used = true;
        ++expected;
    });
    if (expected != entries.size()) {
        throw std::runtime_error("checkpoint: " + path + ": file holds " +
                                 std::to_string(entries.size()) + " tensors, model expects " +
                                 std::to_string(expected));
    }

    for_each_param(params, [&](const std::string& name, Tensor& t) {
        const Entry& e = entries.at(name);
        std::memcpy(t.data().data(), bytes.data() + payload_start + e.offset,
                    static_cast<size_t>(t.numel()) * sizeof(float));
    });
}

// ---- training loop -----------------------------------------------------------

namespace {

std::pair<Tensor, Tensor> stack_batch(const std::vector<Sample>& set,
                                      const std::vector<size_t>& order, size_t begin,
                                      size_t end) {
    const int h = set[order[begin]].image.dim(1);
    const int w = set[order[begin]].image.dim(2);
    const int b = static_cast<int>(end - begin);
    Tensor images({b, 1, h, w});
    Tensor masks({b, 1, h, w});
    const size_t plane = static_cast<size_t>(h) * w;
    for (size_t i = begin; i < end; ++i) {
        const Sample& s = set[order[i]];
        std::memcpy(images.data().data() + (i - begin) * plane, s.image.data().data(),
                    plane * sizeof(float));
        std::memcpy(masks.data().data() + (i - begin) * plane, s.mask.data().data(),
                    plane * sizeof(float));
    }
    return {std::move(images), std::move(masks)};
}

double batch_dice_sum(const Tensor& logits, const Tensor& masks) {
    const int b = logits.dim(0);
    const size_t plane = static_cast<size_t>(logits.dim(2)) * logits.dim(3);
    double total = 0.0;
    for (int i = 0; i < b; ++i) {
        ConfusionCounts c;
        const float* lv = logits.data().data() + static_cast<size_t>(i) * plane;
        const float* mv = masks.data().data() + static_cast<size_t>(i) * plane;
        for (size_t j = 0; j < plane; ++j) {
            const bool p = lv[j] >= 0.0f;   // sigmoid(v) >= 0.5
            const bool g = mv[j] != 0.0f;
            if (p && g) ++c.tp;
            else if (p) ++c.fp;
            else if (g) ++c.fn;
            else ++c.tn;
        }
        total += dice_score(c);
    }
    return total;
}

double mean_dice(const std::vector<Sample>& set, UwnoParams& params, const UwnoConfig& cfg,
                 int batch_size) {
    if (set.empty()) return std::numeric_limits<double>::quiet_NaN();
    NoGradGuard no_grad;
    std::vector<size_t> order(set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    double total = 0.0;
    const size_t plane = static_cast<size_t>(set[0].image.dim(1)) * set[0].image.dim(2);
    for (size_t begin = 0; begin < set.size(); begin += static_cast<size_t>(batch_size)) {
        const size_t end = std::min(set.size(), begin + static_cast<size_t>(batch_size));
        auto [images, masks] = stack_batch(set, order, begin, end);
        Tensor mask = mask_from_logits(uwno_forward(images, params, cfg));
        for (size_t i = begin; i < end; ++i) {
            const size_t off = (i - begin) * plane;
            ConfusionCounts c;
            for (size_t j = 0; j < plane; ++j) {
                const bool p = mask.data()[off + j] != 0.0f;
                const bool g = masks.data()[off + j] != 0.0f;
                if (p && g) ++c.tp;
                else if (p) ++c.fp;
                else if (g) ++c.fn;
                else ++c.tn;
            }
            total += dice_score(c);
        }
    }
    return total / static_cast<double>(set.size());
}

std::string metrics_line(const EpochRecord& r) {
    char buf[256];
    if (std::isnan(r.val_dice)) {
        std::snprintf(buf, sizeof(buf),
                      "{\"epoch\": %d, \"train_loss\": %.9g, \"train_dice\": %.9g, "
                      "\"val_dice\": null, \"seconds\": %.3f}\n",
                      r.epoch, r.train_loss, r.train_dice, r.seconds);
    } else {
        std::snprintf(buf, sizeof(buf),
                      "{\"epoch\": %d, \"train_loss\": %.9g, \"train_dice\": %.9g, "
                      "\"val_dice\": %.9g, \"seconds\": %.3f}\n",
                      r.epoch, r.train_loss, r.train_dice, r.val_dice, r.seconds);
    }
    return buf;
}

} // namespace

TrainResult train_loop(const UwnoConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::vector<Sample>& dataset, const EpochCallback& on_epoch) {
    if (dataset.empty()) throw std::invalid_argument("train_loop: dataset is empty");
    if (train_cfg.epochs < 1 || train_cfg.batch_size < 1) {
        throw std::invalid_argument("train_loop: epochs and batch_size must be >= 1");
    }
    for (const Sample& s : dataset) {
        if (s.image.shape() != Shape{1, model_cfg.height, model_cfg.width}) {
            throw std::invalid_argument("train_loop: sample '" + s.id + "' has shape " +
                                        shape_str(s.image.shape()) + ", model expects 1x" +
                                        std::to_string(model_cfg.height) + "x" +
                                        std::to_string(model_cfg.width));
        }
    }

    auto [train_set, val_set] =
        split_dataset(dataset, train_cfg.val_fraction, train_cfg.seed);
    if (train_set.empty()) throw std::invalid_argument("train_loop: training split is empty");

    UwnoParams params = make_uwno_params(model_cfg);
    std::vector<Tensor> param_list;
    for_each_param(params, [&](const std::string&, Tensor& t) { param_list.push_back(t); });

    AdamState adam;
    Rng shuffle_rng(train_cfg.seed);

    fs::create_directories(train_cfg.out_dir);
    const std::string metrics_path = (fs::path(train_cfg.out_dir) / "metrics.jsonl").string();
    std::ofstream metrics(metrics_path, std::ios::trunc);
    if (!metrics) throw std::runtime_error("train_loop: cannot write " + metrics_path);

    TrainResult result;
    result.metrics_path = metrics_path;
    result.final_checkpoint = (fs::path(train_cfg.out_dir) / "checkpoint_final.uwno").string();
    const std::string best_path =
        (fs::path(train_cfg.out_dir) / "checkpoint_best.uwno").string();
    double best_val = -1.0;

    std::vector<size_t> order(train_set.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();

        for (size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);
        }

        double loss_sum = 0.0;
        double dice_sum = 0.0;
        int batches = 0;
        EpochRecord rec;
        try {
            for (size_t begin = 0; begin < order.size();
                 begin += static_cast<size_t>(train_cfg.batch_size)) {
                const size_t end =
                    std::min(order.size(), begin + static_cast<size_t>(train_cfg.batch_size));
                auto [images, masks] = stack_batch(train_set, order, begin, end);
                Tensor logits = uwno_forward(images, params, model_cfg);
                Tensor loss = soft_dice_loss(sigmoid(logits), masks, train_cfg.smooth);
                loss_sum += loss.item();
                ++batches;
                // train DS from the logits of this pass, one dice per sample
                dice_sum += batch_dice_sum(logits, masks);
                backward(loss);
                adam_step(param_list, adam, train_cfg.learning_rate);
                for (Tensor& t : param_list) t.zero_grad();
            }
            rec.val_dice = mean_dice(val_set, params, model_cfg, train_cfg.batch_size);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("train_loop: aborted at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(batches) + ": " + e.what());
        }
        rec.epoch = epoch;
        rec.train_loss = loss_sum / std::max(batches, 1);
        rec.train_dice = dice_sum / static_cast<double>(train_set.size());
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);

        metrics << metrics_line(rec);
        metrics.flush();
        if (on_epoch) on_epoch(rec);

        if (!val_set.empty() && rec.val_dice > best_val) {
            best_val = rec.val_dice;
            save_checkpoint(params, best_path);
            result.best_checkpoint = best_path;
        }
    }

    save_checkpoint(params, result.final_checkpoint);
    return result;
}

} // namespace uwno
