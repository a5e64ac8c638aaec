#include "uwno/data.hpp"
#include "uwno/metrics.hpp"
#include "uwno/model.hpp"
#include "uwno/png_io.hpp"
#include "uwno/selftest.hpp"
#include "uwno/train.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace uwno;

namespace {

struct Options {
    std::string data_dir;
    std::string checkpoint;
    std::string out;
    std::string input;
    std::string overlay;
    std::string config;
    int n = 8;

    int channels = 16;
    std::string wavelet = "db4";
    int level = 2;
    int unet_depth = 3;
    int wno_blocks = 2;
    int size = 128;
    uint64_t seed = 0;

    int epochs = 500;
    int batch_size = 8;
    float lr = 1e-3f;
    float val_fraction = 0.1f;
    float smooth = 1.0f;

    UwnoConfig model_config() const {
        UwnoConfig cfg;
        cfg.channels = channels;
        cfg.wno_blocks = wno_blocks;
        cfg.wavelet = wavelet;
        cfg.level = level;
        cfg.unet_depth = unet_depth;
        cfg.height = size;
        cfg.width = size;
        cfg.seed = seed;
        return cfg;
    }

    TrainConfig train_config() const {
        TrainConfig tc;
        tc.epochs = epochs;
        tc.batch_size = batch_size;
        tc.learning_rate = lr;
        tc.seed = seed;
        tc.smooth = smooth;
        tc.val_fraction = val_fraction;
        tc.out_dir = out;
        return tc;
    }
};

// thrown for config-file problems; maps to the usage exit code
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void add_model_flags(CLI::App* sub, Options& o) {
    sub->add_option("--channels", o.channels, "lifted channel width");
    sub->add_option("--wavelet", o.wavelet, "wavelet basis")
        ->check(CLI::IsMember({"haar", "db2", "db4"}));
    sub->add_option("--level", o.level, "wavelet decomposition level");
    sub->add_option("--unet-depth", o.unet_depth, "unet pooling stages");
    sub->add_option("--wno-blocks", o.wno_blocks, "stacked wno blocks");
    sub->add_option("--size", o.size, "square image size");
    sub->add_option("--seed", o.seed, "seed for init, shuffling and splits");
    sub->add_option("--config", o.config, "JSON config file; flags override its values");
}

// keys mirror flag names; flags given on the command line win
void apply_config(const CLI::App* sub, Options& o) {
    if (o.config.empty()) return;
    std::ifstream is(o.config);
    if (!is) throw ConfigError("config: cannot open " + o.config);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + o.config + ": " + e.what());
    }
    if (!j.is_object()) throw ConfigError("config: " + o.config + ": expected a JSON object");

    auto flag_given = [&](const std::string& name) {
        const CLI::Option* opt = sub->get_option_no_throw(name);
        return opt != nullptr && opt->count() > 0;
    };

    for (const auto& [key, value] : j.items()) {
        const std::string flag = "--" + key;
        try {
            if (key == "data-dir") { if (!flag_given(flag)) o.data_dir = value.get<std::string>(); }
            else if (key == "checkpoint") { if (!flag_given(flag)) o.checkpoint = value.get<std::string>(); }
            else if (key == "out") { if (!flag_given(flag)) o.out = value.get<std::string>(); }
            else if (key == "input") { if (!flag_given(flag)) o.input = value.get<std::string>(); }
            else if (key == "overlay") { if (!flag_given(flag)) o.overlay = value.get<std::string>(); }
            else if (key == "n") { if (!flag_given(flag)) o.n = value.get<int>(); }
            else if (key == "channels") { if (!flag_given(flag)) o.channels = value.get<int>(); }
            else if (key == "wavelet") { if (!flag_given(flag)) o.wavelet = value.get<std::string>(); }
            else if (key == "level") { if (!flag_given(flag)) o.level = value.get<int>(); }
            else if (key == "unet-depth") { if (!flag_given(flag)) o.unet_depth = value.get<int>(); }
            else if (key == "wno-blocks") { if (!flag_given(flag)) o.wno_blocks = value.get<int>(); }
            else if (key == "size") { if (!flag_given(flag)) o.size = value.get<int>(); }
            else if (key == "seed") { if (!flag_given(flag)) o.seed = value.get<uint64_t>(); }
            else if (key == "epochs") { if (!flag_given(flag)) o.epochs = value.get<int>(); }
            else if (key == "batch-size") { if (!flag_given(flag)) o.batch_size = value.get<int>(); }
            else if (key == "lr") { if (!flag_given(flag)) o.lr = value.get<float>(); }
            else if (key == "val-fraction") { if (!flag_given(flag)) o.val_fraction = value.get<float>(); }
            else if (key == "smooth") { if (!flag_given(flag)) o.smooth = value.get<float>(); }
            else {
                throw ConfigError("config: " + o.config + ": unknown key '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config: " + o.config + ": key '" + key + "': " + e.what());
        }
    }
}

int cmd_train(const CLI::App* sub, Options& o) {
    apply_config(sub, o);
    std::vector<Sample> dataset = load_dataset(o.data_dir, o.size);
    std::printf("loaded %zu samples from %s\n", dataset.size(), o.data_dir.c_str());
    TrainResult result = train_loop(o.model_config(), o.train_config(), dataset,
                                    [](const EpochRecord& r) {
                                        std::printf("epoch %4d  loss %.4f  dice %.4f", r.epoch,
                                                    r.train_loss, r.train_dice);
                                        if (!std::isnan(r.val_dice)) {
                                            std::printf("  val %.4f", r.val_dice);
                                        }
                                        std::printf("  %.1fs\n", r.seconds);
                                        std::fflush(stdout);
                                    });
    std::printf("metrics: %s\nfinal checkpoint: %s\n", result.metrics_path.c_str(),
                result.final_checkpoint.c_str());
    if (!result.best_checkpoint.empty()) {
        std::printf("best checkpoint: %s\n", result.best_checkpoint.c_str());
    }
    return 0;
}

int cmd_eval(const CLI::App* sub, Options& o) {
    apply_config(sub, o);
    std::vector<Sample> dataset = load_dataset(o.data_dir, o.size);
    if (dataset.empty()) throw std::runtime_error("eval: no samples in " + o.data_dir);
    UwnoConfig cfg = o.model_config();
    UwnoParams params = make_uwno_params(cfg);
    load_checkpoint(params, o.checkpoint);

    double sum = 0.0, best = 0.0, worst = 1.0;
    for (const Sample& s : dataset) {
        Tensor image = reshape(s.image, {1, 1, cfg.height, cfg.width});
        Tensor mask = predict_mask(image, params, cfg);
        Tensor gt = reshape(s.mask, {1, 1, cfg.height, cfg.width});
        const double d = dice_score(confusion_counts(mask, gt));
        sum += d;
        best = std::max(best, d);
        worst = std::min(worst, d);
    }
    std::printf("{\"n\": %zu, \"mean_dice\": %.6f, \"max_dice\": %.6f, \"min_dice\": %.6f}\n",
                dataset.size(), sum / static_cast<double>(dataset.size()), best, worst);
    return 0;
}

int cmd_predict(const CLI::App* sub, Options& o) {
    apply_config(sub, o);
    UwnoConfig cfg = o.model_config();
    UwnoParams params = make_uwno_params(cfg);
    load_checkpoint(params, o.checkpoint);

    Tensor image = load_image_tensor(o.input, o.size);
    Tensor mask = predict_mask(reshape(image, {1, 1, cfg.height, cfg.width}), params, cfg);

    const int n = o.size;
    std::vector<uint8_t> mask8(static_cast<size_t>(n) * n);
    for (size_t i = 0; i < mask8.size(); ++i) {
        mask8[i] = mask.data()[i] != 0.0f ? 255 : 0;
    }
    if (const fs::path parent = fs::path(o.out).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    write_png_gray(o.out, n, n, mask8.data());
    std::printf("mask: %s\n", o.out.c_str());

    if (!o.overlay.empty()) {
        // predicted foreground blended into the input at 50% opacity (red)
        std::vector<uint8_t> rgb(static_cast<size_t>(n) * n * 3);
        for (size_t i = 0; i < mask8.size(); ++i) {
            const float g = image.data()[i] * 255.0f;
            if (mask8[i]) {
                rgb[3 * i] = static_cast<uint8_t>(std::lround(0.5f * g + 127.5f));
                rgb[3 * i + 1] = static_cast<uint8_t>(std::lround(0.5f * g));
                rgb[3 * i + 2] = static_cast<uint8_t>(std::lround(0.5f * g));
            } else {
                const uint8_t v = static_cast<uint8_t>(std::lround(g));
                rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = v;
            }
        }
        if (const fs::path parent = fs::path(o.overlay).parent_path(); !parent.empty()) {
            fs::create_directories(parent);
        }
        write_png_rgb(o.overlay, n, n, rgb.data());
        std::printf("overlay: %s\n", o.overlay.c_str());
    }
    return 0;
}

int cmd_synth(const CLI::App* sub, Options& o) {
    apply_config(sub, o);
    for (int i = 0; i < o.n; ++i) {
        write_sample_png(synth_sample(o.seed + static_cast<uint64_t>(i), o.size), o.out);
    }
    std::printf("wrote %d samples under %s\n", o.n, o.out.c_str());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    flush_denormals_to_zero();
    CLI::App app{"U-WNO segmentation: wavelet-domain operator + conv branch + U-Net"};
    app.require_subcommand(1);
    Options o;

    CLI::App* train = app.add_subcommand("train", "train on an images/masks directory");
    train->add_option("--data-dir", o.data_dir, "dataset root with images/ and masks/")
        ->required();
    train->add_option("--out", o.out, "output directory")->default_val("runs");
    train->add_option("--epochs", o.epochs, "training epochs");
    train->add_option("--batch-size", o.batch_size, "batch size");
    train->add_option("--lr", o.lr, "Adam learning rate");
    train->add_option("--val-fraction", o.val_fraction, "validation fraction");
    train->add_option("--smooth", o.smooth, "dice smoothing term");
    add_model_flags(train, o);

    CLI::App* eval = app.add_subcommand("eval", "dice statistics of a checkpoint on a dataset");
    eval->add_option("--data-dir", o.data_dir, "dataset root")->required();
    eval->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    add_model_flags(eval, o);

    CLI::App* predict = app.add_subcommand("predict", "segment a single PNG");
    predict->add_option("--input", o.input, "input image")->required();
    predict->add_option("--checkpoint", o.checkpoint, "checkpoint file")->required();
    predict->add_option("--out", o.out, "mask output path")->default_val("mask.png");
    predict->add_option("--overlay", o.overlay, "optional overlay output path");
    add_model_flags(predict, o);

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic speckle-ellipse samples");
    synth->add_option("--n", o.n, "number of samples");
    synth->add_option("--out", o.out, "dataset root to write")->default_val("synth_data");
    synth->add_option("--size", o.size, "square image size");
    synth->add_option("--seed", o.seed, "seed of the first sample");
    synth->add_option("--config", o.config, "JSON config file; flags override its values");

    CLI::App* selftest = app.add_subcommand("selftest", "run the built-in verification suites");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    }

    try {
        if (train->parsed()) return cmd_train(train, o);
        if (eval->parsed()) return cmd_eval(eval, o);
        if (predict->parsed()) return cmd_predict(predict, o);
        if (synth->parsed()) return cmd_synth(synth, o);
        if (selftest->parsed()) return run_selftest(std::cout) ? 0 : 1;
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
