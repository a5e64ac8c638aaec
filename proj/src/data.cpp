#include "uwno/data.hpp"

#include "uwno/png_io.hpp"
#include "uwno/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

namespace fs = std::filesystem;

namespace uwno {

namespace {

// grayscale float image in [0,1]
std::vector<float> to_gray(const ImageU8& img) {
    const size_t n = static_cast<size_t>(img.width) * img.height;
    std::vector<float> out(n);
    if (img.channels == 1) {
        for (size_t i = 0; i < n; ++i) out[i] = static_cast<float>(img.pixels[i]) / 255.0f;
    } else {
        for (size_t i = 0; i < n; ++i) {
            const int r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
            out[i] = static_cast<float>(r + g + b) / (3.0f * 255.0f);
        }
    }
    return out;
}

// half-pixel-center bilinear resize; identity when sizes match
std::vector<float> resize_bilinear(const std::vector<float>& src, int sw, int sh, int tw, int th) {
    std::vector<float> out(static_cast<size_t>(tw) * th);
    const float sx = static_cast<float>(sw) / static_cast<float>(tw);
    const float sy = static_cast<float>(sh) / static_cast<float>(th);
    for (int y = 0; y < th; ++y) {
        float fy = (static_cast<float>(y) + 0.5f) * sy - 0.5f;
        fy = std::clamp(fy, 0.0f, static_cast<float>(sh - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, sh - 1);
        const float wy = fy - static_cast<float>(y0);
        for (int x = 0; x < tw; ++x) {
            float fx = (static_cast<float>(x) + 0.5f) * sx - 0.5f;
            fx = std::clamp(fx, 0.0f, static_cast<float>(sw - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, sw - 1);
            const float wx = fx - static_cast<float>(x0);
            const float top = src[static_cast<size_t>(y0) * sw + x0] * (1.0f - wx) +
                              src[static_cast<size_t>(y0) * sw + x1] * wx;
            const float bot = src[static_cast<size_t>(y1) * sw + x0] * (1.0f - wx) +
                              src[static_cast<size_t>(y1) * sw + x1] * wx;
            out[static_cast<size_t>(y) * tw + x] = top * (1.0f - wy) + bot * wy;
        }
    }
    return out;
}

std::vector<uint8_t> resize_nearest_u8(const std::vector<uint8_t>& src, int sw, int sh, int tw,
                                       int th) {
    std::vector<uint8_t> out(static_cast<size_t>(tw) * th);
    for (int y = 0; y < th; ++y) {
        int sy = static_cast<int>((static_cast<float>(y) + 0.5f) *
                                  static_cast<float>(sh) / static_cast<float>(th));
        sy = std::min(sy, sh - 1);
        for (int x = 0; x < tw; ++x) {
            int sx = static_cast<int>((static_cast<float>(x) + 0.5f) *
                                      static_cast<float>(sw) / static_cast<float>(tw));
            sx = std::min(sx, sw - 1);
            out[static_cast<size_t>(y) * tw + x] = src[static_cast<size_t>(sy) * sw + sx];
        }
    }
    return out;
}

std::vector<uint8_t> gray_u8(const ImageU8& img) {
    const size_t n = static_cast<size_t>(img.width) * img.height;
    std::vector<uint8_t> out(n);
    if (img.channels == 1) {
        out.assign(img.pixels.begin(), img.pixels.end());
    } else {
        for (size_t i = 0; i < n; ++i) {
            const int r = img.pixels[3 * i], g = img.pixels[3 * i + 1], b = img.pixels[3 * i + 2];
            out[i] = static_cast<uint8_t>((r + g + b) / 3);
        }
    }
    return out;
}

} // namespace

Tensor load_image_tensor(const std::string& path, int target) {
    if (target < 1) throw std::invalid_argument("load_image_tensor: target must be positive");
    ImageU8 img = read_png(path);
    std::vector<float> gray = to_gray(img);
    return Tensor({1, target, target},
                  resize_bilinear(gray, img.width, img.height, target, target));
}

Sample load_sample(const std::string& image_path, const std::string& mask_path, int target) {
    if (target < 1) throw std::invalid_argument("load_sample: target size must be positive");
    ImageU8 img = read_png(image_path);
    ImageU8 msk = read_png(mask_path);

    std::vector<float> gray = to_gray(img);
    std::vector<float> resized = resize_bilinear(gray, img.width, img.height, target, target);

    std::vector<uint8_t> mask8 = gray_u8(msk);
    std::vector<uint8_t> mask_resized =
        resize_nearest_u8(mask8, msk.width, msk.height, target, target);

    Sample s;
    s.image = Tensor({1, target, target}, std::move(resized));
    std::vector<float> mbin(static_cast<size_t>(target) * target);
    for (size_t i = 0; i < mbin.size(); ++i) mbin[i] = mask_resized[i] > 127 ? 1.0f : 0.0f;
    s.mask = Tensor({1, target, target}, std::move(mbin));
    s.id = fs::path(image_path).stem().string();
    return s;
}

std::vector<Sample> load_dataset(const std::string& data_dir, int target) {
    const fs::path images = fs::path(data_dir) / "images";
    const fs::path masks = fs::path(data_dir) / "masks";
    if (!fs::is_directory(images)) {
        throw std::runtime_error("dataset: missing directory " + images.string());
    }
    std::vector<std::string> stems;
    for (const auto& entry : fs::directory_iterator(images)) {
        if (entry.path().extension() == ".png") stems.push_back(entry.path().stem().string());
    }
    std::sort(stems.begin(), stems.end());

    std::vector<Sample> out;
    out.reserve(stems.size());
    for (const auto& stem : stems) {
        const fs::path mask_path = masks / (stem + ".png");
        if (!fs::exists(mask_path)) {
            throw std::runtime_error("dataset: image '" + stem + "' has no mask at " +
                                     mask_path.string());
        }
        out.push_back(load_sample((images / (stem + ".png")).string(), mask_path.string(),
                                  target));
    }
    return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>>
split_dataset(std::vector<Sample> samples, float val_fraction, uint64_t seed) {
    if (val_fraction < 0.0f || val_fraction >= 1.0f) {
        throw std::invalid_argument("split_dataset: val_fraction must be in [0, 1)");
    }
    const size_t n = samples.size();
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    Rng rng(seed);
    for (size_t i = n; i > 1; --i) {
        std::swap(idx[i - 1], idx[rng.below(i)]);
    }
    const size_t val_n = static_cast<size_t>(static_cast<double>(n) * val_fraction);
    std::vector<Sample> val, train;
    val.reserve(val_n);
    train.reserve(n - val_n);
    for (size_t i = 0; i < n; ++i) {
        (i < val_n ? val : train).push_back(std::move(samples[idx[i]]));
    }
    return {std::move(train), std::move(val)};
}

Sample synth_sample(uint64_t seed, int size) {
    if (size < 8 || size % 8 != 0) {
        throw std::invalid_argument("synth_sample: size must be a positive multiple of 8");
    }
    Rng rng(seed);
    const float fsize = static_cast<float>(size);
    const float cx = rng.uniform(fsize / 4.0f, 3.0f * fsize / 4.0f);
    const float cy = rng.uniform(fsize / 4.0f, 3.0f * fsize / 4.0f);
    const float ax = rng.uniform(fsize / 8.0f, fsize / 3.0f);
    const float ay = rng.uniform(fsize / 8.0f, fsize / 3.0f);
    const float theta = rng.uniform(0.0f, 3.14159265f);
    const float ct = std::cos(theta), st = std::sin(theta);

    auto inside = [&](float px, float py, float sa, float sb) {
        const float dx = px - cx, dy = py - cy;
        const float u = ct * dx + st * dy;
        const float v = -st * dx + ct * dy;
        return (u / sa) * (u / sa) + (v / sb) * (v / sb) <= 1.0f;
    };

    const size_t n = static_cast<size_t>(size) * size;
    std::vector<float> mask(n), shape(n);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            const float px = static_cast<float>(x) + 0.5f;
            const float py = static_cast<float>(y) + 0.5f;
            const size_t i = static_cast<size_t>(y) * size + x;
            if (inside(px, py, ax, ay)) {
                mask[i] = 1.0f;
                const bool core = ax > 2.0f && ay > 2.0f && inside(px, py, ax - 2.0f, ay - 2.0f);
                shape[i] = core ? 0.5f : 0.8f;
            } else {
                mask[i] = 0.0f;
                shape[i] = 0.1f;
            }
        }
    }

    // 3x3 mean blur with replicated edges
    std::vector<float> blurred(n);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            float acc = 0.0f;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int yy = std::clamp(y + dy, 0, size - 1);
                    const int xx = std::clamp(x + dx, 0, size - 1);
                    acc += shape[static_cast<size_t>(yy) * size + xx];
                }
            }
            blurred[static_cast<size_t>(y) * size + x] = acc / 9.0f;
        }
    }

    // multiplicative speckle, row-major draw order
    for (auto& v : blurred) {
        v = std::clamp(v * rng.uniform(0.6f, 1.4f), 0.0f, 1.0f);
    }

    Sample s;
    s.image = Tensor({1, size, size}, std::move(blurred));
    s.mask = Tensor({1, size, size}, std::move(mask));
    s.id = "synth_" + std::to_string(seed);
    return s;
}

void write_sample_png(const Sample& s, const std::string& data_dir) {
    const int h = s.image.dim(1), w = s.image.dim(2);
    fs::create_directories(fs::path(data_dir) / "images");
    fs::create_directories(fs::path(data_dir) / "masks");
    std::vector<uint8_t> img(static_cast<size_t>(w) * h), msk(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        img[i] = static_cast<uint8_t>(std::lround(s.image.data()[i] * 255.0f));
        msk[i] = s.mask.data()[i] != 0.0f ? 255 : 0;
    }
    write_png_gray((fs::path(data_dir) / "images" / (s.id + ".png")).string(), w, h, img.data());
    write_png_gray((fs::path(data_dir) / "masks" / (s.id + ".png")).string(), w, h, msk.data());
}

} // namespace uwno
