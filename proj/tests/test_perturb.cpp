#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "segaudit/error.hpp"
#include "segaudit/perturb.hpp"
#include "segaudit/preprocess.hpp"

using namespace segaudit;

namespace {

Gray8Slice random_image(std::uint32_t seed, int w, int h) {
    std::mt19937 gen(seed);
    std::uniform_int_distribution<int> v(0, 255);
    Gray8Slice img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(v(gen));
    return img;
}

Gray8Slice all_values_image() {
    Gray8Slice img(16, 16);
    for (int i = 0; i < 256; ++i) img.pixels[i] = static_cast<std::uint8_t>(i);
    return img;
}

Gray8Slice checkerboard(int w, int h) {
    Gray8Slice img(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) img.at(x, y) = (x + y) % 2 ? 255 : 0;
    return img;
}

// Mirror index with the edge sample repeated, written from the definition.
int mirror(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
    return i;
}

// Full 2-D convolution with the outer-product kernel; returns unrounded values.
std::vector<double> blur_2d_oracle(const Gray8Slice& img, int k, double sigma) {
    const int r = k / 2;
    std::vector<double> g(k);
    double s = 0;
    for (int i = 0; i < k; ++i) s += g[i] = std::exp(-double((i - r) * (i - r)) / (2 * sigma * sigma));
    std::vector<double> out(img.size());
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double acc = 0;
            for (int j = -r; j <= r; ++j)
                for (int i = -r; i <= r; ++i)
                    acc += g[i + r] * g[j + r] / (s * s) * img.at(mirror(x + i, img.width), mirror(y + j, img.height));
            out[img.index(x, y)] = acc;
        }
    return out;
}

const SeedDerivation kSeeds{1234, "case0_slice0030", "noise_s10"};

}  // namespace

TEST(Conditions, DefaultSetInProtocolOrder) {
    const auto c = default_conditions();
    std::vector<std::string> ids;
    for (const auto& x : c) ids.push_back(x.id);
    EXPECT_EQ(ids, (std::vector<std::string>{"clean", "blur_k3", "blur_k7", "noise_s10", "noise_s25", "downup_0.5",
                                             "downup_0.25", "contrast_0.8", "contrast_1.2", "gamma_0.8", "gamma_1.2"}));
    EXPECT_EQ(c[2].severity, Severity::Moderate);
    EXPECT_EQ(c[4].severity, Severity::Moderate);
    EXPECT_EQ(c[6].severity, Severity::Moderate);
    EXPECT_EQ(c[7].severity, Severity::Low);
    EXPECT_EQ(c[0].severity, Severity::None);
}

TEST(Conditions, IdsRoundTrip) {
    for (const auto& c : default_conditions()) EXPECT_EQ(parse_condition_id(c.id), c);
    const auto custom = parse_condition_id("blur_k5");
    EXPECT_EQ(custom.parameter, 5);
    EXPECT_EQ(custom.severity, Severity::Low);
}

TEST(Conditions, RejectsBadIdsAndParameters) {
    EXPECT_THROW(parse_condition_id("blur_k4"), ParameterError);
    EXPECT_THROW(parse_condition_id("blur_k3.0"), ParameterError);
    EXPECT_THROW(parse_condition_id("sharpen_2"), ParameterError);
    EXPECT_THROW(parse_condition_id("noise_s"), ParameterError);
    EXPECT_THROW(make_condition(PerturbationKind::DownUp, 1.5), ParameterError);
    EXPECT_THROW(make_condition(PerturbationKind::DownUp, 0), ParameterError);
    EXPECT_THROW(make_condition(PerturbationKind::Noise, -1), ParameterError);
    EXPECT_THROW(make_condition(PerturbationKind::Gamma, 0), ParameterError);
    EXPECT_THROW(make_condition(PerturbationKind::Contrast, -0.5), ParameterError);
}

TEST(Conditions, DisplayLabels) {
    EXPECT_EQ(display_label(parse_condition_id("blur_k3")), "Blur (k=3)");
    EXPECT_EQ(display_label(parse_condition_id("noise_s25")), "Noise (σ=25)");
    EXPECT_EQ(display_label(parse_condition_id("downup_0.25")), "Down-Up (×0.25)");
    EXPECT_EQ(display_label(parse_condition_id("gamma_1.2")), "Gamma (γ=1.2)");
    EXPECT_EQ(display_label(clean_condition()), "Clean (baseline)");
}

TEST(Identities, AllNeutralParametersAreBitExact) {
    const auto img = random_image(1, 37, 23);
    EXPECT_EQ(apply_condition(img, clean_condition(), kSeeds), img);
    EXPECT_EQ(gamma_correct(img, 1.0), img);
    EXPECT_EQ(contrast_scale(img, 1.0), img);
    EXPECT_EQ(contrast_scale(img, 1.0, 128.0), img);
    EXPECT_EQ(down_up(img, 1.0), img);
    EXPECT_EQ(add_gaussian_noise(img, 0.0, 99), img);
    EXPECT_EQ(gaussian_blur(img, 1), img);
    EXPECT_EQ(resize_bilinear(img, img.width, img.height), img);
    EXPECT_EQ(apply_condition(img, make_condition(PerturbationKind::Gamma, 1.0), kSeeds), img);
    EXPECT_EQ(apply_condition(img, make_condition(PerturbationKind::Blur, 1), kSeeds), img);
}

TEST(Lut, MonotoneForAllInputs) {
    const auto img = all_values_image();
    for (double a : {0.5, 0.8, 1.2, 2.0}) {
        const auto out = contrast_scale(img, a);
        for (int v = 1; v < 256; ++v) EXPECT_GE(out.pixels[v], out.pixels[v - 1]) << a << " " << v;
    }
    for (double g : {0.5, 0.8, 1.2, 3.0}) {
        const auto out = gamma_correct(img, g);
        for (int v = 1; v < 256; ++v) EXPECT_GE(out.pixels[v], out.pixels[v - 1]) << g << " " << v;
        EXPECT_EQ(out.pixels[0], 0);
        EXPECT_EQ(out.pixels[255], 255);
    }
}

TEST(Lut, HandValues) {
    const auto img = all_values_image();
    const auto c = contrast_scale(img, 1.2);
    EXPECT_EQ(c.pixels[100], 120);
    EXPECT_EQ(c.pixels[250], 255);
    const auto c8 = contrast_scale(img, 0.8);
    EXPECT_EQ(c8.pixels[255], 204);
    const auto g = gamma_correct(img, 0.8);
    EXPECT_EQ(g.pixels[64], quantize_u8(255 * std::pow(64 / 255.0, 0.8)));
    EXPECT_EQ(contrast_scale(img, 0.5, 128).pixels[0], 64);
}

TEST(Blur, SigmaRule) {
    EXPECT_DOUBLE_EQ(blur_sigma_for_kernel(3), 0.8);
    EXPECT_DOUBLE_EQ(blur_sigma_for_kernel(7), 1.4);
    EXPECT_DOUBLE_EQ(blur_sigma_for_kernel(5), 1.1);
}

TEST(Blur, KernelIsNormalizedAndSymmetric) {
    for (int k : {3, 5, 7, 9}) {
        const auto t = gaussian_kernel(k, blur_sigma_for_kernel(k));
        double s = 0;
        for (double v : t) s += v;
        EXPECT_NEAR(s, 1.0, 1e-15);
        for (int i = 0; i < k; ++i) EXPECT_EQ(t[i], t[k - 1 - i]);
    }
    EXPECT_THROW(gaussian_kernel(4, 1.0), ParameterError);
    EXPECT_THROW(gaussian_kernel(3, 0.0), ParameterError);
}

TEST(Blur, PreservesConstants) {
    for (int v : {0, 1, 77, 128, 254, 255}) {
        const Gray8Slice img(13, 9, static_cast<std::uint8_t>(v));
        EXPECT_EQ(gaussian_blur(img, 3), img);
        EXPECT_EQ(gaussian_blur(img, 7), img);
        EXPECT_EQ(gaussian_blur(img, 7, 3.0), img);
    }
}

TEST(Blur, MatchesDirectConvolution) {
    for (int k : {3, 7}) {
        const auto img = random_image(10 + k, 19, 11);
        const double sigma = blur_sigma_for_kernel(k);
        const auto ref = blur_2d_oracle(img, k, sigma);
        const auto out = gaussian_blur(img, k);
        for (std::size_t i = 0; i < ref.size(); ++i) {
            const double frac = ref[i] - std::floor(ref[i]);
            if (std::fabs(frac - 0.5) < 1e-9) continue;  // rounding tie, summation order decides
            EXPECT_EQ(out.pixels[i], quantize_u8(ref[i])) << "k=" << k << " i=" << i;
        }
    }
}

TEST(Blur, KernelLargerThanImageStillReflects) {
    const auto img = random_image(4, 3, 2);
    const auto ref = blur_2d_oracle(img, 9, 2.0);
    const auto out = gaussian_blur(img, 9, 2.0);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.pixels[i], ref[i], 0.5 + 1e-9);
}

TEST(Noise, DeterministicPerSeed) {
    const auto img = random_image(2, 32, 32);
    const auto a = add_gaussian_noise(img, 10, kSeeds.stream_seed());
    const auto b = add_gaussian_noise(img, 10, kSeeds.stream_seed());
    EXPECT_EQ(a, b);
    SeedDerivation other = kSeeds;
    other.slice_id = "case0_slice0031";
    EXPECT_NE(a, add_gaussian_noise(img, 10, other.stream_seed()));
    EXPECT_EQ(apply_condition(img, parse_condition_id("noise_s10"), kSeeds), a);
}

TEST(Noise, MomentsOnMidGray) {
    const Gray8Slice img(200, 200, 128);
    const auto out = add_gaussian_noise(img, 10, 5);
    double m = 0, ss = 0;
    for (auto v : out.pixels) m += v;
    m /= out.size();
    for (auto v : out.pixels) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / (out.size() - 1));
    EXPECT_NEAR(m, 128.0, 0.2);
    EXPECT_NEAR(sd, std::sqrt(100.0 + 1.0 / 12.0), 0.15);  // rounding adds uniform(-.5,.5) variance
}

TEST(DownUp, CheckerboardAveragesToMidGray) {
    for (auto [w, h] : {std::pair{16, 16}, std::pair{64, 32}}) {
        const auto out = down_up(checkerboard(w, h), 0.5);
        for (auto v : out.pixels) ASSERT_EQ(v, 128);
    }
}

TEST(DownUp, PreservesConstantsAndShape) {
    const Gray8Slice img(31, 17, 90);
    for (double s : {0.5, 0.25, 0.3}) {
        const auto out = down_up(img, s);
        EXPECT_EQ(out, img);
    }
}

TEST(DownUp, RejectsDegenerateScale) {
    const Gray8Slice img(3, 3, 0);
    EXPECT_THROW(down_up(img, 0.1), ParameterError);
    EXPECT_THROW(down_up(img, 0.0), ParameterError);
    EXPECT_THROW(down_up(img, 1.5), ParameterError);
}

TEST(Resize, MatchesPixelCenterFormula) {
    const auto img = random_image(9, 10, 6);
    const int ow = 4, oh = 3;
    const auto out = resize_bilinear(img, ow, oh);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            const double sx = std::clamp((x + 0.5) * 10.0 / ow - 0.5, 0.0, 9.0);
            const double sy = std::clamp((y + 0.5) * 6.0 / oh - 0.5, 0.0, 5.0);
            const int x0 = int(sx), y0 = int(sy), x1 = std::min(x0 + 1, 9), y1 = std::min(y0 + 1, 5);
            const double fx = sx - x0, fy = sy - y0;
            const double v = (1 - fy) * ((1 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
                             fy * ((1 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
            EXPECT_EQ(out.at(x, y), quantize_u8(v));
        }
}

TEST(Apply, OptionsOverrideDefaults) {
    const auto img = random_image(3, 20, 20);
    PerturbOptions opts;
    opts.blur_sigma = 2.5;
    EXPECT_EQ(apply_condition(img, parse_condition_id("blur_k7"), kSeeds, opts), gaussian_blur(img, 7, 2.5));
    opts.contrast_center = 128;
    EXPECT_EQ(apply_condition(img, parse_condition_id("contrast_1.2"), kSeeds, opts), contrast_scale(img, 1.2, 128));
}

TEST(Apply, OutputKeepsShapeForEveryCondition) {
    const auto img = random_image(6, 33, 21);
    for (const auto& c : default_conditions()) {
        const auto out = apply_condition(img, c, kSeeds);
        EXPECT_TRUE(out.same_shape(img)) << c.id;
    }
}
