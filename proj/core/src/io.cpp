#include "microlocal/io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace microlocal {

nlohmann::json number_to_json(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return v;
}

double number_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw std::invalid_argument("not a number: " + s);
    }
    return j.get<double>();
}

nlohmann::json to_json(const HLadder& ladder) { return nlohmann::json{{"rungs", ladder.rungs}}; }

HLadder ladder_from_json(const nlohmann::json& j) {
    return ladder_from_rungs(j.at("rungs").get<std::vector<double>>());
}

nlohmann::json to_json(const DecayFit& fit) {
    return nlohmann::json{{"delta_hat", number_to_json(fit.delta_hat)},
                          {"log_c_hat", number_to_json(fit.log_c_hat)},
                          {"r_squared", number_to_json(fit.r_squared)},
                          {"verdict", to_string(fit.verdict)},
                          {"prefactor_power", number_to_json(fit.prefactor_power)},
                          {"r2_poly", number_to_json(fit.r2_poly)},
                          {"r2_exp2", number_to_json(fit.r2_exp2)},
                          {"rungs_used", fit.rungs_used},
                          {"underflow_envelope", fit.underflow_envelope}};
}

DecayFit decay_fit_from_json(const nlohmann::json& j) {
    DecayFit f;
    f.delta_hat = number_from_json(j.at("delta_hat"));
    f.log_c_hat = number_from_json(j.at("log_c_hat"));
    f.r_squared = number_from_json(j.at("r_squared"));
    f.verdict = verdict_from_string(j.at("verdict").get<std::string>());
    if (j.contains("prefactor_power")) f.prefactor_power = number_from_json(j["prefactor_power"]);
    if (j.contains("r2_poly")) f.r2_poly = number_from_json(j["r2_poly"]);
    if (j.contains("r2_exp2")) f.r2_exp2 = number_from_json(j["r2_exp2"]);
    if (j.contains("rungs_used")) f.rungs_used = j["rungs_used"].get<int>();
    if (j.contains("underflow_envelope")) f.underflow_envelope = j["underflow_envelope"].get<bool>();
    return f;
}

nlohmann::json to_json(const DecayThresholds& t) {
    return nlohmann::json{{"delta_min", t.delta_min}, {"rho_min", t.rho_min}};
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    auto* p = &pixels[(std::size_t(y) * width + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
}

void write_png(const RgbImage& img, const std::string& path) {
    if (img.width <= 0 || img.height <= 0) throw std::invalid_argument("write_png: empty image");
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng failure writing " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y) {
        png_write_row(png, const_cast<png_bytep>(&img.pixels[std::size_t(y) * img.width * 3]));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

void write_mask_png(const std::vector<std::vector<bool>>& mask, const std::string& path,
                    int cell_px) {
    if (mask.empty() || mask.front().empty()) throw std::invalid_argument("write_mask_png: empty");
    const int rows = static_cast<int>(mask.size());
    const int cols = static_cast<int>(mask.front().size());
    RgbImage img(cols * cell_px, rows * cell_px);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            if (!mask[r][c]) continue;
            for (int dy = 0; dy < cell_px; ++dy) {
                for (int dx = 0; dx < cell_px; ++dx) {
                    img.set(c * cell_px + dx, (rows - 1 - r) * cell_px + dy, 0, 0, 0);
                }
            }
        }
    }
    write_png(img, path);
}

}  // namespace microlocal
