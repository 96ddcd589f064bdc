#pragma once

#include "microlocal/phase_core.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace microlocal {

inline constexpr const char* kSchemaVersion = "microlocal-envelope/1";

// Doubles as JSON: finite values as numbers, +-inf as "inf"/"-inf", NaN as "nan".
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const HLadder& ladder);
HLadder ladder_from_json(const nlohmann::json& j);

// {delta_hat, log_c_hat, r_squared, verdict} plus diagnostics.
nlohmann::json to_json(const DecayFit& fit);
DecayFit decay_fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DecayThresholds& t);

// 8-bit RGB image, row-major from the top row.
struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    RgbImage() = default;
    RgbImage(int w, int h) : width(w), height(h), pixels(std::size_t(w) * h * 3, 255) {}
    void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

void write_png(const RgbImage& img, const std::string& path);

// Binary mask image: true cells black, false white. mask[row][col], row 0 at the bottom.
void write_mask_png(const std::vector<std::vector<bool>>& mask, const std::string& path,
                    int cell_px = 2);

}  // namespace microlocal
