#pragma once

#include <string>
#include <vector>

namespace combi {

// H x W x 3 float image, values in [0,1], row-major with the channel
// fastest: data[(j*width + i)*3 + c].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0) {}

    double& at(int i, int j, int c) {
        return data[(static_cast<std::size_t>(j) * width + i) * 3 + c];
    }
    double at(int i, int j, int c) const {
        return data[(static_cast<std::size_t>(j) * width + i) * 3 + c];
    }
};

// Binary PPM (P6, maxval 255). Quantization rounds half up; a write/read
// round trip moves any channel by at most 1/510.
void write_image(const std::string& path, const Image& img);
Image read_image(const std::string& path);

// Raw little-endian float32 payload plus a text sidecar at path + ".meta"
// holding "width height min max". Round trips are bit-exact at f32.
void write_depth(const std::string& path, const std::vector<double>& depth, int width, int height);
std::vector<double> read_depth(const std::string& path, int& width, int& height);

}  // namespace combi
