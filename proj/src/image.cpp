#include "combi/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace combi {

namespace {

static_assert(std::endian::native == std::endian::little,
              "depth files are little-endian; big-endian hosts need byte swaps");

unsigned char quantize(double v) {
    double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
    return static_cast<unsigned char>(std::clamp(q, 0.0, 255.0));
}

}  // namespace

void write_image(const std::string& path, const Image& img) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("write_image: cannot open " + tmp);
        out << "P6\n" << img.width << " " << img.height << "\n255\n";
        std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
        for (int j = 0; j < img.height; ++j) {
            for (int i = 0; i < img.width; ++i)
                for (int c = 0; c < 3; ++c)
                    row[static_cast<std::size_t>(i) * 3 + c] = quantize(img.at(i, j, c));
            out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
        }
        if (!out) throw std::runtime_error("write_image: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_image: rename failed for " + path);
}

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_image: cannot open " + path);
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255)
        throw std::runtime_error("read_image: unsupported header in " + path);
    in.get();  // single whitespace byte after the header
    Image img(w, h);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (int j = 0; j < h; ++j) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw std::runtime_error("read_image: truncated payload in " + path);
        for (int i = 0; i < w; ++i)
            for (int c = 0; c < 3; ++c)
                img.at(i, j, c) = row[static_cast<std::size_t>(i) * 3 + c] / 255.0;
    }
    return img;
}

void write_depth(const std::string& path, const std::vector<double>& depth, int width, int height) {
    if (static_cast<std::size_t>(width) * height != depth.size())
        throw std::invalid_argument("write_depth: size mismatch");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    std::vector<float> payload(depth.size());
    for (std::size_t i = 0; i < depth.size(); ++i) {
        payload[i] = static_cast<float>(depth[i]);
        lo = std::min(lo, static_cast<double>(payload[i]));
        hi = std::max(hi, static_cast<double>(payload[i]));
    }
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("write_depth: cannot open " + tmp);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
        if (!out) throw std::runtime_error("write_depth: write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("write_depth: rename failed for " + path);
    std::ofstream meta(path + ".meta", std::ios::trunc);
    if (!meta) throw std::runtime_error("write_depth: cannot open " + path + ".meta");
    meta.precision(9);
    meta << width << " " << height << " " << lo << " " << hi << "\n";
}

std::vector<double> read_depth(const std::string& path, int& width, int& height) {
    std::ifstream meta(path + ".meta");
    if (!meta) throw std::runtime_error("read_depth: cannot open " + path + ".meta");
    double lo = 0, hi = 0;
    meta >> width >> height >> lo >> hi;
    if (!meta || width <= 0 || height <= 0)
        throw std::runtime_error("read_depth: malformed sidecar for " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_depth: cannot open " + path);
    std::vector<float> payload(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(payload.data()),
            static_cast<std::streamsize>(payload.size() * sizeof(float)));
    if (!in) throw std::runtime_error("read_depth: truncated payload in " + path);
    return std::vector<double>(payload.begin(), payload.end());
}

}  // namespace combi
