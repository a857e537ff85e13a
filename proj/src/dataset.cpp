#include "combi/dataset.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace combi {

namespace fs = std::filesystem;
using nlohmann::json;

void Dataset::validate() const {
    if (cameras.size() != images.size())
        throw std::invalid_argument("Dataset: one image per camera required");
    for (std::size_t v = 0; v < cameras.size(); ++v) {
        if (images[v].width != cameras[v].width || images[v].height != cameras[v].height)
            throw std::invalid_argument("Dataset: image/camera resolution mismatch at view " +
                                        std::to_string(v));
        cameras[v].validate();
    }
}

Dataset load_transforms_dataset(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw std::runtime_error("load_transforms_dataset: cannot open " + manifest_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw std::runtime_error("load_transforms_dataset: malformed manifest " + manifest_path +
                                 ": " + e.what());
    }
    if (!doc.contains("camera_angle_x") || !doc.contains("frames"))
        throw std::runtime_error("load_transforms_dataset: manifest " + manifest_path +
                                 " missing camera_angle_x or frames");
    double angle = doc["camera_angle_x"].get<double>();
    double near = doc.value("near", 2.0);
    double far = doc.value("far", 6.0);
    fs::path root = fs::path(manifest_path).parent_path();

    Dataset ds;
    for (const json& frame : doc["frames"]) {
        fs::path img_path = root / frame.at("file_path").get<std::string>();
        if (!fs::exists(img_path) && fs::exists(img_path.string() + ".ppm"))
            img_path = img_path.string() + ".ppm";
        if (!fs::exists(img_path))
            throw std::runtime_error("load_transforms_dataset: missing image " + img_path.string());
        Image img = read_image(img_path.string());

        const json& m = frame.at("transform_matrix");
        Camera cam;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 4; ++c) {
                double v = m.at(r).at(c).get<double>();
                if (!std::isfinite(v))
                    throw std::runtime_error("load_transforms_dataset: non-finite pose entry in " +
                                             manifest_path);
                cam.pose[static_cast<std::size_t>(4 * r + c)] = v;
            }
        cam.width = img.width;
        cam.height = img.height;
        cam.fx = cam.fy = 0.5 * img.width / std::tan(0.5 * angle);
        cam.cx = img.width / 2.0;
        cam.cy = img.height / 2.0;
        cam.near = near;
        cam.far = far;
        ds.cameras.push_back(cam);
        ds.images.push_back(std::move(img));
    }
    ds.validate();
    return ds;
}

void save_transforms_dataset(const std::string& manifest_path, const Dataset& ds,
                             double camera_angle_x) {
    ds.validate();
    fs::path root = fs::path(manifest_path).parent_path();
    json doc;
    doc["camera_angle_x"] = camera_angle_x;
    if (!ds.cameras.empty()) {
        doc["near"] = ds.cameras[0].near;
        doc["far"] = ds.cameras[0].far;
    }
    doc["frames"] = json::array();
    for (int v = 0; v < ds.size(); ++v) {
        std::string name = "view_" + std::to_string(v) + ".ppm";
        write_image((root / name).string(), ds.images[static_cast<std::size_t>(v)]);
        json frame;
        frame["file_path"] = name;
        json m = json::array();
        const Camera& cam = ds.cameras[static_cast<std::size_t>(v)];
        for (int r = 0; r < 3; ++r) {
            json row = json::array();
            for (int c = 0; c < 4; ++c) row.push_back(cam.pose[static_cast<std::size_t>(4 * r + c)]);
            m.push_back(row);
        }
        m.push_back(json::array({0.0, 0.0, 0.0, 1.0}));
        frame["transform_matrix"] = m;
        doc["frames"].push_back(frame);
    }
    std::string tmp = manifest_path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("save_transforms_dataset: cannot open " + tmp);
        out << doc.dump(2) << "\n";
    }
    if (std::rename(tmp.c_str(), manifest_path.c_str()) != 0)
        throw std::runtime_error("save_transforms_dataset: rename failed for " + manifest_path);
}

Dataset make_fewshot_split(const Dataset& ds, int n_train) {
    Dataset out = ds;
    out.train_ids.clear();
    out.test_ids.clear();
    std::vector<int> remainder;
    for (int v = 0; v < ds.size(); ++v) {
        if (v % 8 == 0)
            out.test_ids.push_back(v);
        else
            remainder.push_back(v);
    }
    int m = static_cast<int>(remainder.size());
    if (n_train < 1 || n_train > m)
        throw std::invalid_argument("make_fewshot_split: n_train must be in [1, " +
                                    std::to_string(m) + "]");
    if (n_train == 1) {
        out.train_ids.push_back(remainder[static_cast<std::size_t>(m / 2)]);
    } else {
        for (int k = 0; k < n_train; ++k) {
            int idx = static_cast<int>(std::llround(static_cast<double>(k) * (m - 1) / (n_train - 1)));
            out.train_ids.push_back(remainder[static_cast<std::size_t>(idx)]);
        }
    }
    return out;
}

}  // namespace combi
