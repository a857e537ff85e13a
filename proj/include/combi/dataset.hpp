#pragma once

#include <string>
#include <vector>

#include "combi/camera.hpp"
#include "combi/image.hpp"

namespace combi {

// Posed image collection with train/test split tags. Every camera has one
// image at a shared resolution.
struct Dataset {
    std::vector<Camera> cameras;
    std::vector<Image> images;
    std::vector<int> train_ids;
    std::vector<int> test_ids;

    int size() const { return static_cast<int>(cameras.size()); }
    void validate() const;
};

// Reads a transforms manifest: camera_angle_x plus per-frame 4x4
// camera-to-world matrices and image paths (relative to the manifest).
// Focal length comes from the pinhole relation 0.5*W/tan(angle/2).
// Optional "near"/"far" keys override the 2/6 defaults.
Dataset load_transforms_dataset(const std::string& manifest_path);

// Writes a manifest plus one portable image per view next to it.
void save_transforms_dataset(const std::string& manifest_path, const Dataset& ds,
                             double camera_angle_x);

// Deterministic few-shot split: every 8th view is test; n_train views
// evenly spaced among the remainder become train.
Dataset make_fewshot_split(const Dataset& ds, int n_train);

}  // namespace combi
