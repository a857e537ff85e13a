#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "combi/tensor.hpp"

namespace combi {

// Named trainable tensors. Keys are stable across graph rebuilds; the
// trainer feeds them into Graph::param each iteration.
class ParamStore {
public:
    int add(std::string name, Tensor value) {
        names_.push_back(std::move(name));
        values_.push_back(std::move(value));
        return static_cast<int>(values_.size()) - 1;
    }
    int size() const { return static_cast<int>(values_.size()); }
    Tensor& value(int key) { return values_[static_cast<std::size_t>(key)]; }
    const Tensor& value(int key) const { return values_[static_cast<std::size_t>(key)]; }
    const std::string& name(int key) const { return names_[static_cast<std::size_t>(key)]; }
    int find(const std::string& name) const {
        for (int i = 0; i < size(); ++i)
            if (names_[static_cast<std::size_t>(i)] == name) return i;
        return -1;
    }

private:
    std::vector<std::string> names_;
    std::vector<Tensor> values_;
};

struct AdamState {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step = 0;
    std::vector<Tensor> m;  // first moments, one per parameter
    std::vector<Tensor> v;  // second moments
    std::int64_t skipped_nonfinite = 0;

    void init(const ParamStore& params) {
        m.clear();
        v.clear();
        for (int i = 0; i < params.size(); ++i) {
            m.emplace_back(params.value(i).shape);
            v.emplace_back(params.value(i).shape);
        }
    }
};

// Bias-corrected Adam update. Parameters with a non-finite gradient are
// skipped for the step (moments untouched) and counted.
// lr_scale lets the caller run per-group learning-rate schedules.
void adam_step(ParamStore& params, const std::unordered_map<int, Tensor>& grads, AdamState& state,
               const std::vector<double>& lr_scale = {});

}  // namespace combi
