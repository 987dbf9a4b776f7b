#pragma once

#include <cstdint>
#include <map>
#include <set>

#include "dscnn/model.hpp"
#include "dscnn/tensor.hpp"

namespace dscnn {

struct TrainingConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 8;
    int epochs = 30;
    std::uint64_t seed = 1;
    std::set<std::string> freeze_mask;  // layer or parameter names, matched on name boundaries

    void validate() const {
        if (learning_rate <= 0.0) throw std::invalid_argument("config: learning_rate must be > 0");
        if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("config: momentum must be in [0,1)");
        if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
        if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
    }
};

/// True when `name` (e.g. "rgb/cnn/conv1.weight") is covered by a freeze
/// entry, which may be the full parameter name or any prefix ending at a
/// '/' or '.' boundary (e.g. "conv1", "rgb/cnn", "rgb").
inline bool is_frozen(const std::string& name, const std::set<std::string>& freeze_mask) {
    if (freeze_mask.empty()) return false;
    if (freeze_mask.count(name)) return true;
    for (std::size_t i = 0; i < name.size(); ++i) {
        if (name[i] != '/' && name[i] != '.') continue;
        if (freeze_mask.count(name.substr(0, i))) return true;
    }
    return false;
}

/// SGD with momentum and decoupled-by-name freezing:
///   v <- momentum*v - lr*(g + weight_decay*w);  w <- w + v.
/// Velocity is kept per parameter name across steps.
class SgdOptimizer {
  public:
    /// Applies one update. Gradients are looked up by parameter name; a
    /// parameter with no gradient entry is skipped. Non-finite gradients
    /// abort with a diagnostic naming the parameter.
    void step(std::vector<ParamRef>& params, ParamStore& grads, const TrainingConfig& cfg) {
        for (ParamRef& p : params) {
            if (!grads.has(p.name)) continue;
            if (is_frozen(p.name, cfg.freeze_mask)) continue;
            const Tensor& g = grads.at(p.name);
            detail::require(g.same_shape(*p.value),
                            "sgd: gradient shape " + shape_str(g) + " mismatches param '" + p.name + "'");
            if (!all_finite(g))
                throw std::runtime_error("sgd: non-finite gradient in '" + p.name +
                                         "' — aborting epoch");
            Tensor& v = velocity(p.name, p.value->shape());
            Tensor& w = *p.value;
            const float lr = static_cast<float>(cfg.learning_rate);
            const float mom = static_cast<float>(cfg.momentum);
            const float wd = static_cast<float>(cfg.weight_decay);
            for (std::size_t i = 0; i < w.size(); ++i) {
                v[i] = mom * v[i] - lr * (g[i] + wd * w[i]);
                w[i] += v[i];
            }
        }
    }

    void reset() { velocity_.clear(); }

  private:
    Tensor& velocity(const std::string& name, const std::vector<int>& shape) {
        auto it = velocity_.find(name);
        if (it == velocity_.end()) it = velocity_.emplace(name, Tensor(shape)).first;
        return it->second;
    }

    std::map<std::string, Tensor> velocity_;
};

}  // namespace dscnn
