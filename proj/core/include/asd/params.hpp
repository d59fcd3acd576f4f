#pragma once

#include <map>
#include <string>

#include "asd/tensor.hpp"

namespace asd {

// Named trainable tensors. Ordered map so every iteration (optimizer steps,
// checkpointing, finite differences) is deterministic.
class ParameterStore {
public:
    void insert(const std::string& name, Tensor t) {
        if (values_.count(name)) throw ShapeError("duplicate parameter '" + name + "'");
        values_.emplace(name, std::move(t));
    }

    Tensor& at(const std::string& name) {
        auto it = values_.find(name);
        if (it == values_.end()) throw ShapeError("unknown parameter '" + name + "'");
        return it->second;
    }

    const Tensor& at(const std::string& name) const {
        auto it = values_.find(name);
        if (it == values_.end()) throw ShapeError("unknown parameter '" + name + "'");
        return it->second;
    }

    bool contains(const std::string& name) const { return values_.count(name) > 0; }
    size_t size() const { return values_.size(); }

    auto begin() { return values_.begin(); }
    auto end() { return values_.end(); }
    auto begin() const { return values_.begin(); }
    auto end() const { return values_.end(); }

    size_t total_scalars() const {
        size_t n = 0;
        for (auto& [k, v] : values_) n += v.numel();
        return n;
    }

    bool operator==(const ParameterStore& o) const { return values_ == o.values_; }

private:
    std::map<std::string, Tensor> values_;
};

}  // namespace asd
