#pragma once

// Ordered name -> Tensor registry shared by models, the optimizer, and the
// checkpoint code. Iteration order is insertion order so serialized layouts
// are stable.

#include <string>
#include <vector>

#include "stgn/tensor.hpp"

namespace stgn {

class ParamStore {
public:
    Tensor& add(const std::string& name, Tensor t);
    Tensor& get(const std::string& name);
    const Tensor& get(const std::string& name) const;
    bool has(const std::string& name) const;

    // Sets requires_grad = false on every parameter whose name starts with
    // the prefix.
    void freeze_prefix(const std::string& prefix);

    void zero_grad();

    struct Entry {
        std::string name;
        Tensor tensor;
    };
    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<Entry>& entries() { return entries_; }

private:
    std::vector<Entry> entries_;
};

}  // namespace stgn
