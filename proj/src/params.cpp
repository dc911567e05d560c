#include "stgn/params.hpp"

namespace stgn {

Tensor& ParamStore::add(const std::string& name, Tensor t) {
    if (has(name)) throw ConfigError("ParamStore: duplicate parameter " + name);
    t.set_requires_grad(true);
    entries_.push_back({name, std::move(t)});
    return entries_.back().tensor;
}

Tensor& ParamStore::get(const std::string& name) {
    for (auto& e : entries_) {
        if (e.name == name) return e.tensor;
    }
    throw ConfigError("ParamStore: unknown parameter " + name);
}

const Tensor& ParamStore::get(const std::string& name) const {
    return const_cast<ParamStore*>(this)->get(name);
}

bool ParamStore::has(const std::string& name) const {
    for (const auto& e : entries_) {
        if (e.name == name) return true;
    }
    return false;
}

void ParamStore::freeze_prefix(const std::string& prefix) {
    for (auto& e : entries_) {
        if (e.name.rfind(prefix, 0) == 0) e.tensor.set_requires_grad(false);
    }
}

void ParamStore::zero_grad() {
    for (auto& e : entries_) e.tensor.zero_grad();
}

}  // namespace stgn
