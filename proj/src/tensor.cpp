#include "stgn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace stgn {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d <= 0) throw ShapeError("non-positive extent in " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = shape;
    n->data.assign(shape_numel(shape), 0.0);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::full(const Shape& shape, double value) {
    Tensor t = zeros(shape);
    std::fill(t.node_->data.begin(), t.node_->data.end(), value);
    return t;
}

Tensor Tensor::from(const Shape& shape, std::vector<double> data) {
    if (data.size() != shape_numel(shape))
        throw ShapeError("data length " + std::to_string(data.size()) + " vs shape " + shape_str(shape));
    auto n = std::make_shared<detail::Node>();
    n->shape = shape;
    n->data = std::move(data);
    return Tensor(std::move(n));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

Tensor Tensor::randn(const Shape& shape, Rng& rng, double stddev) {
    Tensor t = zeros(shape);
    for (auto& v : t.node_->data) v = rng.normal() * stddev;
    return t;
}

double Tensor::value() const {
    if (size() != 1) throw ShapeError("value() on non-scalar " + shape_str(shape()));
    return node_->data[0];
}

const std::vector<double>& Tensor::grad() const {
    return node_->grad_buf();
}

void Tensor::zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

void Tensor::backward() const {
    if (size() != 1) throw ShapeError("backward() requires a scalar loss");
    // Iterative DFS topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    struct Frame {
        detail::Node* n;
        std::size_t next_parent;
    };
    std::vector<Frame> stack;
    stack.push_back({node_.get(), 0});
    visited.insert(node_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next_parent < f.n->parents.size()) {
            detail::Node* p = f.n->parents[f.next_parent++].get();
            if (visited.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.n);
            stack.pop_back();
        }
    }
    node_->grad_buf()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward_fn) (*it)->backward_fn();
    }
}

}  // namespace stgn
