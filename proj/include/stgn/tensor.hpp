#pragma once

// Reverse-mode autodiff over dense row-major double tensors. Each operation
// records its parents and a backward closure on the produced node; backward()
// runs a reverse topological sweep from a scalar. Recording is skipped when
// no input requires grad or when a NoGradGuard is active.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "stgn/error.hpp"
#include "stgn/rng.hpp"

namespace stgn {

using Shape = std::vector<int>;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // allocated lazily, same length as data
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void()> backward_fn;

    std::size_t size() const { return data.size(); }
    std::vector<double>& grad_buf() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
        return grad;
    }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

bool grad_enabled();

// Disables tape recording in scope; used for sampling and evaluation.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(const Shape& shape, bool requires_grad = false);
    static Tensor full(const Shape& shape, double value);
    static Tensor from(const Shape& shape, std::vector<double> data);
    static Tensor scalar(double value);
    static Tensor randn(const Shape& shape, Rng& rng, double stddev = 1.0);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    int dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }

    std::span<const double> data() const { return node_->data; }
    // Mutable view; only meaningful for leaves (params, buffers).
    std::vector<double>& raw() { return node_->data; }

    double value() const;  // scalar tensors only

    bool requires_grad() const { return node_->requires_grad; }
    void set_requires_grad(bool v) { node_->requires_grad = v; }
    const std::vector<double>& grad() const;
    void zero_grad();

    // Backward from a scalar; populates grad on every requires_grad leaf.
    void backward() const;

    detail::NodePtr node() const { return node_; }
    explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

private:
    detail::NodePtr node_;
};

}  // namespace stgn
