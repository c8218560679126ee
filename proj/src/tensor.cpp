#include "kge/tensor.hpp"

#include "kge/errors.hpp"

#include <algorithm>
#include <atomic>
#include <numeric>

namespace kge {

namespace {

thread_local Tape* current_tape = nullptr;
thread_local bool grad_mode = true;
std::atomic<std::uint64_t> next_mark{1};

Tape& thread_default_tape() {
    thread_local Tape tape;
    return tape;
}

} // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out += ", ";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0f, requires_grad);
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
    auto impl = std::make_shared<TensorImpl>();
    impl->data.assign(shape_numel(shape), value);
    impl->shape = std::move(shape);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::from(Shape shape, std::vector<float> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("Tensor::from: shape " + shape_string(shape) + " does not hold " +
                         std::to_string(values.size()) + " values");
    }
    auto impl = std::make_shared<TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(values);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) {
    return from(Shape{1}, {value}, requires_grad);
}

std::size_t Tensor::rows() const {
    const auto& s = impl_->shape;
    if (s.size() <= 1) return 1;
    return s[0];
}

std::size_t Tensor::cols() const {
    const auto& s = impl_->shape;
    if (s.empty()) return 1;
    if (s.size() == 1) return s[0];
    return numel() / s[0];
}

float Tensor::item() const {
    if (numel() != 1) {
        throw ContractError("Tensor::item on tensor of shape " + shape_string(shape()));
    }
    return impl_->data[0];
}

std::span<float> Tensor::grad_buffer() const {
    if (impl_->grad.size() != impl_->data.size()) impl_->grad.assign(impl_->data.size(), 0.0f);
    return impl_->grad;
}

void Tensor::zero_grad() {
    std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

Tensor Tensor::detach() const {
    return from(shape(), impl_->data, false);
}

Tensor Tensor::clone() const {
    return from(shape(), impl_->data, impl_->requires_grad);
}

FreezeGuard::FreezeGuard(const ParameterList& params) {
    for (const auto& p : params) {
        tensors_.push_back(p.tensor);
        previous_.push_back(p.tensor.requires_grad());
        tensors_.back().set_requires_grad(false);
    }
}

FreezeGuard::~FreezeGuard() {
    for (std::size_t i = 0; i < tensors_.size(); ++i) tensors_[i].set_requires_grad(previous_[i]);
}

Tape::~Tape() { clear(); }

void Tape::record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
                  std::function<void()> backward_fn) {
    output.impl()->requires_grad = true;
    output.impl()->tape = this;
    output.impl()->tape_index = static_cast<std::ptrdiff_t>(entries_.size());
    entries_.push_back(Entry{op, std::move(inputs), output, std::move(backward_fn)});
}

void Tape::clear() {
    for (auto& e : entries_) {
        e.output.impl()->tape = nullptr;
        e.output.impl()->tape_index = -1;
    }
    entries_.clear();
}

Tape& Tape::active() {
    return current_tape != nullptr ? *current_tape : thread_default_tape();
}

TapeScope::TapeScope(Tape& tape) : previous_(current_tape) { current_tape = &tape; }
TapeScope::~TapeScope() { current_tape = previous_; }

NoGradScope::NoGradScope() : previous_(grad_mode) { grad_mode = false; }
NoGradScope::~NoGradScope() { grad_mode = previous_; }

bool grad_enabled() { return grad_mode; }

void backward(const Tensor& root) {
    if (!root.defined() || root.numel() != 1) {
        throw ContractError("backward: root must be a scalar, got shape " +
                            (root.defined() ? shape_string(root.shape()) : std::string("<undefined>")));
    }
    if (!root.requires_grad()) return;

    TensorImpl* root_impl = root.impl();
    if (root_impl->tape_index < 0) {
        Tensor leaf = root;
        leaf.grad_buffer()[0] += 1.0f;
        return;
    }

    Tape& tape = *const_cast<Tape*>(root_impl->tape);
    auto& entries = tape.entries_;
    const auto last = static_cast<std::size_t>(root_impl->tape_index);

    const std::uint64_t mark = next_mark.fetch_add(1);
    root_impl->visit_mark = mark;
    std::vector<std::size_t> needed;
    for (std::size_t i = last + 1; i-- > 0;) {
        auto& entry = entries[i];
        if (entry.output.impl()->visit_mark != mark) continue;
        needed.push_back(i);
        for (auto& in : entry.inputs) {
            if (in.requires_grad()) in.impl()->visit_mark = mark;
        }
    }

    // Intermediate gradients are scratch space for this sweep.
    for (std::size_t i : needed) {
        auto* out = entries[i].output.impl();
        out->grad.assign(out->data.size(), 0.0f);
    }
    root_impl->grad[0] = 1.0f;

    for (std::size_t i : needed) entries[i].backward();
}

} // namespace kge
