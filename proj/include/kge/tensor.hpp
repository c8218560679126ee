#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kge {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

class Tape;

struct TensorImpl {
    Shape shape;
    std::vector<float> data;
    std::vector<float> grad; // empty until the first accumulation
    bool requires_grad = false;
    // Position of the producing entry on `tape`; -1 for leaves.
    std::ptrdiff_t tape_index = -1;
    const Tape* tape = nullptr;
    std::uint64_t visit_mark = 0;
};

/// Shared handle to a dense row-major float32 array. Copying a Tensor copies
/// the handle, not the data; use clone() or detach() for a deep copy.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, float value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<float> values, bool requires_grad = false);
    static Tensor scalar(float value, bool requires_grad = false);

    bool defined() const { return impl_ != nullptr; }
    const Shape& shape() const { return impl_->shape; }
    std::size_t dim() const { return impl_->shape.size(); }
    std::size_t numel() const { return impl_->data.size(); }
    /// Leading dimension (1 for scalars).
    std::size_t rows() const;
    /// Product of trailing dimensions (numel for 1-D tensors treated as a row).
    std::size_t cols() const;

    std::span<float> data() { return impl_->data; }
    std::span<const float> data() const { return impl_->data; }
    float item() const;
    float at(std::size_t row, std::size_t col) const { return impl_->data[row * cols() + col]; }

    bool requires_grad() const { return impl_->requires_grad; }
    void set_requires_grad(bool on) { impl_->requires_grad = on; }
    bool is_leaf() const { return impl_->tape_index < 0; }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::span<const float> grad() const { return impl_->grad; }
    /// Mutable gradient buffer, allocated (zero-filled) on first access.
    std::span<float> grad_buffer() const;
    void zero_grad();

    /// Deep copy of the values with no gradient history.
    Tensor detach() const;
    /// Deep copy preserving requires_grad (leaf).
    Tensor clone() const;

    TensorImpl* impl() const { return impl_.get(); }
    bool same_as(const Tensor& other) const { return impl_ == other.impl_; }

private:
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}
    std::shared_ptr<TensorImpl> impl_;
};

struct NamedTensor {
    std::string name;
    Tensor tensor;
};

using ParameterList = std::vector<NamedTensor>;

/// Turns off requires_grad on a parameter set for the guard's lifetime, so the
/// set is read as constants and never accumulates gradient.
class FreezeGuard {
public:
    explicit FreezeGuard(const ParameterList& params);
    ~FreezeGuard();
    FreezeGuard(const FreezeGuard&) = delete;
    FreezeGuard& operator=(const FreezeGuard&) = delete;

private:
    std::vector<Tensor> tensors_;
    std::vector<bool> previous_;
};

/// Ordered record of executed differentiable ops. Entries are appended in
/// execution order, so inputs of an entry are always leaves or outputs of
/// earlier entries.
class Tape {
public:
    struct Entry {
        std::string_view op;
        std::vector<Tensor> inputs;
        Tensor output;
        // Reads output.grad() and accumulates into inputs that require grad.
        std::function<void()> backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;
    ~Tape();

    void record(std::string_view op, std::vector<Tensor> inputs, Tensor& output,
                std::function<void()> backward);
    const std::vector<Entry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    void clear();

    /// Tape that new ops are recorded on for the calling thread.
    static Tape& active();

private:
    friend void backward(const Tensor& root);
    std::vector<Entry> entries_;
};

/// Makes `tape` the active tape of this thread for the scope's lifetime.
class TapeScope {
public:
    explicit TapeScope(Tape& tape);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* previous_;
};

/// Disables recording on this thread: ops return constants.
class NoGradScope {
public:
    NoGradScope();
    ~NoGradScope();
    NoGradScope(const NoGradScope&) = delete;
    NoGradScope& operator=(const NoGradScope&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

/// Reverse-mode sweep from a scalar root. Leaf gradients are accumulated
/// (added); gradients of intermediate outputs are recomputed on every call.
void backward(const Tensor& root);

} // namespace kge
