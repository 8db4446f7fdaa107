#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace texpro::tc {

// Numeric storage type for all tensor data and gradients. Double keeps
// finite-difference checks at h=1e-4 well conditioned.
using real = double;

class Tape;

struct TensorImpl {
    std::vector<int> shape;
    std::vector<real> data;
    std::vector<real> grad;  // empty until first accumulation
    bool requires_grad = false;
    Tape* tape = nullptr;

    int64_t numel() const {
        int64_t n = 1;
        for (int e : shape) n *= e;
        return n;
    }
    void ensure_grad() {
        if (grad.empty()) grad.assign(data.size(), 0.0);
    }
};

// Value-semantic handle over shared storage. Tensors without grad tracking
// are immutable by convention once built; grad-enabled leaves are attached
// to a Tape and updated between iterations via set_data.
class Tensor {
  public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<TensorImpl> impl) : impl_(std::move(impl)) {}

    static Tensor constant(std::vector<int> shape, std::vector<real> data);
    static Tensor full(std::vector<int> shape, real value);
    static Tensor scalar(real value) { return full({1}, value); }
    static Tensor leaf(std::vector<int> shape, std::vector<real> data, Tape& tape);

    bool defined() const { return impl_ != nullptr; }
    const std::vector<int>& shape() const { return impl_->shape; }
    int64_t numel() const { return impl_->numel(); }
    std::vector<real>& data() { return impl_->data; }
    const std::vector<real>& data() const { return impl_->data; }
    real item() const;
    bool requires_grad() const { return impl_ && impl_->requires_grad; }
    Tape* tape() const { return impl_ ? impl_->tape : nullptr; }

    std::vector<real>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    real grad_at(int64_t i) const {
        return impl_->grad.empty() ? 0.0 : impl_->grad[static_cast<size_t>(i)];
    }

    void set_data(const std::vector<real>& values);

    const std::shared_ptr<TensorImpl>& impl() const { return impl_; }

  private:
    std::shared_ptr<TensorImpl> impl_;
};

struct TapeNode {
    const char* op = "";
    std::vector<std::shared_ptr<TensorImpl>> in;
    std::shared_ptr<TensorImpl> out;
    std::function<void(const TapeNode&)> fwd;  // recompute out->data from in
    std::function<void(const TapeNode&)> bwd;  // scatter out->grad into in grads
};

// Ordered record of primitive operations. Single-writer; distinct tapes may
// be used on distinct threads.
class Tape {
  public:
    void push(TapeNode node) { nodes_.push_back(std::move(node)); }

    // d(root)/d(leaf) for every grad-enabled leaf reachable from root.
    // Grads accumulate additively across uses and across calls.
    void backward(const Tensor& root);

    // Re-runs every recorded forward in order. Bit-identical outputs for
    // identical leaf inputs.
    void replay();

    void zero_grad();

    size_t size() const { return nodes_.size(); }

  private:
    std::vector<TapeNode> nodes_;
};

std::string shape_str(const std::vector<int>& shape);

}  // namespace texpro::tc
